"""Exact rational plane geometry for the tiling pipeline.

Everything is computed over Fractions; radii appear only squared, so tests
against irrational radii stay exact.  Quantities of the form a + b*sqrt(c)
(arising from segment/disk intersections) are compared by sign analysis
with explicit squaring, never by floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

Vec = tuple[Fraction, ...]


def vec(*coords) -> Vec:
    return tuple(Fraction(c) for c in coords)


def vadd(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


def vsub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


def dot(a: Vec, b: Vec) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def norm2(a: Vec) -> Fraction:
    return dot(a, a)


def cross2(a: Vec, b: Vec) -> Fraction:
    return a[0] * b[1] - a[1] * b[0]


def ceil_sqrt(q: Fraction) -> int:
    """The smallest integer n with n*n >= q (q >= 0)."""
    if q <= 0:
        return 0
    n = int(float(q) ** 0.5)  # float only seeds the search
    while Fraction(n * n) < q:
        n += 1
    while n > 0 and Fraction((n - 1) * (n - 1)) >= q:
        n -= 1
    return n


# ---------------------------------------------------------------------------
# Exact numbers of the form a + b*sqrt(c)


@dataclass(frozen=True)
class Quad:
    """a + b*sqrt(c) with rational a, b and rational c >= 0."""

    a: Fraction
    b: Fraction
    c: Fraction

    @staticmethod
    def of(x) -> "Quad":
        return Quad(Fraction(x), Fraction(0), Fraction(0))

    def sign(self) -> int:
        a, b, c = self.a, self.b, self.c
        if b == 0 or c == 0:
            return (a > 0) - (a < 0)
        # sign of a + b*sqrt(c), sqrt(c) > 0
        if a == 0:
            return (b > 0) - (b < 0)
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 vs b^2 c, the larger magnitude wins
        lhs, rhs = a * a, b * b * c
        if lhs == rhs:
            return 0
        if lhs > rhs:
            return 1 if a > 0 else -1
        return 1 if b > 0 else -1


def quad_cmp(x: Quad, y: Quad) -> int:
    """Exact comparison of two surd expressions (c fields may differ)."""
    # sign of (x.a - y.a) + x.b sqrt(x.c) - y.b sqrt(y.c)
    s = x.a - y.a
    u_b, u_c = x.b, x.c
    v_b, v_c = y.b, y.c
    # First the sign of L = u - v where u = u_b sqrt(u_c), v = v_b sqrt(v_c)
    sign_u = 0 if u_b == 0 or u_c == 0 else ((u_b > 0) - (u_b < 0))
    sign_v = 0 if v_b == 0 or v_c == 0 else ((v_b > 0) - (v_b < 0))
    if sign_u == 0 and sign_v == 0:
        return (s > 0) - (s < 0)
    # L sign
    if sign_u != sign_v:
        sign_l = sign_u if sign_u != 0 else -sign_v
    else:
        mu, mv = u_b * u_b * u_c, v_b * v_b * v_c
        if mu == mv:
            sign_l = 0
        elif mu > mv:
            sign_l = sign_u
        else:
            sign_l = -sign_v
    sign_r = (s < 0) - (s > 0)  # R = -s
    if sign_l != sign_r:
        return sign_l - sign_r if False else (1 if sign_l > sign_r else -1)
    if sign_l == 0:
        return 0
    # same nonzero sign: compare L^2 vs R^2 = s^2
    # L^2 = u^2 + v^2 - 2 u v = (mu + mv) - 2 u_b v_b sqrt(u_c v_c)
    mu, mv = u_b * u_b * u_c, v_b * v_b * v_c
    p = mu + mv - s * s
    q = 2 * u_b * v_b
    # sign of P - Q sqrt(u_c v_c)
    diff = Quad(p, -q, u_c * v_c).sign()
    # both L and R share sign sigma; |L| > |R| iff diff > 0
    return diff if sign_l > 0 else -diff


def quad_max(x: Quad, y: Quad) -> Quad:
    return x if quad_cmp(x, y) >= 0 else y


def quad_min(x: Quad, y: Quad) -> Quad:
    return x if quad_cmp(x, y) <= 0 else y


def segment_ball_interval(
    a: Vec, b: Vec, center: Vec, r2: Fraction
) -> Optional[tuple[Quad, Quad]]:
    """The parameter interval of {t in [0,1]: |a + t(b-a) - center|^2 <= r2},
    clipped to [0,1]; None when empty."""
    d = vsub(b, a)
    f = vsub(a, center)
    qa = norm2(d)
    if qa == 0:
        return (Quad.of(0), Quad.of(1)) if norm2(f) <= r2 else None
    qb = dot(d, f)
    qc = norm2(f) - r2
    disc = qb * qb - qa * qc
    if disc < 0:
        return None
    lo = Quad(-qb / qa, Fraction(-1, 1) / qa, disc)
    hi = Quad(-qb / qa, Fraction(1, 1) / qa, disc)
    lo = quad_max(lo, Quad.of(0))
    hi = quad_min(hi, Quad.of(1))
    if quad_cmp(lo, hi) > 0:
        return None
    return (lo, hi)


def segment_min_dist2(a: Vec, b: Vec, p: Vec) -> Fraction:
    """Exact squared distance from a point to a closed segment."""
    d = vsub(b, a)
    dd = norm2(d)
    if dd == 0:
        return norm2(vsub(p, a))
    t = dot(vsub(p, a), d) / dd
    if t <= 0:
        return norm2(vsub(p, a))
    if t >= 1:
        return norm2(vsub(p, b))
    foot = vadd(a, tuple(t * x for x in d))
    return norm2(vsub(p, foot))


# ---------------------------------------------------------------------------
# Segments


def _orient(a: Vec, b: Vec, c: Vec) -> int:
    v = cross2(vsub(b, a), vsub(c, a))
    return (v > 0) - (v < 0)


def _between(a: Vec, b: Vec, c: Vec) -> bool:
    """c on the closed segment ab (assumes collinear)."""
    return (
        min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
    )


def segments_properly_cross(p1: Vec, p2: Vec, q1: Vec, q2: Vec) -> bool:
    """Transversal crossing at interior points of both segments."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def segments_touch(p1: Vec, p2: Vec, q1: Vec, q2: Vec) -> bool:
    """Any intersection of the closed segments."""
    if segments_properly_cross(p1, p2, q1, q2):
        return True
    for a, b, c in ((p1, p2, q1), (p1, p2, q2), (q1, q2, p1), (q1, q2, p2)):
        if _orient(a, b, c) == 0 and _between(a, b, c):
            return True
    return False


# ---------------------------------------------------------------------------
# Integer fast paths (scaled exact arithmetic for the hot predicates)


def _lcm(a: int, b: int) -> int:
    import math

    return a * b // math.gcd(a, b)


def _iorient(a, b, c) -> int:
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (v > 0) - (v < 0)


def _ibetween(a, b, c) -> bool:
    return (
        min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
    )


def _isegments_properly_cross(p1, p2, q1, q2) -> bool:
    d1 = _iorient(q1, q2, p1)
    d2 = _iorient(q1, q2, p2)
    if d1 * d2 >= 0:
        return False
    d3 = _iorient(p1, p2, q1)
    d4 = _iorient(p1, p2, q2)
    return d3 * d4 < 0


def _ilocate(verts, p) -> str:
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        if _iorient(a, b, p) == 0 and _ibetween(a, b, p):
            return "on"
    crossings = 0
    x, y = p
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ay, by = a[1], b[1]
        if (ay > y) != (by > y):
            # cx > x without division: sign-aware cross multiplication
            dy = by - ay
            lhs = (y - ay) * (b[0] - a[0])
            rhs = (x - a[0]) * dy
            if (lhs > rhs) if dy > 0 else (lhs < rhs):
                crossings += 1
    return "in" if crossings % 2 == 1 else "out"


class Polygon:
    def __init__(self, vertices: Sequence[Vec]):
        vs = [tuple(Fraction(c) for c in v) for v in vertices]
        if len(vs) < 3:
            raise ValueError("polygon needs at least three vertices")
        if len(set(vs)) != len(vs):
            raise ValueError("repeated polygon vertex")
        area2 = sum(cross2(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs)))
        if area2 == 0:
            raise ValueError("degenerate polygon")
        if area2 < 0:
            vs.reverse()
        self.vertices: tuple[Vec, ...] = tuple(vs)
        self._check_simple()

    def _check_simple(self):
        n = len(self.vertices)
        for i in range(n):
            a1, a2 = self.vertices[i], self.vertices[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                b1, b2 = self.vertices[j], self.vertices[(j + 1) % n]
                if segments_touch(a1, a2, b1, b2):
                    raise ValueError("polygon is not simple")

    @property
    def edges(self) -> list[tuple[Vec, Vec]]:
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    def translate(self, v: Vec) -> "Polygon":
        poly = object.__new__(Polygon)
        poly.vertices = tuple(vadd(p, v) for p in self.vertices)
        return poly

    def int_form(self) -> tuple[int, list[tuple[int, int]]]:
        """Vertices scaled to integers by the common denominator (cached)."""
        if not hasattr(self, "_int_form"):
            scale = 1
            for v in self.vertices:
                scale = _lcm(scale, _lcm(v[0].denominator, v[1].denominator))
            verts = [(int(v[0] * scale), int(v[1] * scale)) for v in self.vertices]
            self._int_form = (scale, verts)
        return self._int_form

    def locate(self, p: Vec) -> str:
        """'in' / 'on' / 'out' by exact crossing count (integer fast path)."""
        scale, verts = self.int_form()
        px, py = Fraction(p[0]) * scale, Fraction(p[1]) * scale
        extra = _lcm(px.denominator, py.denominator)
        if extra != 1:
            verts = [(x * extra, y * extra) for x, y in verts]
            px, py = px * extra, py * extra
        return _ilocate(verts, (int(px), int(py)))

    def contains(self, p: Vec) -> bool:
        return self.locate(p) != "out"

    def strictly_contains(self, p: Vec) -> bool:
        return self.locate(p) == "in"

    def max_vertex_norm2(self) -> Fraction:
        return max(norm2(v) for v in self.vertices)

    def canonical(self) -> tuple[Vec, ...]:
        """Translation-invariant form: vertices relative to the lexicographic
        minimum, cycled to start at it."""
        base = min(self.vertices)
        rel = [vsub(v, base) for v in self.vertices]
        k = rel.index(min(rel))
        return tuple(rel[k:] + rel[:k])

    def dist2_to_point(self, p: Vec) -> Fraction:
        if self.contains(p):
            return Fraction(0)
        return min(segment_min_dist2(a, b, p) for a, b in self.edges)

    def intersects_ball(self, center: Vec, r2: Fraction) -> bool:
        return self.dist2_to_point(center) <= r2

    def __repr__(self):
        return f"Polygon({len(self.vertices)} vertices)"


def polygons_interiors_intersect(p: Polygon, q: Polygon) -> bool:
    """Exact overlap test for simple polygons.

    Detects identical boundaries, transversal edge crossings, and strict
    containment of vertices or edge midpoints.  Complete for tile sets whose
    contacts are edge-to-edge or vertex-on-edge (all tilings here).
    Runs on common-denominator integer coordinates.
    """
    if set(p.vertices) == set(q.vertices):
        return True
    ps, pv = p.int_form()
    qs, qv = q.int_form()
    scale = _lcm(ps, qs)
    fp, fq = scale // ps, scale // qs
    # doubled coordinates keep midpoints integral
    pv = [(2 * x * fp, 2 * y * fp) for x, y in pv]
    qv = [(2 * x * fq, 2 * y * fq) for x, y in qv]
    np_, nq = len(pv), len(qv)

    def bbox(verts):
        xs = [v[0] for v in verts]
        ys = [v[1] for v in verts]
        return min(xs), min(ys), max(xs), max(ys)

    bp, bq = bbox(pv), bbox(qv)
    if bp[2] <= bq[0] or bq[2] <= bp[0] or bp[3] <= bq[1] or bq[3] <= bp[1]:
        return False
    p_edges = [(pv[i], pv[(i + 1) % np_]) for i in range(np_)]
    q_edges = [(qv[i], qv[(i + 1) % nq]) for i in range(nq)]
    for a1, a2 in p_edges:
        lo_x, hi_x = min(a1[0], a2[0]), max(a1[0], a2[0])
        lo_y, hi_y = min(a1[1], a2[1]), max(a1[1], a2[1])
        for b1, b2 in q_edges:
            if max(b1[0], b2[0]) < lo_x or min(b1[0], b2[0]) > hi_x:
                continue
            if max(b1[1], b2[1]) < lo_y or min(b1[1], b2[1]) > hi_y:
                continue
            if _isegments_properly_cross(a1, a2, b1, b2):
                return True
    for v in pv:
        if _ilocate(qv, v) == "in":
            return True
    for v in qv:
        if _ilocate(pv, v) == "in":
            return True
    for a, b in p_edges:
        mid = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
        if _ilocate(qv, mid) == "in":
            return True
    for a, b in q_edges:
        mid = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
        if _ilocate(pv, mid) == "in":
            return True
    return False


def polygon_intersects_lens(
    poly: Polygon, c1: Vec, c2: Vec, r2: Fraction
) -> bool:
    """Does the polygon meet the intersection of two closed balls?

    Checks vertices, edge parameter intervals (exact surd comparison), and
    lens containment via the midpoint of the centers (which lies in the lens
    whenever the lens is nonempty).
    """
    if norm2(vsub(c1, c2)) > 4 * r2:
        return False
    for v in poly.vertices:
        if norm2(vsub(v, c1)) <= r2 and norm2(vsub(v, c2)) <= r2:
            return True
    for a, b in poly.edges:
        i1 = segment_ball_interval(a, b, c1, r2)
        if i1 is None:
            continue
        i2 = segment_ball_interval(a, b, c2, r2)
        if i2 is None:
            continue
        lo = quad_max(i1[0], i2[0])
        hi = quad_min(i1[1], i2[1])
        if quad_cmp(lo, hi) <= 0:
            return True
    mid = tuple((x + y) / 2 for x, y in zip(c1, c2))
    return poly.contains(mid)


# ---------------------------------------------------------------------------
# Free-boundary analysis of placed tiles


def _line_key(a: Vec, b: Vec):
    # normalized (A, B, C) with Ax + By = C, first nonzero positive
    ax, ay = a
    bx, by = b
    A, B = by - ay, ax - bx
    C = A * ax + B * ay
    for lead in (A, B):
        if lead != 0:
            A, B, C = A / lead, B / lead, C / lead
            break
    return (A, B, C)


def free_boundary_fragments(tiles: Sequence[Polygon]) -> list[tuple[Vec, Vec]]:
    """Edge fragments of the union's boundary (uncovered side present).

    Each tile edge is subdivided at every vertex of any tile lying on it;
    a fragment is free when its midpoint belongs to exactly one tile.
    """
    all_vertices = [v for t in tiles for v in t.vertices]
    fragments = []
    for idx, tile in enumerate(tiles):
        for a, b in tile.edges:
            cuts = {Fraction(0), Fraction(1)}
            d = vsub(b, a)
            dd = norm2(d)
            for v in all_vertices:
                if _orient(a, b, v) == 0 and _between(a, b, v):
                    cuts.add(dot(vsub(v, a), d) / dd)
            params = sorted(cuts)
            for t0, t1 in zip(params, params[1:]):
                mid_t = (t0 + t1) / 2
                mid = vadd(a, tuple(mid_t * x for x in d))
                owners = sum(1 for t in tiles if t.contains(mid))
                if owners == 1:
                    p0 = vadd(a, tuple(t0 * x for x in d))
                    p1 = vadd(a, tuple(t1 * x for x in d))
                    fragments.append((p0, p1))
    return fragments


def ball_covered(tiles: Sequence[Polygon], center: Vec, r2: Fraction) -> bool:
    """Exact test that the closed ball lies inside the union of tiles."""
    if not any(t.contains(center) for t in tiles):
        return False
    for p0, p1 in free_boundary_fragments(tiles):
        if segment_min_dist2(p0, p1, center) < r2:
            return False
    return True
