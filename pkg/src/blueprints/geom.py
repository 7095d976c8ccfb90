"""Exact geometric tilings and their blueprint correspondence.

Punctured tile sets (rational polygons with the origin interior) induce a
finitely presented blueprint whose states are the inflated-radius patches,
whose generators are bounded translations between overlapping patches, and
whose relations equate bounded word pairs of equal valuation.  The pair of
maps between punctured tilings and blueprint models, the two path lemmas,
and the translation between blueprint domino instances and colored
pretiling codings make the correspondence executable at finite truncations.

Every predicate in this module is exact: coordinates are rationals and all
radius comparisons are squared (the inflation radius itself is typically
irrational).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .core import (
    Blueprint,
    BlueprintError,
    Budget,
    BudgetExceeded,
    DEFAULT_BUDGET,
    EPSILON,
    PartialModel,
    RelationFamily,
    Word,
    model_graph,
)
from .exactgeo import (
    Polygon,
    Vec,
    ball_covered,
    ceil_sqrt,
    free_boundary_fragments,
    norm2,
    polygon_intersects_lens,
    polygons_interiors_intersect,
    segment_min_dist2,
    vadd,
    vec,
    vsub,
)
from .subshift import Pattern, PatternSet, Window


class GeometryError(ValueError):
    pass


# Tiles only ever translate, so pairwise overlap depends on the relative
# offset alone and point membership on the relative point; both memoize.
_OVERLAP_CACHE: dict = {}
_LOCATE_CACHE: dict = {}


def tiles_overlap(ts: PuncturedTileSet, p: "PlacedTile", q: "PlacedTile") -> bool:
    rel = vsub(q.position, p.position)
    if norm2(rel) > 4 * ts.rho2:
        return False
    key = (id(ts), p.index, q.index, rel)
    hit = _OVERLAP_CACHE.get(key)
    if hit is None:
        if rel == (0, 0) * 0 or all(c == 0 for c in rel):
            hit = True if p.index == q.index else polygons_interiors_intersect(
                ts.tiles[p.index], ts.tiles[q.index]
            )
        else:
            hit = polygons_interiors_intersect(
                ts.tiles[p.index], ts.tiles[q.index].translate(rel)
            )
        if len(_OVERLAP_CACHE) > 200000:
            _OVERLAP_CACHE.clear()
        _OVERLAP_CACHE[key] = hit
    return hit


def tile_locate(ts: PuncturedTileSet, placed: "PlacedTile", x: Vec) -> str:
    rel = vsub(x, placed.position)
    key = (id(ts), placed.index, rel)
    hit = _LOCATE_CACHE.get(key)
    if hit is None:
        hit = ts.tiles[placed.index].locate(rel)
        if len(_LOCATE_CACHE) > 500000:
            _LOCATE_CACHE.clear()
        _LOCATE_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# Punctured tile sets


class PuncturedTileSet:
    """Finitely many rational polygons, each with the origin strictly
    interior, pairwise distinct up to translation."""

    def __init__(self, tiles: Sequence[Polygon], name: str = ""):
        self.tiles = tuple(tiles)
        self.name = name
        if not self.tiles:
            raise GeometryError("empty tile set")
        origin = vec(0, 0)
        for i, t in enumerate(self.tiles):
            if t.locate(origin) != "in":
                raise GeometryError(f"tile {i} does not contain the origin strictly")
        seen = {}
        for i, t in enumerate(self.tiles):
            key = t.canonical()
            if key in seen:
                raise GeometryError(
                    f"tiles {seen[key]} and {i} coincide up to translation"
                )
            seen[key] = i
        self.rho2: Fraction = max(t.max_vertex_norm2() for t in self.tiles)

    def __len__(self):
        return len(self.tiles)

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(serialize_tileset(self).encode()).hexdigest()[:16]


def serialize_tileset(ts: PuncturedTileSet) -> str:
    out = []
    for i, t in enumerate(ts.tiles):
        out.append(f"[tile {i}]")
        for v in t.vertices:
            out.append(f"{v[0]} {v[1]}")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def parse_tileset(text: str, name: str = "") -> PuncturedTileSet:
    tiles: list[Polygon] = []
    current: Optional[list[Vec]] = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if re.fullmatch(r"\[tile[^\]]*\]", line):
            if current is not None:
                tiles.append(_polygon(current))
            current = []
            continue
        if current is None:
            raise GeometryError(f"vertex before first [tile] section: {line!r}")
        parts = line.split()
        if len(parts) != 2:
            raise GeometryError(f"bad vertex line: {line!r}")
        current.append(vec(Fraction(parts[0]), Fraction(parts[1])))
    if current is not None:
        tiles.append(_polygon(current))
    return PuncturedTileSet(tiles, name=name)


def _polygon(vertices: list[Vec]) -> Polygon:
    try:
        return Polygon(vertices)
    except ValueError as e:
        raise GeometryError(str(e)) from None


def keyed_square_tileset() -> PuncturedTileSet:
    """A unit square with bump/dent keys forcing the integer lattice tiling:
    bumps on the east and north edges, matching dents on the west and south."""
    h = Fraction(1, 2)
    e = Fraction(1, 8)
    square = Polygon(
        [
            (-h, -h),
            (-e, -h), (-e, -h + e), (e, -h + e), (e, -h),  # south dent
            (h, -h),
            (h, -e), (h + e, -e), (h + e, e), (h, e),  # east bump
            (h, h),
            (e, h), (e, h + e), (-e, h + e), (-e, h),  # north bump
            (-h, h),
            (-h, e), (-h + e, e), (-h + e, -e), (-h, -e),  # west dent
        ]
    )
    return PuncturedTileSet([square], name="keyed_square")


def two_keyed_squares_tileset() -> PuncturedTileSet:
    """Two keyed squares with letter-specific horizontal key widths and a
    shared vertical key: only like letters sit side by side (a wide bump
    into a narrow dent collides, a narrow bump into a wide dent leaves an
    untileable gap), while rows of either letter stack freely, so patch
    counts grow with the radius.
    """
    h = Fraction(1, 2)
    d = Fraction(1, 8)
    v = Fraction(1, 16)  # vertical key half-width, shared

    def keyed(side: Fraction) -> Polygon:
        return Polygon(
            [
                (-h, -h),
                (-v, -h), (-v, -h + d), (v, -h + d), (v, -h),  # south dent
                (h, -h),
                (h, -side), (h + d, -side), (h + d, side), (h, side),  # east bump
                (h, h),
                (v, h), (v, h + d), (-v, h + d), (-v, h),  # north bump
                (-h, h),
                (-h, side), (-h + d, side), (-h + d, -side), (-h, -side),  # west dent
            ]
        )

    tile_a = keyed(Fraction(1, 16))
    tile_b = keyed(Fraction(1, 8))
    return PuncturedTileSet([tile_a, tile_b], name="two_keyed_squares")


# ---------------------------------------------------------------------------
# Partial tilings


_POLYGON_CACHE: dict = {}


@dataclass(frozen=True)
class PlacedTile:
    index: int
    position: Vec

    def polygon(self, ts: PuncturedTileSet) -> Polygon:
        key = (id(ts), self.index, self.position)
        poly = _POLYGON_CACHE.get(key)
        if poly is None:
            poly = ts.tiles[self.index].translate(self.position)
            if len(_POLYGON_CACHE) > 100000:
                _POLYGON_CACHE.clear()
            _POLYGON_CACHE[key] = poly
        return poly


class PartialTiling:
    """A finite set of placed tiles with pairwise disjoint interiors,
    optionally colored."""

    def __init__(
        self,
        ts: PuncturedTileSet,
        placed: Iterable[PlacedTile],
        colors: Optional[dict[PlacedTile, str]] = None,
        validate: bool = True,
    ):
        self.ts = ts
        self.placed = tuple(sorted(set(placed), key=lambda p: (p.position, p.index)))
        self.colors = dict(colors or {})
        self._by_position = {p.position: p for p in self.placed}
        if validate:
            self._check_disjoint()

    def _check_disjoint(self):
        for i, p in enumerate(self.placed):
            for q in self.placed[i + 1 :]:
                if p.position == q.position or tiles_overlap(self.ts, p, q):
                    raise GeometryError(f"tiles overlap: {p} and {q}")

    def polygons(self) -> list[Polygon]:
        return [p.polygon(self.ts) for p in self.placed]

    def at_position(self, pos: Vec) -> Optional[PlacedTile]:
        return self._by_position.get(tuple(Fraction(c) for c in pos))

    def tile_containing(self, x: Vec) -> Optional[PlacedTile]:
        """The canonically first tile whose closed polygon contains x."""
        x = tuple(map(Fraction, x))
        hits = [
            p
            for p in self.placed
            if norm2(vsub(x, p.position)) <= self.ts.rho2
            and tile_locate(self.ts, p, x) != "out"
        ]
        return min(hits, key=lambda p: (p.position, p.index)) if hits else None

    def meeting_ball(self, center: Vec, r2: Fraction) -> list[PlacedTile]:
        return [
            p
            for p in self.placed
            if p.polygon(self.ts).intersects_ball(center, r2)
        ]

    def translate(self, v: Vec) -> "PartialTiling":
        mapping = {p: PlacedTile(p.index, vadd(p.position, v)) for p in self.placed}
        return PartialTiling(
            self.ts,
            mapping.values(),
            {mapping[p]: c for p, c in self.colors.items()},
            validate=False,
        )

    def covers_ball(self, center: Vec, r2: Fraction) -> bool:
        center = tuple(map(Fraction, center))
        reach = r2 + 9 * self.ts.rho2
        near = [
            p
            for p in self.placed
            if norm2(vsub(center, p.position)) <= reach + self.ts.rho2
        ]
        if not any(tile_locate(self.ts, p, center) != "out" for p in near):
            return False
        for p0, p1 in _free_fragments(self.ts, near):
            if segment_min_dist2(p0, p1, center) < r2:
                return False
        return True

    def __len__(self):
        return len(self.placed)


def lattice_tiling(ts: PuncturedTileSet, half_width: int, tile_index: int = 0) -> PartialTiling:
    """The square-lattice tiling block of a single-tile keyed set."""
    placed = [
        PlacedTile(tile_index, vec(i, j))
        for i in range(-half_width, half_width + 1)
        for j in range(-half_width, half_width + 1)
    ]
    return PartialTiling(ts, placed, validate=False)


# ---------------------------------------------------------------------------
# Patch enumeration (finite local complexity is a user assertion)


Patch = tuple[PlacedTile, ...]  # sorted, anchored: contains a tile at the origin


def _tile_fragments(
    ts: PuncturedTileSet, p: PlacedTile, neighbors: Sequence[PlacedTile]
) -> list[tuple[Vec, Vec]]:
    """Free fragments of one tile's boundary against its neighbors (tiles
    within interaction range; farther tiles cannot affect them)."""
    from .exactgeo import _between, _orient

    near_vertices = [v for q in neighbors for v in q.polygon(ts).vertices]
    fragments = []
    for a, b in p.polygon(ts).edges:
        lo_x, hi_x = min(a[0], b[0]), max(a[0], b[0])
        lo_y, hi_y = min(a[1], b[1]), max(a[1], b[1])
        cuts = {Fraction(0), Fraction(1)}
        d = vsub(b, a)
        dd = norm2(d)
        for v in near_vertices:
            if not (lo_x <= v[0] <= hi_x and lo_y <= v[1] <= hi_y):
                continue
            if _orient(a, b, v) == 0 and _between(a, b, v):
                cuts.add((sum((vi - ai) * di for vi, ai, di in zip(v, a, d))) / dd)
        params = sorted(cuts)
        for t0, t1 in zip(params, params[1:]):
            mid_t = (t0 + t1) / 2
            mid = vadd(a, tuple(mid_t * x for x in d))
            covered = False
            for q in neighbors:
                if q == p:
                    continue
                if norm2(vsub(mid, q.position)) <= ts.rho2 and tile_locate(
                    ts, q, mid
                ) != "out":
                    covered = True
                    break
            if not covered:
                p0 = vadd(a, tuple(t0 * x for x in d))
                p1 = vadd(a, tuple(t1 * x for x in d))
                fragments.append((p0, p1))
    return fragments


_FRAGMENT_CACHE: dict = {}


def _tile_fragments_cached(
    ts: PuncturedTileSet, p: PlacedTile, neighbors: Sequence[PlacedTile]
) -> list[tuple[Vec, Vec]]:
    """Fragments keyed by the translation-invariant local neighborhood."""
    rel = tuple(
        sorted((q.index, vsub(q.position, p.position)) for q in neighbors)
    )
    key = (id(ts), p.index, rel)
    frags = _FRAGMENT_CACHE.get(key)
    if frags is None:
        origin_tile = PlacedTile(p.index, vec(0, 0))
        rel_neighbors = [PlacedTile(i, off) for i, off in rel]
        frags = _tile_fragments(ts, origin_tile, rel_neighbors)
        if len(_FRAGMENT_CACHE) > 100000:
            _FRAGMENT_CACHE.clear()
        _FRAGMENT_CACHE[key] = frags
    return [
        (vadd(a, p.position), vadd(b, p.position)) for a, b in frags
    ]


def _free_fragments(
    ts: PuncturedTileSet, placed: Sequence[PlacedTile]
) -> list[tuple[Vec, Vec]]:
    """Free-boundary fragments of a placed-tile collection."""
    out = []
    for p in placed:
        neighbors = [
            q for q in placed if norm2(vsub(q.position, p.position)) <= 4 * ts.rho2
        ]
        out.extend(_tile_fragments_cached(ts, p, neighbors))
    return out


@dataclass(frozen=True)
class PatchBudget:
    max_patches: int = 64
    max_tiles: int = 200
    max_candidates: int = 20000
    # completability pruning: a candidate patch must extend to clear this
    # larger ball before being emitted (None disables the check)
    lookahead_r2: Optional[Fraction] = None
    lookahead_nodes: int = 4000


def enumerate_patches(
    ts: PuncturedTileSet, r2: Fraction, budget: PatchBudget = PatchBudget()
) -> list[Patch]:
    """All anchored patches: the tiles a tiling places around the origin,
    intersecting the closed ball of squared radius r2.

    Constraint search: place a punctured tile at the origin, then repeatedly
    pick the canonical free-boundary witness inside (or on) the ball and
    branch over vertex-anchored placements covering it; a patch is complete
    when the free boundary clears the closed ball.  Dead ends (witnesses
    with no placement) prune the branch.  Caps raise with their name: finite
    local complexity is asserted, not checked.
    """
    results: list[Patch] = []
    seen: set[Patch] = set()
    origin = vec(0, 0)
    frag_map: dict[PlacedTile, list[tuple[Vec, Vec]]] = {}

    def refresh(placed: list[PlacedTile], new: PlacedTile) -> list[tuple[PlacedTile, list]]:
        """Recompute fragments of the new tile and its interaction range;
        returns the undo records (tile, previous fragments or None)."""
        undo = []
        affected = [
            p
            for p in placed
            if norm2(vsub(p.position, new.position)) <= 4 * ts.rho2
        ]
        for p in affected:
            neighbors = [
                q for q in placed if norm2(vsub(q.position, p.position)) <= 4 * ts.rho2
            ]
            undo.append((p, frag_map.get(p)))
            frag_map[p] = _tile_fragments_cached(ts, p, neighbors)
        return undo

    def witness(placed: list[PlacedTile]) -> Optional[tuple[Vec, Vec]]:
        """The canonical free-boundary point needing coverage plus the
        outward normal of its fragment (fragments run along their owner's
        counterclockwise edges, so the uncovered side is to the right)."""
        frags = sorted(f for p in placed for f in frag_map[p])
        for p0, p1 in frags:
            d2 = segment_min_dist2(p0, p1, origin)
            if d2 <= r2:
                d = vsub(p1, p0)
                normal = (d[1], -d[0])
                mid = tuple((a + b) / 2 for a, b in zip(p0, p1))
                if d2 < r2:
                    return mid, normal
                # touching case: probe from the contact point, nudged toward
                # the fragment interior so corner probes stay off gridlines
                closest = _closest_point_on_segment(p0, p1, origin)
                return closest, vadd(normal, vsub(mid, closest))
        return None

    def candidates(placed: list[PlacedTile], target: Vec, normal: Vec) -> list[PlacedTile]:
        # the new tile must cover the uncovered side: a point displaced off
        # the fragment by a sliver of its outward normal must be interior
        probe = vadd(target, tuple(c / 1024 for c in normal))
        # only anchors within tile reach of the target can place a tile on it
        anchors = {
            v
            for p in placed
            for v in p.polygon(ts).vertices
            if norm2(vsub(v, target)) <= 4 * ts.rho2
        }
        anchors.add(target)
        placed_set = set(placed)
        placed_positions = {p.position for p in placed}
        out = []
        for idx, tile in enumerate(ts.tiles):
            positions = {vsub(anchor, tv) for anchor in anchors for tv in tile.vertices}
            for pos in positions:
                cand = PlacedTile(idx, pos)
                if cand in placed_set or pos in placed_positions:
                    continue
                if tile_locate(ts, cand, target) == "out":
                    continue
                if tile_locate(ts, cand, probe) != "in":
                    continue
                if any(tiles_overlap(ts, cand, p) for p in placed):
                    continue
                out.append(cand)
        out = sorted(set(out), key=lambda p: (p.position, p.index))
        if len(out) > budget.max_candidates:
            raise BudgetExceeded(f"max_candidates={budget.max_candidates} exceeded")
        return out

    def maximal_disjoint_groups(cands: list[PlacedTile]) -> list[list[PlacedTile]]:
        """Maximal mutually disjoint subsets of the witness candidates.

        Every completion realizes exactly one such subset at the witness (a
        further disjoint candidate would overlap the covered neighborhood),
        so branching over subsets avoids re-deriving the same patch once per
        placement order.
        """
        if not cands:
            return []
        conflict = {
            (i, j)
            for i in range(len(cands))
            for j in range(i + 1, len(cands))
            if cands[i].position == cands[j].position
            or tiles_overlap(ts, cands[i], cands[j])
        }
        groups: list[list[PlacedTile]] = []

        def grow(idx: int, chosen: list[int]):
            if idx == len(cands):
                # maximal: no unchosen candidate is disjoint from all chosen
                for k in range(len(cands)):
                    if k in chosen:
                        continue
                    if all((min(k, c), max(k, c)) not in conflict for c in chosen):
                        return
                groups.append([cands[k] for k in chosen])
                return
            if all((min(idx, c), max(idx, c)) not in conflict for c in chosen):
                chosen.append(idx)
                grow(idx + 1, chosen)
                chosen.pop()
                # skipping idx is only useful if something conflicts with it
                if any((min(idx, c), max(idx, c)) in conflict for c in range(len(cands)) if c != idx):
                    grow(idx + 1, chosen)
            else:
                grow(idx + 1, chosen)

        grow(0, [])
        unique = []
        seen_groups = set()
        for g in groups:
            key = tuple(sorted(((p.position, p.index) for p in g)))
            if key not in seen_groups:
                seen_groups.add(key)
                unique.append(g)
        return unique

    def completable(placed: list[PlacedTile], target_r2: Fraction, nodes: list[int]) -> bool:
        """Can the configuration extend to clear the lookahead ball?"""
        nodes[0] += 1
        if nodes[0] > budget.lookahead_nodes:
            raise BudgetExceeded(
                f"lookahead_nodes={budget.lookahead_nodes} exceeded (assert FLC?)"
            )
        frags = _free_fragments(ts, placed)
        wit = None
        for p0, p1 in sorted(frags):
            d2 = segment_min_dist2(p0, p1, origin)
            if d2 < target_r2:
                d = vsub(p1, p0)
                wit = (tuple((a + b) / 2 for a, b in zip(p0, p1)), (d[1], -d[0]))
                break
        if wit is None:
            return True
        for group in maximal_disjoint_groups(candidates(placed, *wit)):
            placed.extend(group)
            ok = completable(placed, target_r2, nodes)
            del placed[len(placed) - len(group):]
            if ok:
                return True
        return False

    def search(placed: list[PlacedTile]):
        if len(placed) > budget.max_tiles:
            raise BudgetExceeded(f"max_tiles={budget.max_tiles} exceeded (assert FLC?)")
        w = witness(placed)
        if w is None:
            if budget.lookahead_r2 is not None and not completable(
                list(placed), budget.lookahead_r2, [0]
            ):
                return
            patch = tuple(sorted(placed, key=lambda p: (p.position, p.index)))
            if patch not in seen:
                seen.add(patch)
                results.append(patch)
                if len(results) > budget.max_patches:
                    raise BudgetExceeded(
                        f"max_patches={budget.max_patches} exceeded (assert FLC?)"
                    )
            return
        for group in maximal_disjoint_groups(candidates(placed, *w)):
            placed.extend(group)
            undos = []
            for cand in group:
                undos.append(refresh(placed, cand))
            search(placed)
            del placed[len(placed) - len(group):]
            for undo in reversed(undos):
                for tile, previous in undo:
                    if previous is None:
                        frag_map.pop(tile, None)
                    else:
                        frag_map[tile] = previous

    for idx in range(len(ts.tiles)):
        frag_map.clear()
        seed = PlacedTile(idx, origin)
        frag_map[seed] = _tile_fragments_cached(ts, seed, [seed])
        search([seed])
    results.sort(key=lambda patch: [(p.position, p.index) for p in patch])
    return results


def _closest_point_on_segment(a: Vec, b: Vec, p: Vec) -> Vec:
    d = vsub(b, a)
    dd = norm2(d)
    if dd == 0:
        return a
    t = (sum((pi - ai) * di for pi, ai, di in zip(p, a, d))) / dd
    t = max(Fraction(0), min(Fraction(1), t))
    return vadd(a, tuple(t * x for x in d))


# ---------------------------------------------------------------------------
# The patch blueprint


class BoundedValuationRelations(RelationFamily):
    """All word pairs of bounded total length with equal initial state and
    equal valuation; membership is decidable without materializing the set."""

    def __init__(self, max_total_length: int):
        self.max_total_length = max_total_length

    def contains(self, b: Blueprint, u: Word, v: Word) -> bool:
        if len(u) + len(v) > self.max_total_length:
            return False
        if u and v and b.initial[u[0]] != b.initial[v[0]]:
            return False
        if not b.is_consistent_word(u) or not b.is_consistent_word(v):
            return False
        return b.word_valuation(u) == b.word_valuation(v)

    def enumerate(self, b: Blueprint, length_cap: Optional[int]) -> Iterator[tuple[Word, Word]]:
        cap = self.max_total_length if length_cap is None else min(length_cap, self.max_total_length)
        from .core import consistent_ball

        words = consistent_ball(b, cap)
        buckets: dict[tuple, list[Word]] = {}
        for w in sorted(words, key=b.word_key):
            key = (b.initial[w[0]] if w else None, b.word_valuation(w))
            buckets.setdefault(key, []).append(w)
        for (init, val), members in sorted(
            buckets.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1]))
        ):
            for i, u in enumerate(members):
                for v in members[i + 1 :]:
                    if len(u) + len(v) <= cap:
                        yield (u, v)
            # pairs with one empty side live in the val=0 bucket of each state
            if init is not None and val == b.word_valuation(EPSILON):
                for u in members:
                    if len(u) <= cap:
                        yield (u, EPSILON)

    def describe(self) -> str:
        return f"BoundedValuationRelations(L={self.max_total_length})"


def homeomorphism_guaranteed(k: int, length_bound: int) -> bool:
    """Whether the chosen parameters carry the full correspondence guarantee
    (the construction below is parametric and runs at any parameters)."""
    return k >= 117 and length_bound >= 2 * k + 14


@dataclass
class PatchBlueprint:
    """The blueprint of a punctured tile set plus the geometric data the
    correspondence maps need."""

    blueprint: Blueprint
    tileset: PuncturedTileSet
    k: int
    length_bound: int
    patches: tuple[Patch, ...]
    state_names: dict[Patch, str]
    gen_vectors: dict[str, Vec]
    guaranteed: bool

    def patch_of_state(self, state: str) -> Patch:
        return self._patch_by_name[state]

    def __post_init__(self):
        self._patch_by_name = {name: patch for patch, name in self.state_names.items()}

    def anchor_tile(self, state: str) -> PlacedTile:
        for t in self.patch_of_state(state):
            if t.position == vec(0, 0):
                return t
        raise GeometryError(f"state {state} has no tile at the origin")


def build_patch_blueprint(
    ts: PuncturedTileSet,
    k: int,
    length_bound: int,
    budget: PatchBudget = PatchBudget(),
    relation_sample_cap: int = 2,
) -> PatchBlueprint:
    """States are the anchored radius-k*rho patches, generators the bounded
    translations between overlapping patches, relations the equal-valuation
    word pairs of total length <= L (held as a decidable implicit family,
    with a short materialized sample for inspection)."""
    r2 = k * k * ts.rho2
    patches = tuple(enumerate_patches(ts, r2, budget))
    if not patches:
        raise GeometryError("no patches: the tile set admits no punctured tiling")
    state_names = {patch: f"m{i}" for i, patch in enumerate(patches)}
    patch_polys = {
        name: [t.polygon(ts) for t in patch] for patch, name in state_names.items()
    }

    # generator candidates: positions of patch tiles within squared norm 9 rho^2
    gens: list[tuple[str, str, Vec]] = []  # (name, state, vector)
    gen_vectors: dict[str, Vec] = {}
    initial: dict[str, str] = {}
    terminal: dict[str, list[str]] = {}
    valuation: dict[str, tuple[Fraction, ...]] = {}
    for patch, name in state_names.items():
        vecs = sorted(
            {
                t.position
                for t in patch
                if 0 < norm2(t.position) <= 9 * ts.rho2
            }
        )
        for v in vecs:
            gname = f"g{len(gens)}"
            targets = [
                name2
                for patch2, name2 in state_names.items()
                if _patches_match_in_lens(ts, patch, patch2, v, r2)
            ]
            if not targets:
                continue
            gens.append((gname, name, v))
            gen_vectors[gname] = v
            initial[gname] = name
            terminal[gname] = targets
            valuation[gname] = v

    blueprint = Blueprint(
        states=[state_names[p] for p in patches],
        generators=[g for g, _, _ in gens],
        initial=initial,
        terminal=terminal,
        relations=[],
        name=f"patch({ts.name},K={k},L={length_bound})",
        valuation=valuation,
        relation_family=BoundedValuationRelations(length_bound),
        metadata={
            "K": k,
            "L": length_bound,
            "relation_sample_cap": relation_sample_cap,
            "homeomorphism_guaranteed": homeomorphism_guaranteed(k, length_bound),
        },
    )
    return PatchBlueprint(
        blueprint=blueprint,
        tileset=ts,
        k=k,
        length_bound=length_bound,
        patches=patches,
        state_names=state_names,
        gen_vectors=gen_vectors,
        guaranteed=homeomorphism_guaranteed(k, length_bound),
    )


def _patches_match_in_lens(
    ts: PuncturedTileSet, patch: Patch, patch2: Patch, v: Vec, r2: Fraction
) -> bool:
    """Whether patch2 translated by v agrees with patch on the intersection
    of the two radius-sqrt(r2) balls (as sets of tiles meeting the lens)."""
    origin = vec(0, 0)
    left = {
        (t.index, t.position)
        for t in patch
        if polygon_intersects_lens(t.polygon(ts), origin, v, r2)
    }
    right = {
        (t.index, vadd(t.position, v))
        for t in patch2
        if polygon_intersects_lens(t.polygon(ts).translate(v), origin, v, r2)
    }
    return left == right


# ---------------------------------------------------------------------------
# The correspondence maps


def psi_forward(
    pb: PatchBlueprint,
    tiling: PartialTiling,
    depth: int,
    budget: Budget = DEFAULT_BUDGET,
) -> PartialModel:
    """Read the tiling into a partial model of the patch blueprint.

    The tiling must contain a tile at the origin and cover the ball of
    squared radius ((3*depth + K) rho)^2 so that every patch within reach is
    complete.
    """
    ts = pb.tileset
    r2 = pb.k * pb.k * ts.rho2
    reach = 3 * depth + pb.k
    if not tiling.covers_ball(vec(0, 0), reach * reach * ts.rho2):
        raise GeometryError(
            f"tiling support does not cover the ball of squared radius "
            f"({reach}^2)rho^2 needed for depth {depth}"
        )
    if tiling.at_position(vec(0, 0)) is None:
        raise GeometryError("tiling is not punctured (no tile at the origin)")

    patch_cache: dict[Vec, Optional[str]] = {}

    def patch_at(pos: Vec) -> Optional[str]:
        if pos in patch_cache:
            return patch_cache[pos]
        if tiling.at_position(pos) is None:
            patch_cache[pos] = None
            return None
        tiles = tiling.meeting_ball(pos, r2)
        patch = tuple(
            sorted(
                (PlacedTile(t.index, vsub(t.position, pos)) for t in tiles),
                key=lambda p: (p.position, p.index),
            )
        )
        name = pb.state_names.get(patch)
        if name is None:
            raise GeometryError(
                f"patch at {pos} not among the blueprint states (K too small "
                "or patch enumeration incomplete)"
            )
        patch_cache[pos] = name
        return name

    assignment: dict[Word, str] = {}
    val_of: dict[Word, Vec] = {EPSILON: vec(0, 0)}
    assignment[EPSILON] = patch_at(vec(0, 0))
    frontier = [EPSILON]
    for _ in range(depth):
        nxt = []
        for w in frontier:
            state = assignment[w]
            for gname in pb.blueprint.generators:
                if pb.blueprint.initial[gname] != state:
                    continue
                pos = vadd(val_of[w], pb.gen_vectors[gname])
                name = patch_at(pos)
                if name is None:
                    continue  # recursive case (b): no tile there
                ws = w + (gname,)
                assignment[ws] = name
                val_of[ws] = pos
                nxt.append(ws)
        frontier = nxt
    return PartialModel(pb.blueprint, depth, assignment, budget)


def psi_inverse(pb: PatchBlueprint, model: PartialModel) -> PartialTiling:
    """Place the anchor tile of each supported word's patch at its valuation.

    Well defined because equivalent words share valuations; exact pairwise
    disjointness is validated with the violating word pair reported.
    """
    b = pb.blueprint
    ts = pb.tileset
    tiles: dict[Vec, tuple[int, Word]] = {}
    placements: list[PlacedTile] = []
    for w in model.support:
        val = b.word_valuation(w)
        anchor = pb.anchor_tile(model.assignment[w])
        existing = tiles.get(val)
        if existing is not None:
            if existing[0] != anchor.index:
                raise GeometryError(
                    f"words {existing[1]} and {w} place different tiles at {val}"
                )
            continue
        tiles[val] = (anchor.index, w)
        placements.append(PlacedTile(anchor.index, val))
    for i, p in enumerate(placements):
        for q in placements[i + 1 :]:
            if tiles_overlap(ts, p, q):
                raise GeometryError(
                    f"overlap between tiles of words {tiles[p.position][1]} and "
                    f"{tiles[q.position][1]}: parameters too small for this set"
                )
    return PartialTiling(ts, placements, validate=False)


# ---------------------------------------------------------------------------
# Path lemmas


def interpolate_path(
    tiling: PartialTiling, x: Vec, y: Vec
) -> list[PlacedTile]:
    """A tile chain tracking the segment from x to y: n = ceil(|y-x|/rho)
    steps, positions within rho of the sample points and within 3*rho of
    each other (squared comparisons throughout)."""
    x, y = tuple(map(Fraction, x)), tuple(map(Fraction, y))
    if x == y:
        raise GeometryError("interpolation needs distinct endpoints")
    ts = tiling.ts
    n = ceil_sqrt(norm2(vsub(y, x)) / ts.rho2)
    steps: list[PlacedTile] = []
    for k2 in range(n + 1):
        point = vadd(x, tuple(Fraction(k2, n) * d for d in vsub(y, x)))
        tile = tiling.tile_containing(point)
        if tile is None:
            raise GeometryError(f"segment sample {point} outside the tiling support")
        if norm2(vsub(tile.position, point)) > ts.rho2:
            raise GeometryError("containing tile strays beyond rho (bad tile set?)")
        steps.append(tile)
    for a, b in zip(steps, steps[1:]):
        if norm2(vsub(a.position, b.position)) > 9 * ts.rho2:
            raise GeometryError("consecutive interpolation tiles too far apart")
    return steps


def _rational_below_sqrt(q: Fraction, precision: int = 64) -> Fraction:
    """A rational lower approximation of sqrt(q) within 2^-precision-ish."""
    if q <= 0:
        return Fraction(0)
    lo, hi = Fraction(0), q + 1
    for _ in range(precision):
        mid = (lo + hi) / 2
        if mid * mid <= q:
            lo = mid
        else:
            hi = mid
    return lo


def visibility_path(
    tiling: PartialTiling,
    t: PlacedTile,
    t2: PlacedTile,
    x: Vec,
    k: int,
) -> list[PlacedTile]:
    """A tile chain from t to t2 of length <= 2 + ceil(|pos-pos2|/rho) whose
    positions all keep x within the radius-k*rho ball, stepping at most
    3*rho at a time.

    x must lie in both k*rho balls; both 2*rho balls around the endpoints
    must be inside the tiled region.
    """
    ts = tiling.ts
    rho2 = ts.rho2
    x = tuple(map(Fraction, x))
    p, q = t.position, t2.position
    kr2 = k * k * rho2
    if norm2(vsub(x, p)) > kr2 or norm2(vsub(x, q)) > kr2:
        raise GeometryError("x must lie in both vantage balls")
    d2 = norm2(vsub(p, q))
    bound = 2 + ceil_sqrt(d2 / rho2)
    if d2 <= 9 * rho2:
        return [t, t2] if t != t2 else [t]

    def shrink(src: Vec, lam: Fraction) -> Vec:
        return vadd(src, tuple(lam * d for d in vsub(x, src)))

    def attempt(precision: int) -> Optional[list[PlacedTile]]:
        points = []
        for src in (p, q):
            d_x2 = norm2(vsub(x, src))
            if d_x2 <= rho2:
                points.append(x)
                continue
            lam = _rational_below_sqrt(rho2 / d_x2, precision)
            collinear = _collinear_ratio(p, q, x)
            if collinear is not None:
                # exact equal-distance choice exists in the collinear case
                lam_p = _rational_below_sqrt(rho2 / norm2(vsub(x, p)), precision)
                dist = lam_p  # distance ratio along (x - p)
                if src == p:
                    lam = lam_p
                else:
                    lam = lam_p * collinear
            points.append(shrink(src, lam))
        y, z = points
        mid_d2 = norm2(vsub(z, y))
        m = max(1, ceil_sqrt(mid_d2 / rho2))
        chain = [t]
        for k2 in range(m + 1):
            point = vadd(y, tuple(Fraction(k2, m) * d for d in vsub(z, y)))
            tile = tiling.tile_containing(point)
            if tile is None:
                raise GeometryError(f"sample {point} outside the tiling support")
            if chain[-1] != tile:
                chain.append(tile)
        if chain[-1] != t2:
            chain.append(t2)
        if len(chain) - 1 > bound:
            return None
        for a, b in zip(chain, chain[1:]):
            if norm2(vsub(a.position, b.position)) > 9 * rho2:
                return None
        for tile in chain:
            if norm2(vsub(x, tile.position)) > kr2:
                return None
        return chain

    for precision in (48, 96, 192):
        chain = attempt(precision)
        if chain is not None:
            return chain
    raise GeometryError("visibility construction failed at maximal precision")


def _collinear_ratio(p: Vec, q: Vec, x: Vec) -> Optional[Fraction]:
    """|x-q| / |x-p| as an exact rational when p, q, x are collinear."""
    dp, dq = vsub(x, p), vsub(x, q)
    if dp[0] * dq[1] != dp[1] * dq[0]:
        return None
    np2, nq2 = norm2(dp), norm2(dq)
    if np2 == 0:
        return None
    # collinear: the ratio of norms is rational iff nq2/np2 is a square of
    # a rational, which holds because dq = r * dp with rational r
    for a, b in zip(dp, dq):
        if a != 0:
            return abs(b / a)
    return None


# ---------------------------------------------------------------------------
# Pretiling codings


@dataclass(frozen=True)
class PretilingCoding:
    """A finite integer-indexed description of a colored partial tiling via
    the punctured position basis."""

    cells: tuple[tuple[tuple[int, ...], int, str], ...]  # (z, tile index, letter)

    def support(self) -> tuple[tuple[int, ...], ...]:
        return tuple(z for z, _, _ in self.cells)


class PositionBasis:
    """The generating translation vectors and the summation homomorphism."""

    def __init__(self, vectors: Sequence[Vec]):
        self.vectors = tuple(vectors)

    def eta(self, z: Sequence[int]) -> Vec:
        total = vec(*([0] * len(self.vectors[0])))
        for n, v in zip(z, self.vectors):
            total = vadd(total, tuple(n * c for c in v))
        return total

    def preimage(self, target: Vec, cap: int = 200000) -> tuple[int, ...]:
        """The shortest (then lexicographically smallest) integer vector
        summing to the target; breadth-first over the one-norm."""
        target = tuple(map(Fraction, target))
        zero = (0,) * len(self.vectors)
        if all(c == 0 for c in target):
            return zero
        frontier = {zero: vec(*([0] * len(target)))}
        seen = {zero}
        steps = 0
        while frontier:
            nxt = {}
            for z in sorted(frontier):
                pos = frontier[z]
                for i, v in enumerate(self.vectors):
                    for delta in (1, -1):
                        z2 = z[:i] + (z[i] + delta,) + z[i + 1 :]
                        if z2 in seen:
                            continue
                        pos2 = vadd(pos, tuple(delta * c for c in v))
                        if pos2 == target:
                            return z2
                        seen.add(z2)
                        nxt[z2] = pos2
                        steps += 1
                        if steps > cap:
                            raise BudgetExceeded(
                                "position-basis preimage search exceeded its cap: "
                                "the basis may not span the target"
                            )
            frontier = nxt
        raise GeometryError("position basis does not span the target")


def position_basis(pb: PatchBlueprint) -> PositionBasis:
    """Translation vectors realized between tiles of some patch, bounded by
    squared norm 9 rho^2."""
    ts = pb.tileset
    vectors = set()
    for patch in pb.patches:
        for t in patch:
            for t2 in patch:
                v = vsub(t2.position, t.position)
                if 0 < norm2(v) <= 9 * ts.rho2:
                    vectors.add(v)
    return PositionBasis(tuple(sorted(vectors)))


def encode_pretiling(
    ts: PuncturedTileSet, basis: PositionBasis, coding: PretilingCoding
) -> list[tuple[PlacedTile, str]]:
    return [
        (PlacedTile(idx, basis.eta(z)), letter) for z, idx, letter in coding.cells
    ]


def coding_consistent(
    ts: PuncturedTileSet, basis: PositionBasis, coding: PretilingCoding
) -> bool:
    """Whether the encoded colored tiles form a colored partial tiling."""
    placed = [p for p, _ in encode_pretiling(ts, basis, coding)]
    if len({p.position for p in placed}) != len(placed):
        return False
    try:
        PartialTiling(ts, placed)
    except GeometryError:
        return False
    return True


def translate_domino_to_pretilings(
    pb: PatchBlueprint,
    alphabet: Sequence[str],
    nn: PatternSet,
    basis: Optional[PositionBasis] = None,
) -> tuple[PositionBasis, list[PretilingCoding]]:
    """Turn nearest-neighbor forbidden patterns over the patch blueprint into
    the corresponding family of forbidden colored pretiling codings.

    For each pattern the support is the union of the two patches involved;
    the two pinned cells carry the pattern's letters and the rest range over
    the alphabet.
    """
    if not nn.nearest_neighbor:
        raise BlueprintError("translation needs nearest-neighbor patterns")
    ts = pb.tileset
    basis = basis or position_basis(pb)
    codings: list[PretilingCoding] = []
    for p in nn.patterns:
        cells = dict(p.cells)
        (s,) = [w for w in p.support if w != EPSILON][0]
        m_name, a = cells[EPSILON]
        m2_name, b_letter = cells[(s,)]
        v = pb.gen_vectors[s]
        placed: dict[Vec, int] = {}
        for t in pb.patch_of_state(m_name):
            placed[t.position] = t.index
        for t in pb.patch_of_state(m2_name):
            pos = vadd(t.position, v)
            if pos in placed and placed[pos] != t.index:
                raise GeometryError(
                    "pattern pins incompatible patches (no tiling realizes it)"
                )
            placed[pos] = t.index
        z_of: dict[Vec, tuple[int, ...]] = {
            pos: basis.preimage(pos) for pos in sorted(placed)
        }
        z0, zs = z_of[vec(0, 0)], z_of[v]
        free_cells = [pos for pos in sorted(placed) if pos not in (vec(0, 0), v)]
        for letters in itertools.product(alphabet, repeat=len(free_cells)):
            coloring = {vec(0, 0): a, v: b_letter}
            coloring.update(dict(zip(free_cells, letters)))
            codings.append(
                PretilingCoding(
                    tuple(
                        (z_of[pos], placed[pos], coloring[pos])
                        for pos in sorted(placed)
                    )
                )
            )
    return basis, codings


def colored_tiling_avoids(
    ts: PuncturedTileSet,
    basis: PositionBasis,
    tiling: PartialTiling,
    codings: Sequence[PretilingCoding],
) -> bool:
    """No consistent encoded pretiling occurs in the colored tiling (checked
    at every translation placing all its tiles onto the tiling)."""
    placed_set = {
        (p.index, p.position): tiling.colors.get(p) for p in tiling.placed
    }
    for coding in codings:
        pattern = encode_pretiling(ts, basis, coding)
        if not coding_consistent(ts, basis, coding):
            continue
        base_pos = pattern[0][0].position
        for anchor in tiling.placed:
            shift = vsub(anchor.position, base_pos)
            hit = True
            for placed, letter in pattern:
                key = (placed.index, vadd(placed.position, shift))
                if placed_set.get(key) != letter:
                    hit = False
                    break
            if hit:
                return False
    return True


def window_to_colored_tiling(pb: PatchBlueprint, window) -> PartialTiling:
    """The colored tiles a colored window describes (one per valuation)."""
    b = pb.blueprint
    placements: dict[PlacedTile, str] = {}
    colors = getattr(window, "colors")
    graph = getattr(window, "graph")
    model = getattr(window, "model")
    for w in model.support:
        cls = graph.class_of[w]
        if cls not in colors:
            continue
        val = b.word_valuation(w)
        anchor = pb.anchor_tile(model.assignment[w])
        placements[PlacedTile(anchor.index, val)] = colors[cls]
    return PartialTiling(pb.tileset, placements.keys(), placements, validate=False)


def colored_tiling_to_window(
    pb: PatchBlueprint,
    tiling: PartialTiling,
    model: PartialModel,
    region_classes: Sequence[Word],
    graph=None,
):
    """Colors for a window region read off a colored tiling by valuation."""
    b = pb.blueprint
    graph = graph or model_graph(model)
    colors = {}
    for cls in region_classes:
        val = b.word_valuation(cls)
        tile = tiling.at_position(val)
        if tile is None or tile not in tiling.colors:
            raise GeometryError(f"no colored tile at valuation {val}")
        colors[cls] = tiling.colors[tile]
    return colors


# ---------------------------------------------------------------------------
# SVG rendering


def tiling_to_svg(tiling: PartialTiling, scale: int = 40) -> str:
    """Deterministic SVG: tiles as paths, colors as fills, punctures as dots."""
    getcontext().prec = 30
    palette = {
        None: "#d9d9d9",
        "0": "#7f9fc4",
        "1": "#c46a6a",
        "2": "#8fbf7f",
    }

    def fmt(x: Fraction) -> str:
        d = Decimal(x.numerator) / Decimal(x.denominator)
        return format(d.quantize(Decimal("0.0001")), "f")

    xs = [v[0] for p in tiling.polygons() for v in p.vertices]
    ys = [v[1] for p in tiling.polygons() for v in p.vertices]
    if not xs:
        return "<svg xmlns='http://www.w3.org/2000/svg'/>\n"
    min_x, max_x = min(xs), max(xs)
    min_y, max_y = min(ys), max(ys)
    width = fmt((max_x - min_x) * scale)
    height = fmt((max_y - min_y) * scale)
    lines = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}' "
        f"viewBox='0 0 {width} {height}'>"
    ]
    for placed in tiling.placed:
        poly = placed.polygon(tiling.ts)
        pts = []
        for v in poly.vertices:
            px = (v[0] - min_x) * scale
            py = (max_y - v[1]) * scale
            pts.append(f"{fmt(px)},{fmt(py)}")
        color = tiling.colors.get(placed)
        fill = palette.get(color, "#cccccc")
        lines.append(
            f"  <path d='M {' L '.join(pts)} Z' fill='{fill}' stroke='black' stroke-width='1'/>"
        )
        cx = (placed.position[0] - min_x) * scale
        cy = (max_y - placed.position[1]) * scale
        lines.append(f"  <circle cx='{fmt(cx)}' cy='{fmt(cy)}' r='2' fill='black'/>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
