"""Semi-decision procedures for emptiness of finite-type subshifts.

Both verdicts are certificate-backed: emptiness by exhausting the windows of
a finite radius (compactness), nonemptiness by a finite quotient graph whose
unfolding is a valid configuration.  Each certificate is re-checkable by an
independent verifier that shares no state with the search.

Aperiodic subshifts admit no finite quotient graph, so the nonemptiness side
can only ever succeed on instances with periodic-like configurations; the
driver reports `unknown` when its schedule runs out.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .core import (
    Blueprint,
    BlueprintError,
    Budget,
    BudgetExceeded,
    DEFAULT_BUDGET,
    EPSILON,
    PartialModel,
    Word,
    equivalence_query,
    model_graph,
    word_from_text,
    word_to_text,
)
from .subshift import (
    Pattern,
    PatternSet,
    Window,
    locally_admissible,
    to_nearest_neighbor,
    window_violations,
)


@dataclass(frozen=True)
class EmptinessCertificate:
    radius: int
    blueprint_digest: str
    patterns_digest: str
    models_examined: int
    model_restricted: bool = False

    @property
    def statement(self) -> str:
        scope = "the fixed partial model" if self.model_restricted else "every partial model"
        return (
            f"zero admissible windows exist at radius {self.radius} over {scope}; "
            "every configuration would restrict to one, so the subshift is empty"
        )


@dataclass(frozen=True)
class QuotientCertificate:
    """A finite graph with one (state, letter) pair per vertex and exactly
    one outgoing edge per matching generator; its unfolding from the base
    vertex is a configuration avoiding the patterns."""

    vertices: tuple[tuple[str, str], ...]  # (state, letter)
    edges: tuple[tuple[int, str, int], ...]  # (vertex, generator, vertex)
    base: int
    blueprint_digest: str
    patterns_digest: str
    relation_length_cap: Optional[int] = None

    def edge_map(self) -> dict[tuple[int, str], int]:
        return {(v, s): t for v, s, t in self.edges}

    def walk(self, b: Blueprint, start: int, word: Word) -> Optional[int]:
        """Follow a word through the graph; None when undefined."""
        emap = self.edge_map()
        cur = start
        for s in word:
            if b.initial[s] != self.vertices[cur][0]:
                return None
            nxt = emap.get((cur, s))
            if nxt is None:
                return None
            cur = nxt
        return cur

    def unfold(self, b: Blueprint, radius: int, budget: Budget = DEFAULT_BUDGET) -> Window:
        """The radius-r truncation of the configuration the graph describes."""
        assignment: dict[Word, str] = {}
        colors_by_word: dict[Word, str] = {}
        frontier = [(EPSILON, self.base)]
        assignment[EPSILON] = self.vertices[self.base][0]
        colors_by_word[EPSILON] = self.vertices[self.base][1]
        emap = self.edge_map()
        for _ in range(radius):
            nxt = []
            for w, v in frontier:
                state = self.vertices[v][0]
                for s in b.generators:
                    if b.initial[s] != state:
                        continue
                    t = emap.get((v, s))
                    if t is None:
                        raise BlueprintError(
                            f"missing {s!r}-edge at vertex {v}: graph is not total"
                        )
                    assignment[w + (s,)] = self.vertices[t][0]
                    colors_by_word[w + (s,)] = self.vertices[t][1]
                    nxt.append((w + (s,), t))
            frontier = nxt
        model = PartialModel(b, radius, assignment, budget)
        graph = model_graph(model, budget)
        colors = {}
        for cls in graph.vertices:
            colors[cls] = colors_by_word[cls]
            for w in model.support:
                if graph.class_of[w] == cls and colors_by_word[w] != colors[cls]:
                    raise BlueprintError(
                        "unfolding assigns different letters to equivalent words"
                    )
        return Window(model, colors, graph)


class CertificateError(ValueError):
    """An invariant of a certificate failed re-verification."""


# ---------------------------------------------------------------------------
# Independent verifiers


def verify_empty(
    b: Blueprint,
    fs: PatternSet,
    cert: EmptinessCertificate,
    budget: Budget = DEFAULT_BUDGET,
    model: Optional[PartialModel] = None,
    cap: int = 2_000_000,
) -> None:
    """Re-establish emptiness at the certificate's radius by plain product
    enumeration (no pruning), independent of the search path."""
    if cert.blueprint_digest != b.digest() or cert.patterns_digest != fs.digest():
        raise CertificateError("certificate digests do not match the instance")
    if bool(model) != cert.model_restricted:
        raise CertificateError("certificate scope does not match the query")
    from .core import enumerate_partial_models

    for pm in enumerate_partial_models(b, cert.radius, budget, base=model):
        graph = model_graph(pm, budget)
        classes = sorted(graph.vertices, key=b.word_key)
        total = len(fs.alphabet) ** len(classes)
        if total > cap:
            raise BudgetExceeded(f"brute-force verification needs {total} colorings")
        for letters in itertools.product(fs.alphabet, repeat=len(classes)):
            colors = dict(zip(classes, letters))
            window = Window(pm, colors, graph)
            if not window_violations(window, fs, budget):
                raise CertificateError(
                    f"admissible window found at radius {cert.radius}: not empty"
                )


def verify_quotient(
    b: Blueprint,
    fs: PatternSet,
    cert: QuotientCertificate,
    budget: Budget = DEFAULT_BUDGET,
    unfold_radius: int = 3,
) -> None:
    """Check the three certificate invariants and re-validate an unfolding.

    1. totality/consistency of the edge structure,
    2. relation closure: both reads of any relation, where defined, meet,
    3. pattern avoidance at every vertex,
    then the radius-`unfold_radius` unfolding must pass the window validator.
    """
    if cert.blueprint_digest != b.digest() or cert.patterns_digest != fs.digest():
        raise CertificateError("certificate digests do not match the instance")
    emap = cert.edge_map()
    for idx, (state, letter) in enumerate(cert.vertices):
        if state not in b.states or letter not in fs.alphabet:
            raise CertificateError(f"vertex {idx} carries unknown labels")
        for s in b.generators:
            if b.initial[s] == state:
                t = emap.get((idx, s))
                if t is None:
                    raise CertificateError(f"vertex {idx} is missing its {s!r}-edge")
                if cert.vertices[t][0] not in b.terminal[s]:
                    raise CertificateError(
                        f"{s!r}-edge from vertex {idx} lands outside the terminal set"
                    )
            elif (idx, s) in emap:
                raise CertificateError(
                    f"vertex {idx} has a spurious {s!r}-edge (initial state mismatch)"
                )
    for u, v in b.all_relations(cert.relation_length_cap):
        for idx in range(len(cert.vertices)):
            end_u = cert.walk(b, idx, u)
            end_v = cert.walk(b, idx, v)
            if end_u is not None and end_v is not None and end_u != end_v:
                raise CertificateError(
                    f"relation {word_to_text(u)} = {word_to_text(v)} does not close "
                    f"at vertex {idx}"
                )
    if not fs.nearest_neighbor:
        raise CertificateError("quotient certificates require nearest-neighbor patterns")
    for p in fs.patterns:
        for idx in range(len(cert.vertices)):
            if _pattern_occurrence(b, cert, idx, p):
                raise CertificateError(f"pattern occurs at vertex {idx}")
    window = cert.unfold(b, unfold_radius, budget)
    problems = window_violations(window, fs, budget)
    if problems:
        raise CertificateError(f"unfolding fails window validation: {problems[0]}")


def _pattern_occurrence(b: Blueprint, cert: QuotientCertificate, idx: int, p: Pattern) -> bool:
    for u, (m, a) in p.cells:
        end = cert.walk(b, idx, u)
        if end is None or cert.vertices[end] != (m, a):
            return False
    return True


# ---------------------------------------------------------------------------
# Searchers


def certify_empty(
    b: Blueprint,
    fs: PatternSet,
    r: int,
    budget: Budget = DEFAULT_BUDGET,
    model: Optional[PartialModel] = None,
) -> Optional[EmptinessCertificate]:
    """Emptiness by window exhaustion at radius r.

    Sound: the color-equality condition is only enforced for budget-verified
    pairs, which enlarges the candidate window set, so an empty stream still
    proves the subshift empty.
    """
    models_examined = 0
    from .core import enumerate_partial_models

    for pm in enumerate_partial_models(b, r, budget, base=model):
        models_examined += 1
        for _ in locally_admissible(b, fs, r=r, budget=budget, base=pm):
            return None
    return EmptinessCertificate(
        radius=r,
        blueprint_digest=b.digest(),
        patterns_digest=fs.digest(),
        models_examined=models_examined,
        model_restricted=model is not None,
    )


def certify_nonempty(
    b: Blueprint,
    fs: PatternSet,
    max_vertices: int,
    budget: Budget = DEFAULT_BUDGET,
    model: Optional[PartialModel] = None,
    relation_length_cap: Optional[int] = None,
) -> Optional[QuotientCertificate]:
    """Search finite quotient graphs up to the vertex bound, smallest first.

    Deterministic: vertex labels are assigned in declared state/letter
    order, edge targets in vertex order; the first valid graph wins.
    """
    if not fs.nearest_neighbor:
        raise BlueprintError("certify_nonempty needs nearest-neighbor patterns")
    relations = list(b.all_relations(relation_length_cap))
    bp_digest, fs_digest = b.digest(), fs.digest()

    forbidden_pairs = set()
    for p in fs.patterns:
        cells = dict(p.cells)
        (s,) = [w for w in p.support if w != EPSILON][0]
        forbidden_pairs.add((cells[EPSILON], s, cells[(s,)]))

    def edge_ok(src_label, s, dst_label) -> bool:
        if fs.edge_rule is not None and fs.edge_rule(
            src_label[0], src_label[1], s, dst_label[0], dst_label[1]
        ):
            return False
        return (src_label, s, dst_label) not in forbidden_pairs

    for k in range(1, max_vertices + 1):
        label_options = [
            (m, a) for m in b.states for a in fs.alphabet
        ]
        for labels in itertools.product(label_options, repeat=k):
            slots = [
                (v, s)
                for v in range(k)
                for s in b.generators
                if b.initial[s] == labels[v][0]
            ]
            targets_per_slot = []
            feasible = True
            for v, s in slots:
                opts = [
                    t
                    for t in range(k)
                    if labels[t][0] in b.terminal[s] and edge_ok(labels[v], s, labels[t])
                ]
                if not opts:
                    feasible = False
                    break
                targets_per_slot.append(opts)
            if not feasible:
                continue

            emap: dict[tuple[int, str], int] = {}

            def walk(start: int, word: Word) -> Optional[int]:
                cur = start
                for s in word:
                    if b.initial[s] != labels[cur][0]:
                        return None
                    nxt = emap.get((cur, s))
                    if nxt is None:
                        return None  # treat unassigned as undefined during search
                    cur = nxt
                return cur

            def closure_holds() -> bool:
                for u, v in relations:
                    for idx in range(k):
                        eu, ev = walk(idx, u), walk(idx, v)
                        if eu is not None and ev is not None and eu != ev:
                            return False
                return True

            def fill(i: int) -> Iterator[dict]:
                if i == len(slots):
                    if closure_holds():
                        yield dict(emap)
                    return
                v, s = slots[i]
                for t in targets_per_slot[i]:
                    emap[(v, s)] = t
                    yield from fill(i + 1)
                    del emap[(v, s)]

            for found in fill(0):
                cert = QuotientCertificate(
                    vertices=tuple(labels),
                    edges=tuple(sorted((v, s, t) for (v, s), t in found.items())),
                    base=0,
                    blueprint_digest=bp_digest,
                    patterns_digest=fs_digest,
                    relation_length_cap=relation_length_cap,
                )
                if model is not None and not _unfolding_extends(b, cert, model, budget):
                    continue
                return cert
    return None


def _unfolding_extends(
    b: Blueprint, cert: QuotientCertificate, model: PartialModel, budget: Budget
) -> bool:
    try:
        window = cert.unfold(b, model.radius, budget)
    except BlueprintError:
        return False
    return window.model == model


# ---------------------------------------------------------------------------
# Driver


@dataclass
class DominoResult:
    verdict: str  # "empty" | "nonempty" | "unknown"
    empty_certificate: Optional[EmptinessCertificate] = None
    quotient_certificate: Optional[QuotientCertificate] = None
    steps: list = field(default_factory=list)
    converted: bool = False

    @property
    def exit_code(self) -> int:
        return {"nonempty": 0, "empty": 1, "unknown": 2}[self.verdict]


def default_schedule(rounds: int = 4) -> list[tuple[int, int]]:
    return [(r, 2 ** (r - 1)) for r in range(1, rounds + 1)]


def domino_run(
    b: Blueprint,
    fs: PatternSet,
    schedule: Optional[Sequence[tuple[int, int]]] = None,
    budget: Budget = DEFAULT_BUDGET,
    model: Optional[PartialModel] = None,
    verify: bool = True,
) -> DominoResult:
    """Alternate the two semi-procedures over an increasing schedule.

    Never returns contradictory certificates: the first verified certificate
    decides.  Pattern sets that are not nearest-neighbor are converted first
    (the search then runs over the conversion, which is nonempty exactly
    when the original is).
    """
    converted = False
    search_fs = fs
    if not fs.nearest_neighbor:
        conv = to_nearest_neighbor(b, fs, budget)
        alphabet = conv.materialize_alphabet()
        search_fs = conv.materialize_patterns(alphabet)
        converted = True
    result = DominoResult("unknown", converted=converted)
    for r, max_vertices in schedule or default_schedule():
        cert = certify_empty(b, fs, r, budget, model=model)
        result.steps.append(("empty", r, cert is not None))
        if cert is not None:
            if verify:
                verify_empty(b, fs, cert, budget, model=model)
            result.verdict = "empty"
            result.empty_certificate = cert
            return result
        qcert = certify_nonempty(b, search_fs, max_vertices, budget, model=model)
        result.steps.append(("nonempty", max_vertices, qcert is not None))
        if qcert is not None:
            if verify:
                verify_quotient(b, search_fs, qcert, budget)
            result.verdict = "nonempty"
            result.quotient_certificate = qcert
            return result
    return result


def certificate_period_word(b: Blueprint, cert: QuotientCertificate) -> Optional[Word]:
    """A word labeling a cycle through the base vertex, in search order.

    Reading it from the base returns to the base, so the unfolding is fixed
    by the corresponding shift; when the word is provably inequivalent to
    the empty word this doubles as a period witness for the unfolding.
    """
    emap = cert.edge_map()
    from collections import deque

    seen = {cert.base: EPSILON}
    queue = deque([cert.base])
    while queue:
        v = seen_v = queue.popleft()
        for s in sorted(b.generators, key=b.gen_index):
            t = emap.get((v, s))
            if t is None:
                continue
            word = seen[v] + (s,)
            if t == cert.base and word:
                return word
            if t not in seen:
                seen[t] = word
                queue.append(t)
    return None


# ---------------------------------------------------------------------------
# Certificate serialization


def serialize_quotient(cert: QuotientCertificate) -> str:
    out = [
        "[meta]",
        "kind = nonempty",
        f"blueprint-digest = {cert.blueprint_digest}",
        f"patterns-digest = {cert.patterns_digest}",
        f"base = {cert.base}",
        f"relation-length-cap = {cert.relation_length_cap}",
        "",
        "[vertices]",
    ]
    for idx, (m, a) in enumerate(cert.vertices):
        out.append(f"{idx} state={m} letter={a}")
    out.append("")
    out.append("[edges]")
    for v, s, t in cert.edges:
        out.append(f"{v} {s} {t}")
    return "\n".join(out) + "\n"


def parse_quotient(text: str) -> QuotientCertificate:
    meta: dict[str, str] = {}
    vertices: list[tuple[str, str]] = []
    edges: list[tuple[int, str, int]] = []
    section = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            section = m.group(1)
            continue
        if section == "meta":
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        elif section == "vertices":
            m = re.fullmatch(r"(\d+)\s+state=(\S+)\s+letter=(\S+)", line)
            if not m:
                raise CertificateError(f"bad vertex line: {line!r}")
            idx = int(m.group(1))
            if idx != len(vertices):
                raise CertificateError("vertex indices must be consecutive")
            vertices.append((m.group(2), m.group(3)))
        elif section == "edges":
            parts = line.split()
            if len(parts) != 3:
                raise CertificateError(f"bad edge line: {line!r}")
            edges.append((int(parts[0]), parts[1], int(parts[2])))
    cap = meta.get("relation-length-cap", "None")
    return QuotientCertificate(
        vertices=tuple(vertices),
        edges=tuple(sorted(edges)),
        base=int(meta.get("base", "0")),
        blueprint_digest=meta.get("blueprint-digest", ""),
        patterns_digest=meta.get("patterns-digest", ""),
        relation_length_cap=None if cap == "None" else int(cap),
    )


def serialize_empty(cert: EmptinessCertificate) -> str:
    return (
        "[meta]\n"
        "kind = empty\n"
        f"radius = {cert.radius}\n"
        f"blueprint-digest = {cert.blueprint_digest}\n"
        f"patterns-digest = {cert.patterns_digest}\n"
        f"models-examined = {cert.models_examined}\n"
        f"model-restricted = {cert.model_restricted}\n"
        f"statement = {cert.statement}\n"
    )


def parse_empty(text: str) -> EmptinessCertificate:
    meta: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    return EmptinessCertificate(
        radius=int(meta["radius"]),
        blueprint_digest=meta["blueprint-digest"],
        patterns_digest=meta["patterns-digest"],
        models_examined=int(meta["models-examined"]),
        model_restricted=meta.get("model-restricted", "False") == "True",
    )
