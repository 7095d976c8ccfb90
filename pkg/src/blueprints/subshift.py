"""Patterns, windows, admissibility, nearest-neighbor conversion, and
sliding-block codes.

A window is the radius-r truncation of a configuration: a partial model plus
a coloring of its supported word classes.  Admissibility is checked
ball-restricted: the color-equality condition only binds pairs the budget
proves equivalent (which can only enlarge the admissible set, keeping
emptiness certification sound), and a forbidden pattern is only consulted
where its translate fully resolves inside the ball.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence

from .core import (
    Blueprint,
    BlueprintError,
    Budget,
    BudgetExceeded,
    DEFAULT_BUDGET,
    EquivalenceVerdict,
    EPSILON,
    ModelGraph,
    PartialModel,
    UndefinedActionError,
    Word,
    consistent_ball,
    enumerate_partial_models,
    equivalence_query,
    model_graph,
    partial_shift,
    word_from_text,
    word_to_text,
)

Cell = tuple[str, object]  # (state, letter)


@dataclass(frozen=True)
class Pattern:
    """A finitely supported map from words to (state, letter) pairs."""

    cells: tuple[tuple[Word, Cell], ...]

    @staticmethod
    def of(mapping: dict[Word, Cell]) -> "Pattern":
        return Pattern(tuple(sorted(mapping.items(), key=lambda kv: (len(kv[0]), kv[0]))))

    @property
    def support(self) -> tuple[Word, ...]:
        return tuple(w for w, _ in self.cells)

    def value(self, w: Word) -> Optional[Cell]:
        for u, cell in self.cells:
            if u == w:
                return cell
        return None

    @property
    def max_word_length(self) -> int:
        return max((len(w) for w, _ in self.cells), default=0)

    def is_nearest_neighbor(self) -> bool:
        supp = self.support
        return len(supp) == 2 and EPSILON in supp and any(len(w) == 1 for w in supp)


class PatternSet:
    """A set of forbidden patterns over an alphabet.

    `edge_rule`, when present, is an implicit family of nearest-neighbor
    patterns given by a predicate (m, letter, generator, m', letter') ->
    forbidden; it is consulted alongside the explicit list (used for the
    overlap rules of nearest-neighbor conversions, which are too large to
    materialize eagerly).
    """

    def __init__(
        self,
        alphabet: Sequence[object],
        patterns: Iterable[Pattern] = (),
        edge_rule: Optional[Callable[[str, object, str, str, object], bool]] = None,
        name: str = "",
    ):
        self.alphabet = tuple(alphabet)
        if len(set(self.alphabet)) != len(self.alphabet):
            raise BlueprintError("duplicate letter in alphabet")
        self.patterns = tuple(patterns)
        self.edge_rule = edge_rule
        self.name = name

    @property
    def nearest_neighbor(self) -> bool:
        return all(p.is_nearest_neighbor() for p in self.patterns)

    @property
    def max_support_length(self) -> int:
        explicit = max((p.max_word_length for p in self.patterns), default=0)
        return max(explicit, 1 if self.edge_rule else 0)

    def digest(self) -> str:
        if self.edge_rule is not None:
            basis = repr((self.alphabet, self.patterns, self.name, "edge_rule"))
        else:
            basis = serialize_pattern_set(self)
        return hashlib.sha256(basis.encode()).hexdigest()[:16]

    def __repr__(self):
        extra = "+edge_rule" if self.edge_rule else ""
        return f"PatternSet({self.name or 'anonymous'}: |F|={len(self.patterns)}{extra})"


def serialize_pattern_set(fs: PatternSet) -> str:
    """Triple encoding: one `state letter word` line per supported cell."""
    out = ["[alphabet]", " ".join(str(a) for a in fs.alphabet), ""]
    for p in fs.patterns:
        out.append("[pattern]")
        for w, (m, a) in p.cells:
            out.append(f"{m} {a} {word_to_text(w)}")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def parse_pattern_set(text: str, name: str = "") -> PatternSet:
    alphabet: list[str] = []
    patterns: list[Pattern] = []
    current: Optional[dict[Word, Cell]] = None
    section = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            if current is not None:
                patterns.append(Pattern.of(current))
                current = None
            section = m.group(1)
            if section == "pattern":
                current = {}
            continue
        if section == "alphabet":
            alphabet.extend(line.split())
        elif section == "pattern":
            parts = line.split(None, 2)
            if len(parts) < 3:
                raise BlueprintError(f"bad pattern cell line: {line!r}")
            state, letter, word_text = parts
            current[word_from_text(word_text)] = (state, letter)
        else:
            raise BlueprintError(f"content outside sections: {line!r}")
    if current is not None:
        patterns.append(Pattern.of(current))
    return PatternSet(alphabet, patterns, name=name)


# ---------------------------------------------------------------------------
# Windows


class Window:
    """A partial model together with a coloring of its supported classes."""

    def __init__(self, model: PartialModel, colors: dict[Word, object], graph: Optional[ModelGraph] = None):
        self.model = model
        self.graph = graph or model_graph(model)
        self.colors = dict(colors)
        missing = [v for v in self.graph.vertices if v not in self.colors]
        extra = [v for v in self.colors if v not in set(self.graph.vertices)]
        if missing or extra:
            raise BlueprintError(
                f"coloring does not match supported classes (missing {missing[:3]}, extra {extra[:3]})"
            )
        self._items = tuple(sorted(self.colors.items(), key=lambda kv: (len(kv[0]), kv[0])))

    @property
    def blueprint(self) -> Blueprint:
        return self.model.blueprint

    @property
    def radius(self) -> int:
        return self.model.radius

    def color(self, w: Word) -> Optional[object]:
        """The letter at a supported word (resolved through its class)."""
        cls = self.graph.class_of.get(tuple(w))
        return None if cls is None else self.colors[cls]

    def cell(self, w: Word) -> Optional[Cell]:
        cls = self.graph.class_of.get(tuple(w))
        if cls is None:
            return None
        return (self.model.assignment[cls], self.colors[cls])

    def shift(self, w: Word) -> "Window":
        w = tuple(w)
        shifted_model = partial_shift(self.model, w)
        graph = model_graph(shifted_model)
        colors = {}
        for v in graph.vertices:
            colors[v] = self.color(w + v)
        return Window(shifted_model, colors, graph)

    def restrict(self, radius: int) -> "Window":
        model = self.model.restrict(radius)
        graph = model_graph(model)
        colors = {v: self.color(v) for v in graph.vertices}
        return Window(model, colors, graph)

    def __eq__(self, other):
        return (
            isinstance(other, Window)
            and self.model == other.model
            and self._items == other._items
        )

    def __hash__(self):
        return hash((self.model, self._items))

    def __repr__(self):
        return f"Window(r={self.radius}, classes={len(self.colors)})"

    def to_dot(self) -> str:
        lines = ["digraph window {"]
        names = {v: f"v{i}" for i, v in enumerate(self.graph.vertices)}
        for v in self.graph.vertices:
            state = self.model.assignment[v]
            lines.append(
                f'  {names[v]} [label="{word_to_text(v)}|{state}|{self.colors[v]}"];'
            )
        for a, c, s in self.graph.edges:
            lines.append(f'  {names[a]} -> {names[c]} [label="{s}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _pattern_matches_at(window: Window, pattern: Pattern, anchor: Word) -> bool:
    """True when every cell of the pattern resolves inside the window and
    carries exactly the pattern's value (translate fits and occurs)."""
    for u, cell in pattern.cells:
        target = window.graph.resolve(anchor, u)
        if target is None:
            return False
        if (window.model.assignment[target], window.colors[target]) != cell:
            return False
    return True


def _edge_rule_violation(window: Window, fs: PatternSet) -> Optional[tuple]:
    if fs.edge_rule is None:
        return None
    for v in window.graph.vertices:
        m = window.model.assignment[v]
        for s, tgt in window.graph.neighbors(v):
            m2 = window.model.assignment[tgt]
            if fs.edge_rule(m, window.colors[v], s, m2, window.colors[tgt]):
                return (v, s, tgt)
    return None


def window_violations(window: Window, fs: PatternSet, budget: Optional[Budget] = None) -> list[str]:
    """Independent re-check of the window conditions; returns human-readable
    violation descriptions (empty list = admissible).

    This checker recomputes the class structure from scratch so that it does
    not share state with the enumerator that produced the window.
    """
    out = []
    model = window.model
    b = model.blueprint
    budget = budget or model.budget
    fresh = model_graph(model, budget)
    # (s1): every supported class colored, nothing else
    supported = set(fresh.vertices)
    colored = set(window.colors)
    if supported != colored:
        out.append(f"support/coloring mismatch: {sorted(supported ^ colored)[:4]}")
    # (s2): colors and states constant on budget-equivalent supported pairs
    for w in model.support:
        cls = fresh.class_of[w]
        if window.colors.get(cls) != window.color(w):
            out.append(f"class color mismatch at {word_to_text(w)}")
        if model.assignment[w] != model.assignment[cls]:
            out.append(f"class state mismatch at {word_to_text(w)}")
    # (s3): no pattern translate that fits inside the ball occurs
    for v in fresh.vertices:
        for p in fs.patterns:
            if _pattern_matches_at(window, p, v):
                out.append(f"pattern occurs at {word_to_text(v)}")
    hit = _edge_rule_violation(window, fs)
    if hit is not None:
        v, s, tgt = hit
        out.append(f"edge rule violated at {word_to_text(v)} --{s}--> {word_to_text(tgt)}")
    return out


def validate_window(window: Window, fs: PatternSet, budget: Optional[Budget] = None) -> bool:
    return not window_violations(window, fs, budget)


def _coloring_stream(
    window_model: PartialModel,
    graph: ModelGraph,
    fs: PatternSet,
    region_classes: list[Word],
) -> Iterator[dict[Word, object]]:
    """Deterministic backtracking over class colorings of the region.

    Pattern instances are resolved against the model once; instances whose
    states cannot match are dropped up front, the rest constrain letters.
    """
    order = {v: i for i, v in enumerate(region_classes)}
    instances = []  # (cells in assignment order, letters)
    for v in region_classes:
        for p in fs.patterns:
            cells = []
            letters = []
            ok = True
            for u, (m, a) in p.cells:
                target = graph.resolve(v, u)
                if target is None or target not in order:
                    ok = False
                    break
                if window_model.assignment[target] != m:
                    ok = False
                    break
                cells.append(target)
                letters.append(a)
            if ok and cells:
                last = max(order[c] for c in cells)
                instances.append((last, tuple(cells), tuple(letters)))
    by_last: dict[int, list] = {}
    for last, cells, letters in instances:
        by_last.setdefault(last, []).append((cells, letters))

    edge_checks: dict[int, list] = {}
    if fs.edge_rule is not None:
        for v in region_classes:
            for s, tgt in graph.neighbors(v):
                if tgt not in order:
                    continue
                last = max(order[v], order[tgt])
                edge_checks.setdefault(last, []).append((v, s, tgt))

    colors: dict[Word, object] = {}

    def assign(idx: int) -> Iterator[dict[Word, object]]:
        if idx == len(region_classes):
            yield dict(colors)
            return
        v = region_classes[idx]
        for letter in fs.alphabet:
            colors[v] = letter
            bad = False
            for cells, letters in by_last.get(idx, ()):
                if all(colors[c] == a for c, a in zip(cells, letters)):
                    bad = True
                    break
            if not bad and fs.edge_rule is not None:
                for a, s, c in edge_checks.get(idx, ()):
                    if fs.edge_rule(
                        window_model.assignment[a], colors[a], s,
                        window_model.assignment[c], colors[c],
                    ):
                        bad = True
                        break
            if not bad:
                yield from assign(idx + 1)
            del colors[v]

    yield from assign(0)


def locally_admissible(
    b: Blueprint,
    fs: PatternSet,
    r: Optional[int] = None,
    region: Optional[Sequence[Word]] = None,
    budget: Budget = DEFAULT_BUDGET,
    base: Optional[PartialModel] = None,
    max_windows: Optional[int] = None,
) -> Iterator[Window]:
    """Stream the admissible windows at radius r (or on an explicit region).

    With `region`, colorings are enumerated on the classes of the given
    words only, and a forbidden pattern binds where its translate stays
    inside those classes.  Soundness: every configuration of the subshift
    restricts to some emitted window.
    """
    if (r is None) == (region is None):
        raise ValueError("specify exactly one of r or region")
    if region is not None:
        region = [tuple(w) for w in region]
        ball_r = max(len(w) for w in region)
    else:
        ball_r = r
    depth = fs.max_support_length
    if region is None and depth > ball_r:
        raise BlueprintError(
            f"pattern support length {depth} exceeds window radius {ball_r}"
        )
    count = 0
    for model in enumerate_partial_models(b, ball_r, budget, base=base):
        graph = model_graph(model, budget)
        if region is None:
            region_classes = list(graph.vertices)
        else:
            region_classes = []
            seen = set()
            for w in region:
                cls = graph.class_of.get(w)
                if cls is not None and cls not in seen:
                    seen.add(cls)
                    region_classes.append(cls)
            region_classes.sort(key=b.word_key)
        for colors in _coloring_stream(model, graph, fs, region_classes):
            count += 1
            if max_windows is not None and count > max_windows:
                raise BudgetExceeded(f"max_windows={max_windows} exceeded")
            if region is None:
                yield Window(model, colors, graph)
            else:
                yield RegionWindow(model, graph, tuple(region_classes), colors)


class RegionWindow:
    """A coloring of an explicit class region inside a model ball."""

    def __init__(self, model, graph, region_classes, colors):
        self.model = model
        self.graph = graph
        self.region_classes = region_classes
        self.colors = dict(colors)
        self._items = tuple(sorted(self.colors.items(), key=lambda kv: (len(kv[0]), kv[0])))

    def color(self, w: Word):
        cls = self.graph.class_of.get(tuple(w))
        return self.colors.get(cls)

    def __eq__(self, other):
        return (
            isinstance(other, RegionWindow)
            and self.model == other.model
            and self.region_classes == other.region_classes
            and self._items == other._items
        )

    def __hash__(self):
        return hash((self.model, self.region_classes, self._items))


# ---------------------------------------------------------------------------
# Sliding-block codes


@dataclass
class SlidingBlockCode:
    """A local rule applied over a finite window shape.

    `rule` maps a restriction {u in shape: (state, letter) or None} to an
    output (state, letter); the output state must agree with the model at
    the cell (all codes here fix the model and act on letters only).
    """

    shape: tuple[Word, ...]
    rule: Callable[[dict[Word, Optional[Cell]]], Cell]
    name: str = ""

    @property
    def depth(self) -> int:
        return max((len(w) for w in self.shape), default=0)


def identity_code() -> SlidingBlockCode:
    return SlidingBlockCode((EPSILON,), lambda patch: patch[EPSILON], "identity")


def forget_colors_code(dot: object = ".") -> SlidingBlockCode:
    def rule(patch):
        m, _ = patch[EPSILON]
        return (m, dot)

    return SlidingBlockCode((EPSILON,), rule, "forget")


def apply_sliding_block(code: SlidingBlockCode, window: Window) -> Window:
    """Apply the code, shrinking the radius by the window-shape depth."""
    new_r = window.radius - code.depth
    if new_r < 0:
        raise UndefinedActionError(
            f"window radius {window.radius} insufficient for code depth {code.depth}"
        )
    model = window.model.restrict(new_r)
    graph = model_graph(model, window.model.budget)
    colors = {}
    for v in graph.vertices:
        patch = {}
        for u in code.shape:
            target = window.graph.resolve(v, u)
            patch[u] = (
                (window.model.assignment[target], window.colors[target])
                if target is not None
                else None
            )
        out = code.rule(patch)
        if out is None:
            raise UndefinedActionError(f"local rule undefined at {word_to_text(v)}")
        m_out, letter = out
        if m_out != model.assignment[v]:
            raise BlueprintError(
                f"local rule changed the model state at {word_to_text(v)}"
            )
        colors[v] = letter
    return Window(model, colors, graph)


# ---------------------------------------------------------------------------
# Nearest-neighbor conversion


class BallLetter:
    """A letter of the conversion alphabet: the view of a radius-N ball.

    Entries map words of length <= N to (state, letter) pairs; absent words
    read as unsupported/unknown.  Windows truncate these views at the ball
    boundary, so two letters are compatible when their overlaps agree
    including absence (the finite analogue of the overlap rules).
    """

    __slots__ = ("entries", "_dict")

    def __init__(self, entries: Iterable[tuple[Word, Cell]]):
        self.entries = tuple(sorted(entries, key=lambda kv: (len(kv[0]), kv[0])))
        self._dict = dict(self.entries)
        if EPSILON not in self._dict:
            raise BlueprintError("ball letter must be defined at the empty word")

    def value(self, w: Word) -> Optional[Cell]:
        return self._dict.get(w)

    @property
    def root(self) -> Cell:
        return self._dict[EPSILON]

    def __eq__(self, other):
        return isinstance(other, BallLetter) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        inner = "; ".join(
            f"{word_to_text(w)}:{m}/{a}" for w, (m, a) in self.entries
        )
        return "{" + inner + "}"


class NNConversion:
    """A finite-type subshift re-presented with nearest-neighbor rules.

    Produces the ball-letter alphabet, the forbidden overlap/consistency
    rules, and the two sliding-block codes of the conjugacy.
    """

    def __init__(self, blueprint: Blueprint, fs: PatternSet, budget: Budget = DEFAULT_BUDGET):
        self.blueprint = blueprint
        self.fs = fs
        self.budget = budget
        self.N = max((p.max_word_length for p in fs.patterns), default=0)
        self.shape = tuple(sorted(consistent_ball(blueprint, self.N), key=blueprint.word_key))

    # -- letters -----------------------------------------------------------

    def letter_ok(self, letter: BallLetter) -> bool:
        """Membership in the conversion alphabet.

        Requires internal state structure (supports chain through initial и
        terminal data, truncation only outward), class consistency within
        budget, and avoidance of every forbidden pattern anchored at the
        root wherever the pattern's cells are known.
        """
        b = self.blueprint
        entries = letter._dict
        for w, (m, a) in entries.items():
            if len(w) > self.N or not b.is_consistent_word(w):
                return False
            if m not in b.states or a not in self.fs.alphabet:
                return False
            if w:
                head, last = w[:-1], w[-1]
                if head not in entries:
                    return False
                if b.initial[last] != entries[head][0] or m not in b.terminal[last]:
                    return False
        # class consistency on the shape
        rep = self._shape_partition()
        for w, val in entries.items():
            canon = rep.get(w)
            if canon is not None and canon in entries and entries[canon] != val:
                return False
            if canon is not None and canon not in entries and canon != w:
                return False
        # root avoidance: a pattern with all cells known and equal is forbidden
        for p in self.fs.patterns:
            if all(entries.get(u) == cell for u, cell in p.cells):
                return False
        return True

    def _shape_partition(self):
        if not hasattr(self, "_shape_rep"):
            from .core import partition_words

            self._shape_rep = partition_words(self.blueprint, self.shape, self.budget)
        return self._shape_rep

    # -- overlap rules (the conversion's forbidden patterns) ----------------

    def edge_forbidden(self, m: str, alpha: object, s: str, m2: str, alpha2: object) -> bool:
        """The nearest-neighbor rules: state mismatches at either end, or an
        overlap disagreement between the two ball views."""
        if not isinstance(alpha, BallLetter) or not isinstance(alpha2, BallLetter):
            return True
        if alpha.root[0] != m or alpha2.root[0] != m2:
            return True
        for w in self.shape:
            if len(w) > self.N - 1:
                continue
            sw = (s,) + w
            if len(sw) > self.N or not self.blueprint.is_consistent_word(sw):
                continue
            if alpha.value(sw) != alpha2.value(w):
                return True
        return False

    def nn_patterns(self, alphabet: Sequence[BallLetter]) -> PatternSet:
        """Predicate-backed forbidden set over a (possibly partial) alphabet."""
        return PatternSet(
            alphabet,
            (),
            edge_rule=self.edge_forbidden,
            name=f"nn({self.fs.name})",
        )

    # -- codes ---------------------------------------------------------------

    def encode_window(self, window: Window) -> Window:
        """Radius-preserving encoding with boundary-truncated letters."""
        colors = {}
        for v in window.graph.vertices:
            entries = []
            for u in self.shape:
                target = window.graph.resolve(v, u)
                if target is not None:
                    entries.append(
                        (u, (window.model.assignment[target], window.colors[target]))
                    )
            colors[v] = BallLetter(entries)
        return Window(window.model, colors, window.graph)

    def decode_window(self, window: Window) -> Window:
        colors = {}
        for v in window.graph.vertices:
            letter = window.colors[v]
            if not isinstance(letter, BallLetter):
                raise BlueprintError("decode expects ball letters")
            colors[v] = letter.root[1]
        return Window(window.model, colors, window.graph)

    def forward_code(self) -> SlidingBlockCode:
        def rule(patch: dict[Word, Optional[Cell]]) -> Cell:
            if patch.get(EPSILON) is None:
                raise UndefinedActionError("forward rule needs a supported center")
            entries = [(u, cell) for u, cell in patch.items() if cell is not None]
            m = patch[EPSILON][0]
            return (m, BallLetter(entries))

        return SlidingBlockCode(self.shape, rule, "nn-forward")

    def backward_code(self) -> SlidingBlockCode:
        def rule(patch: dict[Word, Optional[Cell]]) -> Cell:
            cell = patch.get(EPSILON)
            if cell is None:
                raise UndefinedActionError("backward rule needs a supported center")
            m, letter = cell
            return (m, letter.root[1])

        return SlidingBlockCode((EPSILON,), rule, "nn-backward")

    # -- materializations ------------------------------------------------------

    def materialize_alphabet(self, cap: Optional[int] = 100000) -> tuple[BallLetter, ...]:
        """Enumerate the full conversion alphabet (all truncation shapes).

        The alphabet grows quickly with N; the cap raises instead of
        truncating silently.
        """
        b = self.blueprint
        shape = self.shape
        letters: list[BallLetter] = []

        def extend(idx: int, entries: dict[Word, Cell]):
            if cap is not None and len(letters) > cap:
                raise BudgetExceeded(f"alphabet cap {cap} exceeded")
            if idx == len(shape):
                letter = BallLetter(entries.items())
                if self.letter_ok(letter):
                    letters.append(letter)
                return
            w = shape[idx]
            options: list[Optional[Cell]] = []
            if w == EPSILON:
                options = [(m, a) for m in b.states for a in self.fs.alphabet]
            else:
                head, last = w[:-1], w[-1]
                parent = entries.get(head)
                if parent is None or b.initial[last] != parent[0]:
                    options = [None]
                else:
                    options = [None] + [
                        (m, a) for m in b.terminal[last] for a in self.fs.alphabet
                    ]
            for opt in options:
                if opt is None:
                    extend(idx + 1, entries)
                else:
                    entries[w] = opt
                    extend(idx + 1, entries)
                    del entries[w]

        extend(0, {})
        return tuple(letters)

    def materialize_patterns(self, alphabet: Sequence[BallLetter], cap: Optional[int] = 200000) -> PatternSet:
        """Explicit nearest-neighbor pattern list over a materialized alphabet."""
        b = self.blueprint
        patterns = []
        for s in b.generators:
            for alpha in alphabet:
                m = alpha.root[0]
                if b.initial[s] != m:
                    continue
                for alpha2 in alphabet:
                    m2 = alpha2.root[0]
                    if m2 not in b.terminal[s]:
                        continue
                    if self.edge_forbidden(m, alpha, s, m2, alpha2):
                        patterns.append(
                            Pattern.of({EPSILON: (m, alpha), (s,): (m2, alpha2)})
                        )
                        if cap is not None and len(patterns) > cap:
                            raise BudgetExceeded(f"pattern cap {cap} exceeded")
        return PatternSet(alphabet, patterns, name=f"nn({self.fs.name})")


def enumerate_conversion_windows(
    conv: NNConversion,
    r: int,
    alphabet: Sequence[BallLetter],
    budget: Budget = DEFAULT_BUDGET,
) -> Iterator[Window]:
    """Enumerate the conversion's windows directly from its alphabet.

    A window assigns a ball letter to every supported class so that every
    letter's view agrees with the window itself (values where the view stays
    inside the ball, absence where it leaves), and no overlap rule fires.
    This is the brute-force counterpart of `encode_window` and is used to
    certify window-count equality from the conversion side.
    """
    b = conv.blueprint
    for model in enumerate_partial_models(b, r, budget):
        graph = model_graph(model, budget)
        classes = sorted(graph.vertices, key=b.word_key)
        order = {v: i for i, v in enumerate(classes)}
        resolved: dict[Word, list[tuple[Word, Optional[Word]]]] = {
            v: [(u, graph.resolve(v, u)) for u in conv.shape] for v in classes
        }
        colors: dict[Word, BallLetter] = {}

        def consistent(v: Word, letter: BallLetter) -> bool:
            if letter.root[0] != model.assignment[v]:
                return False
            for u, target in resolved[v]:
                val = letter.value(u)
                if target is None:
                    if val is not None:
                        return False
                elif target == v:
                    if val != (model.assignment[v], letter.root[1]):
                        return False
                elif target in colors:
                    if val != (model.assignment[target], colors[target].root[1]):
                        return False
                elif val is not None and val[0] != model.assignment[target]:
                    return False
            # views of earlier classes looking at v
            for w in classes[: order[v]]:
                for u, target in resolved[w]:
                    if target == v:
                        if colors[w].value(u) != (model.assignment[v], letter.root[1]):
                            return False
            for s, tgt in graph.neighbors(v):
                if tgt in colors and conv.edge_forbidden(
                    model.assignment[v], letter, s, model.assignment[tgt], colors[tgt]
                ):
                    return False
                if tgt == v and conv.edge_forbidden(
                    model.assignment[v], letter, s, model.assignment[v], letter
                ):
                    return False
            return True

        def assign(idx: int) -> Iterator[Window]:
            if idx == len(classes):
                yield Window(model, dict(colors), graph)
                return
            v = classes[idx]
            for letter in alphabet:
                if consistent(v, letter):
                    colors[v] = letter
                    yield from assign(idx + 1)
                    del colors[v]

        yield from assign(0)


def to_nearest_neighbor(
    b: Blueprint, fs: PatternSet, budget: Budget = DEFAULT_BUDGET
) -> NNConversion:
    """Re-present a finite pattern set with nearest-neighbor rules.

    Returns the conversion object carrying the ball-letter alphabet (lazy),
    the overlap rules, and the forward/backward sliding-block codes; windows
    of the source and target biject radius for radius (the boundary letters
    are ball-truncated views, see `encode_window`).
    """
    if fs.edge_rule is not None:
        raise BlueprintError("convert an explicit pattern set")
    return NNConversion(b, fs, budget)


# ---------------------------------------------------------------------------
# Periods


def find_period_witness(
    b: Blueprint, window: Window, budget: Budget = DEFAULT_BUDGET
) -> Optional[tuple[Word, EquivalenceVerdict]]:
    """Search for a ball-certified period: a supported word u, provably
    inequivalent to the empty word, whose shift fixes the window on the
    overlap ball.

    Absence of a witness at this radius proves nothing about aperiodicity of
    the ambient subshift; the window is only a finite truncation.
    """
    candidates = sorted(
        (w for w in window.model.support if 0 < len(w) <= window.radius),
        key=b.word_key,
    )
    for u in candidates:
        overlap = window.radius - len(u)
        shifted = window.shift(u)
        if shifted.restrict(overlap) != window.restrict(overlap):
            continue
        verdict = equivalence_query(b, u, EPSILON, budget)
        if verdict.is_not_equivalent:
            return (u, verdict)
    return None
