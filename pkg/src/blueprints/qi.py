"""Pattern transfer along quasi-isometries between two blueprints.

Configurations over the source blueprint are re-encoded over the target: a
letter at a target vertex records up to N source preimages, each carrying a
source state, a color, and two routing tables (where in the target each
source generator moves you, and to which preimage slot you arrive).  Five
window conditions make encoded configurations exactly the bounded-to-one
quasi-isometric codings:

  C0  slot/state consistency inside a letter,
  C1  a coding slot with a short return path exists within radius N,
  C2  routing targets exist, code, and land in the right terminal states,
  C3  coded slots within radius 2N+1 are reachable by short source walks,
  C4  source relations route to equal target positions and slots,
  C5  source-side reads avoid the forbidden patterns.

C1, C2, C4 (and the C5 sets) compile to explicit forbidden patterns; C3's
failure patterns must pin entire routing trees and explode combinatorially
even on a line, so C3 stays a semantic window check with its search bound
recorded (`compile_qi_patterns` reports it as deferred).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .core import (
    Blueprint,
    BlueprintError,
    Budget,
    BudgetExceeded,
    DEFAULT_BUDGET,
    EPSILON,
    PartialModel,
    UndefinedActionError,
    Word,
    equivalence_query,
    model_graph,
    partition_words,
    word_from_text,
    word_to_text,
)
from .subshift import Pattern, PatternSet, Window


class RadiusExhausted(UndefinedActionError):
    """A routing walk ran off the explored ball (distinct from a genuinely
    undefined partial-action step)."""


class InsufficientRadius(UndefinedActionError):
    pass


# ---------------------------------------------------------------------------
# Letters


@dataclass(frozen=True)
class QIComponent:
    """One coded preimage: source state, color, and routing tables.

    `moves[k]`/`slots[k]` are aligned with the source generator order; None
    encodes the no-route marker, slots are 1-based.
    """

    state: str
    letter: str
    moves: tuple[Optional[Word], ...]
    slots: tuple[Optional[int], ...]


@dataclass(frozen=True)
class QILetter:
    components: tuple[Optional[QIComponent], ...]  # None encodes a blank slot

    @property
    def width(self) -> int:
        return len(self.components)

    def slot(self, i: int) -> Optional[QIComponent]:
        """1-based slot access."""
        return self.components[i - 1]

    def coding_slots(self) -> list[int]:
        return [i for i in range(1, self.width + 1) if self.components[i - 1] is not None]

    def __repr__(self):
        parts = []
        for c in self.components:
            if c is None:
                parts.append("*")
            else:
                moves = ",".join(
                    "~" if m is None else (word_to_text(m)) for m in c.moves
                )
                slots = ",".join("~" if j is None else str(j) for j in c.slots)
                parts.append(f"({c.state}/{c.letter}|{moves}|{slots})")
        return "[" + " ".join(parts) + "]"


@dataclass(frozen=True)
class QISetting:
    """The fixed data of a transfer instance: both blueprints, the color
    alphabet, the multiplicity bound N, and the working budget."""

    b1: Blueprint  # target (carrier of the compiled subshift)
    b2: Blueprint  # source (whose patterns are transferred)
    alphabet: tuple[str, ...]
    n: int
    budget: Budget = DEFAULT_BUDGET

    @property
    def move_cap(self) -> int:
        return 2 * self.n

    @property
    def reach_word_bound(self) -> int:
        return self.n * (3 * self.n + 1)

    def blank_letter(self) -> QILetter:
        return QILetter((None,) * self.n)

    def component_ok(self, c: QIComponent) -> bool:
        """Slot/state consistency: a route exists exactly for the source
        generators whose initial state matches the component state."""
        if c.state not in self.b2.states or c.letter not in self.alphabet:
            return False
        if len(c.moves) != len(self.b2.generators) or len(c.slots) != len(self.b2.generators):
            return False
        for k, s in enumerate(self.b2.generators):
            matches = self.b2.initial[s] == c.state
            if (c.moves[k] is not None) != matches or (c.slots[k] is not None) != matches:
                return False
            if c.moves[k] is not None:
                if len(c.moves[k]) > self.move_cap:
                    return False
                if not (1 <= c.slots[k] <= self.n):
                    return False
                for g in c.moves[k]:
                    if g not in self.b1.generators:
                        return False
        return True

    def letter_ok(self, letter: QILetter) -> bool:
        if letter.width != self.n:
            return False
        return all(c is None or self.component_ok(c) for c in letter.components)

    def component_move(self, c: QIComponent, s: str) -> Optional[Word]:
        return c.moves[self.b2.gen_index(s)]

    def component_slot(self, c: QIComponent, s: str) -> Optional[int]:
        return c.slots[self.b2.gen_index(s)]


# ---------------------------------------------------------------------------
# Alphabet enumeration


def count_qi_alphabet(setting: QISetting) -> int:
    """Exact size of the slot-consistent letter alphabet (closed form)."""
    words = sum(len(setting.b1.generators) ** k for k in range(setting.move_cap + 1))
    per_component = 1  # the blank slot
    for m in setting.b2.states:
        matching = sum(1 for s in setting.b2.generators if setting.b2.initial[s] == m)
        per_component += len(setting.alphabet) * (words * setting.n) ** matching
    return per_component ** setting.n


def _all_words_up_to(b: Blueprint, length: int) -> list[Word]:
    out: list[Word] = [EPSILON]
    frontier: list[Word] = [EPSILON]
    for _ in range(length):
        frontier = [w + (s,) for w in frontier for s in b.generators]
        out.extend(frontier)
    return out


def iter_qi_components(setting: QISetting) -> Iterator[Optional[QIComponent]]:
    """Deterministic stream of component options, blank first."""
    yield None
    words = _all_words_up_to(setting.b1, setting.move_cap)
    gens = setting.b2.generators
    for m in setting.b2.states:
        matching = [s for s in gens if setting.b2.initial[s] == m]
        for a in setting.alphabet:
            move_choices = itertools.product(words, repeat=len(matching))
            for moves in move_choices:
                for slots in itertools.product(range(1, setting.n + 1), repeat=len(matching)):
                    mv: list[Optional[Word]] = [None] * len(gens)
                    sl: list[Optional[int]] = [None] * len(gens)
                    for s, w, j in zip(matching, moves, slots):
                        k = gens.index(s)
                        mv[k] = w
                        sl[k] = j
                    yield QIComponent(m, a, tuple(mv), tuple(sl))


def build_qi_alphabet(
    setting: QISetting, cap: Optional[int] = 100000
) -> tuple[int, Iterator[QILetter]]:
    """The slot-consistent letters: exact count plus a lazy deterministic
    stream.  Raises when the count exceeds the cap, reporting the count."""
    total = count_qi_alphabet(setting)
    if cap is not None and total > cap:
        raise BudgetExceeded(
            f"qi alphabet has {total} letters, above the cap {cap}"
        )

    def stream() -> Iterator[QILetter]:
        components = list(iter_qi_components(setting))
        for combo in itertools.product(components, repeat=setting.n):
            yield QILetter(tuple(combo))

    return total, stream()


# ---------------------------------------------------------------------------
# The routed partial action


@dataclass(frozen=True)
class QIPointer:
    """A window over the letter alphabet together with a coding slot."""

    window: Window
    slot: int

    def origin_component(self) -> QIComponent:
        letter = self.window.colors[self.window.graph.class_of[EPSILON]]
        comp = letter.slot(self.slot)
        if comp is None:
            raise UndefinedActionError(f"slot {self.slot} is blank at the origin")
        return comp


def circ_step(setting: QISetting, pointer: QIPointer, s: str) -> Optional[tuple[QIPointer, Word]]:
    """One step of the routed action; None when genuinely undefined,
    RadiusExhausted when the window is too small to follow the route."""
    comp = pointer.origin_component()
    if setting.b2.initial[s] != comp.state:
        return None
    move = setting.component_move(comp, s)
    slot = setting.component_slot(comp, s)
    window = pointer.window
    if window.graph.resolve(EPSILON, move) is None or len(move) > window.radius:
        raise RadiusExhausted(
            f"route {word_to_text(move)} leaves the radius-{window.radius} window"
        )
    return QIPointer(window.shift(move), slot), move


def circ_walk(
    setting: QISetting, pointer: QIPointer, u: Word
) -> Optional[tuple[QIPointer, Word]]:
    """Iterate the routed action along a source word, accumulating the
    target move word; None when some step is genuinely undefined."""
    mov: Word = EPSILON
    cur = pointer
    for s in u:
        step = circ_step(setting, cur, s)
        if step is None:
            return None
        cur, move = step
        mov = mov + move
    return cur, mov


def theta_map(setting: QISetting, window: Window) -> tuple[Word, int]:
    """The smallest coded position: shortlex-first word within radius N,
    then the smallest coding slot there."""
    candidates = sorted(
        (w for w in window.model.support if len(w) <= setting.n),
        key=setting.b1.word_key,
    )
    for w in candidates:
        letter = window.colors[window.graph.class_of[w]]
        slots = letter.coding_slots()
        if slots:
            return (w, slots[0])
    raise BlueprintError(
        "no coded position within radius N: the density condition fails on this ball"
    )


def mu_map(setting: QISetting, pointer: QIPointer, u: Word) -> tuple[Word, int]:
    """The move word and arrival slot for a source word; the fixed sentinel
    (empty word, slot 1) when the walk is genuinely undefined."""
    walk = circ_walk(setting, pointer, u)
    if walk is None:
        return (EPSILON, 1)
    end, mov = walk
    return (mov, end.slot)


def gamma_map(setting: QISetting, pointer: QIPointer, depth: int) -> Window:
    """Read off the coded source window up to the given depth.

    Walks every source word of length <= depth through the routing; blanks
    and mismatched initial states bound the support.  Raises when the target
    window is too small to follow some route.
    """
    b2 = setting.b2
    assignment: dict[Word, str] = {}
    colors_by_word: dict[Word, str] = {}
    frontier: list[tuple[Word, QIPointer]] = [(EPSILON, pointer)]
    comp = pointer.origin_component()
    assignment[EPSILON] = comp.state
    colors_by_word[EPSILON] = comp.letter
    for _ in range(depth):
        nxt = []
        for u, ptr in frontier:
            comp = ptr.origin_component()
            for s in b2.generators:
                if b2.initial[s] != comp.state:
                    continue
                step = circ_step(setting, ptr, s)
                if step is None:
                    continue
                new_ptr, _ = step
                new_comp = new_ptr.origin_component()
                assignment[u + (s,)] = new_comp.state
                colors_by_word[u + (s,)] = new_comp.letter
                nxt.append((u + (s,), new_ptr))
        frontier = nxt
    model = PartialModel(b2, depth, assignment, setting.budget)
    graph = model_graph(model, setting.budget)
    colors: dict[Word, str] = {}
    for w in model.support:
        cls = graph.class_of[w]
        existing = colors.get(cls)
        if existing is not None and existing != colors_by_word[w]:
            raise BlueprintError(
                "routed reads disagree on equivalent source words"
            )
        colors[cls] = colors_by_word[w]
    return Window(model, colors, graph)


# ---------------------------------------------------------------------------
# Quasi-isometry tables and the encoder


class QIMapData:
    """Ball-restricted tables of an injective bounded-to-one quasi-isometry.

    `assignments` maps source class representatives to (target word, slot)
    pairs; `edge_words` maps (source representative, source generator) to
    the target word routing that edge.  Tables are finite data: users supply
    them or use the built-in generators.
    """

    def __init__(
        self,
        assignments: dict[Word, tuple[Word, int]],
        edge_words: dict[tuple[Word, str], Word],
        n: int,
    ):
        self.assignments = dict(assignments)
        self.edge_words = dict(edge_words)
        self.n = n

    def neighbor_rep(self, y_graph, u: Word, s: str) -> Optional[Word]:
        """The table key for u·s: the literal word if keyed, else the class
        representative resolved through the source ball."""
        lit = u + (s,)
        if lit in self.assignments:
            return lit
        r = y_graph.resolve(u, (s,))
        if r is not None and r in self.assignments:
            return r
        return None

    def validate(self, setting: QISetting, y_graph, target_graph) -> None:
        """Injectivity over the covered target ball, the move-length bound,
        and edge compatibility wherever both endpoints resolve.

        Assignments whose image words fall outside the target ball are
        boundary data and only their bounds are checked.
        """
        seen: dict[tuple[Word, int], Word] = {}
        for u, (v, i) in self.assignments.items():
            if not 1 <= i <= self.n:
                raise BlueprintError(f"slot {i} out of range at {word_to_text(u)}")
            tgt = target_graph.class_of.get(v)
            if tgt is None:
                continue
            key = (tgt, i)
            if key in seen:
                raise BlueprintError(
                    f"table not injective: {word_to_text(u)} and {word_to_text(seen[key])} collide"
                )
            seen[key] = u
        for (u, s), w in self.edge_words.items():
            if len(w) > 2 * self.n:
                raise BlueprintError(
                    f"edge word {word_to_text(w)} exceeds the move bound {2 * self.n}"
                )
            if u not in self.assignments:
                raise BlueprintError(f"edge word at unknown class {word_to_text(u)}")
            us = self.neighbor_rep(y_graph, u, s)
            if us is not None:
                v, _ = self.assignments[u]
                v2, _ = self.assignments[us]
                moved = target_graph.resolve(v, w)
                lands = target_graph.class_of.get(v2)
                if moved is not None and lands is not None and moved != lands:
                    raise BlueprintError(
                        f"edge word at ({word_to_text(u)}, {s}) does not land on the image"
                    )


def identity_qi_map(b: Blueprint, radius: int, budget: Budget = DEFAULT_BUDGET) -> QIMapData:
    """The identity coding of a blueprint into itself (one slot).

    The tables cover the given radius plus one fringe step, so windows of
    that radius encode without gaps.  Works on blueprints with a unique
    model (the identity of a multi-model blueprint is per-model data).
    """
    models = list(_models(b, radius + 1, budget))
    if len(models) != 1:
        raise BlueprintError("identity tables need a blueprint with a unique model")
    graph = model_graph(models[0], budget)
    assignments = {v: (v, 1) for v in graph.vertices}
    edge_words = {}
    for v in graph.vertices:
        state = models[0].assignment[v]
        for s in b.generators:
            if b.initial[s] == state:
                edge_words[(v, s)] = (s,)
    return QIMapData(assignments, edge_words, 1)


def _models(b: Blueprint, radius: int, budget: Budget):
    from .core import enumerate_partial_models

    return enumerate_partial_models(b, radius, budget)


def halving_qi_map(z: Blueprint, radius: int, budget: Budget = DEFAULT_BUDGET) -> QIMapData:
    """The two-to-one folding of the line onto itself, n -> floor(n/2).

    Slot 1 carries even positions, slot 2 odd ones; both slots appear at
    every image vertex.
    """
    fwd, bwd = z.generators[0], z.generators[1]

    def rep(k: int) -> Word:
        return (fwd,) * k if k >= 0 else (bwd,) * (-k)

    assignments: dict[Word, tuple[Word, int]] = {}
    edge_words: dict[tuple[Word, str], Word] = {}
    for k in range(-radius - 1, radius + 2):
        image = k // 2
        assignments[rep(k)] = (rep(image), k % 2 + 1)
        edge_words[(rep(k), fwd)] = EPSILON if k % 2 == 0 else (fwd,)
        edge_words[(rep(k), bwd)] = (bwd,) if k % 2 == 0 else EPSILON
    return QIMapData(assignments, edge_words, 2)


def encode_along_qi(
    setting: QISetting,
    qi: QIMapData,
    source_window: Window,
    target_model: PartialModel,
) -> Window:
    """Encode a source window over the letter alphabet along the tables.

    Every target class paired with a slot that is hit by the table carries
    the source state, the color, and the routing data derived from the
    per-edge words; everything else is blank.
    """
    b1, b2 = setting.b1, setting.b2
    target_graph = model_graph(target_model, setting.budget)
    y_graph = source_window.graph
    qi.validate(setting, y_graph, target_graph)
    hits: dict[tuple[Word, int], Word] = {}
    for u, (v, i) in qi.assignments.items():
        tgt = target_graph.class_of.get(v)
        if tgt is None:
            continue  # image beyond the encoded ball
        hits[(tgt, i)] = u

    colors: dict[Word, QILetter] = {}
    for v in target_graph.vertices:
        comps: list[Optional[QIComponent]] = []
        for i in range(1, setting.n + 1):
            u = hits.get((v, i))
            if u is None:
                comps.append(None)
                continue
            if u not in source_window.model.assignment:
                raise BlueprintError(
                    f"source window does not cover the table hit {word_to_text(u)}"
                )
            state = source_window.model.assignment[u]
            letter = source_window.colors[source_window.graph.class_of[u]]
            moves: list[Optional[Word]] = []
            slots: list[Optional[int]] = []
            for s in b2.generators:
                if b2.initial[s] != state:
                    moves.append(None)
                    slots.append(None)
                    continue
                w = qi.edge_words.get((u, s))
                if w is None:
                    raise BlueprintError(
                        f"table gap: no edge word at ({word_to_text(u)}, {s})"
                    )
                us = qi.neighbor_rep(y_graph, u, s)
                if us is None:
                    raise BlueprintError(
                        f"table gap: no assignment for {word_to_text(u)}·{s}"
                    )
                moves.append(w)
                slots.append(qi.assignments[us][1])
            comps.append(QIComponent(state, letter, tuple(moves), tuple(slots)))
        letter = QILetter(tuple(comps))
        if not setting.letter_ok(letter):
            raise BlueprintError(f"encoded letter fails slot consistency at {v}")
        colors[v] = letter
    return Window(target_model, colors, target_graph)


def serialize_qi_map(qi: QIMapData) -> str:
    out = ["[meta]", f"n = {qi.n}", "", "[map]"]
    for u, (v, i) in sorted(qi.assignments.items(), key=lambda kv: (len(kv[0]), kv[0])):
        out.append(f"{word_to_text(u)} -> {word_to_text(v)} {i}")
    out.append("")
    out.append("[edges]")
    for (u, s), w in sorted(qi.edge_words.items(), key=lambda kv: (len(kv[0][0]), kv[0])):
        out.append(f"{word_to_text(u)} {s} -> {word_to_text(w)}")
    return "\n".join(out) + "\n"


def parse_qi_map(text: str) -> QIMapData:
    n = 1
    assignments: dict[Word, tuple[Word, int]] = {}
    edge_words: dict[tuple[Word, str], Word] = {}
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
            if key.strip() == "n":
                n = int(value)
        elif section == "map":
            left, _, right = line.partition("->")
            parts = right.split()
            assignments[word_from_text(left)] = (
                word_from_text(" ".join(parts[:-1])),
                int(parts[-1]),
            )
        elif section == "edges":
            left, _, right = line.partition("->")
            tokens = left.split()
            u, s = tuple(tokens[:-1]), tokens[-1]
            if u == ('""',):
                u = EPSILON
            edge_words[(u, s)] = word_from_text(right)
        else:
            raise BlueprintError(f"content outside sections: {line!r}")
    return QIMapData(assignments, edge_words, n)


# ---------------------------------------------------------------------------
# Semantic window checks (C0-C5, ball-restricted)


def check_qi_window(
    setting: QISetting,
    window: Window,
    fs: PatternSet,
    check_reach: bool = True,
) -> list[str]:
    """Validate the five conditions where the window is large enough to
    decide them; boundary positions whose supporting region leaves the ball
    are skipped (the window is a truncation, not a counterexample)."""
    problems: list[str] = []
    b1, b2 = setting.b1, setting.b2
    graph = window.graph
    n = setting.n

    for v in graph.vertices:
        letter = window.colors[v]
        if not setting.letter_ok(letter):
            problems.append(f"C0 fails at {word_to_text(v)}")

    # C1 wherever the whole radius-N forward ball around the class resolves:
    # some relative word with a length-<=N return carries a coding slot
    returning = _returning_words(setting)
    for v in graph.vertices:
        _, complete = _forward_ball(window, v, n)
        if not complete:
            continue
        witnessed = False
        for w in returning:
            c = graph.resolve(v, w)
            if c is not None and window.colors[c].coding_slots():
                witnessed = True
                break
        if not witnessed:
            problems.append(f"C1 fails at {word_to_text(v)}")

    # C2 at every coded slot whose route resolves
    for v in graph.vertices:
        letter = window.colors[v]
        for i in letter.coding_slots():
            comp = letter.slot(i)
            for s in b2.generators:
                if b2.initial[s] != comp.state:
                    continue
                move = setting.component_move(comp, s)
                slot = setting.component_slot(comp, s)
                target = graph.resolve(v, move)
                if target is None:
                    continue
                tcomp = window.colors[target].slot(slot)
                if tcomp is None:
                    problems.append(
                        f"C2 fails at {word_to_text(v)} slot {i} via {s}: blank target"
                    )
                elif tcomp.state not in b2.terminal[s]:
                    problems.append(
                        f"C2 fails at {word_to_text(v)} slot {i} via {s}: bad state"
                    )

    # C3 anchored at classes whose walk region resolves
    if check_reach:
        problems.extend(_check_reachability(setting, window))

    # C4 for every relation whose two walks stay inside the window
    for v in graph.vertices:
        letter = window.colors[v]
        for i in letter.coding_slots():
            pointer = QIPointer(_window_at(window, v), i)
            for u, w in b2.relations:
                try:
                    walk_u = circ_walk(setting, pointer, u)
                    walk_w = circ_walk(setting, pointer, w)
                except RadiusExhausted:
                    continue
                if walk_u is None or walk_w is None:
                    continue
                (end_u, mov_u), (end_w, mov_w) = walk_u, walk_w
                if end_u.slot != end_w.slot:
                    problems.append(
                        f"C4 fails at {word_to_text(v)} slot {i}: slots diverge on "
                        f"{word_to_text(u)} = {word_to_text(w)}"
                    )
                elif equivalence_query(b1, mov_u, mov_w, setting.budget).is_not_equivalent:
                    problems.append(
                        f"C4 fails at {word_to_text(v)} slot {i}: moves diverge on "
                        f"{word_to_text(u)} = {word_to_text(w)}"
                    )

    # C5: every routed read avoids the forbidden patterns
    for v in graph.vertices:
        letter = window.colors[v]
        for i in letter.coding_slots():
            pointer = QIPointer(_window_at(window, v), i)
            for p in fs.patterns:
                if _pattern_read(setting, pointer, p):
                    problems.append(
                        f"C5 fails at {word_to_text(v)} slot {i}"
                    )
    return problems


def _window_at(window: Window, v: Word) -> Window:
    return window.shift(v) if v != EPSILON else window


def _forward_ball(window: Window, v: Word, depth: int) -> tuple[list[Word], bool]:
    """Classes reachable from v by words of length <= depth; complete marks
    that no route left the explored ball."""
    seen = {v}
    frontier = [v]
    complete = True
    for _ in range(depth):
        nxt = []
        for c in frontier:
            state = window.model.assignment[c]
            for s in window.blueprint.generators:
                if window.blueprint.initial[s] != state:
                    continue
                t = window.graph.resolve(c, (s,))
                if t is None:
                    complete = False
                    continue
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return list(seen), complete


def _returning_words(setting: QISetting) -> list[Word]:
    """Words w of length <= N admitting w' of length <= N with ww' provably
    equivalent to the empty word (a translation-invariant property)."""
    out = []
    short = _all_words_up_to(setting.b1, setting.n)
    for w in short:
        if not setting.b1.is_consistent_word(w):
            continue
        for w2 in short:
            if not setting.b1.is_consistent_word(w + w2):
                continue
            if equivalence_query(setting.b1, w + w2, EPSILON, setting.budget).is_equivalent:
                out.append(w)
                break
    return out


def _check_reachability(setting: QISetting, window: Window) -> list[str]:
    problems = []
    b1, b2 = setting.b1, setting.b2
    graph = window.graph
    eps_cls = graph.class_of[EPSILON]
    letter0 = window.colors[eps_cls]
    targets = []
    for v in window.model.support:
        if len(v) > 2 * setting.n + 1:
            continue
        cls = graph.class_of[v]
        for j in window.colors[cls].coding_slots():
            targets.append((v, cls, j))
    for i in letter0.coding_slots():
        reached: set[tuple[Word, int]] = {(eps_cls, i)}
        frontier = [(QIPointer(window, i), EPSILON)]
        visited: set[tuple[Optional[Word], int]] = {(eps_cls, i)}
        exhausted = False
        for _ in range(setting.reach_word_bound):
            nxt = []
            for ptr, mov in frontier:
                for s in b2.generators:
                    try:
                        step = circ_step(setting, ptr, s)
                    except RadiusExhausted:
                        exhausted = True
                        continue
                    if step is None:
                        continue
                    new_ptr, move = step
                    new_mov = mov + move
                    cls = graph.resolve(EPSILON, new_mov)
                    if cls is not None:
                        reached.add((cls, new_ptr.slot))
                        if (cls, new_ptr.slot) in visited:
                            continue  # routed state already expanded
                        visited.add((cls, new_ptr.slot))
                    if len(new_mov) <= window.radius:
                        nxt.append((new_ptr, new_mov))
            frontier = nxt
        for v, cls, j in targets:
            if (cls, j) not in reached and not exhausted:
                problems.append(
                    f"C3 fails from slot {i}: ({word_to_text(v)}, {j}) unreachable"
                )
    return problems


def _pattern_read(setting: QISetting, pointer: QIPointer, p: Pattern) -> bool:
    """True when every cell of the source pattern is routed to and matches."""
    for u, (m, a) in p.cells:
        try:
            walk = circ_walk(setting, pointer, u)
        except RadiusExhausted:
            return False
        if walk is None:
            return False
        end, _mov = walk
        comp = end.origin_component()
        if (comp.state, comp.letter) != (m, a):
            return False
    return True


# ---------------------------------------------------------------------------
# Pattern compilation


@dataclass
class QICompilation:
    """Compiled forbidden patterns, per condition family.

    `deferred` names the families that are enforced by the semantic checker
    instead of explicit patterns, with their recorded search bounds.
    """

    setting: QISetting
    c1: tuple[Pattern, ...]
    c2: tuple[Pattern, ...]
    c4: tuple[Pattern, ...]
    c5: tuple[tuple[Pattern, ...], ...]  # one tuple per source pattern
    deferred: dict[str, str] = field(default_factory=dict)
    truncated_families: tuple[str, ...] = ()

    @property
    def alphabet_count(self) -> int:
        return count_qi_alphabet(self.setting)

    def pattern_set(self) -> PatternSet:
        flat = list(self.c1) + list(self.c2) + list(self.c4)
        for tp in self.c5:
            flat.extend(tp)
        return PatternSet(
            ("<qi-letters>",),
            flat,
            name="qi-compiled",
        )


def tp_bound(setting: QISetting, p: Pattern) -> int:
    """The compiled-size bound for one source pattern's family.

    A pattern occupying only the empty word still pins one routed cell, so
    the exponent uses at least one step.
    """
    b = count_qi_alphabet(setting) * len(setting.b1.states) + 1
    return b ** (setting.n * max(1, p.max_word_length))


def _coding_components(setting: QISetting, cap: int) -> list[QIComponent]:
    comps = [c for c in iter_qi_components(setting) if c is not None]
    if len(comps) > cap:
        raise BudgetExceeded(f"component enumeration exceeds cap {cap}")
    return comps


def _letters_with_component(
    setting: QISetting, comp: QIComponent, i: int, others: Sequence[Optional[QIComponent]]
) -> Iterator[QILetter]:
    """All letters carrying `comp` at slot i, others ranging over the given
    options (used to keep family sizes manageable for width one)."""
    slots: list[list[Optional[QIComponent]]] = []
    for k in range(setting.n):
        if k == i - 1:
            slots.append([comp])
        else:
            slots.append(list(others))
    for combo in itertools.product(*slots):
        yield QILetter(tuple(combo))


def compile_qi_patterns(
    setting: QISetting,
    fs: PatternSet,
    max_family: int = 100000,
) -> QICompilation:
    """Compile the window conditions into forbidden patterns over the letter
    alphabet.

    C1, C2 and C4 are materialized (the letter alphabet must fit the cap);
    the reachability family C3 is recorded as deferred with its bound, and
    each source pattern contributes its routed-read family (C5).  A streamed
    source (any iterable of patterns) streams through `stream_c5`.
    """
    n = setting.n
    if n != 1:
        # Width > 1 multiplies every family by the free-slot choices; the
        # semantic checker stays available at any width.
        raise BudgetExceeded(
            "pattern compilation is materialized for width 1 only; "
            "use check_qi_window for wider instances"
        )
    b1, b2 = setting.b1, setting.b2
    comps = _coding_components(setting, max_family)
    blank = setting.blank_letter()

    def single(comp: Optional[QIComponent]) -> QILetter:
        return QILetter((comp,))

    # --- C1: on every radius-N state shape, all returnable supported cells blank
    c1: list[Pattern] = []
    from .core import enumerate_partial_models

    for psi in enumerate_partial_models(b1, n, setting.budget):
        returnable = []
        free = []
        for w in psi.support:
            if any(
                equivalence_query(b1, w + w2, EPSILON, setting.budget).is_equivalent
                for w2 in _all_words_up_to(b1, n)
            ):
                returnable.append(w)
            else:
                free.append(w)
        if not returnable:
            continue  # no pattern can witness the failure on this shape
        if free:
            options = [blank] + [single(c) for c in comps]
            combos = itertools.product(options, repeat=len(free))
        else:
            combos = [()]
        for combo in combos:
            cells = {w: (psi.assignment[w], blank) for w in returnable}
            for w, letter in zip(free, combo):
                cells[w] = (psi.assignment[w], letter)
            c1.append(Pattern.of(cells))
            if len(c1) > max_family:
                raise BudgetExceeded(f"C1 family exceeds cap {max_family}")

    # --- C2: a coded slot routes to a blank or ill-stated slot
    c2: list[Pattern] = []
    for comp in comps:
        for s in b2.generators:
            if b2.initial[s] != comp.state:
                continue
            move = setting.component_move(comp, s)
            if move == EPSILON:
                # the route stays put: the slot itself must satisfy the
                # terminal condition
                if comp.state not in b2.terminal[s]:
                    for m1 in b1.states:
                        c2.append(Pattern.of({EPSILON: (m1, single(comp))}))
                continue
            bad_letters = [blank] + [
                single(c) for c in comps if c.state not in b2.terminal[s]
            ]
            for m1 in b1.states:
                for m2 in b1.states:
                    for bad in bad_letters:
                        c2.append(
                            Pattern.of({EPSILON: (m1, single(comp)), move: (m2, bad)})
                        )
                        if len(c2) > max_family:
                            raise BudgetExceeded(f"C2 family exceeds cap {max_family}")

    # --- C4: relation walks with diverging moves or slots
    c4: list[Pattern] = []
    seen_c4 = set()
    for u, v in b2.relations:
        for cells, mov_u, mov_v, slot_u, slot_v in _relation_walks(setting, comps, u, v):
            bad = slot_u != slot_v or equivalence_query(
                b1, mov_u, mov_v, setting.budget
            ).is_not_equivalent
            if bad:
                for m_choice in itertools.product(b1.states, repeat=len(cells)):
                    pattern_cells = {
                        w: (m, single(comp))
                        for (w, comp), m in zip(sorted(cells.items()), m_choice)
                    }
                    pattern = Pattern.of(pattern_cells)
                    if pattern in seen_c4:
                        continue
                    seen_c4.add(pattern)
                    c4.append(pattern)
                    if len(c4) > max_family:
                        raise BudgetExceeded(f"C4 family exceeds cap {max_family}")

    # --- C5 per source pattern
    c5 = tuple(tuple(stream_c5(setting, comps, p, max_family)) for p in fs.patterns)

    return QICompilation(
        setting=setting,
        c1=tuple(c1),
        c2=tuple(c2),
        c4=tuple(c4),
        c5=c5,
        deferred={
            "C3": (
                "reachability within source words of length "
                f"<= {setting.reach_word_bound} for targets within radius "
                f"{2 * setting.n + 1}; enforced by check_qi_window"
            )
        },
    )


def _relation_walks(
    setting: QISetting, comps: Sequence[QIComponent], u: Word, v: Word
) -> Iterator[tuple[dict[Word, QIComponent], Word, Word, int, int]]:
    """Decorated walk pairs for a relation, sharing the start letter.

    Yields (cells, move word of the u-walk, move word of the v-walk, final
    slots); cells map target position words to the component pinned there.
    Only positions a walk still steps from are pinned: the arrival cell of
    the last step contributes nothing to the move word or the final slot.
    """

    def walks(word: Word, cells: dict[Word, QIComponent], pos: Word, slot: int):
        if not word:
            yield cells, pos, slot
            return
        s, rest = word[0], word[1:]
        comp = cells[pos]
        if setting.b2.initial[s] != comp.state:
            return
        move = setting.component_move(comp, s)
        new_slot = setting.component_slot(comp, s)
        new_pos = pos + move
        if not rest:
            yield cells, new_pos, new_slot
            return
        if new_pos in cells:
            yield from walks(rest, cells, new_pos, new_slot)
        else:
            for nxt in comps:
                if nxt.state not in setting.b2.terminal[s]:
                    continue
                new_cells = dict(cells)
                new_cells[new_pos] = nxt
                yield from walks(rest, new_cells, new_pos, new_slot)

    for start in comps:
        base = {EPSILON: start}
        for cells_u, pos_u, slot_u in walks(u, dict(base), EPSILON, 1):
            for cells_uv, pos_v, slot_v in walks(v, dict(cells_u), EPSILON, 1):
                yield cells_uv, pos_u, pos_v, slot_u, slot_v


def stream_c5(
    setting: QISetting,
    comps: Sequence[QIComponent],
    p: Pattern,
    max_family: int = 100000,
) -> Iterator[Pattern]:
    """The routed-read family of one source pattern: every decorated tuple
    of walks from a shared start that ends on the pattern's cells."""
    b1 = setting.b1
    support = list(p.support)

    def walk_all(idx: int, cells: dict[Word, QIComponent]) -> Iterator[dict[Word, QIComponent]]:
        if idx == len(support):
            yield cells
            return
        u = support[idx]
        target_cell = p.value(u)

        def advance(word: Word, cur_cells: dict[Word, QIComponent], pos: Word):
            if not word:
                comp = cur_cells[pos]
                if (comp.state, comp.letter) == target_cell:
                    yield cur_cells
                return
            s, rest = word[0], word[1:]
            comp = cur_cells[pos]
            if setting.b2.initial[s] != comp.state:
                return
            move = setting.component_move(comp, s)
            new_pos = pos + move
            if new_pos in cur_cells:
                yield from advance(rest, cur_cells, new_pos)
            else:
                for nxt in comps:
                    if nxt.state not in setting.b2.terminal[s]:
                        continue
                    new_cells = dict(cur_cells)
                    new_cells[new_pos] = nxt
                    yield from advance(rest, new_cells, new_pos)

        for filled in advance(u, cells, EPSILON):
            yield from walk_all(idx + 1, filled)

    emitted = 0
    seen = set()
    for start in comps:
        for cells in walk_all(0, {EPSILON: start}):
            for m_choice in itertools.product(b1.states, repeat=len(cells)):
                pattern = Pattern.of(
                    {
                        w: (m, QILetter((comp,)))
                        for (w, comp), m in zip(sorted(cells.items()), m_choice)
                    }
                )
                if pattern in seen:
                    continue
                seen.add(pattern)
                emitted += 1
                if emitted > max_family:
                    raise BudgetExceeded(f"C5 family exceeds cap {max_family}")
                yield pattern
