"""Blueprint algebra: presentations, consistent words, bounded equivalence,
partial models, and model graphs.

A blueprint is a finite presentation (states, generators with initial state
and terminal-state sets, relations between generator words).  Every question
about word equivalence is only semi-decidable, so the engine here works with
explicit budgets and three-valued verdicts.  Positive verdicts carry a
rewrite chain that can be re-verified step by step; negative verdicts are
only emitted when they are provably sound (complete closure below the length
bound, or a separating abelian invariant).
"""

from __future__ import annotations

import hashlib
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Sequence

Word = tuple[str, ...]
EPSILON: Word = ()


class BlueprintError(ValueError):
    """Malformed blueprint data (bad labels, empty terminal sets, ...)."""


class UndefinedActionError(ValueError):
    """A partial action was applied outside its domain."""


class BudgetExceeded(RuntimeError):
    """An enumeration or search hit its explicit budget.

    Raised instead of silently truncating output; `detail` names the cap.
    """

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


@dataclass(frozen=True)
class Budget:
    """Caps for the bounded rewriting closure.

    max_word_length bounds the length of intermediate words explored;
    max_steps bounds the number of words visited per closure.
    """

    max_word_length: int = 12
    max_steps: int = 20000

    def wider(self, factor: int = 2) -> "Budget":
        return Budget(self.max_word_length + 2, self.max_steps * factor)


DEFAULT_BUDGET = Budget()


def word_from_text(text: str) -> Word:
    """Parse a space-separated generator word; '' denotes the empty word."""
    text = text.strip()
    if text in ("", '""', "''"):
        return EPSILON
    return tuple(text.split())


def word_to_text(word: Word) -> str:
    return " ".join(word) if word else '""'


# ---------------------------------------------------------------------------
# Blueprints


class Blueprint:
    """A finite presentation of a family of labeled directed graphs.

    `relations` holds explicit word pairs.  `relation_family`, when present,
    is an additional implicit family with a decidable membership test (used
    by patch blueprints, whose full relation set is far too large to list);
    it must only contain pairs that are genuinely in the intended relation
    set, and is consulted by the equivalence engine as a fast path.
    """

    def __init__(
        self,
        states: Sequence[str],
        generators: Sequence[str],
        initial: dict[str, str],
        terminal: dict[str, Iterable[str]],
        relations: Iterable[tuple[Word, Word]] = (),
        name: str = "",
        minimal: bool = False,
        valuation: Optional[dict[str, tuple[Fraction, ...]]] = None,
        relation_family: Optional["RelationFamily"] = None,
        metadata: Optional[dict] = None,
    ):
        if not states:
            raise BlueprintError("state set is empty")
        if not generators:
            raise BlueprintError("generator set is empty")
        if len(set(states)) != len(states):
            raise BlueprintError("duplicate state name")
        if len(set(generators)) != len(generators):
            raise BlueprintError("duplicate generator name")
        self.states = tuple(states)
        self.generators = tuple(generators)
        self.name = name
        self.minimal = minimal
        self.valuation = dict(valuation) if valuation else None
        self.relation_family = relation_family
        self.metadata = dict(metadata or {})
        self._state_index = {m: i for i, m in enumerate(self.states)}
        self._gen_index = {s: i for i, s in enumerate(self.generators)}

        self.initial = {}
        self.terminal = {}
        for s in self.generators:
            if s not in initial:
                raise BlueprintError(f"generator {s!r} has no initial state")
            if initial[s] not in self._state_index:
                raise BlueprintError(f"unknown state {initial[s]!r} for generator {s!r}")
            term = tuple(dict.fromkeys(terminal.get(s, ())))
            if not term:
                raise BlueprintError(f"generator {s!r} has empty terminal set")
            for m in term:
                if m not in self._state_index:
                    raise BlueprintError(f"unknown state {m!r} in terminal set of {s!r}")
            self.initial[s] = initial[s]
            self.terminal[s] = term

        rels = []
        for u, v in relations:
            u, v = tuple(u), tuple(v)
            for w in (u, v):
                for s in w:
                    if s not in self._gen_index:
                        raise BlueprintError(f"unknown generator {s!r} in relation")
                if not self.is_consistent_word(w):
                    raise BlueprintError(
                        f"relation word {word_to_text(w)!r} is not consistent"
                    )
            if u and v and self.initial[u[0]] != self.initial[v[0]]:
                raise BlueprintError(
                    f"relation sides {word_to_text(u)!r}, {word_to_text(v)!r} "
                    "have different initial states"
                )
            rels.append((u, v))
        self.relations = tuple(rels)

        if self.valuation is not None:
            for u, v in self.relations:
                if self.word_valuation(u) != self.word_valuation(v):
                    raise BlueprintError("relation does not preserve the valuation")

        self._abelian_span: Optional[list] = None
        self._structural_key = (
            self.states,
            self.generators,
            tuple(sorted(self.initial.items())),
            tuple(sorted((s, t) for s, t in self.terminal.items())),
            self.relations,
            self.relation_family.describe() if self.relation_family else None,
        )

    def __eq__(self, other):
        return (
            isinstance(other, Blueprint)
            and self._structural_key == other._structural_key
        )

    def __hash__(self):
        if not hasattr(self, "_hash"):
            self._hash = hash(self._structural_key)
        return self._hash

    # -- basic structure ---------------------------------------------------

    def gen_index(self, s: str) -> int:
        try:
            return self._gen_index[s]
        except KeyError:
            raise BlueprintError(f"unknown generator label {s!r}") from None

    def state_index(self, m: str) -> int:
        try:
            return self._state_index[m]
        except KeyError:
            raise BlueprintError(f"unknown state label {m!r}") from None

    def word_key(self, w: Word):
        """Length-first lexicographic key; generator order = declaration order."""
        return (len(w), tuple(self._gen_index[s] for s in w))

    def is_consistent_word(self, w: Word) -> bool:
        for s in w:
            if s not in self._gen_index:
                raise BlueprintError(f"unknown generator label {s!r}")
        for a, b in zip(w, w[1:]):
            if self.initial[b] not in self.terminal[a]:
                return False
        return True

    def word_valuation(self, w: Word) -> Optional[tuple[Fraction, ...]]:
        if self.valuation is None:
            return None
        dim = len(next(iter(self.valuation.values()))) if self.valuation else 0
        total = [Fraction(0)] * dim
        for s in w:
            for i, c in enumerate(self.valuation[s]):
                total[i] += c
        return tuple(total)

    def quotient(self, extra_relations: Iterable[tuple[Word, Word]], name: str = "") -> "Blueprint":
        """Load-time quotient: union of relation sets, same states/generators."""
        return Blueprint(
            self.states,
            self.generators,
            self.initial,
            self.terminal,
            tuple(self.relations) + tuple((tuple(u), tuple(v)) for u, v in extra_relations),
            name=name or (self.name + "/quotient"),
            minimal=self.minimal,
            valuation=self.valuation,
            relation_family=self.relation_family,
            metadata=self.metadata,
        )

    def all_relations(self, length_cap: Optional[int] = None) -> Iterator[tuple[Word, Word]]:
        """Explicit relations, then implicit-family members up to the cap."""
        seen = set(self.relations)
        yield from self.relations
        if self.relation_family is not None:
            for u, v in self.relation_family.enumerate(self, length_cap):
                if (u, v) not in seen:
                    seen.add((u, v))
                    yield (u, v)

    # -- abelian invariant ---------------------------------------------------

    def _letter_counts(self, w: Word) -> tuple[Fraction, ...]:
        counts = [Fraction(0)] * len(self.generators)
        for s in w:
            counts[self._gen_index[s]] += 1
        return tuple(counts)

    def _abelian_basis(self) -> list:
        # Row-reduced basis of the Q-span of relation count-differences.
        if self._abelian_span is None:
            rows: list[list[Fraction]] = []
            for u, v in self.relations:
                cu, cv = self._letter_counts(u), self._letter_counts(v)
                rows.append([a - b for a, b in zip(cu, cv)])
            self._abelian_span = _row_reduce(rows)
        return self._abelian_span

    def abelian_residue(self, w: Word) -> Optional[tuple]:
        """Class invariant: letter counts reduced modulo the relation span.

        Equivalent words share the residue, so distinct residues prove
        inequivalence.  With an implicit relation family the listed span is
        incomplete and the valuation is the residue instead (None when no
        valuation is available: everything lands in one bucket).
        """
        if self.relation_family is not None:
            return self.word_valuation(w)
        return tuple(_reduce_by(self._abelian_basis(), self._letter_counts(w)))

    def abelian_separates(self, u: Word, v: Word) -> bool:
        """True when u, v are provably inequivalent by a linear invariant.

        Sound: every similarity step changes letter counts by a relation
        difference, so equivalent words have count difference inside the
        relation span.
        """
        ru, rv = self.abelian_residue(u), self.abelian_residue(v)
        if ru is None or rv is None:
            return False
        return ru != rv

    # -- hashing / io --------------------------------------------------------

    def digest(self) -> str:
        return hashlib.sha256(serialize_blueprint(self).encode()).hexdigest()[:16]

    def __repr__(self):
        return (
            f"Blueprint({self.name or 'anonymous'}: |M|={len(self.states)}, "
            f"|S|={len(self.generators)}, |R|={len(self.relations)})"
        )


class RelationFamily:
    """Implicit relation family with decidable membership.

    `contains(b, u, v)` must answer exactly; `enumerate(b, cap)` yields the
    members with |u|+|v| bounded by the cap (used by certificate checkers).
    """

    def contains(self, b: Blueprint, u: Word, v: Word) -> bool:  # pragma: no cover
        raise NotImplementedError

    def enumerate(self, b: Blueprint, length_cap: Optional[int]) -> Iterator[tuple[Word, Word]]:
        raise NotImplementedError

    def describe(self) -> str:
        return self.__class__.__name__


def _row_reduce(rows: list) -> list:
    basis: list[list[Fraction]] = []
    for row in rows:
        row = list(row)
        for b in basis:
            pivot = next(i for i, x in enumerate(b) if x != 0)
            if row[pivot] != 0:
                factor = row[pivot] / b[pivot]
                row = [x - factor * y for x, y in zip(row, b)]
        if any(x != 0 for x in row):
            basis.append(row)
    return basis


def _reduce_by(basis: list, vec) -> list:
    row = list(vec)
    for b in basis:
        pivot = next(i for i, x in enumerate(b) if x != 0)
        if row[pivot] != 0:
            factor = row[pivot] / b[pivot]
            row = [x - factor * y for x, y in zip(row, b)]
    return row


# ---------------------------------------------------------------------------
# Blueprint file format (sectioned text; see README)


def parse_blueprint(text: str, name: str = "") -> Blueprint:
    """Parse the sectioned blueprint format.

    [states]      whitespace-separated state labels
    [generators]  lines `name = initial -> t1 t2 ...`
    [relations]   lines `u = v` with words space-separated, '""' for epsilon
    [meta]        optional `key = value` lines (minimal, name, valuation.<g>)
    """
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = re.fullmatch(r"\[(\w+)\]", line.strip())
        if m:
            current = m.group(1)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise BlueprintError(f"content before first section: {line!r}")
        sections[current].append(line.strip())

    if "states" not in sections or "generators" not in sections:
        raise BlueprintError("blueprint file needs [states] and [generators]")

    states: list[str] = []
    for line in sections["states"]:
        states.extend(line.split())

    generators, initial, terminal = [], {}, {}
    for line in sections["generators"]:
        m = re.fullmatch(r"(\S+)\s*=\s*(\S+)\s*->\s*(.*)", line)
        if not m:
            raise BlueprintError(f"bad generator line: {line!r}")
        gname, init, terms = m.group(1), m.group(2), m.group(3).split()
        if gname in initial:
            raise BlueprintError(f"duplicate generator name {gname!r}")
        generators.append(gname)
        initial[gname] = init
        terminal[gname] = terms

    relations = []
    for line in sections.get("relations", []):
        left, sep, right = line.partition("=")
        if not sep:
            raise BlueprintError(f"bad relation line: {line!r}")
        relations.append((word_from_text(left), word_from_text(right)))

    minimal = False
    meta_name = name
    valuation: dict[str, tuple[Fraction, ...]] = {}
    for line in sections.get("meta", []):
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise BlueprintError(f"bad meta line: {line!r}")
        if key == "minimal":
            minimal = value.lower() in ("1", "true", "yes")
        elif key == "name":
            meta_name = value
        elif key.startswith("valuation."):
            valuation[key[len("valuation."):]] = tuple(
                Fraction(part) for part in value.split()
            )
    return Blueprint(
        states, generators, initial, terminal, relations,
        name=meta_name, minimal=minimal, valuation=valuation or None,
    )


def serialize_blueprint(b: Blueprint) -> str:
    out = ["[states]", " ".join(b.states), "", "[generators]"]
    for s in b.generators:
        out.append(f"{s} = {b.initial[s]} -> {' '.join(b.terminal[s])}")
    out.append("")
    out.append("[relations]")
    for u, v in b.relations:
        out.append(f"{word_to_text(u)} = {word_to_text(v)}")
    out.append("")
    out.append("[meta]")
    if b.name:
        out.append(f"name = {b.name}")
    out.append(f"minimal = {'true' if b.minimal else 'false'}")
    if b.valuation:
        for s in b.generators:
            vals = " ".join(str(c) for c in b.valuation[s])
            out.append(f"valuation.{s} = {vals}")
    return "\n".join(out) + "\n"


def check_consistent_word(b: Blueprint, w: Word) -> bool:
    return b.is_consistent_word(tuple(w))


# ---------------------------------------------------------------------------
# Bounded equivalence


@dataclass(frozen=True)
class ChainStep:
    """One similarity step: word -> next via relation applied at position."""

    word: Word
    position: int
    relation: tuple[Word, Word]
    reversed_: bool
    result: Word


@dataclass(frozen=True)
class EquivalenceVerdict:
    kind: str  # "equivalent" | "not_equivalent" | "unknown"
    chain: tuple[ChainStep, ...] = ()
    reason: str = ""

    @property
    def is_equivalent(self) -> bool:
        return self.kind == "equivalent"

    @property
    def is_not_equivalent(self) -> bool:
        return self.kind == "not_equivalent"

    @property
    def is_unknown(self) -> bool:
        return self.kind == "unknown"


def verify_chain(b: Blueprint, u: Word, v: Word, chain: Sequence[ChainStep]) -> bool:
    """Re-check an equivalence chain step by step, independently of the search."""
    cur = u
    for step in chain:
        if step.word != cur:
            return False
        lhs, rhs = step.relation
        if step.reversed_:
            lhs, rhs = rhs, lhs
        if not _relation_known(b, step.relation):
            return False
        i = step.position
        if cur[i:i + len(lhs)] != lhs:
            return False
        nxt = cur[:i] + rhs + cur[i + len(lhs):]
        if nxt != step.result or not b.is_consistent_word(nxt):
            return False
        cur = nxt
    return cur == v


def _relation_known(b: Blueprint, rel: tuple[Word, Word]) -> bool:
    if rel in b.relations:
        return True
    if b.relation_family is not None:
        return b.relation_family.contains(b, rel[0], rel[1])
    return False


def _rewrites(b: Blueprint, w: Word, max_len: int) -> Iterator[ChainStep]:
    """All one-step similarity moves from w within the length bound.

    Applies each explicit relation in both directions at every position;
    results that are inconsistent words are not similar and are skipped.
    """
    for rel in b.relations:
        for lhs, rhs, reversed_ in ((rel[0], rel[1], False), (rel[1], rel[0], True)):
            step_len = len(w) - len(lhs) + len(rhs)
            if step_len > max_len:
                continue
            limit = len(w) - len(lhs)
            for i in range(limit + 1):
                if w[i:i + len(lhs)] == lhs:
                    res = w[:i] + rhs + w[i + len(lhs):]
                    if b.is_consistent_word(res):
                        yield ChainStep(w, i, rel, reversed_, res)


def _closure(
    b: Blueprint,
    start: Word,
    budget: Budget,
    targets: Optional[set[Word]] = None,
    find_all: bool = False,
) -> tuple[dict[Word, Optional[ChainStep]], bool]:
    """Bounded BFS closure of the similarity relation from `start`.

    Returns (parents, complete).  `parents[w]` is the step that produced w
    (None for the start word).  `complete` is True when no rewrite was
    skipped for the length bound and the frontier was exhausted within the
    step budget, i.e. the visited set is the entire equivalence class.
    With `targets` the search stops once the first target is found (or, with
    find_all, once every target has been found).
    """
    parents: dict[Word, Optional[ChainStep]] = {start: None}
    remaining = set(targets) - {start} if targets is not None else None
    queue = deque([start])
    complete = True
    steps = 0
    while queue:
        w = queue.popleft()
        steps += 1
        if steps > budget.max_steps:
            return parents, False
        for rel in b.relations:
            for lhs, rhs, reversed_ in ((rel[0], rel[1], False), (rel[1], rel[0], True)):
                limit = len(w) - len(lhs)
                for i in range(limit + 1):
                    if w[i:i + len(lhs)] != lhs:
                        continue
                    res = w[:i] + rhs + w[i + len(lhs):]
                    if len(res) > budget.max_word_length:
                        complete = False
                        continue
                    if res in parents or not b.is_consistent_word(res):
                        continue
                    parents[res] = ChainStep(w, i, rel, reversed_, res)
                    if remaining is not None and res in remaining:
                        remaining.discard(res)
                        if not find_all or not remaining:
                            return parents, complete
                    queue.append(res)
    return parents, complete


def _chain_from_parents(parents: dict, end: Word) -> tuple[ChainStep, ...]:
    chain = []
    cur = end
    while parents[cur] is not None:
        step = parents[cur]
        chain.append(step)
        cur = step.word
    chain.reverse()
    return tuple(chain)


def equivalence_query(
    b: Blueprint, u: Word, v: Word, budget: Budget = DEFAULT_BUDGET
) -> EquivalenceVerdict:
    """Semi-decide whether u and v are equivalent under the blueprint.

    Verdicts are monotone in the budget: `unknown` may later resolve, the
    definite verdicts never flip.  Positive verdicts carry a similarity
    chain; negative verdicts require a fully explored class or a separating
    invariant.
    """
    u, v = tuple(u), tuple(v)
    for w in (u, v):
        if not b.is_consistent_word(w):
            raise UndefinedActionError(f"word {word_to_text(w)!r} is not consistent")
    if u == v:
        return EquivalenceVerdict("equivalent", (), "identical words")
    if b.relation_family is not None and b.relation_family.contains(b, u, v):
        rel = (u, v)
        step = ChainStep(u, 0, rel, False, v)
        return EquivalenceVerdict("equivalent", (step,), "direct relation")
    if not b.relations and b.relation_family is None:
        return EquivalenceVerdict("not_equivalent", (), "empty relation set")
    if b.abelian_separates(u, v):
        return EquivalenceVerdict("not_equivalent", (), "separating abelian invariant")

    budget = Budget(max(budget.max_word_length, len(u), len(v)), budget.max_steps)
    parents, complete = _closure(b, u, budget, targets={v})
    if v in parents:
        return EquivalenceVerdict("equivalent", _chain_from_parents(parents, v), "rewrite chain")
    if complete and b.relation_family is None:
        return EquivalenceVerdict("not_equivalent", (), "class fully explored")
    return EquivalenceVerdict("unknown", (), "budget exhausted")


_PARTITION_CACHE: dict = {}
_PARTITION_CACHE_MAX = 4096


def partition_words(
    b: Blueprint, words: Sequence[Word], budget: Budget = DEFAULT_BUDGET
) -> dict[Word, Word]:
    """Partition `words` into budget-verified equivalence classes.

    Returns a map word -> canonical representative (shortest, then
    lexicographic by generator declaration order).  Only provable merges are
    made, so the partition refines the true one; increasing the budget can
    only coarsen it.  Words in different abelian-residue buckets are provably
    inequivalent and are never compared by search.
    """
    words = sorted(set(map(tuple, words)), key=b.word_key)
    cache_key = (b, tuple(words), budget)
    cached = _PARTITION_CACHE.get(cache_key)
    if cached is not None:
        return dict(cached)
    rep: dict[Word, Word] = {}
    buckets: dict[tuple, list[Word]] = {}
    for w in words:
        buckets.setdefault(("res", b.abelian_residue(w)), []).append(w)
    for members in buckets.values():
        unmerged = list(members)
        while unmerged:
            canon = unmerged.pop(0)
            rep[canon] = canon
            if not unmerged:
                continue
            if not b.relations and b.relation_family is None:
                continue  # singleton classes
            if b.relation_family is not None:
                remaining = []
                for w in unmerged:
                    if equivalence_query(b, canon, w, budget).is_equivalent:
                        rep[w] = canon
                    else:
                        remaining.append(w)
                unmerged = remaining
                continue
            parents, _ = _closure(b, canon, budget, targets=set(unmerged), find_all=True)
            remaining = []
            for w in unmerged:
                if w in parents:
                    rep[w] = canon
                else:
                    remaining.append(w)
            unmerged = remaining
    if len(_PARTITION_CACHE) >= _PARTITION_CACHE_MAX:
        _PARTITION_CACHE.clear()
    _PARTITION_CACHE[cache_key] = dict(rep)
    return rep


# ---------------------------------------------------------------------------
# Partial models


def word_ball(b: Blueprint, r: int) -> list[Word]:
    """All words of length <= r in shortlex order (not only consistent ones)."""
    out: list[Word] = [EPSILON]
    frontier = [EPSILON]
    for _ in range(r):
        nxt = []
        for w in frontier:
            for s in b.generators:
                nxt.append(w + (s,))
        out.extend(nxt)
        frontier = nxt
    return out


def consistent_ball(b: Blueprint, r: int) -> list[Word]:
    out: list[Word] = [EPSILON]
    frontier = [EPSILON]
    for _ in range(r):
        nxt = []
        for w in frontier:
            for s in b.generators:
                if not w or b.initial[s] in b.terminal[w[-1]]:
                    nxt.append(w + (s,))
        out.extend(nxt)
        frontier = nxt
    return out


class PartialModel:
    """A consistent state assignment on the word ball of a given radius.

    `assignment` maps supported words to states; unsupported ball words are
    absent.  The model condition is enforced for pairs of supported words
    that the budget proves equivalent.
    """

    def __init__(
        self,
        blueprint: Blueprint,
        radius: int,
        assignment: dict[Word, str],
        budget: Budget = DEFAULT_BUDGET,
        _validated: bool = False,
    ):
        self.blueprint = blueprint
        self.radius = radius
        self.assignment = dict(assignment)
        self.budget = budget
        self._items = tuple(sorted(self.assignment.items(), key=lambda kv: blueprint.word_key(kv[0])))
        if not _validated:
            validate_partial_model(self)

    def state(self, w: Word) -> Optional[str]:
        return self.assignment.get(tuple(w))

    @property
    def support(self) -> list[Word]:
        return [w for w, _ in self._items]

    def __eq__(self, other):
        return (
            isinstance(other, PartialModel)
            and self.blueprint == other.blueprint
            and self.radius == other.radius
            and self._items == other._items
        )

    def __hash__(self):
        return hash((self.blueprint, self.radius, self._items))

    def __repr__(self):
        return f"PartialModel(r={self.radius}, |supp|={len(self.assignment)})"

    def restrict(self, radius: int) -> "PartialModel":
        if radius > self.radius:
            raise UndefinedActionError("cannot enlarge a partial model by restriction")
        assignment = {w: m for w, m in self.assignment.items() if len(w) <= radius}
        return PartialModel(self.blueprint, radius, assignment, self.budget, _validated=True)


def validate_partial_model(m: PartialModel) -> None:
    b = m.blueprint
    if m.state(EPSILON) is None:
        raise BlueprintError("partial model must assign a state to the empty word")
    for w, state in m.assignment.items():
        if len(w) > m.radius:
            raise BlueprintError(f"assigned word {word_to_text(w)!r} exceeds radius")
        if state not in b.states:
            raise BlueprintError(f"unknown state {state!r}")
        if w:
            head, last = w[:-1], w[-1]
            prev = m.state(head)
            if prev is None:
                raise BlueprintError("support is not prefix-closed")
            if b.initial[last] != prev:
                raise BlueprintError(
                    f"word {word_to_text(w)!r} extends a state that does not "
                    f"match the initial state of {last!r}"
                )
            if state not in b.terminal[last]:
                raise BlueprintError(
                    f"state {state!r} at {word_to_text(w)!r} is not terminal for {last!r}"
                )
    # Consistency also demands presence: a supported word must support every
    # generator whose initial state matches, as long as it fits in the ball.
    for w, state in m.assignment.items():
        if len(w) == m.radius:
            continue
        for s in b.generators:
            if b.initial[s] == state and m.state(w + (s,)) is None:
                raise BlueprintError(
                    f"missing assignment at {word_to_text(w + (s,))!r}"
                )
            if b.initial[s] != state and m.state(w + (s,)) is not None:
                raise BlueprintError(
                    f"word {word_to_text(w + (s,))!r} should be unsupported"
                )
    rep = partition_words(b, m.support, m.budget)
    by_class: dict[Word, str] = {}
    for w in m.support:
        canon = rep[w]
        state = m.assignment[w]
        if canon in by_class and by_class[canon] != state:
            raise BlueprintError(
                f"model condition violated on class of {word_to_text(canon)!r}"
            )
        by_class.setdefault(canon, state)


def enumerate_partial_models(
    b: Blueprint,
    r: int,
    budget: Budget = DEFAULT_BUDGET,
    max_models: Optional[int] = None,
    base: Optional[PartialModel] = None,
) -> Iterator[PartialModel]:
    """All partial models of radius r, lexicographic in the declared orders.

    `base`, when given, restricts the stream to models extending it.
    Raises BudgetExceeded past `max_models` rather than truncating silently.
    """
    ball = consistent_ball(b, r)
    rep = partition_words(b, ball, budget)
    level_words = [sorted((w for w in ball if len(w) == k), key=b.word_key) for k in range(r + 1)]

    if base is not None and base.radius > r:
        base = base.restrict(r)

    def filt(w: Word, state: str) -> bool:
        if base is None or len(w) > base.radius:
            return True
        return base.state(w) == state

    # Iterative backtracking over the flat cell list (the ball in level
    # order); only cells whose parent state matches the generator's initial
    # state are choice points, everything else is unsupported.
    cells: list[Word] = [EPSILON]
    for level in range(1, r + 1):
        cells.extend(level_words[level])

    assignment: dict[Word, str] = {}
    class_state: dict[Word, str] = {}
    # frames: (cell position, options, option index, class was fresh)
    stack: list[list] = []
    count = 0
    pos = 0
    advancing = True
    while True:
        if advancing:
            while pos < len(cells):
                w = cells[pos]
                if w == EPSILON:
                    options = [m for m in b.states if filt(EPSILON, m)]
                else:
                    parent = assignment.get(w[:-1])
                    if parent is None or b.initial[w[-1]] != parent:
                        pos += 1
                        continue
                    canon = rep[w]
                    forced = class_state.get(canon)
                    options = [
                        m
                        for m in b.terminal[w[-1]]
                        if (forced is None or m == forced) and filt(w, m)
                    ]
                if not options:
                    advancing = False
                    break
                stack.append([pos, options, 0, False])
                _apply_cell(b, rep, assignment, class_state, stack[-1], cells)
                pos += 1
            if advancing:
                count += 1
                if max_models is not None and count > max_models:
                    raise BudgetExceeded(f"max_models={max_models} exceeded at radius {r}")
                yield PartialModel(b, r, dict(assignment), budget, _validated=True)
                advancing = False
                continue
        # backtrack to the last frame with an unused option
        while stack:
            frame = stack[-1]
            _undo_cell(b, rep, assignment, class_state, frame, cells)
            if frame[2] + 1 < len(frame[1]):
                frame[2] += 1
                _apply_cell(b, rep, assignment, class_state, frame, cells)
                pos = frame[0] + 1
                advancing = True
                break
            stack.pop()
        if not stack and not advancing:
            return
        if not advancing:
            return


def _apply_cell(b, rep, assignment, class_state, frame, cells):
    pos, options, idx, _ = frame
    w = cells[pos]
    state = options[idx]
    assignment[w] = state
    canon = rep[w]
    if canon not in class_state:
        class_state[canon] = state
        frame[3] = True
    else:
        frame[3] = False


def _undo_cell(b, rep, assignment, class_state, frame, cells):
    pos = frame[0]
    w = cells[pos]
    del assignment[w]
    if frame[3]:
        del class_state[rep[w]]


def partial_shift(m: PartialModel, w: Word) -> PartialModel:
    """The partial action: (phi . w)(u) = phi(wu), defined when w is supported."""
    w = tuple(w)
    if m.state(w) is None:
        raise UndefinedActionError(
            f"shift by unsupported word {word_to_text(w)!r}"
        )
    if len(w) > m.radius:
        raise UndefinedActionError("shift word longer than the model radius")
    new_r = m.radius - len(w)
    assignment = {}
    for u, state in m.assignment.items():
        if u[:len(w)] == w and len(u) - len(w) <= new_r:
            assignment[u[len(w):]] = state
    return PartialModel(m.blueprint, new_r, assignment, m.budget, _validated=True)


# ---------------------------------------------------------------------------
# Model graphs


@dataclass
class ModelGraph:
    """Word classes of a partial model's ball with generator-labeled edges.

    `distance[u][v]` is the directed quasi-metric (shortest directed path)
    computed on the explored ball; None marks unreachable-within-ball.  The
    table is computed lazily on first access.
    """

    model: PartialModel
    vertices: tuple[Word, ...]
    edges: tuple[tuple[Word, Word, str], ...]
    class_of: dict[Word, Word]
    truncated: bool = False

    def neighbors(self, v: Word) -> list[tuple[str, Word]]:
        return self._adj.get(v, [])

    def resolve(self, start: Word, u: Word) -> Optional[Word]:
        """Follow the word u from a class vertex; None if it leaves the ball."""
        cur = self.class_of.get(tuple(start), None)
        if cur is None:
            return None
        for s in u:
            nxt = self._edge_map.get((cur, s))
            if nxt is None:
                return None
            cur = nxt
        return cur

    def __post_init__(self):
        self._adj: dict[Word, list[tuple[str, Word]]] = {}
        self._edge_map: dict[tuple[Word, str], Word] = {}
        for a, c, s in self.edges:
            self._adj.setdefault(a, []).append((s, c))
            self._edge_map[(a, s)] = c
        self._distance: Optional[dict[Word, dict[Word, Optional[int]]]] = None

    @property
    def distance(self) -> dict[Word, dict[Word, Optional[int]]]:
        if self._distance is None:
            adj: dict[Word, list[Word]] = {v: [] for v in self.vertices}
            for a, c, _ in self.edges:
                adj[a].append(c)
            table: dict[Word, dict[Word, Optional[int]]] = {}
            for v in self.vertices:
                dist: dict[Word, Optional[int]] = {u: None for u in self.vertices}
                dist[v] = 0
                queue = deque([v])
                while queue:
                    x = queue.popleft()
                    for y in adj[x]:
                        if dist[y] is None:
                            dist[y] = dist[x] + 1
                            queue.append(y)
                table[v] = dist
            self._distance = table
        return self._distance

    def to_dot(self) -> str:
        lines = ["digraph model {"]
        names = {v: f"v{i}" for i, v in enumerate(self.vertices)}
        for v in self.vertices:
            state = self.model.assignment[v]
            label = f"{word_to_text(v)}|{state}"
            lines.append(f'  {names[v]} [label="{label}"];')
        for a, c, s in sorted(self.edges, key=lambda e: (self.model.blueprint.word_key(e[0]), e[2])):
            lines.append(f'  {names[a]} -> {names[c]} [label="{s}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


_GRAPH_CACHE: dict = {}
_GRAPH_CACHE_MAX = 2048


def model_graph(m: PartialModel, budget: Optional[Budget] = None) -> ModelGraph:
    """Build the ball-restricted model graph with its quasi-metric table.

    Classes are identified within budget over the supported ball plus the
    one-step fringe, so edges pointing back into the ball from depth-r words
    are found.  Identifications never exceed the true equivalence (sound
    refinement); budget truncation is flagged.
    """
    b = m.blueprint
    budget = budget or m.budget
    cache_key = (m, budget)
    cached = _GRAPH_CACHE.get(cache_key)
    if cached is not None:
        return cached
    support = m.support
    fringe: list[Word] = []
    for w in support:
        state = m.assignment[w]
        if len(w) == m.radius:
            for s in b.generators:
                if b.initial[s] == state:
                    fringe.append(w + (s,))
    rep = partition_words(b, support + fringe, budget)

    # A fringe word's class is usable only when some supported word realizes it.
    support_set = set(support)
    canon_to_vertex: dict[Word, Word] = {}
    for w in support:
        canon_to_vertex.setdefault(rep[w], min(
            (x for x in support if rep[x] == rep[w]), key=b.word_key
        ))
    class_of = {w: canon_to_vertex[rep[w]] for w in support}
    truncated = False
    for w in fringe:
        if w in support_set:
            continue
        canon = rep.get(w)
        if canon in canon_to_vertex:
            class_of[w] = canon_to_vertex[canon]
        elif b.relations or b.relation_family is not None:
            # With an empty relation set classes are singletons, so the word
            # is genuinely outside; otherwise require a separating invariant
            # before trusting that — identifications may be missing for
            # budget reasons.
            if not all(b.abelian_separates(w, x) for x in support):
                truncated = True

    vertices = tuple(sorted(set(class_of[w] for w in support), key=b.word_key))
    edges = set()
    for w in support:
        state = m.assignment[w]
        for s in b.generators:
            if b.initial[s] != state:
                continue
            target = class_of.get(w + (s,))
            if target is not None:
                edges.add((class_of[w], target, s))

    graph = ModelGraph(
        m,
        vertices,
        tuple(sorted(edges, key=lambda e: (b.word_key(e[0]), b.word_key(e[1]), e[2]))),
        class_of,
        truncated,
    )
    if len(_GRAPH_CACHE) >= _GRAPH_CACHE_MAX:
        _GRAPH_CACHE.clear()
    _GRAPH_CACHE[cache_key] = graph
    return graph
