"""Built-in blueprints and stock pattern sets used across tests and the CLI.

The `minimal` flags are user-assertions (no decision procedure exists for
minimality); they are justified case by case below.
"""

from __future__ import annotations

from fractions import Fraction

from .core import Blueprint, EPSILON, Word
from .subshift import Pattern, PatternSet


def free_monoid(k: int = 1) -> Blueprint:
    """Single state, k generators, no relations."""
    gens = [f"g{i}" for i in range(k)] if k != 1 else ["g"]
    return Blueprint(
        states=["m"],
        generators=gens,
        initial={g: "m" for g in gens},
        terminal={g: ["m"] for g in gens},
        relations=[],
        name=f"free{k}",
        minimal=True,  # single state: the model space is a singleton
    )


def z_line() -> Blueprint:
    """The integers as a monoid with formal inverses a, A."""
    return Blueprint(
        states=["m"],
        generators=["a", "A"],
        initial={"a": "m", "A": "m"},
        terminal={"a": ["m"], "A": ["m"]},
        relations=[(("a", "A"), ()), (("A", "a"), ())],
        name="Z",
        minimal=True,
        valuation={"a": (Fraction(1),), "A": (Fraction(-1),)},
    )


def z_grid() -> Blueprint:
    """The grid Z^2: generators e, E, n, N with inverse and commutation relations."""
    gens = ["e", "E", "n", "N"]
    inverse = [
        (("e", "E"), ()), (("E", "e"), ()),
        (("n", "N"), ()), (("N", "n"), ()),
    ]
    commute = [
        (("e", "n"), ("n", "e")),
        (("e", "N"), ("N", "e")),
        (("E", "n"), ("n", "E")),
        (("E", "N"), ("N", "E")),
    ]
    return Blueprint(
        states=["m"],
        generators=gens,
        initial={g: "m" for g in gens},
        terminal={g: ["m"] for g in gens},
        relations=inverse + commute,
        name="Z2",
        minimal=True,
        valuation={
            "e": (Fraction(1), Fraction(0)),
            "E": (Fraction(-1), Fraction(0)),
            "n": (Fraction(0), Fraction(1)),
            "N": (Fraction(0), Fraction(-1)),
        },
    )


def tree12() -> Blueprint:
    """The 1-2 tree: state 1 is followed by s, state 2 by l and r."""
    return Blueprint(
        states=["1", "2"],
        generators=["s", "l", "r"],
        initial={"s": "1", "l": "2", "r": "2"},
        terminal={"s": ["1", "2"], "l": ["1", "2"], "r": ["1", "2"]},
        relations=[],
        name="tree12",
    )


def two_component() -> Blueprint:
    """Two disconnected behaviors: a one-way path and a binary tree.

    Neither model is dense, so this blueprint is neither minimal nor
    transitive; it is the stock example of a non-trivial model space.
    """
    return Blueprint(
        states=["0", "1"],
        generators=["a", "b", "c"],
        initial={"a": "0", "b": "1", "c": "1"},
        terminal={"a": ["0"], "b": ["1"], "c": ["1"]},
        relations=[],
        name="two_component",
    )


def hyperbolic() -> Blueprint:
    """Blueprint of combinatorial binary tilings of the hyperbolic plane.

    States 0/1 record whether a tile is the left or right child of its
    parent; s-generators descend to children, t-generators translate along a
    row, p-generators ascend.  The translation inverse relations are paired
    by matching initial/terminal data (the same-row moves t0p: 0->1 and
    t0m: 1->0 invert each other, likewise t1p/t1m).
    """
    gens = ["s00", "s01", "s10", "s11", "t0p", "t0m", "t1p", "t1m", "p0", "p1"]
    initial = {
        "s00": "0", "s01": "0", "s10": "1", "s11": "1",
        "t0p": "0", "t0m": "1", "t1p": "1", "t1m": "0",
        "p0": "0", "p1": "1",
    }
    terminal = {
        "s00": ["0"], "s01": ["1"], "s10": ["0"], "s11": ["1"],
        "t0p": ["1"], "t0m": ["0"], "t1p": ["0"], "t1m": ["1"],
        "p0": ["0", "1"], "p1": ["0", "1"],
    }
    r0 = [
        (("s00", "t0p"), ("s01",)),
        (("s01", "t1p"), ("t0p", "s10")),
        (("p0", "s01"), ("t0p",)),
        (("s00", "p0"), ()),
        (("p0", "s11"), ("t0p",)),
        (("s01", "p1"), ()),
        (("t0p", "t0m"), ()),
        (("t0m", "t0p"), ()),
    ]
    r1 = [
        (("s10", "t0p"), ("s11",)),
        (("s11", "t1p"), ("t1p", "s00")),
        (("p1", "t0p", "s10"), ("t1p",)),
        (("s10", "p0"), ()),
        (("p1", "t1p", "s00"), ("t1p",)),
        (("s11", "p1"), ()),
        (("t1p", "t1m"), ()),
        (("t1m", "t1p"), ()),
    ]
    return Blueprint(
        states=["0", "1"],
        generators=gens,
        initial=initial,
        terminal=terminal,
        relations=r0 + r1,
        name="hyperbolic",
        minimal=True,  # the row-translation orbit of any model is dense
    )


# ---------------------------------------------------------------------------
# Stock pattern sets


def hard_square(b: Blueprint, generators=None, alphabet=("0", "1")) -> PatternSet:
    """Forbid the letter '1' on both ends of any generator edge."""
    gens = tuple(generators) if generators is not None else b.generators
    patterns = []
    for s in gens:
        m = b.initial[s]
        for m2 in b.terminal[s]:
            patterns.append(Pattern.of({EPSILON: (m, "1"), (s,): (m2, "1")}))
    return PatternSet(alphabet, patterns, name="hard_square")


def proper_two_coloring(b: Blueprint, alphabet=("0", "1")) -> PatternSet:
    """Forbid equal letters on any generator edge (checkerboard constraints)."""
    patterns = []
    for s in b.generators:
        m = b.initial[s]
        for m2 in b.terminal[s]:
            for a in alphabet:
                patterns.append(Pattern.of({EPSILON: (m, a), (s,): (m2, a)}))
    return PatternSet(alphabet, patterns, name="proper_two_coloring")


def mismatched_wang(b: Blueprint, generators=None) -> PatternSet:
    """A single letter whose east color disagrees with its own west color,
    written as nearest-neighbor patterns that forbid every horizontal pair."""
    gens = tuple(generators) if generators is not None else (b.generators[0],)
    patterns = []
    for s in gens:
        m = b.initial[s]
        for m2 in b.terminal[s]:
            patterns.append(Pattern.of({EPSILON: (m, "t"), (s,): (m2, "t")}))
    return PatternSet(("t",), patterns, name="mismatched_wang")


def forbid_letter_at_origin(b: Blueprint, letter="1", alphabet=("0", "1")) -> PatternSet:
    patterns = [Pattern.of({EPSILON: (m, letter)}) for m in b.states]
    return PatternSet(alphabet, patterns, name=f"forbid_{letter}")


def full_shift(alphabet=("0", "1")) -> PatternSet:
    return PatternSet(alphabet, (), name="full_shift")


def grid_region(width: int, height: int, east: str = "e", north: str = "n") -> list[Word]:
    """The words e^i n^j for a width x height block of the grid."""
    return [
        ((east,) * i) + ((north,) * j)
        for i in range(width)
        for j in range(height)
    ]
