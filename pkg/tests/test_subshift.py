import random

import pytest

from blueprints.core import Budget, BlueprintError, enumerate_partial_models, equivalence_query
from blueprints.library import (
    forbid_letter_at_origin,
    full_shift,
    grid_region,
    hard_square,
    tree12,
    z_grid,
    z_line,
)
from blueprints.subshift import (
    Pattern,
    PatternSet,
    SlidingBlockCode,
    Window,
    apply_sliding_block,
    enumerate_conversion_windows,
    find_period_witness,
    forget_colors_code,
    identity_code,
    locally_admissible,
    parse_pattern_set,
    serialize_pattern_set,
    to_nearest_neighbor,
    validate_window,
    window_violations,
)

BUDGET = Budget(10, 6000)


def brute_force_independent_sets(width, height):
    """Independent oracle: count 0/1 colorings of the grid block with no two
    adjacent 1s, by direct enumeration over all subsets."""
    cells = [(i, j) for i in range(width) for j in range(height)]
    edges = [
        (a, b)
        for a in cells
        for b in cells
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 and a < b
    ]
    count = 0
    for mask in range(1 << len(cells)):
        chosen = {cells[k] for k in range(len(cells)) if mask >> k & 1}
        if all(not (a in chosen and b in chosen) for a, b in edges):
            count += 1
    return count


class TestLocallyAdmissible:
    def test_hard_square_two_by_two(self):
        z2 = z_grid()
        windows = list(
            locally_admissible(z2, hard_square(z2), region=grid_region(2, 2), budget=BUDGET)
        )
        assert len(windows) == 7 == brute_force_independent_sets(2, 2)

    def test_full_shift_two_by_two(self):
        z2 = z_grid()
        windows = list(
            locally_admissible(z2, full_shift(), region=grid_region(2, 2), budget=BUDGET)
        )
        assert len(windows) == 16

    def test_single_cell_forbid(self):
        z2 = z_grid()
        windows = list(
            locally_admissible(
                z2, forbid_letter_at_origin(z2), region=grid_region(2, 2), budget=BUDGET
            )
        )
        assert len(windows) == 1
        assert all(v == "0" for v in windows[0].colors.values())

    def test_support_exceeding_radius_rejected(self):
        z = z_line()
        fs = PatternSet(
            ("0", "1"),
            [Pattern.of({(): ("m", "1"), ("a", "a", "a"): ("m", "1")})],
        )
        with pytest.raises(BlueprintError, match="exceeds window radius"):
            next(locally_admissible(z, fs, r=2, budget=BUDGET))

    def test_windows_revalidate(self):
        z2 = z_grid()
        fs = hard_square(z2)
        for w in locally_admissible(z2, fs, r=2, budget=BUDGET):
            assert window_violations(w, fs, BUDGET) == []

    def test_monotone_in_patterns(self):
        z = z_line()
        small = PatternSet(("0", "1"), [Pattern.of({(): ("m", "1"), ("a",): ("m", "1")})])
        bigger = PatternSet(
            ("0", "1"),
            list(small.patterns) + [Pattern.of({(): ("m", "0"), ("a",): ("m", "0")})],
        )
        n_small = sum(1 for _ in locally_admissible(z, small, r=3, budget=BUDGET))
        n_big = sum(1 for _ in locally_admissible(z, bigger, r=3, budget=BUDGET))
        assert n_big <= n_small

    def test_monotone_projection_in_radius(self):
        z = z_line()
        fs = hard_square(z, generators=("a",))
        proj3 = {w.restrict(2) for w in locally_admissible(z, fs, r=3, budget=BUDGET)}
        proj4 = {w.restrict(2) for w in locally_admissible(z, fs, r=4, budget=BUDGET)}
        assert proj4 <= proj3

    def test_tree_models_multiply_windows(self):
        t = tree12()
        fs = full_shift()
        windows = list(locally_admissible(t, fs, r=1, budget=BUDGET))
        # 6 partial models; each contributes 2^{|classes|} colorings
        models = list(enumerate_partial_models(t, 1, BUDGET))
        expected = sum(2 ** len(m.assignment) for m in models)
        assert len(windows) == expected


class TestNNConversion:
    def test_max_length_two_gives_n_two(self):
        z = z_line()
        fs = PatternSet(("0", "1"), [Pattern.of({(): ("m", "1"), ("a", "a"): ("m", "1")})])
        conv = to_nearest_neighbor(z, fs, BUDGET)
        assert conv.N == 2
        assert set(conv.shape) == {
            (), ("a",), ("A",), ("a", "a"), ("a", "A"), ("A", "a"), ("A", "A"),
        }

    def test_already_nn_gives_n_one(self):
        z = z_line()
        conv = to_nearest_neighbor(z, hard_square(z, generators=("a",)), BUDGET)
        assert conv.N == 1

    def test_empty_fs_alphabet(self):
        z = z_line()
        conv = to_nearest_neighbor(z, full_shift(), BUDGET)
        assert conv.N == 0
        letters = conv.materialize_alphabet()
        # only the root cell: one entry per (state, letter) pair
        assert len(letters) == 2

    def test_window_count_equality_on_z(self):
        z = z_line()
        fs = hard_square(z, generators=("a",))
        conv = to_nearest_neighbor(z, fs, BUDGET)
        alphabet = conv.materialize_alphabet()
        for r in (2, 3):
            xs = list(locally_admissible(z, fs, r=r, budget=BUDGET))
            ys = set(enumerate_conversion_windows(conv, r, alphabet, BUDGET))
            assert len(xs) == len(ys)
            assert {conv.encode_window(x) for x in xs} == ys
            for x in xs:
                assert conv.decode_window(conv.encode_window(x)) == x

    def test_window_count_equality_on_tree(self):
        t = tree12()
        fs = hard_square(t)
        conv = to_nearest_neighbor(t, fs, BUDGET)
        alphabet = conv.materialize_alphabet()
        for r in (1, 2):
            xs = list(locally_admissible(t, fs, r=r, budget=BUDGET))
            ys = set(enumerate_conversion_windows(conv, r, alphabet, BUDGET))
            assert len(xs) == len(ys)
            assert {conv.encode_window(x) for x in xs} == ys

    def test_encodings_avoid_overlap_rules(self):
        z = z_line()
        fs = hard_square(z, generators=("a",))
        conv = to_nearest_neighbor(z, fs, BUDGET)
        G = conv.nn_patterns(conv.materialize_alphabet())
        for x in locally_admissible(z, fs, r=3, budget=BUDGET):
            assert validate_window(conv.encode_window(x), G, BUDGET)

    def test_materialized_patterns_match_predicate(self):
        z = z_line()
        fs = hard_square(z, generators=("a",))
        conv = to_nearest_neighbor(z, fs, BUDGET)
        alphabet = conv.materialize_alphabet()
        explicit = conv.materialize_patterns(alphabet)
        assert explicit.nearest_neighbor
        for p in explicit.patterns:
            (w0, (m, alpha)), (w1, (m2, alpha2)) = p.cells
            (s,) = w1
            assert conv.edge_forbidden(m, alpha, s, m2, alpha2)


class TestSlidingBlock:
    def test_identity(self):
        z = z_line()
        w = next(locally_admissible(z, full_shift(), r=2, budget=BUDGET))
        assert apply_sliding_block(identity_code(), w) == w

    def test_forget(self):
        z = z_line()
        w = next(locally_admissible(z, full_shift(), r=2, budget=BUDGET))
        out = apply_sliding_block(forget_colors_code(), w)
        assert set(out.colors.values()) == {"."}
        assert out.model == w.model

    def test_forward_matches_encoder_in_the_interior(self):
        z = z_line()
        fs = hard_square(z, generators=("a",))
        conv = to_nearest_neighbor(z, fs, BUDGET)
        w = list(locally_admissible(z, fs, r=3, budget=BUDGET))[5]
        via_code = apply_sliding_block(conv.forward_code(), w)
        via_encoder = conv.encode_window(w)
        for v in via_code.graph.vertices:
            assert via_code.colors[v] == via_encoder.colors[v]

    def test_equivariance(self):
        z = z_line()
        fs = hard_square(z, generators=("a",))
        conv = to_nearest_neighbor(z, fs, BUDGET)
        codes = [identity_code(), forget_colors_code(), conv.forward_code()]
        random.seed(11)
        windows = list(locally_admissible(z, fs, r=4, budget=BUDGET))
        sample = random.sample(windows, 25)
        for code in codes:
            for w in sample:
                for s in z.generators:
                    if w.graph.resolve((), (s,)) is None:
                        continue
                    lhs = apply_sliding_block(code, w.shift((s,)))
                    rhs = apply_sliding_block(code, w).shift((s,))
                    assert lhs == rhs


class TestPeriodWitness:
    def test_constant_window_on_grid(self):
        z2 = z_grid()
        w = next(locally_admissible(z2, forbid_letter_at_origin(z2), r=2, budget=BUDGET))
        hit = find_period_witness(z2, w, BUDGET)
        assert hit is not None
        word, verdict = hit
        assert word == ("e",)
        assert verdict.is_not_equivalent

    def test_inverse_pair_rejected_on_z(self):
        z = z_line()
        assert equivalence_query(z, ("a", "A"), (), BUDGET).is_equivalent
        w = next(locally_admissible(z, forbid_letter_at_origin(z), r=3, budget=BUDGET))
        hit = find_period_witness(z, w, BUDGET)
        assert hit is not None and hit[0] == ("a",)

    def test_checkerboard_period_two(self):
        z2 = z_grid()
        # build the checkerboard window at radius 3 by hand
        model = next(iter(enumerate_partial_models(z2, 3, BUDGET)))
        from blueprints.core import model_graph

        graph = model_graph(model, BUDGET)
        val = {v: z2.word_valuation(v) for v in graph.vertices}
        colors = {v: str((val[v][0] + val[v][1]) % 2) for v in graph.vertices}
        w = Window(model, colors, graph)
        assert validate_window(w, hard_square(z2), BUDGET)
        hit = find_period_witness(z2, w, BUDGET)
        assert hit is not None
        assert hit[0] == ("e", "e")


class TestPatternIO:
    def test_round_trip(self):
        z2 = z_grid()
        fs = hard_square(z2)
        text = serialize_pattern_set(fs)
        again = parse_pattern_set(text)
        assert again.alphabet == fs.alphabet
        assert again.patterns == fs.patterns
        assert serialize_pattern_set(again) == text

    def test_nearest_neighbor_flag(self):
        z = z_line()
        assert hard_square(z).nearest_neighbor
        fs = PatternSet(("0",), [Pattern.of({(): ("m", "0"), ("a", "a"): ("m", "0")})])
        assert not fs.nearest_neighbor
        single = PatternSet(("0",), [Pattern.of({(): ("m", "0")})])
        assert not single.nearest_neighbor
