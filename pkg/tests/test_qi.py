import random

import pytest

from blueprints.core import (
    Budget,
    BlueprintError,
    EPSILON,
    enumerate_partial_models,
    equivalence_query,
    model_graph,
)
from blueprints.library import full_shift, tree12, z_line
from blueprints.subshift import (
    Pattern,
    PatternSet,
    Window,
    locally_admissible,
    validate_window,
    window_violations,
)
from blueprints.qi import (
    QIComponent,
    QILetter,
    QIPointer,
    QISetting,
    RadiusExhausted,
    build_qi_alphabet,
    check_qi_window,
    circ_step,
    circ_walk,
    compile_qi_patterns,
    count_qi_alphabet,
    encode_along_qi,
    gamma_map,
    halving_qi_map,
    identity_qi_map,
    iter_qi_components,
    mu_map,
    parse_qi_map,
    serialize_qi_map,
    stream_c5,
    theta_map,
    tp_bound,
)

BUDGET = Budget(10, 6000)


def z_setting(alphabet=("0", "1"), n=1):
    z = z_line()
    return QISetting(b1=z, b2=z, alphabet=alphabet, n=n, budget=BUDGET)


def line_window(z, radius, rng=None, alphabet=("0", "1")):
    """A colored window on the line, random colors per class."""
    model = next(iter(enumerate_partial_models(z, radius, BUDGET)))
    graph = model_graph(model, BUDGET)
    rng = rng or random.Random(0)
    colors = {v: rng.choice(alphabet) for v in graph.vertices}
    return Window(model, colors, graph)


def identity_encoding(radius, alphabet=("0", "1"), pick=0):
    setting = z_setting(alphabet)
    z = setting.b1
    qi = identity_qi_map(z, radius, BUDGET)
    target = next(iter(enumerate_partial_models(z, radius, BUDGET)))
    y = line_window(z, radius, random.Random(pick), alphabet)
    return setting, y, encode_along_qi(setting, qi, y, target)


class TestAlphabet:
    def test_count_fifty_on_the_line(self):
        setting = z_setting(alphabet=("x",))
        total, stream = build_qi_alphabet(setting)
        letters = list(stream)
        assert total == 50
        assert len(letters) == 50
        assert len(set(letters)) == 50

    def test_blank_letter_always_present(self):
        setting = z_setting(alphabet=("x",))
        _, stream = build_qi_alphabet(setting)
        assert setting.blank_letter() in set(stream)

    def test_slot_state_consistency_excludes(self):
        setting = z_setting(alphabet=("x",))
        z = setting.b1
        # a component claiming state m but with no route for a matching
        # generator is rejected
        bad = QIComponent("m", "x", (None, None), (None, None))
        assert not setting.component_ok(bad)
        half = QIComponent("m", "x", (("a",), None), (1, None))
        assert not setting.component_ok(half)
        good = QIComponent("m", "x", (("a",), ("A",)), (1, 1))
        assert setting.component_ok(good)

    def test_cap_reports_count(self):
        setting = z_setting(alphabet=("x",), n=1)
        with pytest.raises(Exception, match="50"):
            build_qi_alphabet(setting, cap=10)


class TestCirc:
    def test_undefined_on_initial_mismatch(self):
        # source blueprint with states: slot coding state '1' only routes 's'
        z = z_line()
        t = tree12()
        setting = QISetting(b1=z, b2=t, alphabet=("x",), n=1, budget=BUDGET)
        moves = [None, None, None]
        slots = [None, None, None]
        moves[t.gen_index("s")] = ("a",)
        slots[t.gen_index("s")] = 1
        comp = QIComponent("1", "x", tuple(moves), tuple(slots))
        assert setting.component_ok(comp)
        letter = QILetter((comp,))
        model = next(iter(enumerate_partial_models(z, 1, BUDGET)))
        graph = model_graph(model, BUDGET)
        window = Window(model, {v: letter for v in graph.vertices}, graph)
        ptr = QIPointer(window, 1)
        assert circ_step(setting, ptr, "l") is None
        step = circ_step(setting, ptr, "s")
        assert step is not None and step[1] == ("a",)

    def test_empty_move_changes_slot_only(self):
        setting = z_setting(n=2)
        z = setting.b1
        qi = halving_qi_map(z, 9, BUDGET)
        y = line_window(z, 9, random.Random(3))
        target = next(iter(enumerate_partial_models(z, 4, BUDGET)))
        enc = encode_along_qi(setting, qi, y, target)
        ptr = QIPointer(enc, 1)  # slot 1 = even positions
        stepped, move = circ_step(setting, ptr, "a")
        assert move == EPSILON
        assert stepped.slot == 2
        assert stepped.window == enc

    def test_move_composition(self):
        setting, _, enc = identity_encoding(6, pick=9)
        ptr = QIPointer(enc, 1)
        random.seed(5)
        for _ in range(10):
            u = tuple(random.choice(("a", "A")) for _ in range(random.randint(1, 2)))
            v = tuple(random.choice(("a", "A")) for _ in range(random.randint(1, 2)))
            end_u, mov_u = circ_walk(setting, ptr, u)
            _, mov_v = circ_walk(setting, end_u, v)
            _, mov_uv = circ_walk(setting, ptr, u + v)
            verdict = equivalence_query(setting.b1, mov_uv, mov_u + mov_v, BUDGET)
            assert verdict.is_equivalent

    def test_radius_exhaustion_distinct(self):
        setting, _, enc = identity_encoding(2)
        ptr = QIPointer(enc, 1)
        with pytest.raises(RadiusExhausted):
            circ_walk(setting, ptr, ("a",) * 3)


class TestTheta:
    def test_origin_coding(self):
        setting, _, enc = identity_encoding(3)
        assert theta_map(setting, enc) == (EPSILON, 1)

    def test_blank_origin(self):
        setting, _, enc = identity_encoding(3)
        colors = dict(enc.colors)
        colors[enc.graph.class_of[EPSILON]] = setting.blank_letter()
        moved = Window(enc.model, colors, enc.graph)
        word, slot = theta_map(setting, moved)
        assert word == ("a",) and slot == 1

    def test_smallest_slot_wins(self):
        z = z_line()
        setting = QISetting(b1=z, b2=z, alphabet=("x",), n=3, budget=BUDGET)
        moves = (("a",), ("A",))
        comp = QIComponent("m", "x", moves, (2, 2))
        letter = QILetter((None, comp, comp))
        model = next(iter(enumerate_partial_models(z, 0, BUDGET)))
        graph = model_graph(model, BUDGET)
        window = Window(model, {graph.class_of[EPSILON]: letter}, graph)
        assert theta_map(setting, window) == (EPSILON, 2)


class TestMu:
    def test_empty_word(self):
        setting, _, enc = identity_encoding(3)
        ptr = QIPointer(enc, 1)
        assert mu_map(setting, ptr, EPSILON) == (EPSILON, 1)

    def test_sentinel_on_undefined(self):
        z = z_line()
        t = tree12()
        setting = QISetting(b1=z, b2=t, alphabet=("x",), n=1, budget=BUDGET)
        moves = [None] * 3
        slots = [None] * 3
        moves[t.gen_index("s")] = ("a",)
        slots[t.gen_index("s")] = 1
        comp = QIComponent("1", "x", tuple(moves), tuple(slots))
        letter = QILetter((comp,))
        model = next(iter(enumerate_partial_models(z, 2, BUDGET)))
        graph = model_graph(model, BUDGET)
        window = Window(model, {v: letter for v in graph.vertices}, graph)
        ptr = QIPointer(window, 1)
        assert mu_map(setting, ptr, ("l",)) == (EPSILON, 1)

    def test_matches_route_concatenation(self):
        setting, _, enc = identity_encoding(5, pick=21)
        ptr = QIPointer(enc, 1)
        word = ("a", "a", "A", "a")
        mov, slot = mu_map(setting, ptr, word)
        assert mov == word and slot == 1  # identity routes one step per step


class TestGamma:
    def test_identity_round_trip(self):
        random.seed(13)
        setting = z_setting()
        z = setting.b1
        fs = full_shift()
        qi = identity_qi_map(z, 4, BUDGET)
        target = next(iter(enumerate_partial_models(z, 4, BUDGET)))
        rng = random.Random(13)
        for y in (line_window(z, 4, rng) for _ in range(20)):
            enc = encode_along_qi(setting, qi, y, target)
            assert gamma_map(setting, QIPointer(enc, 1), 4) == y

    def test_depth_zero(self):
        setting, y, enc = identity_encoding(3, pick=4)
        out = gamma_map(setting, QIPointer(enc, 1), 0)
        assert out.radius == 0
        assert out.color(EPSILON) == y.color(EPSILON)

    def test_equivariance(self):
        setting = z_setting()
        z = setting.b1
        qi = identity_qi_map(z, 8, BUDGET)
        target = next(iter(enumerate_partial_models(z, 8, BUDGET)))
        rng = random.Random(23)
        for _ in range(12):
            y = line_window(z, 8, rng)
            enc = encode_along_qi(setting, qi, y, target)
            ptr = QIPointer(enc, 1)
            length = random.randint(1, 3)
            u = tuple(random.choice(("a", "A")) for _ in range(length))
            walk = circ_walk(setting, ptr, u)
            assert walk is not None
            end, _ = walk
            depth = 3
            assert gamma_map(setting, end, depth) == gamma_map(
                setting, ptr, depth + length
            ).shift(u).restrict(depth)

    def test_gamma_windows_admissible(self):
        setting, y, enc = identity_encoding(4, pick=100)
        fs = full_shift()
        out = gamma_map(setting, QIPointer(enc, 1), 3)
        assert validate_window(out, fs, BUDGET)


class TestEncode:
    def test_identity_components_route_one_step(self):
        setting, _, enc = identity_encoding(3)
        for v in enc.graph.vertices:
            comp = enc.colors[v].slot(1)
            assert comp is not None
            assert setting.component_move(comp, "a") == ("a",)
            assert setting.component_move(comp, "A") == ("A",)

    def test_full_conditions_hold(self):
        setting, _, enc = identity_encoding(4, pick=31)
        assert check_qi_window(setting, enc, full_shift(), check_reach=True) == []

    def test_halving_uses_both_slots(self):
        setting = z_setting(n=2)
        z = setting.b1
        qi = halving_qi_map(z, 9, BUDGET)
        y = line_window(z, 9, random.Random(77))
        target = next(iter(enumerate_partial_models(z, 4, BUDGET)))
        enc = encode_along_qi(setting, qi, y, target)
        for v in enc.graph.vertices:
            if len(v) <= 3:
                assert enc.colors[v].coding_slots() == [1, 2]
        assert check_qi_window(setting, enc, full_shift(), check_reach=False) == []
        # the coded source window matches the original around the preimage
        assert gamma_map(setting, QIPointer(enc, 1), 3) == y.restrict(3)

    def test_table_gap_detected(self):
        setting = z_setting()
        z = setting.b1
        qi = identity_qi_map(z, 3, BUDGET)
        qi.edge_words.pop((("a",), "a"))
        y = list(locally_admissible(z, full_shift(), r=3, budget=BUDGET))[0]
        target = next(iter(enumerate_partial_models(z, 3, BUDGET)))
        with pytest.raises(BlueprintError, match="gap"):
            encode_along_qi(setting, qi, y, target)

    def test_injectivity_violation_detected(self):
        setting = z_setting()
        z = setting.b1
        qi = identity_qi_map(z, 3, BUDGET)
        qi.assignments[("a",)] = (EPSILON, 1)  # collide with epsilon
        y = list(locally_admissible(z, full_shift(), r=3, budget=BUDGET))[0]
        target = next(iter(enumerate_partial_models(z, 3, BUDGET)))
        with pytest.raises(BlueprintError, match="injective"):
            encode_along_qi(setting, qi, y, target)


class TestMovementLemma:
    def test_equivalent_words_route_together(self):
        setting, _, enc = identity_encoding(6, pick=44)
        ptr = QIPointer(enc, 1)
        pairs = [
            (("a", "A"), EPSILON),
            (("A", "a"), EPSILON),
            (("a", "A", "a"), ("a",)),
        ]
        for u, v in pairs:
            assert equivalence_query(setting.b2, u, v, BUDGET).is_equivalent
            walk_u = circ_walk(setting, ptr, u)
            walk_v = circ_walk(setting, ptr, v)
            assert walk_u is not None and walk_v is not None
            (end_u, mov_u), (end_v, mov_v) = walk_u, walk_v
            assert end_u.slot == end_v.slot
            assert equivalence_query(setting.b1, mov_u, mov_v, BUDGET).is_equivalent


class TestInterpolationBound:
    def test_reachable_positions_within_bound(self):
        setting, _, enc = identity_encoding(4, pick=19)
        bound_per_step = setting.reach_word_bound
        ptr = QIPointer(enc, 1)
        graph = enc.graph
        for v in enc.model.support:
            if len(v) > 2:
                continue
            cls = graph.class_of[v]
            slots = enc.colors[cls].coding_slots()
            if not slots:
                continue
            j = slots[0]
            bound = bound_per_step * (len(v) + 1)
            found = _search_route(setting, ptr, cls, j, bound, graph)
            assert found is not None and len(found) <= bound


def _search_route(setting, ptr, target_cls, target_slot, bound, graph):
    frontier = [(ptr, EPSILON, EPSILON)]
    seen = set()
    for _ in range(bound):
        nxt = []
        for cur, mov, word in frontier:
            for s in setting.b2.generators:
                try:
                    step = circ_step(setting, cur, s)
                except RadiusExhausted:
                    continue
                if step is None:
                    continue
                new, move = step
                new_mov = mov + move
                cls = graph.resolve(EPSILON, new_mov)
                key = (cls, new.slot)
                if cls == target_cls and new.slot == target_slot:
                    return word + (s,)
                if cls is not None and key in seen:
                    continue
                seen.add(key)
                nxt.append((new, new_mov, word + (s,)))
        frontier = nxt
    return None


class TestCompilation:
    def test_empty_source_gives_structural_families_only(self):
        setting = z_setting(alphabet=("x",))
        comp = compile_qi_patterns(setting, full_shift(("x",)))
        assert comp.c5 == ()
        assert len(comp.c1) == 1
        assert len(comp.c2) > 0
        assert len(comp.c4) > 0
        assert "C3" in comp.deferred

    def test_single_cell_family_obeys_bound(self):
        setting = z_setting(alphabet=("x",))
        p = Pattern.of({EPSILON: ("m", "x")})
        comps = [c for c in iter_qi_components(setting) if c is not None]
        family = list(stream_c5(setting, comps, p))
        assert len(family) == 49
        assert len(family) <= tp_bound(setting, p)

    def test_encodings_avoid_compiled_patterns(self):
        setting = z_setting(alphabet=("0", "1"))
        compiled = compile_qi_patterns(setting, full_shift())
        fsq = compiled.pattern_set()
        z = setting.b1
        qi = identity_qi_map(z, 4, BUDGET)
        target = next(iter(enumerate_partial_models(z, 4, BUDGET)))
        rng = random.Random(3)
        for y in (line_window(z, 4, rng) for _ in range(8)):
            enc = encode_along_qi(setting, qi, y, target)
            assert validate_window(enc, fsq, BUDGET)

    def test_streamed_source(self):
        setting = z_setting(alphabet=("x",))
        comps = [c for c in iter_qi_components(setting) if c is not None]

        def source():
            yield Pattern.of({EPSILON: ("m", "x")})
            yield Pattern.of({EPSILON: ("m", "x"), ("a",): ("m", "x")})

        sizes = [sum(1 for _ in stream_c5(setting, comps, p, 10**6)) for p in source()]
        assert sizes[0] == 49 and sizes[1] > 0


class TestMedvedevComposition:
    def test_theta_then_gamma_total(self):
        setting = z_setting()
        z = setting.b1
        fs = full_shift()
        qi = identity_qi_map(z, 5, BUDGET)
        target = next(iter(enumerate_partial_models(z, 5, BUDGET)))
        rng = random.Random(31)
        for y in (line_window(z, 5, rng) for _ in range(15)):
            enc = encode_along_qi(setting, qi, y, target)
            word, slot = theta_map(setting, enc)
            shifted = enc.shift(word)
            out = gamma_map(setting, QIPointer(shifted, slot), 3)
            assert validate_window(out, fs, BUDGET)


class TestMapIO:
    def test_round_trip(self):
        z = z_line()
        qi = halving_qi_map(z, 4, BUDGET)
        text = serialize_qi_map(qi)
        again = parse_qi_map(text)
        assert again.n == qi.n
        assert again.assignments == qi.assignments
        assert again.edge_words == qi.edge_words
        assert serialize_qi_map(again) == text
