import pytest

from blueprints.core import Budget, enumerate_partial_models, equivalence_query
from blueprints.domino import (
    CertificateError,
    QuotientCertificate,
    certificate_period_word,
    certify_empty,
    certify_nonempty,
    domino_run,
    parse_empty,
    parse_quotient,
    serialize_empty,
    serialize_quotient,
    verify_empty,
    verify_quotient,
)
from blueprints.library import (
    full_shift,
    hard_square,
    mismatched_wang,
    proper_two_coloring,
    tree12,
    z_grid,
    z_line,
)
from blueprints.subshift import Pattern, PatternSet, find_period_witness, validate_window

BUDGET = Budget(8, 4000)


def all_adjacent_pairs_forbidden():
    pats = [
        Pattern.of({(): ("m", a), ("a",): ("m", b)})
        for a in "01"
        for b in "01"
    ]
    return PatternSet(("0", "1"), pats, name="all_pairs")


class TestCertifyEmpty:
    def test_mismatched_wang_at_radius_one(self):
        z2 = z_grid()
        fs = mismatched_wang(z2)
        cert = certify_empty(z2, fs, 1, BUDGET)
        assert cert is not None and cert.radius == 1
        verify_empty(z2, fs, cert, BUDGET)

    def test_full_shift_never_empty(self):
        z2 = z_grid()
        for r in (1, 2):
            assert certify_empty(z2, full_shift(), r, BUDGET) is None

    def test_all_pairs_on_z(self):
        z = z_line()
        fs = all_adjacent_pairs_forbidden()
        cert = certify_empty(z, fs, 1, BUDGET)
        assert cert is not None
        verify_empty(z, fs, cert, BUDGET)

    def test_verifier_rejects_wrong_instance(self):
        z2 = z_grid()
        fs = mismatched_wang(z2)
        cert = certify_empty(z2, fs, 1, BUDGET)
        with pytest.raises(CertificateError, match="digest"):
            verify_empty(z2, full_shift(), cert, BUDGET)


class TestCertifyNonempty:
    def test_full_shift_one_vertex_four_loops(self):
        z2 = z_grid()
        cert = certify_nonempty(z2, full_shift(), 2, BUDGET)
        assert cert is not None
        assert len(cert.vertices) == 1
        assert len(cert.edges) == 4
        assert all(v == 0 and t == 0 for v, _, t in cert.edges)
        verify_quotient(z2, full_shift(), cert, BUDGET)

    def test_tree12_one_vertex_s_loop(self):
        t = tree12()
        cert = certify_nonempty(t, full_shift(), 2, BUDGET)
        assert cert is not None
        assert cert.vertices == (("1", "0"),)
        assert cert.edges == ((0, "s", 0),)
        verify_quotient(t, full_shift(), cert, BUDGET)

    def test_checkerboard_from_search(self):
        z2 = z_grid()
        fs = proper_two_coloring(z2)
        cert = certify_nonempty(z2, fs, 2, BUDGET)
        assert cert is not None
        assert len(cert.vertices) == 2
        # every generator edge swaps the two vertices
        assert all(v != t for v, _, t in cert.edges)
        verify_quotient(z2, fs, cert, BUDGET)

    def test_explicit_checkerboard_for_hard_square(self):
        """The 2-vertex checkerboard is a valid hard-square certificate whose
        relation closure holds for every grid relation."""
        z2 = z_grid()
        fs = hard_square(z2)
        cert = QuotientCertificate(
            vertices=(("m", "0"), ("m", "1")),
            edges=tuple(
                (v, s, 1 - v) for v in (0, 1) for s in ("e", "E", "n", "N")
            ),
            base=0,
            blueprint_digest=z2.digest(),
            patterns_digest=fs.digest(),
        )
        verify_quotient(z2, fs, cert, BUDGET)
        for u, v in z2.relations:
            for idx in (0, 1):
                end_u = cert.walk(z2, idx, u)
                end_v = cert.walk(z2, idx, v)
                assert end_u == end_v is not None

    def test_unfolding_passes_window_validator(self):
        z2 = z_grid()
        fs = proper_two_coloring(z2)
        cert = certify_nonempty(z2, fs, 2, BUDGET)
        window = cert.unfold(z2, 3, BUDGET)
        assert validate_window(window, fs, BUDGET)

    def test_cycle_word_is_a_period_witness(self):
        z2 = z_grid()
        fs = proper_two_coloring(z2)
        cert = certify_nonempty(z2, fs, 2, BUDGET)
        word = certificate_period_word(z2, cert)
        assert word is not None
        window = cert.unfold(z2, 4, BUDGET)
        assert window.shift(word).restrict(4 - len(word)) == window.restrict(4 - len(word))
        assert equivalence_query(z2, word, (), BUDGET).is_not_equivalent
        hit = find_period_witness(z2, window, BUDGET)
        assert hit is not None

    def test_tampered_certificate_rejected(self):
        z2 = z_grid()
        fs = proper_two_coloring(z2)
        cert = certify_nonempty(z2, fs, 2, BUDGET)
        bad = QuotientCertificate(
            vertices=cert.vertices,
            edges=tuple(
                (v, s, v) for v, s, _ in cert.edges  # self-loops break avoidance
            ),
            base=cert.base,
            blueprint_digest=cert.blueprint_digest,
            patterns_digest=cert.patterns_digest,
        )
        with pytest.raises(CertificateError):
            verify_quotient(z2, fs, bad, BUDGET)

    def test_requires_nearest_neighbor(self):
        z = z_line()
        fs = PatternSet(
            ("0", "1"),
            [Pattern.of({(): ("m", "1"), ("a", "a"): ("m", "1")})],
        )
        with pytest.raises(Exception, match="nearest-neighbor"):
            certify_nonempty(z, fs, 2, BUDGET)


class TestDominoRun:
    def test_wang_empty_first_step(self):
        z2 = z_grid()
        res = domino_run(z2, mismatched_wang(z2), budget=BUDGET)
        assert res.verdict == "empty" and res.exit_code == 1
        assert res.empty_certificate.radius == 1

    def test_hard_square_nonempty(self):
        z2 = z_grid()
        res = domino_run(z2, hard_square(z2), budget=BUDGET)
        assert res.verdict == "nonempty" and res.exit_code == 0

    def test_bounded_driver_unknown(self):
        # An instance neither empty at radius 1 nor admitting a small quotient:
        # forbid every pair of equal letters and every pair with both letters
        # in {0,1} shifted... use three letters with a cyclic mismatch that
        # kills small graphs but has admissible windows.
        z2 = z_grid()
        alphabet = ("0", "1", "2")
        pats = []
        for s in z2.generators:
            for a in alphabet:
                pats.append(Pattern.of({(): ("m", a), (s,): ("m", a)}))
        # also forbid the cyclic successor pattern horizontally only
        for a, nxt in (("0", "1"), ("1", "2"), ("2", "0")):
            pats.append(Pattern.of({(): ("m", a), ("e",): ("m", nxt)}))
        fs = PatternSet(alphabet, pats, name="strained")
        res = domino_run(z2, fs, schedule=[(1, 1)], budget=BUDGET)
        assert res.verdict == "unknown" and res.exit_code == 2

    def test_never_contradictory(self):
        z2 = z_grid()
        for fs in (full_shift(), hard_square(z2), mismatched_wang(z2)):
            res = domino_run(z2, fs, budget=BUDGET)
            assert not (res.empty_certificate and res.quotient_certificate)

    def test_fixed_model_variant(self):
        t = tree12()
        fs = full_shift()
        models = list(enumerate_partial_models(t, 1, BUDGET))
        for base in models:
            res = domino_run(t, fs, schedule=[(1, 2), (2, 4)], budget=BUDGET, model=base)
            assert res.verdict == "nonempty"
            window = res.quotient_certificate.unfold(t, base.radius, BUDGET)
            assert window.model == base

    def test_fixed_model_empty_variant(self):
        # Forbid the letter that the fixed model's root forces two steps out:
        # with state-specific single-cell patterns, one model family dies.
        t = tree12()
        pats = [Pattern.of({(): ("1", a)}) for a in ("0", "1")]
        fs = PatternSet(("0", "1"), pats, name="no-state-1")
        models = list(enumerate_partial_models(t, 1, BUDGET))
        path_like = [m for m in models if m.state(()) == "1"]
        res = domino_run(t, fs, schedule=[(1, 2)], budget=BUDGET, model=path_like[0])
        assert res.verdict == "empty"
        assert res.empty_certificate.model_restricted


class TestSerialization:
    def test_quotient_round_trip(self):
        z2 = z_grid()
        cert = certify_nonempty(z2, proper_two_coloring(z2), 2, BUDGET)
        text = serialize_quotient(cert)
        assert parse_quotient(text) == cert

    def test_empty_round_trip(self):
        z2 = z_grid()
        cert = certify_empty(z2, mismatched_wang(z2), 1, BUDGET)
        text = serialize_empty(cert)
        assert parse_empty(text) == cert

    def test_third_party_reverification(self):
        # parse from text alone, then verify against a freshly built instance
        z2 = z_grid()
        fs = proper_two_coloring(z2)
        text = serialize_quotient(certify_nonempty(z2, fs, 2, BUDGET))
        cert = parse_quotient(text)
        verify_quotient(z_grid(), proper_two_coloring(z_grid()), cert, BUDGET)
