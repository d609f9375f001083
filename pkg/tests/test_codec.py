import numpy as np
import pytest

from cfmac.channel import CostSpec, DiscreteMac, from_function, make_binary_erasure_mac
from cfmac.codec import (CodecError, CodeSpec, Message, build_code, cf_coordinate,
                         cf_coordinate_exhaustive, coordination_check, decode, estimate_error,
                         joint_type_l1, product_code_spec, run_trial)
from cfmac.covering import BudgetError, TypicalityCheck
from cfmac.region import CfConfig, CfSplit, CoordinationDist

BEMAC = make_binary_erasure_mac()
HALF = np.array([0.5, 0.5])
IDENTITY = from_function((2,), 2, lambda x: x)


def _bemac(rates, n, seed=0):
    return product_code_spec(BEMAC, [HALF, HALF], rates, n, seed)


def _coordinated_spec(n=16, cd=0.5, seed=0):
    pu = np.array([[0.45, 0.05], [0.05, 0.45]])
    mass = pu[None, :, :, None, None] * np.full((1, 1, 1, 2, 2), 0.25)
    p = CoordinationDist(mass / mass.sum())
    cfg = CfConfig((0.2, 0.2), (cd, cd))
    return CodeSpec(BEMAC, p, CfSplit((0.0, 0.0), (cd, cd)), cfg, (0.2, 0.2), n, seed)


class TestSpec:
    def test_sub_rates_add_up(self):
        p = CoordinationDist.from_forwarding(np.full((1, 2, 2), 0.25))
        spec = CodeSpec(BEMAC, p, CfSplit((0.1, 0.05), (0.0, 0.0)), CfConfig((0.3, 0.2), (0.1, 0.1)),
                        (0.5, 0.08), 16)
        for r, sub in zip(spec.rates, spec.sub_rates()):
            assert sum(sub) == pytest.approx(r)
            assert min(sub) >= 0
        assert spec.sub_rates()[0] == pytest.approx((0.1, 0.2, 0.2))
        assert spec.sub_rates()[1] == pytest.approx((0.05, 0.03, 0.0))
        assert spec.epsilon == pytest.approx(2 * spec.delta)

    def test_mismatch_rejected(self):
        with pytest.raises(CodecError):
            _bemac((0.5,), 16)

    def test_overloaded_split(self):
        p = CoordinationDist.from_forwarding(np.full((1, 2, 2), 0.25))
        with pytest.raises(CodecError):
            CodeSpec(BEMAC, p, CfSplit((0.2, 0.0), (0.0, 0.0)), CfConfig((0.1, 0.1), (0.1, 0.1)), (0.1, 0.1), 8)


class TestBooks:
    def test_zero_rate_single_codeword(self):
        books = build_code(_bemac((0.0, 0.0), 16))
        assert books.u0.shape == (1, 16)
        assert books.x[0].shape == (1, 1, 1, 1, 16)

    def test_same_seed_same_books(self):
        a, b = build_code(_bemac((0.4, 0.4), 12, 3)), build_code(_bemac((0.4, 0.4), 12, 3))
        for xa, xb in zip(a.x, b.x):
            np.testing.assert_array_equal(xa, xb)
        c = build_code(_bemac((0.4, 0.4), 12, 4))
        assert not np.array_equal(a.x[0], c.x[0])

    def test_u0_frequencies(self):
        pu0 = np.array([0.7, 0.3])
        mass = pu0[:, None, None, None, None] * np.full((2, 1, 1, 2, 2), 0.25)
        p = CoordinationDist(mass)
        cfg = CfConfig((0.1, 0.1), (0.1, 0.1))
        spec = CodeSpec(BEMAC, p, CfSplit((0.1, 0.1), (0.0, 0.0)), cfg, (0.1, 0.1), 64)
        books = build_code(spec)
        total = books.u0.size
        assert total >= 10_000
        ones = (books.u0 == 1).sum()
        assert abs(ones - 0.3 * total) <= 4 * np.sqrt(total * 0.21)

    def test_budget(self):
        with pytest.raises(BudgetError):
            build_code(_bemac((0.6, 0.6), 64))

    def test_cost_flags(self):
        mac = DiscreteMac(BEMAC.transition, (CostSpec([0, 1], 0.5), CostSpec([0, 1], 0.5)))
        spec = product_code_spec(mac, [HALF, HALF], (0.5, 0.5), 10)
        books = build_code(spec)
        expect = books.x[0].sum(axis=-1) <= 5
        np.testing.assert_array_equal(books.cost_ok[0], expect)


class TestCoordination:
    def test_single_candidate(self):
        spec = _bemac((0.3, 0.3), 10)
        books = build_code(spec)
        maps = [books.u[j][0, 0] for j in range(2)]
        assert cf_coordinate(books.u0[0], maps, coordination_check(spec)) == ((0, 0), True)

    def test_first_typical_candidate(self):
        check = TypicalityCheck(np.full((1, 2, 2), 0.25), 0.1, 8)
        maps = [np.zeros((3, 8), int), np.ones((3, 8), int)]
        assert cf_coordinate(np.zeros(8, int), maps, check) == ((0, 0), True)

    def test_matches_exhaustive(self, rng):
        pu = np.array([[0.4, 0.1], [0.1, 0.4]])
        check = TypicalityCheck(pu[None], 0.15, 10)
        for _ in range(100):
            maps = [rng.integers(0, 2, (6, 10)), rng.integers(0, 2, (5, 10))]
            u0 = np.zeros(10, int)
            assert cf_coordinate(u0, maps, check) == cf_coordinate_exhaustive(u0, maps, check)

    def test_fallback(self):
        check = TypicalityCheck(np.array([[[0.5, 0.0], [0.0, 0.5]]]), 0.1, 4)
        maps = [np.zeros((2, 4), int), np.ones((2, 4), int)]
        assert cf_coordinate(np.zeros(4, int), maps, check) == ((0, 0), False)

    def test_selection_tracks_target(self):
        spec = _coordinated_spec()
        books = build_code(spec)
        target = np.array([[0.45, 0.05], [0.05, 0.45]])
        closer = total = 0
        check = coordination_check(spec)
        for wd in range(books.u[0].shape[1]):
            maps = [books.u[0][0, wd], books.u[1][0, wd]]
            z, found = cf_coordinate(books.u0[0], maps, check)
            if not found:
                continue
            total += 1
            chosen = joint_type_l1(maps[0][z[0]], maps[1][z[1]], target)
            plain = joint_type_l1(maps[0][0], maps[1][0], target)
            closer += chosen < plain
        assert total >= 5
        assert closer / total >= 0.9


class TestDecode:
    def test_identity_channel(self):
        spec = product_code_spec(IDENTITY, [HALF], (0.5,), 16)
        est = estimate_error(spec, 100)
        assert est.p_error <= 0.05

    def test_no_typical_tuple(self):
        books = build_code(_bemac((0.3, 0.3), 10))
        out = decode(np.full(10, 2), books)
        assert out == (Message(0, 0, 0), Message(0, 0, 0))

    def test_ambiguity_is_an_error(self):
        books = build_code(_bemac((0.3, 0.3), 12, seed=1))
        res = next(r for r in (run_trial(books, t) for t in range(50))
                   if not r.error and r.sent[0].wj > 0)
        w = res.sent[0].wj
        yn = books.x[0][0, 0, 0, w] + books.x[1][0, 0, 0, res.sent[1].wj]
        assert decode(yn, books)[0].wj == w
        books.x[0][0, 0, 0, 0] = books.x[0][0, 0, 0, w]  # duplicate codeword
        assert decode(yn, books) == (Message(0, 0, 0), Message(0, 0, 0))


class TestEstimate:
    def test_zero_rate(self):
        assert estimate_error(_bemac((0.0, 0.0), 16), 100).p_error == 0.0

    def test_histogram_and_determinism(self):
        a = estimate_error(_bemac((0.85, 0.85), 12, seed=2), 100, keep_results=True)
        b = estimate_error(_bemac((0.85, 0.85), 12, seed=2), 100)
        assert a.p_error == b.p_error and a.histogram == b.histogram
        assert sum(a.histogram.values()) == a.errors
        assert sum(a.class_fractions().values()) == pytest.approx(a.p_error)
        assert all((r.failure is None) != r.error for r in a.results)
        assert a.p_error > 0.5

    def test_trial_count(self):
        with pytest.raises(CodecError):
            estimate_error(_bemac((0.1, 0.1), 8), 10)

    def test_coordinated_code_runs(self):
        est = estimate_error(_coordinated_spec(n=12, cd=0.5), 100)
        assert 0 <= est.p_error <= 1
