import itertools

import numpy as np
import pytest

from cfmac.channel import make_binary_erasure_mac, random_mac
from cfmac.info import product_pmf
from cfmac.region import (CfConfig, CfSplit, CoordinationDist, PreconditionError, RegionError,
                          bounds_agree_condition, conferencing_in_capacities, corner_point,
                          forwarding_bound, inner_bound, is_nondecreasing, is_submodular,
                          lift_to_outer, max_weighted_sum, max_weighted_sum_enumerated, outer_bound,
                          phi_joint, phi_table, random_coordination_dist, vertex_enumeration_max,
                          zeta)

BEMAC = make_binary_erasure_mac()
HALF = np.array([0.5, 0.5])


def _uniform_forwarding():
    return CoordinationDist.from_forwarding(product_pmf([HALF, HALF])[None])


class TestSplit:
    def test_split_check(self):
        cfg = CfConfig((0.2, 0.2), (0.3, 0.3))
        CfSplit((0.2, 0.1), (0.1, 0.1)).check(cfg)
        with pytest.raises(RegionError):
            CfSplit((0.3, 0.0), (0.0, 0.0)).check(cfg)
        with pytest.raises(RegionError):
            CfSplit((0.2, 0.2), (0.2, 0.0)).check(cfg)

    def test_negative_rejected(self):
        with pytest.raises(RegionError):
            CfConfig((-1, 0), (0, 0))


class TestZeta:
    def test_identical_bits(self):
        # U1 = U2 a fair bit: zeta_{12} = 0.6 + 0.6 - 1 - 1 + 1
        pu = np.array([[0.5, 0], [0, 0.5]])
        mass = pu[None, :, :, None, None] * np.full((1, 1, 1, 2, 2), 0.25)
        p = CoordinationDist(mass / mass.sum())
        split = CfSplit((0, 0), (0.6, 0.6))
        assert zeta({0, 1}, split, p) == pytest.approx(0.2)
        assert zeta({0}, split, p) == pytest.approx(0.6)

    def test_subset_of_sd_required(self):
        p = _uniform_forwarding()
        with pytest.raises(RegionError):
            zeta({0}, CfSplit((0, 0), (0, 0.1)), p)


class TestInnerBound:
    def test_no_cooperation_bemac(self):
        region = inner_bound(_uniform_forwarding(), CfSplit((0, 0), (0, 0)), CfConfig((0, 0), (0, 0)), BEMAC)
        assert max_weighted_sum(region, (1, 1)).value == pytest.approx(1.5, abs=1e-9)
        assert max_weighted_sum(region, (1, 0)).value == pytest.approx(1.0, abs=1e-9)
        assert region.contains((0.5, 1.0)) and not region.contains((0.8, 0.8))

    def test_forwarding_adds_c0(self):
        p = product_pmf([HALF, HALF])[None]
        cfg = CfConfig((0.1, 0.1), (0.1, 0.1))
        region = forwarding_bound(p, (0.1, 0.1), BEMAC, cfg)
        assert max_weighted_sum(region, (1, 0)).value == pytest.approx(1.1, abs=1e-9)
        assert max_weighted_sum(region, (1, 1)).value == pytest.approx(1.5, abs=1e-9)

    def test_milp_matches_enumeration(self, rng):
        mac = random_mac((2, 2), 2, rng)
        cfg = CfConfig((0.3, 0.3), (0.3, 0.3))
        split = CfSplit((0.1, 0.1), (0.2, 0.2))
        checked = 0
        for _ in range(30):
            p = random_coordination_dist(rng, 2, u0_size=1, floor=0.05)
            try:
                region = inner_bound(p, split, cfg, mac)
            except (PreconditionError, RegionError):
                continue
            if region.empty_reason is not None or region.n_candidates() > 5000:
                continue
            for w in [(1, 1), (1, 2), (3, 1)]:
                a = max_weighted_sum(region, w).value
                b = max_weighted_sum_enumerated(region, w).value
                assert a == pytest.approx(b, abs=1e-7)
            checked += 1
            if checked >= 5:
                break
        assert checked >= 1

    def test_inner_inside_outer(self, rng):
        mac = random_mac((2, 2), 3, rng)
        cfg = CfConfig((0.2, 0.2), (0.3, 0.3))
        split = CfSplit((0.1, 0.1), (0.2, 0.2))
        for _ in range(15):
            p = random_coordination_dist(rng, 2, floor=0.05)
            try:
                inner = inner_bound(p, split, cfg, mac)
            except (PreconditionError, RegionError):
                continue
            if inner.empty_reason is not None:
                continue
            outer = outer_bound(mac, cfg, lift_to_outer(p))
            for w in [(1, 1), (1, 3), (2, 1)]:
                assert max_weighted_sum(inner, w).value <= max_weighted_sum(outer, w).value + 1e-9


class TestLpOracle:
    def test_vertex_enumeration(self, rng):
        region = inner_bound(_uniform_forwarding(), CfSplit((0, 0), (0, 0)), CfConfig((0, 0), (0, 0)), BEMAC)
        for w in [(1, 1), (1, 2), (5, 1)]:
            assert vertex_enumeration_max(region.constraints, 2, w) == pytest.approx(
                max_weighted_sum(region, w).value, abs=1e-9)


class TestOuterAndConferencing:
    def test_row_sums(self):
        c = np.array([[0, 0.2, 0.1], [0.3, 0, 0], [0, 0.4, 0]])
        np.testing.assert_allclose(conferencing_in_capacities(c), [0.3, 0.3, 0.4])

    def test_agreement_condition(self):
        assert bounds_agree_condition(CfConfig((0.2, 0.3), (0.3, 0.2)))
        assert not bounds_agree_condition(CfConfig((0.2, 0.3), (0.2, 0.2)))

    def test_forwarding_equals_outer_when_condition_holds(self, rng):
        mac = random_mac((2, 2), 3, rng)
        cfg = CfConfig((0.2, 0.3), (0.3, 0.2))
        for _ in range(5):
            p = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
            p = p.sum(axis=(1, 2))[:, None, None] * (p.sum(2) / p.sum((1, 2))[:, None])[:, :, None] \
                * (p.sum(1) / p.sum((1, 2))[:, None])[:, None, :]
            a = max_weighted_sum(forwarding_bound(p, cfg.c_in, mac), (1, 1)).value
            b = max_weighted_sum(outer_bound(mac, cfg, p), (1, 1)).value
            assert a == pytest.approx(b, abs=1e-9)

    def test_dependent_inputs_rejected(self):
        p = np.array([[0.5, 0], [0, 0.5]])[None]
        with pytest.raises(PreconditionError):
            outer_bound(BEMAC, CfConfig((0, 0), (0, 0)), p)


class TestSubmodular:
    def _joint(self, rng, k=3):
        mac = random_mac((2,) * k, 3, rng)
        pu = rng.dirichlet(np.ones(2 ** k)).reshape((2,) * k)
        conds = [rng.dirichlet(np.ones(2), size=2) for _ in range(k)]
        return phi_joint(pu, conds, mac)

    def test_properties(self, rng):
        for _ in range(10):
            phi = phi_table(self._joint(rng))
            assert is_submodular(phi) and is_nondecreasing(phi)

    def test_corners(self, rng):
        phi = phi_table(self._joint(rng))
        for order in itertools.permutations(range(3)):
            r = corner_point(phi, order)
            assert r.sum() == pytest.approx(phi[-1])
            for mask in range(1, 8):
                assert sum(r[j] for j in range(3) if mask >> j & 1) <= phi[mask] + 1e-9

    def test_factorization_checked(self, rng):
        j = self._joint(rng, 2).copy()
        j[0, 0, 0, 0, 0] += 0.05
        j /= j.sum()
        with pytest.raises(PreconditionError):
            phi_table(j)
