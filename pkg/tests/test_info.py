import numpy as np
import pytest

from cfmac.info import (EntropyCache, JointPmf, SupportError, conditional_entropy, entropy,
                        is_product, joint_input_output, kl_divergence, mutual_information,
                        output_pmf, product_pmf, total_correlation)
from cfmac.channel import make_binary_erasure_mac


def _h(p):
    p = np.asarray(p).ravel()
    p = p[p > 0]
    return -(p * np.log2(p)).sum()


class TestJointPmf:
    def test_rejects_bad_mass(self):
        with pytest.raises(ValueError):
            JointPmf(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            JointPmf(np.array([1.2, -0.2]))

    def test_labels_and_marginal(self):
        p = JointPmf(np.full((2, 3), 1 / 6), labels=("a", "b"))
        np.testing.assert_allclose(p.marginal("b"), np.full(3, 1 / 3))
        assert p.resolve(["b", 0]) == (0, 1)

    def test_immutable(self):
        p = JointPmf(np.full(4, 0.25))
        with pytest.raises(ValueError):
            p.mass[0] = 1.0


class TestMeasures:
    def test_fair_bit(self):
        assert entropy([0.5, 0.5]) == pytest.approx(1.0)

    def test_against_direct_formulas(self, rng):
        for _ in range(20):
            m = rng.dirichlet(np.ones(12)).reshape(2, 3, 2)
            hx, hy, hz = _h(m.sum((1, 2))), _h(m.sum((0, 2))), _h(m.sum((0, 1)))
            hxy, hyz, hxz, hxyz = _h(m.sum(2)), _h(m.sum(0)), _h(m.sum(1)), _h(m)
            assert entropy(m, [0, 1]) == pytest.approx(hxy)
            assert conditional_entropy(m, [0], [2]) == pytest.approx(hxz - hz)
            cmi = hxz + hyz - hxyz - hz
            assert mutual_information(m, [0], [1], [2]) == pytest.approx(max(cmi, 0))
            tc = hx + hy + hz - hxyz
            assert total_correlation(m, [0, 1, 2]) == pytest.approx(tc)

    def test_mi_nonnegative_and_symmetric(self, rng):
        m = rng.dirichlet(np.ones(9)).reshape(3, 3)
        assert mutual_information(m, 0, 1) == pytest.approx(mutual_information(m, 1, 0))
        assert mutual_information(product_pmf([m.sum(1), m.sum(0)]), 0, 1) == pytest.approx(0, abs=1e-12)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            mutual_information(np.full((2, 2), 0.25), [0], [0])

    def test_kl(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)
        with pytest.raises(SupportError) as exc:
            kl_divergence([0.5, 0.5], [1.0, 0.0])
        assert exc.value.index == 1

    def test_product(self, rng):
        a, b = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3))
        assert is_product(product_pmf([a, b]))
        assert not is_product(np.array([[0.5, 0], [0, 0.5]]))

    def test_cache_matches_functions(self, rng):
        m = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)
        c = EntropyCache(m)
        assert c.mi({0}, {1}, {2}) == pytest.approx(mutual_information(m, 0, 1, 2))
        assert c.tc({0, 1, 2}) == pytest.approx(total_correlation(m, [0, 1, 2]))


class TestChannelInterface:
    def test_bemac_output(self):
        mac = make_binary_erasure_mac()
        py = output_pmf(mac, np.full((2, 2), 0.25))
        np.testing.assert_allclose(py.mass, [0.25, 0.5, 0.25])
        j = joint_input_output(mac, np.full((2, 2), 0.25))
        assert mutual_information(j, [0, 1], [2]) == pytest.approx(1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            output_pmf(make_binary_erasure_mac(), np.full(4, 0.25))
