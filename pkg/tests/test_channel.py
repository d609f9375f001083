import json

import numpy as np
import pytest

from cfmac.channel import (ChannelError, CostSpec, DiscreteMac, GaussianMac, from_json,
                           load_channel, make_adder_mac, make_binary_erasure_mac, random_mac,
                           sample_output, save_channel, to_json, transmit, validate)


class TestConstruction:
    def test_bemac_is_deterministic_adder(self):
        mac = make_binary_erasure_mac()
        assert mac.k == 2 and mac.input_sizes == (2, 2) and mac.output_size == 3
        assert mac.transition[1, 1, 2] == 1.0 and mac.transition[0, 1, 1] == 1.0

    def test_invalid_tensor(self):
        w = np.full((2, 2, 3), 0.4)
        assert validate(w) is not None
        with pytest.raises(ChannelError):
            DiscreteMac(w)

    def test_valid_random(self, rng):
        assert validate(random_mac((2, 3), 4, rng)) is None

    def test_costs(self):
        w = make_binary_erasure_mac().transition
        costs = (CostSpec([0, 1], 0.5), CostSpec([0, 1], 0.5))
        mac = DiscreteMac(w, costs)
        assert mac.inputs_admissible(np.full((2, 2), 0.25))
        assert not mac.inputs_admissible(np.array([[0, 0], [0, 1.0]]))
        assert costs[0].block_cost([1, 1, 0]) == pytest.approx(2 / 3)
        with pytest.raises(ChannelError):
            CostSpec([0, -1], 1)

    def test_restrict(self):
        sub = make_adder_mac(3).restrict(2, 1)
        assert sub.k == 2
        assert sub.transition[0, 0, 1] == 1.0

    def test_gaussian(self):
        g = GaussianMac(2.0, (100, 50))
        np.testing.assert_allclose(g.snr, [50, 25])
        with pytest.raises(ChannelError):
            GaussianMac(0.0, (1,))


class TestSampling:
    def test_sample_output_bounds(self, rng):
        mac = make_binary_erasure_mac()
        assert sample_output(mac, (1, 1), rng) == 2
        with pytest.raises(IndexError):
            sample_output(mac, (2, 0), rng)

    def test_transmit_deterministic_channel(self, rng):
        mac = make_binary_erasure_mac()
        x = rng.integers(0, 2, (2, 50))
        np.testing.assert_array_equal(transmit(mac, x, rng), x.sum(0))

    def test_transmit_frequencies(self, rng):
        mac = random_mac((2, 2), 3, rng)
        x = np.zeros((2, 20000), dtype=int)
        y = transmit(mac, x, rng)
        freq = np.bincount(y, minlength=3) / y.size
        np.testing.assert_allclose(freq, mac.transition[0, 0], atol=0.015)


class TestJson:
    def test_round_trip(self, rng, tmp_path):
        mac = DiscreteMac(random_mac((2, 3), 2, rng).transition, (CostSpec([0, 1], 1), CostSpec([0, 1, 2], 1)))
        path = tmp_path / "c.json"
        save_channel(mac, path)
        assert load_channel(path) == mac

    def test_schema_errors(self, tmp_path):
        doc = to_json(make_binary_erasure_mac())
        bad = dict(doc)
        del bad["transition"]
        with pytest.raises(ChannelError, match="schema"):
            from_json(bad)
        bad = dict(doc, transition=doc["transition"][:-1])
        with pytest.raises(ChannelError, match="shape"):
            from_json(bad)
        p = tmp_path / "x.json"
        p.write_text("{not json")
        with pytest.raises(ChannelError):
            load_channel(p)
