import math
from dataclasses import replace

import numpy as np
import pytest

from gfra import traffic
from gfra.config import default_config, validate


class TestFramingSequences:
    def test_lengths(self):
        assert traffic.START_BITS.size == 128
        assert traffic.TAIL_BITS.size == 128

    def test_msb_first_unpacking(self):
        # 0x1C = 0001 1100, 0xAA = 1010 1010
        np.testing.assert_array_equal(traffic.START_BITS[:8],
                                      [0, 0, 0, 1, 1, 1, 0, 0])
        np.testing.assert_array_equal(traffic.TAIL_BITS[:8],
                                      [1, 0, 1, 0, 1, 0, 1, 0])

    def test_bpsk_map(self):
        np.testing.assert_array_equal(traffic.bits_to_symbols([0, 1, 0]),
                                      [1.0, -1.0, 1.0])


class TestWaveform:
    def test_single_codeword_length(self, cfg, rng):
        scenario = traffic.make_single_unit_scenario(cfg, rng, iota=1)
        x = traffic.waveform(scenario.activations[0], cfg)
        assert x.size == 128 + 128 + 128 == 384

    def test_start_and_tail_segments(self, cfg, rng):
        scenario = traffic.make_single_unit_scenario(cfg, rng, iota=3)
        x = traffic.waveform(scenario.activations[0], cfg)
        np.testing.assert_array_equal(x[:128], traffic.START_SYMBOLS)
        np.testing.assert_array_equal(x[-128:], traffic.TAIL_SYMBOLS)
        assert set(np.unique(x)) <= {-1.0, 1.0}

    def test_payload_length_checked(self, cfg, rng):
        scenario = traffic.make_single_unit_scenario(cfg, rng, iota=2)
        act = scenario.activations[0]
        act.payload = act.payload[:-1]
        with pytest.raises(ValueError):
            traffic.waveform(act, cfg)


class TestGenerateScenario:
    def test_zero_rate_empty(self, rng):
        cfg = default_config(lam=0.0)
        assert traffic.generate_scenario(cfg, rng).activations == []

    def test_mean_activation_count(self, rng):
        cfg = default_config(lam=1e-3)
        n = 400
        counts = [len(traffic.generate_scenario(cfg, rng).activations)
                  for _ in range(n)]
        expected = cfg.traffic.lam * cfg.T_act  # 1.041
        se = math.sqrt(expected / n)
        assert abs(np.mean(counts) - expected) <= 3 * se

    def test_placement_invariants(self, rng):
        cfg = default_config(lam=5e-3)
        frame = cfg.frame
        for _ in range(20):
            scenario = traffic.generate_scenario(cfg, rng)
            for act in scenario.activations:
                assert 0 <= act.tau_u <= cfg.T_act - 1
                assert 1 <= act.iota_u <= frame.iota_max
                assert len(set(act.slots)) == frame.N_rep
                assert all(1 <= s <= frame.N_slot for s in act.slots)
                L = act.unit_length(frame)
                for start, slot, offset in zip(act.replica_starts(cfg.L_max),
                                               act.slots, act.offsets):
                    assert 0 <= offset <= frame.L_max - L
                    assert start + L - 1 <= act.tau_u + slot * frame.L_max - 1
                    assert start + L <= frame.T_SF

    def test_full_length_unit_has_zero_offset(self, cfg, rng):
        for _ in range(30):
            scenario = traffic.make_single_unit_scenario(cfg, rng, iota=5)
            act = scenario.activations[0]
            assert cfg.frame.offset_max(5) == 0
            assert (act.offsets == 0).all()

    def test_ground_truth_counts(self, rng):
        cfg = default_config(lam=3e-3)
        scenario = traffic.generate_scenario(cfg, rng)
        n = len(scenario.activations)
        assert scenario.start_truth.size == cfg.frame.N_rep * n
        assert scenario.tail_truth.size == cfg.frame.N_rep * n
        for act_idx, start, tail in zip(scenario.truth_act,
                                        scenario.start_truth,
                                        scenario.tail_truth):
            act = scenario.activations[act_idx]
            assert tail - start == cfg.frame.tail_distance(act.iota_u)


class TestSynthesize:
    def test_empty_noiseless_buffer(self, rng):
        cfg = validate(default_config(lam=0.0).frame,
                       replace(default_config().radio, sigma_w2=0.0),
                       default_config(lam=0.0).traffic)
        buffer = traffic.synthesize(traffic.Scenario([], cfg), rng)
        assert not buffer.samples.any()
        assert buffer.samples.shape == (4, 10_000)

    def test_single_replica_support(self, rng):
        base = default_config()
        cfg = validate(replace(base.frame, N_rep=1),
                       replace(base.radio, sigma_w2=0.0), base.traffic)
        scenario = traffic.make_single_unit_scenario(cfg, rng, iota=2)
        act = scenario.activations[0]
        buffer = traffic.synthesize(scenario, rng).samples
        x = traffic.waveform(act, cfg)
        start = act.replica_starts(cfg.L_max)[0]
        np.testing.assert_allclose(buffer[:, start:start + x.size],
                                   act.channels[0].h[:, None] * x[None, :])
        untouched = np.ones(cfg.frame.T_SF, dtype=bool)
        untouched[start:start + x.size] = False
        assert not buffer[:, untouched].any()

    def test_superposition_additivity(self, rng):
        base = default_config(lam=2e-3)
        cfg = validate(base.frame, replace(base.radio, sigma_w2=0.0),
                       base.traffic)
        sc1 = traffic.generate_scenario(cfg, rng)
        sc2 = traffic.generate_scenario(cfg, rng)
        merged = traffic.Scenario(sc1.activations + sc2.activations, cfg)
        buf1 = traffic.synthesize(sc1, rng).samples
        buf2 = traffic.synthesize(sc2, rng).samples
        merged_buf = traffic.synthesize(merged, rng).samples
        np.testing.assert_allclose(merged_buf, buf1 + buf2, atol=1e-12)

    def test_deterministic_replay(self):
        cfg = default_config(lam=2e-3)
        outs = []
        for _ in range(2):
            rng = np.random.default_rng(cfg.traffic.seed)
            scenario = traffic.generate_scenario(cfg, rng)
            outs.append(traffic.synthesize(scenario, rng).samples)
        np.testing.assert_array_equal(outs[0], outs[1])


def test_scenario_save_load_roundtrip(tmp_path, rng):
    cfg = default_config(lam=3e-3)
    scenario = traffic.generate_scenario(cfg, rng)
    assert scenario.activations, "seeded scenario should not be empty"
    path = tmp_path / "scenario.npz"
    traffic.save_scenario(path, scenario)
    loaded = traffic.load_scenario(path, cfg)
    assert len(loaded.activations) == len(scenario.activations)
    for a, b in zip(scenario.activations, loaded.activations):
        assert a.tau_u == b.tau_u and a.iota_u == b.iota_u
        np.testing.assert_array_equal(a.payload, b.payload)
        np.testing.assert_array_equal(a.slots, b.slots)
        np.testing.assert_array_equal(a.offsets, b.offsets)
        assert a.budget == b.budget
        for ca, cb in zip(a.channels, b.channels):
            np.testing.assert_array_equal(ca.h, cb.h)
    rng2 = np.random.default_rng(1)
    buf_a = traffic.synthesize(scenario, np.random.default_rng(1)).samples
    buf_b = traffic.synthesize(loaded, rng2).samples
    np.testing.assert_array_equal(buf_a, buf_b)
