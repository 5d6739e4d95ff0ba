import math

import numpy as np
import pytest

from gfra import detect, ldpc
from gfra.traffic import START_SYMBOLS, TAIL_SYMBOLS


class TestGlrtStatistic:
    def test_matched_window_scores_one(self, rng):
        for _ in range(10):
            c = rng.standard_normal() + 1j * rng.standard_normal()
            if abs(c) < 1e-3:
                continue
            score = detect.glrt_statistic(c * START_SYMBOLS, START_SYMBOLS)
            assert score == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_window_scores_zero(self):
        window = START_SYMBOLS.astype(complex).copy()
        window[64:] *= -1  # flips half the terms: correlation sums to zero
        assert detect.glrt_statistic(window, START_SYMBOLS) == pytest.approx(0.0, abs=1e-12)

    def test_all_zero_window(self):
        assert detect.glrt_statistic(np.zeros(128, dtype=complex), START_SYMBOLS) == 0.0

    def test_scale_and_phase_invariance(self, rng):
        window = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        base = detect.glrt_statistic(window, START_SYMBOLS)
        for _ in range(10):
            c = rng.standard_normal() + 1j * rng.standard_normal()
            scaled = detect.glrt_statistic(c * window, START_SYMBOLS)
            assert scaled == pytest.approx(base, rel=1e-9)

    def test_noise_mean_is_one_over_l(self, rng):
        n = 10_000
        windows = (rng.standard_normal((n, 128))
                   + 1j * rng.standard_normal((n, 128))) / math.sqrt(2)
        scores = detect.glrt_statistic_batch(windows, START_SYMBOLS)
        se = scores.std() / math.sqrt(n)
        assert abs(scores.mean() - 1 / 128) <= 3 * se
        assert scores.min() >= 0.0 and scores.max() <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            detect.glrt_statistic(np.zeros(64, dtype=complex), START_SYMBOLS)


class TestFeatureY1:
    def test_perfect_detection_rows_match(self):
        y1 = detect.build_y1(START_SYMBOLS.astype(complex))
        np.testing.assert_array_equal(y1[1], y1[0])

    def test_known_rows_constant(self, rng):
        w1 = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        w2 = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        a, b = detect.build_y1(w1), detect.build_y1(w2)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[2], b[2])

    def test_shape_and_bpsk_imaginary_halves(self, rng):
        y1 = detect.build_y1(rng.standard_normal(128) + 0j)
        assert y1.shape == (3, 256)
        assert not y1[0, 128:].any() and not y1[2, 128:].any()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            detect.build_y1(np.zeros(100, dtype=complex))


class TestFeatureY2:
    def test_start_mode_fill(self):
        y2 = detect.build_y2("start", 0.7)
        assert y2.shape == (21, 128)
        assert (y2[:20] == np.float32(0.7)).all()
        assert not y2[20].any()

    def test_tail_mode_flag_rows(self, code, rng):
        word = code.encode(rng.integers(0, 2, 64).astype(np.uint8))
        good = ldpc.nms_decode(8.0 * (1 - 2.0 * word), i_max=20, code=code)
        assert good.converged
        y2 = detect.build_y2("tail", good)
        assert (y2[20] == 1.0).all()
        bad = ldpc.nms_decode(rng.standard_normal(128), i_max=20, code=code)
        assert not bad.converged
        assert not detect.build_y2("tail", bad)[20].any()

    def test_flattened_length(self):
        assert detect.build_y2("start", 0.5).size == 2688

    def test_row_count_mismatch(self, code, rng):
        result = ldpc.nms_decode(rng.standard_normal(128), i_max=10, code=code)
        with pytest.raises(ValueError):
            detect.build_y2("tail", result, i_max=20)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            detect.build_y2("middle", 0.5)


@pytest.fixture(scope="module")
def weights():
    return detect.CnnWeights.random(np.random.default_rng(99))


class TestCnnForward:
    def _features(self, rng, batch=3):
        y1 = rng.standard_normal((batch, 3, 256)).astype(np.float32)
        y2 = rng.standard_normal((batch, 21, 128)).astype(np.float32)
        return y1, y2

    def test_outputs_strictly_inside_unit_interval(self, weights, rng):
        y1, y2 = self._features(rng, 16)
        scores = detect.cnn_forward_batch(weights, y1, y2)
        assert scores.shape == (16, 2)
        assert (scores > 0).all() and (scores < 1).all()

    def test_pure_function(self, weights, rng):
        y1, y2 = self._features(rng)
        a = detect.cnn_forward_batch(weights, y1, y2)
        b = detect.cnn_forward_batch(weights, y1, y2)
        np.testing.assert_array_equal(a, b)

    def test_batch_matches_single(self, weights, rng):
        y1, y2 = self._features(rng, 5)
        batch = detect.cnn_forward_batch(weights, y1, y2)
        for i in range(5):
            single = detect.cnn_forward(weights, y1[i], y2[i])
            assert single.pA == pytest.approx(batch[i, 0], rel=1e-6)
            assert single.pB == pytest.approx(batch[i, 1], rel=1e-6)

    def test_shape_mismatch_rejected(self, weights, rng):
        y1, y2 = self._features(rng)
        with pytest.raises(ValueError):
            detect.cnn_forward_batch(weights, y1[:, :2], y2)
        with pytest.raises(ValueError):
            detect.cnn_forward_batch(weights, y1, y2[:, :, :64])

    def test_weight_shapes_enforced(self, weights):
        bad = {name: getattr(weights, name) for name, _, _ in detect.LAYER_SPECS}
        bad.update({name + "_bias": getattr(weights, name + "_bias")
                    for name, _, _ in detect.LAYER_SPECS})
        bad["fc1a"] = bad["fc1a"][:, :100]
        with pytest.raises(ValueError):
            detect.CnnWeights(**bad)


class TestWeightsFile:
    def test_roundtrip_and_reexport_identical(self, weights, tmp_path):
        path1, path2 = tmp_path / "w1.bin", tmp_path / "w2.bin"
        detect.save_weights(path1, weights)
        loaded = detect.load_weights(path1)
        for name, _, _ in detect.LAYER_SPECS:
            np.testing.assert_array_equal(getattr(loaded, name),
                                          getattr(weights, name))
            np.testing.assert_array_equal(getattr(loaded, name + "_bias"),
                                          getattr(weights, name + "_bias"))
        detect.save_weights(path2, loaded)
        assert path1.read_bytes() == path2.read_bytes()

    def test_forward_parity_after_reload(self, weights, tmp_path, rng):
        path = tmp_path / "w.bin"
        detect.save_weights(path, weights)
        loaded = detect.load_weights(path)
        y1 = rng.standard_normal((4, 3, 256)).astype(np.float32)
        y2 = rng.standard_normal((4, 21, 128)).astype(np.float32)
        np.testing.assert_array_equal(
            detect.cnn_forward_batch(weights, y1, y2),
            detect.cnn_forward_batch(loaded, y1, y2))

    def test_manifest_validation(self, weights, tmp_path):
        path = tmp_path / "w.bin"
        detect.save_weights(path, weights)
        blob = bytearray(path.read_bytes())
        blob[0:5] = b"XXXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError):
            detect.load_weights(path)


class TestClassify:
    def test_start_only(self):
        labels = detect.classify(detect.DetectionScores(0.9, 0.1), 0.5, 0.5)
        assert labels == (1, 0)

    def test_overlapping_start_and_tail(self):
        labels = detect.classify(detect.DetectionScores(0.9, 0.9), 0.5, 0.5)
        assert labels == (1, 1)

    def test_threshold_sweep_is_monotone(self):
        scores = detect.DetectionScores(0.42, 0.7)
        fired = [detect.classify(scores, t, t)[0]
                 for t in (0.1, 0.3, 0.41, 0.43, 0.9)]
        assert fired == [1, 1, 1, 0, 0]

    def test_threshold_range_checked(self):
        with pytest.raises(ValueError):
            detect.classify(detect.DetectionScores(0.5, 0.5), 0.0, 0.5)
