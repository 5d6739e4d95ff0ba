from dataclasses import replace

import numpy as np
import pytest

from gfra import harness, traffic
from gfra.config import default_config, validate
from gfra.harness import ConfusionCounts, confusion_metrics
from gfra.receiver import GlrtDetector, Receiver, Thresholds


class TestConfusionMetrics:
    def test_direct_arithmetic(self):
        m = confusion_metrics(ConfusionCounts(tp=9, fp=1, tn=9, fn=1))
        assert m.recall == pytest.approx(0.9)
        assert m.false_alarm == pytest.approx(0.1)
        assert m.accuracy == pytest.approx(0.9)
        assert m.precision == pytest.approx(0.9)

    def test_all_correct(self):
        m = confusion_metrics(ConfusionCounts(tp=5, fp=0, tn=5, fn=0))
        assert (m.recall, m.false_alarm, m.accuracy) == (1.0, 0.0, 1.0)

    def test_zero_denominators_are_absent(self):
        m = confusion_metrics(ConfusionCounts())
        assert m.recall is None and m.false_alarm is None
        assert m.accuracy is None and m.precision is None
        no_pos = confusion_metrics(ConfusionCounts(tn=3, fp=1))
        assert no_pos.recall is None and no_pos.false_alarm == pytest.approx(0.25)

    def test_counts_add(self):
        total = ConfusionCounts(1, 2, 3, 4) + ConfusionCounts(5, 6, 7, 8)
        assert (total.tp, total.fp, total.tn, total.fn) == (6, 8, 10, 12)


@pytest.fixture(scope="module")
def window_cfg():
    base = default_config(lam=0.01, seed=0)
    return harness.dataset_config(base)


@pytest.fixture(scope="module")
def small_windows(window_cfg):
    rng = np.random.default_rng(7)
    counts = {0: 40, 1: 40, 2: 40, 3: 40, 4: 20}
    return harness.generate_windows(window_cfg, counts, rng), counts


class TestWindowGeneration:
    def test_exact_class_counts(self, small_windows):
        windows, counts = small_windows
        ids, got = np.unique(windows.class_ids, return_counts=True)
        assert dict(zip(ids.tolist(), got.tolist())) == counts

    def test_labels_match_class_map(self, small_windows):
        windows, _ = small_windows
        for class_id, label in harness.CLASS_LABELS.items():
            rows = windows.labels[windows.class_ids == class_id]
            if rows.size:
                assert (rows == np.array(label, dtype=np.float32)).all()

    def test_shapes(self, small_windows):
        windows, counts = small_windows
        n = sum(counts.values())
        assert windows.y1.shape == (n, 3, 256)
        assert windows.y2.shape == (n, 21, 128)
        assert windows.labels.shape == (n, 2)

    def test_start_mode_feature_structure(self, small_windows):
        windows, _ = small_windows
        start_mode = np.isin(windows.class_ids, (0, 1))
        for y2 in windows.y2[start_mode][:10]:
            assert not y2[20].any()             # flag row all zero
            assert np.unique(y2[:20]).size == 1  # constant correlation fill

    def test_tail_mode_flag_row(self, small_windows):
        windows, _ = small_windows
        tail_mode = np.isin(windows.class_ids, (2, 3, 4))
        flags = windows.y2[tail_mode][:, 20, :]
        assert set(np.unique(flags)) <= {0.0, 1.0}
        per_row = flags.max(axis=1) == flags.min(axis=1)
        assert per_row.all()  # all-zero or all-one, never mixed

    def test_true_start_windows_correlate_strongly(self, small_windows):
        # under interference many starts are buried, but the upper tail of
        # the start-correlation distribution must clear the noise class
        windows, _ = small_windows
        h1 = windows.y2[windows.class_ids == 1][:, 0, 0]  # correlation fill
        h0 = windows.y2[windows.class_ids == 0][:, 0, 0]
        assert np.quantile(h1, 0.9) > np.quantile(h0, 0.9)


class TestDatasetFile:
    def test_roundtrip(self, small_windows, tmp_path):
        windows, _ = small_windows
        path = tmp_path / "windows.ds"
        writer = harness.DatasetWriter(path)
        writer.add(windows)
        writer.close()
        ds = harness.Dataset(path)
        assert ds.count == windows.count
        loaded = ds.all()
        np.testing.assert_array_equal(loaded.y1, windows.y1)
        np.testing.assert_array_equal(loaded.y2, windows.y2)
        np.testing.assert_array_equal(loaded.labels, windows.labels)
        np.testing.assert_array_equal(loaded.class_ids, windows.class_ids)

    def test_field_order_on_disk(self, small_windows, tmp_path):
        windows, _ = small_windows
        path = tmp_path / "windows.ds"
        writer = harness.DatasetWriter(path)
        writer.add(windows)
        writer.close()
        raw = np.fromfile(path, dtype="<f4", offset=12)
        record = raw[:harness.N_FIELDS]
        np.testing.assert_array_equal(record[:768], windows.y1[0].ravel())
        np.testing.assert_array_equal(record[768:3456], windows.y2[0].ravel())
        np.testing.assert_array_equal(record[3456:3458], windows.labels[0])
        assert record[3458] == windows.class_ids[0]

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bogus.ds"
        path.write_bytes(b"NOTADATA" + b"\x00" * 16)
        with pytest.raises(ValueError):
            harness.Dataset(path)

    def test_export_streams_exact_counts(self, window_cfg, tmp_path):
        path = tmp_path / "export.ds"
        rng = np.random.default_rng(3)
        counts = {1: 12, 2: 8, 4: 6}
        n = harness.export_dataset(path, window_cfg, counts, rng)
        ds = harness.Dataset(path)
        assert ds.count == n == 26
        ids, got = np.unique(ds.all().class_ids, return_counts=True)
        assert dict(zip(ids.tolist(), got.tolist())) == counts


class TestRoc:
    def test_endpoint_thresholds(self, small_windows):
        windows, _ = small_windows
        scores = harness.score_windows(GlrtDetector(), windows)
        curves = harness.roc_from_scores(scores, windows.labels,
                                         np.array([0.0, 1.0]))
        for label in ("start", "tail"):
            points = sorted(curves[label], key=lambda p: p.threshold)
            assert (points[0].false_alarm, points[0].recall) == (1.0, 1.0)
            assert (points[1].false_alarm, points[1].recall) == (0.0, 0.0)

    def test_curve_bounds_and_order(self, small_windows):
        windows, _ = small_windows
        scores = harness.score_windows(GlrtDetector(), windows)
        curves = harness.roc_from_scores(scores, windows.labels,
                                         np.linspace(0, 1, 21))
        for points in curves.values():
            f_values = [p.false_alarm for p in points]
            assert f_values == sorted(f_values)
            assert all(0 <= p.false_alarm <= 1 and 0 <= p.recall <= 1
                       for p in points)

    def test_glrt_separates_boundaries_from_noise(self, small_windows):
        windows, _ = small_windows
        scores = harness.score_windows(GlrtDetector(), windows)
        curves = harness.roc_from_scores(scores, windows.labels,
                                         np.linspace(0, 1, 201))
        assert harness.recall_at_false_alarm(curves["start"], 0.5) > 0.5
        assert harness.recall_at_false_alarm(curves["tail"], 0.5) > 0.5

    def test_recall_at_false_alarm_empty(self):
        assert harness.recall_at_false_alarm([], 0.1) == 0.0


class TestPlrCampaign:
    def test_single_superframe_scoring(self):
        cfg = default_config(lam=1e-3, seed=2)
        rng = np.random.default_rng(11)
        tx, err, miss = harness.run_one_superframe(
            cfg, GlrtDetector(), Thresholds(0.24, 0.24), rng)
        assert tx >= 0 and err >= 0 and miss >= 0
        assert err + miss <= tx

    def test_isolated_unit_is_recovered(self, rng):
        cfg = default_config(lam=1e-3)
        lost = 0
        for trial in range(10):
            scenario = traffic.make_single_unit_scenario(cfg, rng)
            buffer = traffic.synthesize(scenario, rng)
            rx = Receiver(cfg, GlrtDetector(), Thresholds(0.24, 0.24),
                          max_rounds=2)
            units = rx.run_superframe(buffer.samples)
            keys = {u.payload_key() for u in units}
            lost += scenario.activations[0].payload.tobytes() not in keys
        assert lost == 0

    def test_campaign_reproducible_and_worker_invariant(self):
        cfg = default_config(lam=5e-3)
        kwargs = dict(thresholds=Thresholds(0.24, 0.24), lam_grid=[5e-3],
                      packets_target=12, seed=42, chunk_trials=2)
        a = harness.plr_campaign(cfg, GlrtDetector(), workers=1, **kwargs)
        b = harness.plr_campaign(cfg, GlrtDetector(), workers=1, **kwargs)
        c = harness.plr_campaign(cfg, GlrtDetector(), workers=2, **kwargs)
        assert a == b == c
        assert a[0].n_tx >= 12
        assert 0.0 <= a[0].plr <= 1.0

    def test_plr_record_arithmetic(self):
        record = harness.PlrRecord(lam=1e-3, n_tx=100, n_err=3, n_miss=2)
        assert record.plr == pytest.approx(0.05)
