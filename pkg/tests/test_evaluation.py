import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hsigraph.data_io import GroundTruth, generate_synthetic_scene
from hsigraph.evaluation import (
    confusion_matrix,
    metrics,
    run_trials,
    sample_training_labels,
)
from hsigraph.pipelines import builtin_config


def _gt(sizes):
    labels = np.concatenate([np.full(n, c + 1) for c, n in enumerate(sizes)] + [np.zeros(3, int)])
    return GroundTruth(labels[None, :])


class TestSampling:
    def test_counts(self):
        gt = _gt([100, 5])
        train = sample_training_labels(gt, 7, 1)
        assert (train == 1).sum() == 7
        assert (train == 2).sum() == 4
        assert np.all(gt.labels[train > 0] == train[train > 0])

    def test_deterministic(self):
        gt = _gt([50, 40])
        np.testing.assert_array_equal(sample_training_labels(gt, 5, 9), sample_training_labels(gt, 5, 9))
        assert not np.array_equal(sample_training_labels(gt, 5, 9), sample_training_labels(gt, 5, 10))

    def test_errors(self):
        with pytest.raises(ValueError):
            sample_training_labels(_gt([3, 1]), 2, 0)
        with pytest.raises(ValueError):
            sample_training_labels(_gt([3, 3]), 0, 0)


class TestConfusion:
    def test_perfect_and_swapped(self):
        gt = _gt([4, 3])
        none = np.zeros_like(gt.labels, dtype=bool)
        cm = confusion_matrix(gt.labels.clip(1), gt, none)
        np.testing.assert_array_equal(cm, [[4, 0], [0, 3]])
        swapped = np.where(gt.labels == 1, 2, 1)
        np.testing.assert_array_equal(confusion_matrix(swapped, gt, none), [[0, 4], [3, 0]])

    def test_excludes_training(self):
        gt = _gt([10, 10])
        train = sample_training_labels(gt, 3, 0)
        cm = confusion_matrix(gt.labels.clip(1), gt, train > 0)
        assert cm.sum() == 14


class TestMetrics:
    def test_examples(self):
        m = metrics([[2, 0], [0, 2]])
        assert (m.oa, m.aa, m.kappa) == (1.0, 1.0, 1.0)
        m = metrics([[1, 1], [1, 1]])
        assert (m.oa, m.kappa) == (0.5, 0.0)
        m = metrics([[50, 0], [10, 40]])
        assert m.oa == pytest.approx(0.9, abs=1e-15)
        assert m.aa == pytest.approx(0.9, abs=1e-15)
        assert m.kappa == pytest.approx(0.8, abs=1e-15)

    def test_empty_row_warns(self):
        with pytest.warns(RuntimeWarning):
            m = metrics([[3, 1], [0, 0]])
        assert m.aa == 0.75 and np.isnan(m.per_class[1])

    def test_degenerate_chance(self):
        assert metrics([[5]]).kappa == 1.0
        with pytest.raises(ValueError):
            metrics([[0, 0], [0, 0]])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.int64, st.tuples(st.integers(2, 6)).map(lambda t: (t[0], t[0])),
                  elements=st.integers(0, 50)), st.integers(0, 2**32 - 1))
    def test_properties(self, cm, seed):
        cm[np.arange(cm.shape[0]), np.arange(cm.shape[0])] += 1
        m = metrics(cm)
        perm = np.random.default_rng(seed).permutation(cm.shape[0])
        p = metrics(cm[np.ix_(perm, perm)])
        assert p.oa == pytest.approx(m.oa, abs=1e-15)
        assert p.kappa == pytest.approx(m.kappa, abs=1e-12)
        assert p.aa == pytest.approx(m.aa, abs=1e-12)
        if m.oa < 1:
            assert m.kappa <= m.oa + 1e-15
        assert (m.kappa == pytest.approx(1.0)) == (np.count_nonzero(cm - np.diag(np.diag(cm))) == 0)


@pytest.fixture(scope="module")
def scene():
    cube, gt = generate_synthetic_scene(30, 30, 8, 3, 0.0, 2)
    return cube, gt, builtin_config("synthetic").replace(superpixel_count=40)


class TestTrials:
    def test_noiseless(self, scene, tmp_path):
        cube, gt, config = scene
        report = run_trials(cube, gt, "mgl", config, 5, 3, base_seed=10)
        s = report.summary()
        assert report.seeds == [10, 11, 12]
        assert s["oa_mean"] == 1.0 and s["oa_std"] == 0.0
        report.to_csv(tmp_path / "r.csv")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert rows[0] == ["trial", "seed", "oa", "aa", "kappa", "acc_c1", "acc_c2", "acc_c3"]
        assert [r[0] for r in rows[1:]] == ["0", "1", "2", "mean", "std"]
        report.to_json(tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        assert len(data["per_trial"]) == 3 and data["oa_mean"] == 1.0

    def test_single_trial_flag(self, scene):
        cube, gt, config = scene
        s = run_trials(cube, gt, "pmgl", config, 3, 1).summary()
        assert s["std_is_convention"] and s["oa_std"] == 0.0

    def test_sample_std(self):
        from hsigraph.evaluation import TrialReport
        r = TrialReport("mgl", [0, 1], np.array([0.5, 1.0]), np.array([0.5, 1.0]),
                        np.array([0.0, 1.0]), np.zeros((2, 2)))
        assert r.summary()["oa_std"] == pytest.approx(np.sqrt(0.125))

    def test_parallel_matches_serial(self, scene):
        cube, gt, config = scene
        a = run_trials(cube, gt, "mgl", config, 2, 3, jobs=1)
        b = run_trials(cube, gt, "mgl", config, 2, 3, jobs=2)
        np.testing.assert_array_equal(a.oa, b.oa)
        np.testing.assert_array_equal(a.kappa, b.kappa)
