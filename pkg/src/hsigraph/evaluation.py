"""Training-label sampling, accuracy metrics and repeated-trial reports."""
from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data_io import GroundTruth
from .pipelines import PipelineConfig, prepare, run_method

__all__ = [
    "ClassificationMetrics",
    "TrialReport",
    "sample_training_labels",
    "confusion_matrix",
    "metrics",
    "run_trials",
]


def sample_training_labels(gt: GroundTruth, per_class, seed) -> np.ndarray:
    """Draw ``min(per_class, size - 1)`` training pixels per class without replacement.

    Returns a label map with the sampled pixels' classes and 0 elsewhere; the
    rest of the labelled pixels form the test set.
    """
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    rng = np.random.default_rng(seed)
    flat = gt.labels.ravel()
    train = np.zeros_like(flat)
    for cls in range(1, gt.num_classes + 1):
        members = np.flatnonzero(flat == cls)
        if members.size <= 1:
            raise ValueError(f"class {cls} has {members.size} pixel(s); need at least 2")
        take = min(per_class, members.size - 1)
        train[rng.choice(members, size=take, replace=False)] = cls
    return train.reshape(gt.labels.shape)


def confusion_matrix(pred, gt: GroundTruth, train_mask) -> np.ndarray:
    """Counts ``cm[a, b]`` of test pixels of true class a+1 predicted as b+1.

    Test pixels are the labelled ground-truth pixels outside ``train_mask``.
    """
    pred = np.asarray(pred).ravel()
    truth = gt.labels.ravel()
    train_mask = np.asarray(train_mask, dtype=bool).ravel()
    test = (truth > 0) & ~train_mask
    assert not (test & train_mask).any()
    c = gt.num_classes
    p = pred[test]
    if p.size and (p.min() < 1 or p.max() > c):
        raise ValueError("prediction outside 1..num_classes on a test pixel")
    return np.bincount((truth[test] - 1) * c + (p - 1), minlength=c * c).reshape(c, c)


@dataclass
class ClassificationMetrics:
    oa: float
    aa: float
    kappa: float
    per_class: np.ndarray


def metrics(cm) -> ClassificationMetrics:
    """Overall accuracy, average per-class accuracy and Cohen's kappa."""
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    rows = cm.sum(axis=1)
    cols = cm.sum(axis=0)
    oa = float(np.trace(cm) / total)
    per_class = np.full(cm.shape[0], np.nan)
    present = rows > 0
    per_class[present] = np.diag(cm)[present] / rows[present]
    if not present.all():
        warnings.warn(f"classes {np.flatnonzero(~present) + 1} have no test pixels; "
                      "excluded from AA", RuntimeWarning, stacklevel=2)
    aa = float(np.mean(per_class[present]))
    pe = float(np.dot(rows, cols) / (total * total))
    if pe == 1.0:
        kappa = 1.0 if oa == 1.0 else 0.0
    else:
        kappa = (oa - pe) / (1.0 - pe)
    return ClassificationMetrics(oa, aa, float(kappa), per_class)


@dataclass
class TrialReport:
    """Per-trial metrics plus mean and sample standard deviation (n-1)."""

    method: str
    seeds: list
    oa: np.ndarray
    aa: np.ndarray
    kappa: np.ndarray
    per_class: np.ndarray
    diagnostics: list = field(default_factory=list, repr=False)

    @property
    def num_trials(self) -> int:
        return len(self.seeds)

    @property
    def single_trial(self) -> bool:
        """True when the std fields are the n=1 convention (zero), not estimates."""
        return self.num_trials == 1

    def _std(self, values, axis=0):
        if self.num_trials < 2:
            return np.zeros_like(np.mean(values, axis=axis))
        return np.std(values, axis=axis, ddof=1)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "trials": self.num_trials,
            "seeds": list(self.seeds),
            "oa_mean": float(np.mean(self.oa)), "oa_std": float(self._std(self.oa)),
            "aa_mean": float(np.mean(self.aa)), "aa_std": float(self._std(self.aa)),
            "kappa_mean": float(np.mean(self.kappa)), "kappa_std": float(self._std(self.kappa)),
            "per_class_mean": np.nanmean(self.per_class, axis=0).tolist(),
            "per_class_std": np.atleast_1d(self._nanstd_per_class()).tolist(),
            "std_is_convention": self.single_trial,
        }

    def _nanstd_per_class(self):
        if self.num_trials < 2:
            return np.zeros(self.per_class.shape[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanstd(self.per_class, axis=0, ddof=1)

    def columns(self):
        return ["trial", "seed", "oa", "aa", "kappa"] + [
            f"acc_c{j + 1}" for j in range(self.per_class.shape[1])]

    def to_csv(self, path):
        """One row per trial, then ``mean`` and ``std`` summary rows."""
        s = self.summary()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for t, seed in enumerate(self.seeds):
                w.writerow([t, seed] + [_fmt(v) for v in
                                        (self.oa[t], self.aa[t], self.kappa[t], *self.per_class[t])])
            w.writerow(["mean", ""] + [_fmt(v) for v in
                                       (s["oa_mean"], s["aa_mean"], s["kappa_mean"], *s["per_class_mean"])])
            w.writerow(["std", ""] + [_fmt(v) for v in
                                      (s["oa_std"], s["aa_std"], s["kappa_std"], *s["per_class_std"])])

    def to_json(self, path):
        out = self.summary()
        out["per_trial"] = [
            {"seed": seed, "oa": float(self.oa[t]), "aa": float(self.aa[t]),
             "kappa": float(self.kappa[t]),
             "per_class": [None if np.isnan(v) else float(v) for v in self.per_class[t]]}
            for t, seed in enumerate(self.seeds)]
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2)


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def _one_trial(method, cube, gt, config, per_class, seed, prepared):
    train = sample_training_labels(gt, per_class, seed)
    pred, diag = run_method(method, cube, train, config, num_classes=gt.num_classes, prepared=prepared)
    m = metrics(confusion_matrix(pred, gt, train > 0))
    keep = {k: v for k, v in diag.items() if k not in ("scores", "superpixel_classes")}
    return m, keep


def run_trials(cube, gt: GroundTruth, method, config: PipelineConfig, per_class, num_trials,
               base_seed=0, jobs=1) -> TrialReport:
    """Repeat sample-classify-score ``num_trials`` times; trial t uses seed ``base_seed + t``."""
    if num_trials < 1:
        raise ValueError("num_trials must be at least 1")
    prepared = prepare(cube, config)
    seeds = [base_seed + t for t in range(num_trials)]
    args = [(method, cube, gt, config, per_class, s, prepared) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_trial, *zip(*args)))
    else:
        results = [_one_trial(*a) for a in args]
    ms = [r[0] for r in results]
    return TrialReport(
        method=method,
        seeds=seeds,
        oa=np.array([m.oa for m in ms]),
        aa=np.array([m.aa for m in ms]),
        kappa=np.array([m.kappa for m in ms]),
        per_class=np.array([m.per_class for m in ms]),
        diagnostics=[r[1] for r in results],
    )
