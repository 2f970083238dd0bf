"""End-to-end MGL and PMGL classification of a hyperspectral cube.

MGL builds one graph from a fixed weighted sum of feature distances, adds a
pseudo-label distance term from one random-walk step and rebuilds the graph.
PMGL builds one graph per feature view, fuses them, re-weights edges with
harmonic pseudo-labels, learns the view weights and re-weights once more.
Both finish with harmonic propagation and an argmax decision per superpixel.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from . import graph as g
from .data_io import HsiCube
from .preprocess import pca_reduce, standardize_bands
from .propagation import assign_classes, broadcast_to_pixels, harmonic_propagate, pseudo_label_step
from .superpixels import (
    FeatureDistanceMatrix,
    composite_distance,
    extract_features,
    pairwise_sq_distances,
    regularize_labels,
    slic_segment,
)

__all__ = [
    "MglConfig",
    "PmglConfig",
    "PipelineConfig",
    "Prepared",
    "prepare",
    "run_mgl",
    "run_pmgl",
    "run_method",
    "load_config",
    "builtin_config",
    "BUILTIN_CONFIGS",
]

BUILTIN_CONFIGS = ("indian_pines", "salinas", "pavia_university", "synthetic")


class ConfigError(ValueError):
    pass


@dataclass
class MglConfig:
    gamma: float = 10.0
    c_M: float = 0.5
    c_S: float = 1.0
    c_C: float = 1e-2


@dataclass
class PmglConfig:
    gamma1: float = 0.0
    gamma2: float = 30.0
    gamma3: float = 1.0
    # each entry: "M", "S", "C", "A*B" (elementwise product) or "A+C"
    # (additive, lambda from the scale ratio); or a dict
    # {"view": "M", "with": "C", "mode": "additive", "lambda": 0.3}
    views: list = field(default_factory=lambda: ["M", "S", "C*S"])
    learn_weights: bool = True


@dataclass
class PipelineConfig:
    variance_target: float = 0.998
    superpixel_count: int = 1287
    compactness: float = 10.0
    slic_iterations: int = 10
    # PC1 is rescaled to [0, slic_range] before SLIC; null keeps raw scores
    slic_range: float | None = 100.0
    h: float = 15.0
    k: int = 10
    mgl: MglConfig = field(default_factory=MglConfig)
    pmgl: PmglConfig = field(default_factory=PmglConfig)
    debug: bool = False

    def __post_init__(self):
        if isinstance(self.mgl, dict):
            self.mgl = _build(MglConfig, self.mgl, "mgl")
        if isinstance(self.pmgl, dict):
            self.pmgl = _build(PmglConfig, self.pmgl, "pmgl")
        self.validate()

    def validate(self):
        if not 0 < self.variance_target <= 1:
            raise ConfigError("variance_target must lie in (0, 1]")
        if self.superpixel_count < 1:
            raise ConfigError("superpixel_count must be positive")
        if self.compactness <= 0 or self.h <= 0:
            raise ConfigError("compactness and h must be positive")
        if self.slic_iterations < 1:
            raise ConfigError("slic_iterations must be positive")
        if self.slic_range is not None and self.slic_range <= 0:
            raise ConfigError("slic_range must be positive or null")
        if self.k < 1:
            raise ConfigError("k must be positive")
        m = self.mgl
        if m.gamma < 0 or min(m.c_M, m.c_S, m.c_C) < 0:
            raise ConfigError("mgl weights must be nonnegative")
        if m.c_M + m.c_S + m.c_C <= 0:
            raise ConfigError("mgl feature weights must not all be zero")
        p = self.pmgl
        if min(p.gamma1, p.gamma3) < 0 or p.gamma2 <= 0:
            raise ConfigError("pmgl needs gamma1, gamma3 >= 0 and gamma2 > 0")
        if not p.views:
            raise ConfigError("pmgl views must be nonempty")
        for spec in p.views:
            _parse_view(spec)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return _build(cls, data, "config")

    def replace(self, **overrides) -> "PipelineConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"mgl.gamma": 0})``."""
        data = self.to_dict()
        for key, value in overrides.items():
            node = data
            parts = key.split(".")
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[part]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return PipelineConfig.from_dict(data)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return PipelineConfig.from_dict(data)


def builtin_config(name) -> PipelineConfig:
    """Shipped parameter sets: ``indian_pines``, ``salinas``, ``pavia_university``, ``synthetic``."""
    if name not in BUILTIN_CONFIGS:
        raise ConfigError(f"no builtin config {name!r}")
    text = resources.files("hsigraph").joinpath(f"configs/{name}.json").read_text()
    return PipelineConfig.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# views

_BASE_VIEWS = ("M", "S", "C")


def _parse_view(spec):
    """Normalise a view descriptor to ``(base, other, mode, lam)``."""
    if isinstance(spec, dict):
        unknown = set(spec) - {"view", "with", "mode", "lambda"}
        if unknown:
            raise ConfigError(f"view spec: unknown keys {sorted(unknown)}")
        base = spec.get("view")
        other = spec.get("with")
        mode = spec.get("mode")
        lam = spec.get("lambda")
        if other is None:
            mode = None
        elif mode not in ("additive", "multiplicative"):
            raise ConfigError(f"view spec: bad mode {mode!r}")
    elif isinstance(spec, str):
        s = spec.replace(" ", "")
        lam = None
        if "*" in s:
            base, other = s.split("*", 1)
            mode = "multiplicative"
        elif "+" in s:
            base, other = s.split("+", 1)
            mode = "additive"
        else:
            base, other, mode = s, None, None
    else:
        raise ConfigError(f"view spec must be a string or object, got {spec!r}")
    for v in (base, other):
        if v is not None and v not in _BASE_VIEWS:
            raise ConfigError(f"unknown feature view {v!r}")
    if base is None:
        raise ConfigError("view spec needs a base view")
    return base, other, mode, lam


def resolve_view(spec, distances) -> FeatureDistanceMatrix:
    base, other, mode, lam = _parse_view(spec)
    if other is None:
        return distances[base]
    return composite_distance(distances[base], distances[other], mode, lam)


# --------------------------------------------------------------------------
# shared front end

@dataclass
class Prepared:
    """Label-independent products of the front end; reusable across trials."""

    segmentation: Any
    features: Any
    distances: dict
    reduced_bands: int
    timings: dict


def _scaled_pc1(reduced: HsiCube, span):
    pc1 = reduced.data[0].astype(np.float64)
    if span is None:
        return pc1
    lo, hi = pc1.min(), pc1.max()
    if hi == lo:
        return np.zeros_like(pc1)
    return (pc1 - lo) * (span / (hi - lo))


def prepare(cube: HsiCube, config: PipelineConfig) -> Prepared:
    """Standardise, reduce, segment and extract superpixel features."""
    timings = {}
    t0 = time.perf_counter()
    reduced, _ = pca_reduce(standardize_bands(cube), config.variance_target)
    timings["pca"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    seg = slic_segment(_scaled_pc1(reduced, config.slic_range), config.superpixel_count,
                       config.compactness, config.slic_iterations)
    timings["slic"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    feats = extract_features(seg, reduced, config.h)
    distances = {v: pairwise_sq_distances(feats.view(v), v) for v in _BASE_VIEWS}
    timings["features"] = time.perf_counter() - t0
    return Prepared(seg, feats, distances, reduced.bands, timings)


def _check_training(train_labels, num_classes, seg):
    train = np.asarray(train_labels, dtype=np.int64)
    if train.shape != seg.shape:
        raise ValueError("training label map does not match the cube")
    present = np.unique(train[train > 0])
    if present.size < 2:
        raise ValueError("need training pixels in at least two classes")
    if num_classes is None:
        num_classes = int(present.max())
    return train, num_classes


def _knn_sym(Z, k, debug):
    G = g.knn_graph_closed_form(Z, k)
    if debug:
        g.check_graph(G, k)
    S = g.symmetrize(G)
    if debug:
        g.check_graph(S)
    return S


def _finish(seg, W, Y_S, diagnostics, timings, t_start):
    t0 = time.perf_counter()
    F = harmonic_propagate(W, Y_S)
    classes = assign_classes(F, W)
    pixel_map = broadcast_to_pixels(seg, classes)
    timings["propagation"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start
    diagnostics["superpixel_classes"] = classes
    diagnostics["scores"] = F.scores
    return pixel_map, diagnostics


def run_mgl(cube, train_labels, config: PipelineConfig, num_classes=None, prepared=None):
    """Fixed-weight multi-feature graph with one-step pseudo-label refinement.

    Returns ``(pixel_class_map, diagnostics)``.
    """
    t_start = time.perf_counter()
    prepared = prepared or prepare(cube, config)
    seg = prepared.segmentation
    train, c = _check_training(train_labels, num_classes, seg)
    timings = dict(prepared.timings)
    Y_S = regularize_labels(seg, train, c)

    t0 = time.perf_counter()
    m = config.mgl
    D = prepared.distances
    Z = m.c_M * D["M"].values + m.c_S * D["S"].values + m.c_C * D["C"].values
    W0 = _knn_sym(Z, config.k, config.debug)
    F_tilde = pseudo_label_step(W0, Y_S)
    Z_tilde = Z + m.gamma * pairwise_sq_distances(F_tilde.scores).values
    W = _knn_sym(Z_tilde, config.k, config.debug)
    timings["graph"] = time.perf_counter() - t0

    diagnostics = {
        "method": "mgl",
        "num_superpixels": seg.num_superpixels,
        "reduced_bands": prepared.reduced_bands,
        "num_labelled_superpixels": int((Y_S.sum(axis=1) > 0).sum()),
        "timings": timings,
    }
    return _finish(seg, W, Y_S, diagnostics, timings, t_start)


def run_pmgl(cube, train_labels, config: PipelineConfig, num_classes=None, prepared=None):
    """Per-view graphs, masked pseudo-label re-weighting and learned view weights.

    Returns ``(pixel_class_map, diagnostics)``; ``diagnostics["feature_weights"]``
    holds the learned weights.
    """
    t_start = time.perf_counter()
    prepared = prepared or prepare(cube, config)
    seg = prepared.segmentation
    train, c = _check_training(train_labels, num_classes, seg)
    timings = dict(prepared.timings)
    Y_S = regularize_labels(seg, train, c)
    p = config.pmgl
    debug = config.debug

    t0 = time.perf_counter()
    views = [resolve_view(spec, prepared.distances) for spec in p.views]
    A = [_knn_sym(Zv, config.k, debug) for Zv in views]
    weights = np.full(len(A), 1.0 / len(A))
    W = g.symmetrize(g.combine(A, weights))

    F_tilde = harmonic_propagate(W, Y_S).scores
    W = g.symmetrize(g.masked_graph_update(A, weights, pairwise_sq_distances(F_tilde), p.gamma1, W))
    if debug:
        g.check_graph(W)

    residuals = np.array([g.view_residual(W, Av) for Av in A])
    if p.learn_weights:
        weights = g.feature_weight_update(residuals, p.gamma2)

    F_tilde = harmonic_propagate(W, Y_S).scores
    W = g.symmetrize(g.masked_graph_update(A, weights, pairwise_sq_distances(F_tilde), p.gamma3, W))
    if debug:
        g.check_graph(W)
    timings["graph"] = time.perf_counter() - t0

    diagnostics = {
        "method": "pmgl",
        "num_superpixels": seg.num_superpixels,
        "reduced_bands": prepared.reduced_bands,
        "num_labelled_superpixels": int((Y_S.sum(axis=1) > 0).sum()),
        "view_tags": [Zv.tag for Zv in views],
        "residuals": residuals,
        "feature_weights": weights,
        "timings": timings,
    }
    return _finish(seg, W, Y_S, diagnostics, timings, t_start)


def run_method(method, cube, train_labels, config, num_classes=None, prepared=None):
    runners = {"mgl": run_mgl, "pmgl": run_pmgl}
    if method not in runners:
        raise ValueError(f"unknown method {method!r}; choose mgl or pmgl")
    return runners[method](cube, train_labels, config, num_classes=num_classes, prepared=prepared)
