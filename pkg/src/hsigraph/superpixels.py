"""SLIC superpixels on a single component image, superpixel features and distance matrices."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from . import kernels
from .data_io import HsiCube, write_pgm

__all__ = [
    "SuperpixelSegmentation",
    "SuperpixelFeatures",
    "FeatureDistanceMatrix",
    "slic_segment",
    "enforce_connectivity",
    "segmentation_from_assignment",
    "regularize_labels",
    "mean_features",
    "spatial_mean_features",
    "centroid_features",
    "extract_features",
    "pairwise_sq_distances",
    "feature_scale",
    "composite_distance",
    "write_segmentation_pgm",
]


@dataclass
class SuperpixelSegmentation:
    """Pixel-to-superpixel map with per-superpixel pixel lists and 4-neighbour adjacency.

    ``pixel_lists[k]`` holds flat raster indices (``row * width + col``) of the
    pixels in superpixel ``k``; ``adjacency_sets[k]`` the sorted ids of the
    superpixels sharing an edge with it.
    """

    assignment: np.ndarray
    num_superpixels: int
    pixel_lists: list = field(repr=False)
    adjacency_sets: list = field(repr=False)

    @property
    def shape(self):
        return self.assignment.shape

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(p) for p in self.pixel_lists], dtype=np.int64)

    def pixel_coords(self, k) -> np.ndarray:
        """(N_k, 2) array of (row, col) coordinates of superpixel ``k``."""
        return np.column_stack(np.divmod(self.pixel_lists[k], self.shape[1]))


@dataclass
class SuperpixelFeatures:
    mean: np.ndarray
    spatial_mean: np.ndarray
    centroid: np.ndarray
    h: float

    def view(self, name):
        return {"M": self.mean, "S": self.spatial_mean, "C": self.centroid}[name]


@dataclass
class FeatureDistanceMatrix:
    """Dense N x N squared-distance matrix for one feature view."""

    values: np.ndarray
    tag: str = ""

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape


def _values(Z):
    return Z.values if isinstance(Z, FeatureDistanceMatrix) else np.asarray(Z, dtype=np.float64)


# --------------------------------------------------------------------------
# segmentation

def _neighbour_pairs(image):
    """Pairs of differing values across horizontal and vertical pixel edges (unique, both orders)."""
    a = np.concatenate([image[:, :-1].ravel(), image[:-1, :].ravel()])
    b = np.concatenate([image[:, 1:].ravel(), image[1:, :].ravel()])
    diff = a != b
    pairs = np.stack([np.concatenate([a[diff], b[diff]]), np.concatenate([b[diff], a[diff]])], axis=1)
    if pairs.size == 0:
        return pairs.reshape(0, 2)
    return np.unique(pairs, axis=0)


def _relabel_raster_order(labels):
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(uniq.size, dtype=np.int64)
    remap[order] = np.arange(uniq.size)
    return remap[np.searchsorted(uniq, flat)].reshape(labels.shape)


def segmentation_from_assignment(assignment) -> SuperpixelSegmentation:
    """Build pixel lists and adjacency from a label image whose ids are 0..N-1."""
    assignment = np.asarray(assignment, dtype=np.int64)
    flat = assignment.ravel()
    n = int(flat.max()) + 1
    counts = np.bincount(flat, minlength=n)
    if (counts == 0).any():
        raise ValueError("assignment ids must cover 0..N-1 without gaps")
    order = np.argsort(flat, kind="stable")
    pixel_lists = np.split(order, np.cumsum(counts)[:-1])
    pairs = _neighbour_pairs(assignment)
    adjacency = [np.empty(0, dtype=np.int64) for _ in range(n)]
    if pairs.size:
        starts = np.searchsorted(pairs[:, 0], np.arange(n + 1))
        adjacency = [pairs[starts[k]:starts[k + 1], 1].copy() for k in range(n)]
    return SuperpixelSegmentation(assignment, n, pixel_lists, adjacency)


def enforce_connectivity(labels) -> np.ndarray:
    """Make every label region 4-connected.

    Each label keeps its largest connected piece; the other pieces (and any
    pixels labelled -1) are merged into the largest adjacent superpixel.
    Returns labels renumbered 0..N-1 in raster order of first appearance.
    """
    labels = np.asarray(labels, dtype=np.int64)
    comp, ncomp = kernels.label_components(labels)
    flat_comp = comp.ravel()
    flat_lab = labels.ravel()
    sizes = np.bincount(flat_comp, minlength=ncomp)
    first = np.full(ncomp, flat_comp.size, dtype=np.int64)
    np.minimum.at(first, flat_comp, np.arange(flat_comp.size))
    comp_label = flat_lab[first]

    final = np.full(ncomp, -1, dtype=np.int64)
    label_size = {}
    # components are numbered in raster order, so the first maximum wins ties
    best = {}
    for c in range(ncomp):
        lab = int(comp_label[c])
        if lab < 0:
            continue
        if lab not in best or sizes[c] > sizes[best[lab]]:
            best[lab] = c
    for lab, c in best.items():
        final[c] = lab
        label_size[lab] = int(sizes[c])

    orphans = [c for c in range(ncomp) if final[c] < 0]
    if orphans:
        pairs = _neighbour_pairs(comp)
        starts = np.searchsorted(pairs[:, 0], np.arange(ncomp + 1))
        pending = orphans
        while pending:
            remaining = []
            for c in pending:
                nbrs = pairs[starts[c]:starts[c + 1], 1]
                cands = {int(final[o]) for o in nbrs if final[o] >= 0}
                if not cands:
                    remaining.append(c)
                    continue
                target = min(cands, key=lambda lab: (-label_size[lab], lab))
                final[c] = target
                label_size[target] += int(sizes[c])
            if len(remaining) == len(pending):
                raise RuntimeError("connectivity enforcement stalled: no labelled region")
            pending = remaining
    return _relabel_raster_order(final[comp])


def _grid_centers(height, width, target_count):
    step = np.sqrt(height * width / target_count)
    if height <= width:
        ny = int(min(height, max(1, round(height / step))))
        nx = int(min(width, max(1, round(target_count / ny))))
    else:
        nx = int(min(width, max(1, round(width / step))))
        ny = int(min(height, max(1, round(target_count / nx))))
    gy = (np.arange(ny) + 0.5) * (height / ny)
    gx = (np.arange(nx) + 0.5) * (width / nx)
    cy, cx = np.meshgrid(gy, gx, indexing="ij")
    spacing = max(height / ny, width / nx)
    return cy.ravel(), cx.ravel(), spacing


def slic_segment(pc1, target_count, compactness=10.0, n_iter=10) -> SuperpixelSegmentation:
    """SLIC superpixels of a 2-D single-channel image.

    Centers start on a regular grid of about ``target_count`` cells with
    spacing S ~ sqrt(H*W/K).  Each round assigns every pixel within +-S of a
    center to the center minimising ``dc**2 + (dxy/S)**2 * compactness**2``
    and moves centers to their members' means.  After ``n_iter`` rounds,
    disconnected pieces are merged into their largest neighbour, so the
    returned count N may differ from ``target_count``.
    """
    pc1 = np.asarray(pc1, dtype=np.float64)
    if pc1.ndim != 2:
        raise ValueError("slic_segment expects a 2-D image")
    height, width = pc1.shape
    if not 1 <= target_count <= height * width:
        raise ValueError(f"target_count must lie in 1..{height * width}")
    if not np.all(np.isfinite(pc1)):
        raise ValueError("image contains non-finite values")
    cy, cx, step = _grid_centers(height, width, int(target_count))
    values = pc1[np.floor(cy).astype(int), np.floor(cx).astype(int)]
    centers = np.ascontiguousarray(np.column_stack([cy, cx, values]), dtype=np.float64)
    labels = kernels.slic_iterate(pc1, centers, float(step), float(compactness), int(n_iter))
    return segmentation_from_assignment(enforce_connectivity(labels))


def write_segmentation_pgm(seg: SuperpixelSegmentation, path):
    """Debug dump of superpixel ids as a 16-bit PGM."""
    if seg.num_superpixels > 65536:
        raise ValueError("too many superpixels for a PGM dump")
    write_pgm(path, seg.assignment)


# --------------------------------------------------------------------------
# labels and features

def regularize_labels(seg: SuperpixelSegmentation, train_labels, num_classes) -> np.ndarray:
    """Per-superpixel class fractions: count of class-j training pixels over superpixel size."""
    train = np.asarray(train_labels, dtype=np.int64).ravel()
    if train.size != seg.assignment.size:
        raise ValueError("training label map does not match segmentation")
    labelled = train > 0
    if (train > num_classes).any():
        raise ValueError("training label exceeds num_classes")
    n = seg.num_superpixels
    sp = seg.assignment.ravel()[labelled]
    counts = np.bincount(sp * num_classes + (train[labelled] - 1),
                         minlength=n * num_classes).reshape(n, num_classes)
    return counts / seg.sizes[:, None]


def mean_features(seg: SuperpixelSegmentation, cube: HsiCube) -> np.ndarray:
    if (cube.height, cube.width) != seg.shape:
        raise ValueError("cube and segmentation dimensions differ")
    idx = seg.assignment.ravel()
    pixels = cube.pixels().astype(np.float64)
    n = seg.num_superpixels
    sums = np.column_stack([np.bincount(idx, weights=pixels[:, j], minlength=n)
                            for j in range(pixels.shape[1])])
    return sums / seg.sizes[:, None]


def spatial_mean_weights(seg: SuperpixelSegmentation, mean, h) -> sparse.csr_matrix:
    """Row-stochastic softmax weights over each superpixel and its neighbours."""
    if h <= 0:
        raise ValueError("h must be positive")
    mean = np.asarray(mean, dtype=np.float64)
    n = seg.num_superpixels
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    for k, nbrs in enumerate(seg.adjacency_sets):
        rows.append(np.full(len(nbrs), k))
        cols.append(np.asarray(nbrs, dtype=np.int64))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    diff = mean[cols] - mean[rows]
    logits = -np.einsum("ij,ij->i", diff, diff) / h
    # self term has logit 0, the row maximum, so exp never overflows
    w = np.exp(logits)
    W = sparse.csr_matrix((w, (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    W.sort_indices()
    return sparse.diags(1.0 / np.asarray(W.sum(axis=1)).ravel()) @ W


def spatial_mean_features(seg: SuperpixelSegmentation, mean, h) -> np.ndarray:
    """Softmax-weighted average of the mean features over each superpixel's neighbourhood.

    The neighbourhood includes the superpixel itself (weight ``exp(0)``
    before normalisation).
    """
    return np.asarray(spatial_mean_weights(seg, mean, h) @ np.asarray(mean, dtype=np.float64))


def centroid_features(seg: SuperpixelSegmentation) -> np.ndarray:
    """Mean (row, col) coordinate of each superpixel."""
    idx = seg.assignment.ravel()
    rr, cc = np.divmod(np.arange(idx.size), seg.shape[1])
    n = seg.num_superpixels
    sizes = seg.sizes
    return np.column_stack([np.bincount(idx, weights=rr.astype(float), minlength=n) / sizes,
                            np.bincount(idx, weights=cc.astype(float), minlength=n) / sizes])


def extract_features(seg, cube, h) -> SuperpixelFeatures:
    mean = mean_features(seg, cube)
    return SuperpixelFeatures(mean, spatial_mean_features(seg, mean, h), centroid_features(seg), h)


# --------------------------------------------------------------------------
# distances

def pairwise_sq_distances(features, tag="") -> FeatureDistanceMatrix:
    """Squared Euclidean distances between feature rows (exactly symmetric, zero diagonal)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    Z = cdist(features, features, "sqeuclidean")
    np.fill_diagonal(Z, 0.0)
    return FeatureDistanceMatrix(Z, tag)


def feature_scale(Z) -> float:
    """Mean over all N**2 entries."""
    Z = _values(Z)
    return float(Z.sum() / Z.size)


def composite_distance(Zv, Zc, mode="additive", lam=None) -> FeatureDistanceMatrix:
    """Merge a spectral view with the centroid view.

    ``mode="multiplicative"`` gives the elementwise product; ``"additive"``
    gives ``Zv + lam * Zc`` with ``lam`` defaulting to the scale ratio
    ``feature_scale(Zv) / feature_scale(Zc)``.
    """
    a, c = _values(Zv), _values(Zc)
    if a.shape != c.shape:
        raise ValueError("distance matrices differ in shape")
    tv = getattr(Zv, "tag", "") or "v"
    tc = getattr(Zc, "tag", "") or "C"
    if mode == "multiplicative":
        return FeatureDistanceMatrix(a * c, f"{tv}*{tc}")
    if mode != "additive":
        raise ValueError(f"unknown composite mode {mode!r}")
    if lam is None:
        sc = feature_scale(c)
        if sc == 0:
            raise ValueError("centroid distance scale is zero; cannot default lambda")
        lam = feature_scale(a) / sc
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return FeatureDistanceMatrix(a + lam * c, f"{tv}+lam*{tc}")
