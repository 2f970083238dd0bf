"""Sparse affinity-graph learning.

The k-edge closed form solves, for each row ``i``,

    min_w  sum_j Z_ij w_j + alpha_i * sum_j w_j**2   s.t.  w >= 0, sum(w) = 1, w_i = 0

with ``alpha_i`` chosen as the largest value leaving exactly ``k`` nonzeros, which
reduces to ``w_(j) = (z_(k+1) - z_(j)) / (k z_(k+1) - sum_{h<=k} z_(h))`` over the
sorted distances.  Masked updates and feature-weight learning are Euclidean
projections onto the probability simplex.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import kernels
from .superpixels import FeatureDistanceMatrix

__all__ = [
    "AffinityGraph",
    "GraphLearnConfig",
    "knn_graph_closed_form",
    "symmetrize",
    "combine",
    "laplacian",
    "random_walk_normalize",
    "simplex_project",
    "masked_graph_update",
    "view_residual",
    "feature_weight_update",
    "check_graph",
    "write_edge_list",
]


@dataclass
class AffinityGraph:
    weights: sparse.csr_matrix
    symmetric: bool = False

    @property
    def num_nodes(self) -> int:
        return self.weights.shape[0]

    def degrees(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def toarray(self) -> np.ndarray:
        return self.weights.toarray()


@dataclass
class GraphLearnConfig:
    """Graph-learning knobs.  The quadratic weight of the row problem is not a
    parameter: the closed form picks it per row from ``k``."""

    k: int = 10
    gamma: float = 10.0
    gamma1: float = 0.0
    gamma2: float = 30.0
    gamma3: float = 1.0
    feature_weights: tuple = ()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        for name in ("gamma", "gamma1", "gamma2", "gamma3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if any(c < 0 for c in self.feature_weights):
            raise ValueError("feature weights must be nonnegative")


def _dense(Z):
    if isinstance(Z, FeatureDistanceMatrix):
        return Z.values
    return np.asarray(Z, dtype=np.float64)


def _canonical(W):
    W = sparse.csr_matrix(W)
    W.eliminate_zeros()
    W.sort_indices()
    return W


def knn_graph_closed_form(Z, k) -> AffinityGraph:
    """Row-stochastic k-edge graph from a distance matrix.

    Ties in distance go to the smaller node index; a row whose k+1 nearest
    distances are all equal receives uniform weights ``1/k``.
    """
    Z = _dense(Z)
    N = Z.shape[0]
    if Z.ndim != 2 or Z.shape[1] != N:
        raise ValueError("distance matrix must be square")
    if k < 1:
        raise ValueError("k must be at least 1")
    if N <= k + 1:
        raise ValueError(f"insufficient nodes for k edges: N={N}, k={k}")
    idx, w = kernels.knn_rows(np.ascontiguousarray(Z), int(k))
    order = np.argsort(idx, axis=1, kind="stable")
    idx = np.take_along_axis(idx, order, axis=1)
    w = np.take_along_axis(w, order, axis=1)
    indptr = np.arange(0, N * k + 1, k, dtype=np.int64)
    W = sparse.csr_matrix((w.ravel(), idx.ravel(), indptr), shape=(N, N))
    return AffinityGraph(_canonical(W), symmetric=False)


def symmetrize(G: AffinityGraph) -> AffinityGraph:
    W = G.weights
    return AffinityGraph(_canonical((W + W.T) * 0.5), symmetric=True)


def combine(graphs, weights) -> AffinityGraph:
    """Weighted sum of graphs, ``sum_v c_v A_v``."""
    total = None
    for c, G in zip(weights, graphs):
        term = G.weights * float(c)
        total = term if total is None else total + term
    return AffinityGraph(_canonical(total), symmetric=all(G.symmetric for G in graphs))


def laplacian(G: AffinityGraph):
    """``(L, D)`` with ``D = diag(W 1)`` and ``L = D - W``, both sparse."""
    if not G.symmetric:
        raise ValueError("laplacian requires a symmetrized graph")
    D = sparse.diags(G.degrees(), format="csr")
    return (D - G.weights).tocsr(), D


def random_walk_normalize(G: AffinityGraph) -> sparse.csr_matrix:
    deg = G.degrees()
    if (deg <= 0).any():
        raise ValueError("zero-degree node; random-walk normalisation undefined")
    return (sparse.diags(1.0 / deg) @ G.weights).tocsr()


def simplex_project(v, support=None) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{c >= 0, sum(c) = 1}``.

    With ``support`` (index array or boolean mask) coordinates outside it are
    fixed at zero.  Exact sort-and-threshold: the result is
    ``max(v_i + mu, 0)`` on the support for the unique shift ``mu`` giving unit sum.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if support is None:
        sel = np.arange(v.size)
    else:
        support = np.asarray(support)
        sel = np.flatnonzero(support) if support.dtype == bool else np.unique(support.astype(np.int64))
        if sel.size == 0:
            raise ValueError("empty support")
    out = np.zeros_like(v)
    seg = v[sel]
    out[sel] = kernels.project_rows(np.array([0, seg.size], dtype=np.int64), seg)
    return out


def masked_graph_update(views, c, Z_F, gamma, mask_source: AffinityGraph) -> AffinityGraph:
    """Re-weight the edges of ``mask_source`` using pseudo-label distances.

    Row ``i`` becomes the simplex projection, restricted to the nonzero
    positions of ``mask_source`` row ``i``, of

        (sum_v c_v A^v_i - (gamma/2) * (mask o Z_F)_i) / sum_v c_v

    Edge positions never move; edges may only be re-weighted or dropped.
    """
    c = np.asarray(c, dtype=np.float64)
    if len(views) != c.size:
        raise ValueError("one weight per view required")
    csum = float(c.sum())
    if not csum > 0:
        raise ValueError("feature weights must have positive sum")
    mask = _canonical(mask_source.weights)
    N = mask.shape[0]
    row_len = np.diff(mask.indptr)
    if (row_len == 0).any():
        raise ValueError(f"empty row support at node {int(np.flatnonzero(row_len == 0)[0])}")
    rows = np.repeat(np.arange(N), row_len)
    cols = mask.indices
    combined = combine(views, c).weights
    at_mask = np.asarray(combined[rows, cols]).ravel()
    zf = _dense(Z_F)[rows, cols]
    target = (at_mask - 0.5 * gamma * zf) / csum
    projected = kernels.project_rows(mask.indptr.astype(np.int64), target)
    W = sparse.csr_matrix((projected, cols.copy(), mask.indptr.copy()), shape=(N, N))
    return AffinityGraph(_canonical(W), symmetric=False)


def view_residual(W: AffinityGraph, A: AffinityGraph) -> float:
    """Squared Frobenius distance ``||W - A||_F**2``."""
    if W.weights.shape != A.weights.shape:
        raise ValueError("graph dimensions differ")
    diff = (W.weights - A.weights).tocsr()
    return float(np.sum(diff.data * diff.data))


def feature_weight_update(r, gamma2) -> np.ndarray:
    """Feature weights ``c = argmin ||c + r/(2 gamma2)||^2`` over the simplex."""
    if not gamma2 > 0:
        raise ValueError("gamma2 must be positive")
    r = np.asarray(r, dtype=np.float64)
    return simplex_project(-r / (2.0 * gamma2))


def check_graph(G: AffinityGraph, k=None, atol=1e-12):
    """Raise AssertionError if ``G`` violates the graph invariants."""
    W = G.weights
    assert W.shape[0] == W.shape[1], "graph not square"
    assert (W.data >= 0).all(), "negative edge weight"
    assert np.all(W.diagonal() == 0), "self loop present"
    if G.symmetric:
        asym = abs(W - W.T)
        assert asym.nnz == 0 or asym.max() <= atol, "graph not symmetric"
    else:
        np.testing.assert_allclose(G.degrees(), 1.0, atol=1e-9, err_msg="row sums differ from 1")
        if k is not None:
            assert np.diff(W.indptr).max() <= k, "row has more than k edges"


def write_edge_list(G: AffinityGraph, path):
    """Debug dump: one ``i j w`` line per stored edge."""
    W = G.weights.tocoo()
    with open(path, "w") as fh:
        for i, j, w in zip(W.row, W.col, W.data):
            fh.write(f"{i} {j} {w:.17g}\n")
