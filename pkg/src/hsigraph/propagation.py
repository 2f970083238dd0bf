"""Harmonic label propagation, one-step pseudo-labels and class decisions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from .graph import AffinityGraph, laplacian, random_walk_normalize

__all__ = [
    "SoftLabelMatrix",
    "PropagationWarning",
    "harmonic_propagate",
    "pseudo_label_step",
    "assign_classes",
    "broadcast_to_pixels",
]

REGULARIZATION = 1e-10


class PropagationWarning(UserWarning):
    pass


@dataclass
class SoftLabelMatrix:
    """N x c class scores; ``labeled_mask`` marks nodes with given evidence."""

    scores: np.ndarray
    labeled_mask: np.ndarray

    @classmethod
    def from_evidence(cls, Y):
        Y = np.asarray(Y, dtype=np.float64)
        return cls(Y, Y.sum(axis=1) > 0)

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]


def _as_soft(Y) -> SoftLabelMatrix:
    return Y if isinstance(Y, SoftLabelMatrix) else SoftLabelMatrix.from_evidence(Y)


def harmonic_propagate(G: AffinityGraph, Y_S) -> SoftLabelMatrix:
    """Solve ``L_uu F_u = -L_ul Y_l`` for the unlabelled nodes; labelled rows are kept.

    Unlabelled components with no path to a labelled node make ``L_uu``
    singular; those get a ``1e-10`` diagonal shift and a warning.
    """
    Y = _as_soft(Y_S)
    lab = Y.labeled_mask
    if not lab.any():
        raise ValueError("no labelled nodes to propagate from")
    F = Y.scores.astype(np.float64, copy=True)
    unl = np.flatnonzero(~lab)
    if unl.size == 0:
        return SoftLabelMatrix(F, lab.copy())
    L, _ = laplacian(G)
    Luu = L[unl][:, unl].tocsc()
    Lul = L[unl][:, np.flatnonzero(lab)]
    rhs = -(Lul @ F[lab])

    ncomp, comp = csgraph.connected_components(G.weights, directed=False)
    reached = np.zeros(ncomp, dtype=bool)
    reached[comp[lab]] = True
    if not reached.all():
        stranded = int((~reached[comp[unl]]).sum())
        warnings.warn(f"{stranded} unlabelled nodes cannot reach a labelled node; "
                      f"regularising with {REGULARIZATION:g}", PropagationWarning, stacklevel=2)
        Luu = (Luu + REGULARIZATION * sparse.identity(unl.size, format="csc")).tocsc()

    lu = splu(Luu)
    Fu = lu.solve(np.asarray(rhs))
    # one refinement step recovers accuracy lost to pivoting
    Fu += lu.solve(rhs - Luu @ Fu)
    F[unl] = Fu
    return SoftLabelMatrix(F, lab.copy())


def pseudo_label_step(G: AffinityGraph, Y_S) -> SoftLabelMatrix:
    """One random-walk step ``D^-1 W Y``; labelled rows are not clamped."""
    Y = _as_soft(Y_S)
    P = random_walk_normalize(G)
    return SoftLabelMatrix(np.asarray(P @ Y.scores), Y.labeled_mask.copy())


def _bfs_nearest_labelled(W, labelled, targets):
    """Nearest labelled node (unweighted hops, ties to smaller index) for each target, or -1."""
    W = sparse.csr_matrix(W)
    N = W.shape[0]
    owner = np.full(N, -1, dtype=np.int64)
    frontier = np.flatnonzero(labelled).tolist()
    owner[frontier] = frontier
    # level-synchronous BFS so that ties at equal depth resolve to the smaller source
    while frontier:
        nxt = {}
        for u in frontier:
            for v in W.indices[W.indptr[u]:W.indptr[u + 1]]:
                if owner[v] < 0:
                    if v not in nxt or owner[u] < nxt[v]:
                        nxt[v] = owner[u]
        for v, o in nxt.items():
            owner[v] = o
        frontier = sorted(nxt)
    return owner[targets]


def assign_classes(F, G: AffinityGraph | None = None) -> np.ndarray:
    """Class ids ``1..c`` by row argmax (ties to the smaller class).

    All-zero rows take the class of the nearest labelled node in hop distance
    over ``G``; if none is reachable (or no graph is given) they take the class
    with the largest total labelled evidence.
    """
    F = _as_soft(F)
    scores = F.scores
    if scores.shape[1] < 1:
        raise ValueError("need at least one class")
    classes = np.argmax(scores, axis=1) + 1
    empty = np.flatnonzero(~np.any(scores != 0, axis=1))
    if empty.size:
        warnings.warn(f"{empty.size} nodes have all-zero scores; using nearest labelled node",
                      PropagationWarning, stacklevel=2)
        lab = F.labeled_mask & np.any(scores != 0, axis=1)
        prior = int(np.argmax(scores[lab].sum(axis=0))) + 1 if lab.any() else 1
        if G is not None and lab.any():
            owner = _bfs_nearest_labelled(G.weights, lab, empty)
            classes[empty] = np.where(owner >= 0, classes[np.maximum(owner, 0)], prior)
        else:
            classes[empty] = prior
    return classes


def broadcast_to_pixels(seg, superpixel_classes) -> np.ndarray:
    superpixel_classes = np.asarray(superpixel_classes)
    if superpixel_classes.shape[0] != seg.num_superpixels:
        raise ValueError("one class per superpixel required")
    return superpixel_classes[seg.assignment]
