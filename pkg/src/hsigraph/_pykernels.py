"""Pure numpy versions of the hot loops.

Every routine here has a twin in ``_ckernels.pyx`` with the same signature.
Floating-point operations are ordered identically in both so the two
backends agree bitwise; keep them in sync when editing either.
"""
import math

import numpy as np
from scipy import ndimage


def slic_iterate(image, centers, step, compactness, n_iter):
    """Run ``n_iter`` SLIC assignment/update rounds on a single-channel image.

    ``centers`` is a (K, 3) float array of (row, col, value) and is updated in
    place.  Returns the int64 label image; pixels never reached keep -1 only if
    no window covered them in any round.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    height, width = image.shape
    labels = -np.ones((height, width), dtype=np.int64)
    dist = np.empty((height, width), dtype=np.float64)
    ratio = (compactness / step) ** 2
    rows = np.arange(height, dtype=np.float64)
    cols = np.arange(width, dtype=np.float64)
    K = centers.shape[0]
    for _ in range(n_iter):
        dist.fill(np.inf)
        for c in range(K):
            cy, cx, cv = centers[c]
            y0 = max(0, int(math.floor(cy - step)))
            y1 = min(height, int(math.ceil(cy + step)) + 1)
            x0 = max(0, int(math.floor(cx - step)))
            x1 = min(width, int(math.ceil(cx + step)) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            dy = rows[y0:y1, None] - cy
            dx = cols[None, x0:x1] - cx
            dc = image[y0:y1, x0:x1] - cv
            d = dc * dc + (dy * dy + dx * dx) * ratio
            win = dist[y0:y1, x0:x1]
            better = d < win
            win[better] = d[better]
            labels[y0:y1, x0:x1][better] = c
        flat = labels.ravel()
        ok = flat >= 0
        idx = flat[ok]
        yy, xx = np.divmod(np.flatnonzero(ok), width)
        counts = np.bincount(idx, minlength=K)
        sy = np.bincount(idx, weights=yy.astype(np.float64), minlength=K)
        sx = np.bincount(idx, weights=xx.astype(np.float64), minlength=K)
        sv = np.bincount(idx, weights=image.ravel()[ok], minlength=K)
        nz = counts > 0
        centers[nz, 0] = sy[nz] / counts[nz]
        centers[nz, 1] = sx[nz] / counts[nz]
        centers[nz, 2] = sv[nz] / counts[nz]
    return labels


def label_components(labels):
    """4-connected components of equal-label regions, numbered in raster order of first pixel."""
    labels = np.asarray(labels, dtype=np.int64)
    comp = np.zeros(labels.shape, dtype=np.int64)
    offset = 0
    structure = ndimage.generate_binary_structure(2, 1)
    objects = ndimage.find_objects(labels - labels.min() + 1)
    base = labels.min()
    for i, sl in enumerate(objects):
        if sl is None:
            continue
        mask = labels[sl] == (i + base)
        sub, n = ndimage.label(mask, structure=structure)
        if n == 0:
            continue
        view = comp[sl]
        view[mask] = sub[mask] + offset
        offset += n
    # renumber 1..n by first raster appearance, then shift to 0-based
    flat = comp.ravel()
    _, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(order.size, dtype=np.int64)
    remap[order] = np.arange(order.size)
    uniq = np.unique(flat)
    out = remap[np.searchsorted(uniq, flat)].reshape(labels.shape)
    return out, int(order.size)


def knn_rows(Z, k):
    """Closed-form k-edge simplex rows.

    Returns ``(indices, weights)``, both (N, k): the k nearest off-diagonal
    columns of each row (ties to the smaller column index) and their weights
    ``(z_(k+1) - z_(j)) / sum_h (z_(k+1) - z_(h))``; a zero denominator yields
    uniform ``1/k``.
    """
    Z = np.array(Z, dtype=np.float64, copy=True)
    N = Z.shape[0]
    np.fill_diagonal(Z, np.inf)
    order = np.argsort(Z, axis=1, kind="stable")[:, : k + 1]
    zs = np.take_along_axis(Z, order, axis=1)
    num = zs[:, k:k + 1] - zs[:, :k]
    total = num[:, 0].copy()
    for j in range(1, k):
        total += num[:, j]
    weights = np.empty((N, k), dtype=np.float64)
    pos = total > 0
    weights[pos] = num[pos] / total[pos, None]
    weights[~pos] = 1.0 / k
    return order[:, :k].astype(np.int64), weights


def _project_segment(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    theta = 0.0
    for j in range(u.size):
        t = (css[j] - 1.0) / (j + 1)
        if u[j] - t > 0:
            theta = t
    shifted = v - theta
    return np.where(shifted > 0.0, shifted, 0.0)


def project_rows(indptr, values):
    """Project each CSR row segment of ``values`` onto the probability simplex (new array)."""
    out = np.array(values, dtype=np.float64, copy=True)
    for i in range(len(indptr) - 1):
        a, b = indptr[i], indptr[i + 1]
        if b > a:
            out[a:b] = _project_segment(out[a:b])
    return out
