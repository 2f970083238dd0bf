"""Band standardization and PCA spectral reduction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import HsiCube

__all__ = ["PcaModel", "standardize_bands", "pca_reduce"]


@dataclass
class PcaModel:
    """Principal axes of a pixel set.

    Attributes
    ----------
    mean : (B,) array
        Per-band mean removed before projection.
    components : (b, B) array
        Orthonormal principal axes as rows, strongest first.
    explained_variance : (b,) array
        Population variance along each retained axis, non-increasing.
    total_variance : float
        Sum of all B eigenvalues, used for explained-variance fractions.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance

    def transform(self, pixels: np.ndarray) -> np.ndarray:
        return (np.asarray(pixels, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, scores: np.ndarray) -> np.ndarray:
        return scores @ self.components + self.mean


def standardize_bands(cube: HsiCube) -> HsiCube:
    """Z-score each band over all pixels (population std); constant bands become zero."""
    data = np.asarray(cube.data, dtype=np.float64)
    flat = data.reshape(cube.bands, -1)
    mean = flat.mean(axis=1, keepdims=True)
    centered = flat - mean
    std = np.sqrt(np.mean(centered * centered, axis=1, keepdims=True))
    out = np.zeros_like(centered)
    live = std[:, 0] > 0
    out[live] = centered[live] / std[live]
    return HsiCube(out.reshape(data.shape), cube.band_names)


def pca_reduce(cube: HsiCube, variance_target: float = 0.998):
    """Project pixels onto the fewest leading principal axes explaining ``variance_target``.

    Uses an eigendecomposition of the B x B population covariance.  Each axis
    is signed so that its largest-magnitude entry is positive.

    Returns
    -------
    reduced : HsiCube
        Cube of principal-component scores, ``bands == b``.
    model : PcaModel
    """
    if not 0 < variance_target <= 1:
        raise ValueError("variance_target must lie in (0, 1]")
    pixels = cube.pixels().astype(np.float64)
    n = pixels.shape[0]
    mean = pixels.mean(axis=0)
    centered = pixels - mean
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    evals = np.clip(evals, 0.0, None)
    total = float(evals.sum())
    if not total > 0:
        raise ValueError("degenerate covariance: data has zero variance")
    cumulative = np.cumsum(evals) / total
    # relative slack keeps variance_target=1 reachable despite rounding
    b = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    b = min(b, len(evals))
    comps = evecs[:, :b].T.copy()
    lead = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(b), lead])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    model = PcaModel(mean, comps, evals[:b].copy(), total)
    scores = centered @ comps.T
    return HsiCube.from_pixels(scores, cube.height, cube.width), model
