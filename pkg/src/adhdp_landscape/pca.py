"""Principal directions of weight and state trajectories."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RunFormatError, ZeroVarianceError

_MAGIC = b"PCA1"


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray          # (k, dim), orthonormal rows
    explained_variance_ratio: np.ndarray

    @property
    def k(self):
        return len(self.components)

    @property
    def dim(self):
        return len(self.mean)


def fit_pca(samples, k):
    """Top-``k`` principal directions of ``samples`` (rows are observations).

    Each component is signed so that its largest-magnitude entry is positive.
    Ratios are relative to the total variance of the data.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need at least two samples as a 2-D array")
    n, dim = X.shape
    if not 1 <= k <= min(dim, n - 1):
        raise ValueError(f"k={k} must be between 1 and min(dim={dim}, samples-1={n - 1})")
    mean = X.mean(axis=0)
    Xc = X - mean
    # mean of identical rows can be off by an ulp, so compare to the data scale
    if np.max(np.abs(Xc)) <= 1e-12 * max(1.0, np.max(np.abs(X))):
        raise ZeroVarianceError("samples do not vary; PCA directions are undefined")
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    var = s * s
    total = var.sum()
    comps = Vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaBasis(mean, comps, var[:k] / total)


def project(basis, v):
    """Coordinates of ``v`` (or rows of ``v``) along the basis directions."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != basis.dim:
        raise ValueError(f"vector dim {v.shape[-1]} does not match basis dim {basis.dim}")
    return (v - basis.mean) @ basis.components.T


def reconstruct(basis, alpha, beta, reference):
    """Point ``reference + alpha * pc1 + beta * pc2`` of the plane."""
    if basis.k < 2:
        raise ValueError("a plane needs at least two principal components")
    reference = np.asarray(reference, dtype=float)
    if reference.shape != (basis.dim,):
        raise ValueError("reference vector does not match basis dimension")
    return reference + alpha * basis.components[0] + beta * basis.components[1]


def save_basis(basis, path):
    header = _MAGIC + np.array([basis.dim, basis.k], dtype="<u8").tobytes()
    body = np.concatenate((basis.mean, basis.components.ravel(), basis.explained_variance_ratio))
    Path(path).write_bytes(header + body.astype("<f8").tobytes())


def load_basis(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _MAGIC or len(raw) < 20:
        raise RunFormatError(f"{path}: not a PCA basis file")
    dim, k = (int(v) for v in np.frombuffer(raw[4:20], dtype="<u8"))
    body = np.frombuffer(raw[20:], dtype="<f8")
    if body.size != dim + k * dim + k:
        raise RunFormatError(f"{path}: size does not match header ({k} x {dim})")
    return PcaBasis(body[:dim].copy(), body[dim:dim + k * dim].reshape(k, dim).copy(),
                    body[dim + k * dim:].copy())
