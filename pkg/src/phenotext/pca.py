"""Principal component analysis via cyclic Jacobi eigendecomposition.

Fits on the training matrix only: column means are subtracted, the sample
covariance (divisor rows-1) is diagonalized, and the leading eigenvectors
become the projection basis.  When there are fewer rows than columns the
equivalent row-Gram eigenproblem is solved instead.  Sign convention: each
component's largest-magnitude coordinate is made positive, so serialized
models are reproducible across platforms.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import _native
from .errors import ConvergenceError, DataError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass
class PcaModel:
    mean: np.ndarray  # (V,)
    components: np.ndarray  # (C, V), rows orthonormal
    explained_variance: np.ndarray  # (C,), descending, >= 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        self.explained_variance = np.asarray(self.explained_variance, dtype=np.float64)
        if self.components.ndim != 2:
            raise DataError("PCA components must be a 2-D array")
        c, v = self.components.shape
        if self.mean.shape != (v,) or self.explained_variance.shape != (c,):
            raise DataError("inconsistent PCA model shapes")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(c), atol=1e-8):
            raise DataError("PCA components are not orthonormal")
        if np.any(np.diff(self.explained_variance) > 1e-10):
            raise DataError("explained variance is not non-increasing")

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]


def jacobi_eigh(sym: np.ndarray, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of a symmetric matrix, eigenvalues descending.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns.
    Raises ConvergenceError if the off-diagonal mass does not fall below
    JACOBI_TOL (relative to the input's Frobenius norm) in
    JACOBI_MAX_SWEEPS sweeps.
    """
    A = np.array(sym, dtype=np.float64, order="C")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DataError("jacobi_eigh expects a square matrix")
    if not np.allclose(A, A.T, atol=1e-12):
        raise DataError("jacobi_eigh expects a symmetric matrix")
    scale = float(np.linalg.norm(A))
    if scale == 0.0:
        return np.zeros(n), np.eye(n)
    V = np.eye(n, order="C")
    threshold = JACOBI_TOL * scale
    if backend is None:
        backend = _native.BACKEND
    if backend == "compiled":
        sweeps = _native.compiled.jacobi_cycle(A, V, threshold, JACOBI_MAX_SWEEPS)
    else:
        sweeps = _native.pure.jacobi_cycle(A, V, threshold, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps "
            f"(threshold {threshold:g})"
        )
    eigvals = np.diag(A).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], V[:, order]


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def fit_pca(train: np.ndarray, n_components: int = 7) -> PcaModel:
    """Fit a PCA model on the training matrix (rows are samples)."""
    X = np.asarray(train, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("training matrix must be 2-D")
    n, v = X.shape
    if n < 2:
        raise DataError("PCA needs at least 2 training rows")
    if not np.all(np.isfinite(X)):
        raise DataError("training matrix contains non-finite values")
    limit = min(n - 1, v)
    if not (1 <= n_components <= limit):
        raise DataError(
            f"n_components={n_components} out of range; at most {limit} for a "
            f"{n}x{v} matrix"
        )
    mean = X.mean(axis=0)
    Xc = X - mean
    total_var = float((Xc * Xc).sum()) / (n - 1)
    if total_var == 0.0:
        raise DataError("training matrix has zero variance")

    if v <= n:
        cov = (Xc.T @ Xc) / (n - 1)
        eigvals, eigvecs = jacobi_eigh(cov)
        components = eigvecs[:, :n_components].T
        variances = eigvals[:n_components]
    else:
        # Row-Gram route: eigenvectors of Xc Xc^T / (n-1) map to covariance
        # eigenvectors via Xc^T u / sqrt((n-1) lambda).
        gram = (Xc @ Xc.T) / (n - 1)
        eigvals, eigvecs = jacobi_eigh(gram)
        variances = eigvals[:n_components]
        if np.any(variances <= JACOBI_TOL * max(1.0, float(eigvals[0]))):
            raise DataError(
                "training matrix rank is too low for the requested components"
            )
        scale = np.sqrt((n - 1) * variances)
        components = (Xc.T @ eigvecs[:, :n_components] / scale).T
        norms = np.linalg.norm(components, axis=1, keepdims=True)
        components = components / norms

    if np.any(variances < -1e-10):
        raise ConvergenceError("covariance eigenvalue below -1e-10; numerical failure")
    variances = np.clip(variances, 0.0, None)
    components = _apply_sign_convention(components)
    return PcaModel(mean=mean, components=components, explained_variance=variances)


def transform_pca(model: PcaModel, m: np.ndarray) -> np.ndarray:
    """Project rows of m into the fitted component space: (m - mean) @ C^T."""
    M = np.asarray(m, dtype=np.float64)
    single = M.ndim == 1
    if single:
        M = M.reshape(1, -1)
    if M.shape[1] != model.n_features:
        raise DataError(
            f"matrix has {M.shape[1]} columns, model expects {model.n_features}"
        )
    out = (M - model.mean) @ model.components.T
    return out[0] if single else out


def save_pca(model: PcaModel, path, extra: dict | None = None) -> None:
    payload = {
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "explained_variance": model.explained_variance.tolist(),
    }
    if extra:
        payload.update(extra)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_pca(path) -> PcaModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return PcaModel(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            components=np.asarray(payload["components"], dtype=np.float64),
            explained_variance=np.asarray(payload["explained_variance"], dtype=np.float64),
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing PCA model field {exc}") from None
