"""K-nearest-neighbors and a soft-margin kernel SVM trained by SMO.

KNN is exact brute force: at a few hundred training rows in a 7-dim space a
KD-tree buys nothing, and exactness keeps the tie rules testable.  The SVM
uses the simplified sequential-minimal-optimization scheme: sweep over all
points, and for each KKT violator pick a random partner (non-bound points
first) until an update succeeds.  Defaults are pinned explicitly: RBF
kernel, C=1, gamma = 1 / (n_features * mean per-feature variance).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

DEFAULT_KNN_K = 27


# ---------------------------------------------------------------------------
# KNN


@dataclass
class KnnModel:
    k: int
    points: np.ndarray  # (N, C)
    labels: np.ndarray  # (N,) int class indices

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2:
            raise DataError("KNN points must be a 2-D matrix")
        n = self.points.shape[0]
        if self.labels.shape != (n,):
            raise DataError("KNN labels length must match point count")
        if not (1 <= self.k <= n):
            raise ConfigError(f"k={self.k} must be within 1..{n}")
        self._class_totals = np.bincount(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self._class_totals)


def knn_predict(model: KnnModel, query: np.ndarray) -> int:
    """Majority vote among the k nearest training points (Euclidean).

    Distance ties break toward the lower training index; vote ties break
    toward the class with more training points overall, then the lower
    class index.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (model.points.shape[1],):
        raise DataError(
            f"query has {q.shape} shape, expected ({model.points.shape[1]},)"
        )
    diff = model.points - q
    d2 = np.einsum("ij,ij->i", diff, diff)
    # lexsort: primary key last -> sort by distance, then training index
    order = np.lexsort((np.arange(len(d2)), d2))
    votes = np.bincount(model.labels[order[: model.k]], minlength=model.n_classes)
    best = votes.max()
    candidates = np.flatnonzero(votes == best)
    if len(candidates) > 1:
        totals = model._class_totals[candidates]
        candidates = candidates[totals == totals.max()]
    return int(candidates[0])


def knn_predict_batch(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    Q = np.asarray(queries, dtype=np.float64)
    return np.array([knn_predict(model, q) for q in Q], dtype=np.int64)


def save_knn(model: KnnModel, path, extra: dict | None = None) -> None:
    payload = {
        "algo": "knn",
        "k": model.k,
        "points": model.points.tolist(),
        "labels": model.labels.tolist(),
    }
    if extra:
        payload.update(extra)
    _atomic_json(payload, path)


def load_knn(payload: dict) -> KnnModel:
    return KnnModel(
        k=int(payload["k"]),
        points=np.asarray(payload["points"], dtype=np.float64),
        labels=np.asarray(payload["labels"], dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# SVM


@dataclass
class SvmConfig:
    c_penalty: float = 1.0
    kernel: str = "rbf"  # "rbf" | "linear"
    gamma: float | str = "scale"
    tol: float = 1e-3
    max_passes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in ("rbf", "linear"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.c_penalty <= 0:
            raise ConfigError("c_penalty must be positive")


@dataclass
class SvmModel:
    alphas: np.ndarray  # (N,)
    bias: float
    points: np.ndarray  # (N, V) training rows
    y: np.ndarray  # (N,) in {-1, +1}; class 1 maps to +1
    kernel: str
    gamma: float  # resolved value (ignored for linear)
    c_penalty: float
    converged: bool = True
    sweeps: int = 0

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.points = np.asarray(self.points, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if np.any(self.alphas < -1e-12) or np.any(self.alphas > self.c_penalty + 1e-12):
            raise DataError("dual coefficients violate the box constraint")
        if abs(float(self.alphas @ self.y)) > 1e-8 * max(1.0, float(self.alphas.sum())):
            raise DataError("dual coefficients violate the equality constraint")


def _kernel_matrix(X: np.ndarray, Z: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        K = X @ Z.T
    else:
        x2 = np.einsum("ij,ij->i", X, X)[:, None]
        z2 = np.einsum("ij,ij->i", Z, Z)[None, :]
        d2 = np.maximum(x2 + z2 - 2.0 * (X @ Z.T), 0.0)
        K = np.exp(-gamma * d2)
    if not np.all(np.isfinite(K)):
        raise DataError("non-finite kernel value")
    return K


def resolve_gamma(X: np.ndarray, gamma: float | str) -> float:
    """'scale' means 1 / (n_features * mean per-feature variance)."""
    if gamma == "scale":
        mean_var = float(X.var(axis=0).mean())
        if mean_var <= 0.0:
            raise DataError("cannot scale gamma: training matrix has zero variance")
        return 1.0 / (X.shape[1] * mean_var)
    value = float(gamma)
    if value <= 0:
        raise ConfigError("gamma must be positive")
    return value


def svm_fit(train: np.ndarray, labels01: np.ndarray, config: SvmConfig | None = None) -> SvmModel:
    """Train a binary soft-margin SVM with simplified SMO.

    ``labels01`` holds class indices {0, 1}; class 1 becomes the positive
    side of the decision function.
    """
    config = config or SvmConfig()
    X = np.asarray(train, dtype=np.float64)
    lab = np.asarray(labels01, dtype=np.int64)
    if X.ndim != 2 or lab.shape != (X.shape[0],):
        raise DataError("training matrix and labels are inconsistent")
    classes = np.unique(lab)
    if not np.array_equal(classes, np.array([0, 1])):
        raise DataError("SVM needs both classes 0 and 1 present in training data")
    y = np.where(lab == 1, 1.0, -1.0)
    n = X.shape[0]
    C = float(config.c_penalty)
    tol = float(config.tol)
    gamma = resolve_gamma(X, config.gamma) if config.kernel == "rbf" else 1.0
    K = _kernel_matrix(X, X, config.kernel, gamma)
    rng = np.random.default_rng(config.seed)

    alphas = np.zeros(n)
    bias = 0.0

    def decision(i: int) -> float:
        return float((alphas * y) @ K[:, i]) + bias

    def take_step(i: int, j: int) -> bool:
        nonlocal bias
        if i == j:
            return False
        Ei = decision(i) - y[i]
        Ej = decision(j) - y[j]
        ai_old, aj_old = alphas[i], alphas[j]
        if y[i] != y[j]:
            L = max(0.0, aj_old - ai_old)
            H = min(C, C + aj_old - ai_old)
        else:
            L = max(0.0, ai_old + aj_old - C)
            H = min(C, ai_old + aj_old)
        if L >= H:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0.0:
            return False
        aj = aj_old - y[j] * (Ei - Ej) / eta
        aj = min(max(aj, L), H)
        if abs(aj - aj_old) < 1e-5:
            return False
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        alphas[i], alphas[j] = ai, aj
        b1 = bias - Ei - y[i] * (ai - ai_old) * K[i, i] - y[j] * (aj - aj_old) * K[i, j]
        b2 = bias - Ej - y[i] * (ai - ai_old) * K[i, j] - y[j] * (aj - aj_old) * K[j, j]
        if 0.0 < ai < C:
            bias = b1
        elif 0.0 < aj < C:
            bias = b2
        else:
            bias = 0.5 * (b1 + b2)
        # dual feasibility is preserved by every SMO step
        assert -1e-9 <= ai <= C + 1e-9 and -1e-9 <= aj <= C + 1e-9
        assert abs(alphas @ y) <= 1e-8 * max(1.0, alphas.sum())
        return True

    def examine(i: int) -> bool:
        non_bound = np.flatnonzero((alphas > 0.0) & (alphas < C))
        others = np.setdiff1d(np.arange(n), non_bound, assume_unique=False)
        for pool in (non_bound, others):
            pool = pool[pool != i]
            if len(pool):
                for j in rng.permutation(pool):
                    if take_step(i, int(j)):
                        return True
        return False

    passes = 0
    sweeps = 0
    converged = False
    hard_cap = max(1000, config.max_passes * 10)
    while passes < config.max_passes and sweeps < hard_cap:
        changed = 0
        violations = 0
        for i in range(n):
            r = y[i] * (decision(i) - y[i])
            # box-bound classification needs the same numerical band as the
            # KKT checker, or a multiplier parked at C - 1e-16 by float
            # arithmetic is flagged forever without being improvable
            if (r < -tol and alphas[i] < C - 1e-9) or (r > tol and alphas[i] > 1e-9):
                violations += 1
                if examine(i):
                    changed += 1
        sweeps += 1
        if violations == 0:
            converged = True
            break
        passes = passes + 1 if changed == 0 else 0
    if not converged:
        log.warning("SMO stopped without clearing all KKT violations (%d sweeps)", sweeps)

    return SvmModel(
        alphas=alphas, bias=bias, points=X, y=y, kernel=config.kernel,
        gamma=gamma, c_penalty=C, converged=converged, sweeps=sweeps,
    )


def svm_decision(model: SvmModel, queries: np.ndarray) -> np.ndarray:
    Q = np.asarray(queries, dtype=np.float64)
    single = Q.ndim == 1
    if single:
        Q = Q.reshape(1, -1)
    if Q.shape[1] != model.points.shape[1]:
        raise DataError(
            f"query has {Q.shape[1]} features, model expects {model.points.shape[1]}"
        )
    K = _kernel_matrix(model.points, Q, model.kernel, model.gamma)
    vals = (model.alphas * model.y) @ K + model.bias
    return vals[0] if single else vals


def svm_predict(model: SvmModel, query: np.ndarray) -> int:
    """Class index from the decision sign; exact zero maps to class 1."""
    return int(svm_decision(model, query) >= 0.0)


def svm_predict_batch(model: SvmModel, queries: np.ndarray) -> np.ndarray:
    return (svm_decision(model, queries) >= 0.0).astype(np.int64)


def kkt_violation(model: SvmModel) -> float:
    """Largest violation of the dual optimality conditions, in margin units."""
    K = _kernel_matrix(model.points, model.points, model.kernel, model.gamma)
    margins = model.y * ((model.alphas * model.y) @ K + model.bias)
    worst = 0.0
    for i in range(len(model.alphas)):
        a = model.alphas[i]
        m = margins[i]
        if a < 1e-9:
            worst = max(worst, 1.0 - m)  # should have margin >= 1
        elif a > model.c_penalty - 1e-9:
            worst = max(worst, m - 1.0)  # should have margin <= 1
        else:
            worst = max(worst, abs(m - 1.0))  # should sit on the margin
    return float(worst)


def save_svm(model: SvmModel, path, extra: dict | None = None) -> None:
    payload = {
        "algo": "svm",
        "alphas": model.alphas.tolist(),
        "bias": model.bias,
        "points": model.points.tolist(),
        "y": model.y.tolist(),
        "kernel": model.kernel,
        "gamma": model.gamma,
        "c_penalty": model.c_penalty,
        "converged": model.converged,
        "sweeps": model.sweeps,
    }
    if extra:
        payload.update(extra)
    _atomic_json(payload, path)


def load_svm(payload: dict) -> SvmModel:
    return SvmModel(
        alphas=np.asarray(payload["alphas"], dtype=np.float64),
        bias=float(payload["bias"]),
        points=np.asarray(payload["points"], dtype=np.float64),
        y=np.asarray(payload["y"], dtype=np.float64),
        kernel=payload["kernel"],
        gamma=float(payload["gamma"]),
        c_penalty=float(payload["c_penalty"]),
        converged=bool(payload.get("converged", True)),
        sweeps=int(payload.get("sweeps", 0)),
    )


def _atomic_json(payload: dict, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)
