"""Independent reference implementations used to check the real code.

Everything here deliberately takes the dumbest correct path (brute force,
library eigensolver, exhaustive grids) and shares no code with the package.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# eigen/PCA


def oracle_eigh_desc(sym: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Library eigendecomposition, eigenvalues descending, vectors in columns."""
    vals, vecs = np.linalg.eigh(np.asarray(sym, dtype=np.float64))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def oracle_pca(X: np.ndarray, n_components: int):
    """(mean, components (C,V), explained variance) via the library solver."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, ddof=1)
    vals, vecs = oracle_eigh_desc(np.atleast_2d(cov))
    comps = vecs[:, :n_components].T
    return mean, comps, vals[:n_components]


def align_signs(reference: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Flip rows of `other` so each row points the same way as `reference`."""
    out = other.copy()
    for i in range(out.shape[0]):
        if np.dot(reference[i], out[i]) < 0:
            out[i] = -out[i]
    return out


def reconstruction_error(X: np.ndarray, mean, components) -> float:
    Z = (X - mean) @ components.T
    back = Z @ components + mean
    return float(np.sum((X - back) ** 2))


# ---------------------------------------------------------------------------
# KNN


def oracle_knn(points, labels, k: int, query, n_classes: int | None = None) -> int:
    """Brute-force sort with the documented tie rules, written independently."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    d2 = [float(np.sum((p - query) ** 2)) for p in points]
    order = sorted(range(len(points)), key=lambda i: (d2[i], i))
    votes = [0] * n_classes
    for i in order[:k]:
        votes[labels[i]] += 1
    best = max(votes)
    tied = [c for c in range(n_classes) if votes[c] == best]
    if len(tied) == 1:
        return tied[0]
    totals = [int(np.sum(labels == c)) for c in tied]
    best_total = max(totals)
    return tied[totals.index(best_total)]


# ---------------------------------------------------------------------------
# term scanning


def _is_boundary(text: str, pos: int) -> bool:
    return pos < 0 or pos >= len(text) or not text[pos].isalnum()


def oracle_scan(text: str, terms: list[str]) -> set[str]:
    """All whole-word occurrences, arbitrated longest-first left-to-right."""
    occs = []
    for term in terms:
        start = text.find(term)
        while start != -1:
            end = start + len(term)
            if _is_boundary(text, start - 1) and _is_boundary(text, end):
                occs.append((start, -(end - start), term, end))
            start = text.find(term, start + 1)
    occs.sort()
    found = set()
    cursor = 0
    claimed_start = -1
    for start, _, term, end in occs:
        if start < cursor or start == claimed_start:
            continue
        claimed_start = start
        cursor = end
        found.add(term)
    return found


def oracle_doc_freq(texts: list[str], terms: list[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for text in texts:
        for term in oracle_scan(text, terms):
            counts[term] = counts.get(term, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# metrics


def oracle_micro_f1(pred, gold) -> float:
    """Per-class tally then pooled F1; no accuracy shortcut."""
    pred = list(pred)
    gold = list(gold)
    classes = sorted(set(pred) | set(gold))
    tp = fp = fn = 0
    for c in classes:
        tp += sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        fp += sum(1 for p, g in zip(pred, gold) if p == c and g != c)
        fn += sum(1 for p, g in zip(pred, gold) if p != c and g == c)
    return tp / (tp + 0.5 * (fp + fn))


# ---------------------------------------------------------------------------
# SVM dual


def svm_dual_objective(K: np.ndarray, y: np.ndarray, alphas: np.ndarray) -> float:
    """W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij."""
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def oracle_grid_dual_max(K: np.ndarray, y: np.ndarray, c: float,
                         step: float = 0.01) -> float:
    """Exhaustive grid maximum of the 4-point dual (alpha_4 from equality)."""
    assert len(y) == 4
    grid = np.arange(0.0, c + step / 2, step)
    a1, a2, a3 = (g.reshape(-1) for g in np.meshgrid(grid, grid, grid))
    a4 = (a1 * y[0] + a2 * y[1] + a3 * y[2]) / -y[3]
    ok = (a4 >= -1e-12) & (a4 <= c + 1e-12)
    A = np.stack([a1[ok], a2[ok], a3[ok], np.clip(a4[ok], 0.0, c)], axis=1)
    AY = A * y
    values = A.sum(axis=1) - 0.5 * np.einsum("ni,ij,nj->n", AY, K, AY)
    return float(values.max())


def rbf_kernel(X: np.ndarray, Z: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((X[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


# ---------------------------------------------------------------------------
# finite differences


def central_diff_grads(loss_fn, params: dict[str, np.ndarray],
                       eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Gradient of loss_fn() w.r.t. every entry of every parameter array.

    loss_fn reads `params` by reference, so perturbations are visible to it.
    """
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_fn()
            flat[i] = orig - eps
            lo = loss_fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads[name] = g
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom
