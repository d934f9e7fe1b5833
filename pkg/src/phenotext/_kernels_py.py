"""Pure-Python fallbacks for the hot kernels.

Mirrors the compiled module in `_kernels.pyx`; the active backend is chosen
in `_native`.  Both implementations must produce identical results, which is
asserted by the test suite and exercised by the benchmark script.
"""

from __future__ import annotations

import math


def scan_trie(text: str, children: list[dict], term_at: list[int]) -> set[int]:
    """Left-to-right maximal-munch scan over a character trie.

    A match must sit on word boundaries (the characters adjacent to it are
    non-alphanumeric or text edges).  At each candidate start the longest
    boundary-respecting term wins and consumes its span; matching resumes
    after it.  Returns the set of matched term indices.
    """
    n = len(text)
    found: set[int] = set()
    i = 0
    while i < n:
        if i > 0 and text[i - 1].isalnum():
            i += 1
            continue
        node = 0
        best_end = -1
        best_term = -1
        j = i
        while j < n:
            nxt = children[node].get(text[j])
            if nxt is None:
                break
            node = nxt
            j += 1
            t = term_at[node]
            if t >= 0 and (j == n or not text[j].isalnum()):
                best_end = j
                best_term = t
        if best_term >= 0:
            found.add(best_term)
            i = best_end
        else:
            i += 1
    return found


def jacobi_cycle(A, V, threshold: float, max_sweeps: int) -> int:
    """Cyclic Jacobi sweeps on the symmetric matrix A, in place.

    Accumulates rotations into V (so A_in == V @ A_out @ V.T at exit).
    Returns the number of sweeps performed, or -1 if the off-diagonal mass
    did not drop below `threshold` within `max_sweeps`.
    """
    n = A.shape[0]
    for sweep in range(max_sweeps + 1):
        off = _off_mass(A)
        if off <= threshold:
            return sweep
        if sweep == max_sweeps:
            return -1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    return -1


def _off_mass(A) -> float:
    n = A.shape[0]
    total = 0.0
    for p in range(n - 1):
        row = A[p, p + 1 :]
        total += float(row @ row)
    return math.sqrt(2.0 * total)
