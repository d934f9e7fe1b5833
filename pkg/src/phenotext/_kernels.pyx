# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: the gazetteer term scanner and Jacobi eigen-sweeps.

Behavior must match `_kernels_py` exactly; the pure versions are the
reference and the fallback.
"""

from libc.math cimport sqrt, fabs

from cpython.unicode cimport Py_UNICODE_ISALNUM


cdef inline int _child(int node, unsigned int ch,
                       const int[::1] first_edge,
                       const unsigned int[::1] edge_char,
                       const int[::1] edge_target) nogil:
    cdef int lo = first_edge[node]
    cdef int hi = first_edge[node + 1]
    cdef int mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if edge_char[mid] < ch:
            lo = mid + 1
        else:
            hi = mid
    if lo < first_edge[node + 1] and edge_char[lo] == ch:
        return edge_target[lo]
    return -1


def scan_flat(str text,
              const int[::1] first_edge,
              const unsigned int[::1] edge_char,
              const int[::1] edge_target,
              const int[::1] term_at):
    """Maximal-munch scan against a flattened trie (see ScanAutomaton)."""
    cdef Py_ssize_t n = len(text)
    cdef Py_ssize_t i = 0, j, best_end
    cdef int node, best_term, t, nxt
    cdef Py_UCS4 ch
    found = set()
    while i < n:
        if i > 0 and Py_UNICODE_ISALNUM(<Py_UCS4> text[i - 1]):
            i += 1
            continue
        node = 0
        best_end = -1
        best_term = -1
        j = i
        while j < n:
            ch = text[j]
            nxt = _child(node, <unsigned int> ch, first_edge, edge_char, edge_target)
            if nxt < 0:
                break
            node = nxt
            j += 1
            t = term_at[node]
            if t >= 0 and (j == n or not Py_UNICODE_ISALNUM(<Py_UCS4> text[j])):
                best_end = j
                best_term = t
        if best_term >= 0:
            found.add(best_term)
            i = best_end
        else:
            i += 1
    return found


def jacobi_cycle(double[:, ::1] A, double[:, ::1] V, double threshold, int max_sweeps):
    """Cyclic Jacobi sweeps in place; returns sweeps used or -1 (no convergence)."""
    cdef int n = A.shape[0]
    cdef int sweep, p, q, i
    cdef double apq, tau, t, c, s, off, ap, aq

    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        off = sqrt(2.0 * off)
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
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for i in range(n):
                    ap = A[i, p]
                    aq = A[i, q]
                    A[i, p] = c * ap - s * aq
                    A[i, q] = s * ap + c * aq
                for i in range(n):
                    ap = A[p, i]
                    aq = A[q, i]
                    A[p, i] = c * ap - s * aq
                    A[q, i] = s * ap + c * aq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for i in range(n):
                    ap = V[i, p]
                    aq = V[i, q]
                    V[i, p] = c * ap - s * aq
                    V[i, q] = s * ap + c * aq
    return -1
