# cython: language_level=3
"""Compiled inner loops.

Every routine here has a line-for-line twin in ``_pykernels.py``. Both consume
the caller's uniform buffer in the same order, so for a given buffer the two
backends return identical results.
"""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


def reach_batch(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] probs, const int64_t[::1] roots,
                const double[::1] uniforms, int64_t[::1] members,
                int64_t[::1] offsets):
    """Sample one randomly-flipped reachable set per root.

    Returns ``(n_done, n_used)``. A set is only started when at least
    ``n_edges`` uniforms and ``n_nodes`` member slots remain.
    """
    cdef Py_ssize_t n_nodes = indptr.shape[0] - 1
    cdef int64_t n_edges = indptr[n_nodes]
    cdef Py_ssize_t n_roots = roots.shape[0]
    cdef Py_ssize_t n_unif = uniforms.shape[0]
    cdef Py_ssize_t cap = members.shape[0]
    cdef int64_t[::1] stamp = np.zeros(n_nodes, dtype=np.int64)
    cdef Py_ssize_t i, head, tail, k = 0
    cdef int64_t v, u, e
    cdef double r

    offsets[0] = 0
    tail = 0
    for i in range(n_roots):
        if n_unif - k < n_edges or cap - tail < n_nodes:
            return i, k
        v = roots[i]
        head = tail
        members[tail] = v
        tail += 1
        stamp[v] = i + 1
        while head < tail:
            v = members[head]
            head += 1
            for e in range(indptr[v], indptr[v + 1]):
                u = indices[e]
                if stamp[u] != i + 1:
                    r = uniforms[k]
                    k += 1
                    if r < probs[e]:
                        stamp[u] = i + 1
                        members[tail] = u
                        tail += 1
        offsets[i + 1] = tail
    return n_roots, k


def lda_train_sweep(const int64_t[::1] doc_of, const int64_t[::1] words,
                    int64_t[::1] z, int64_t[:, ::1] ndt, int64_t[:, ::1] ntw,
                    int64_t[::1] nt, double alpha, double beta, double vbeta,
                    const double[::1] uniforms):
    cdef Py_ssize_t n_tok = words.shape[0]
    cdef Py_ssize_t n_top = nt.shape[0]
    cdef double[::1] cum = np.empty(n_top, dtype=np.float64)
    cdef Py_ssize_t i, t
    cdef int64_t d, w, k
    cdef double total, u

    for i in range(n_tok):
        d = doc_of[i]
        w = words[i]
        k = z[i]
        ndt[d, k] -= 1
        ntw[k, w] -= 1
        nt[k] -= 1
        total = 0.0
        for t in range(n_top):
            total += (ndt[d, t] + alpha) * (ntw[t, w] + beta) / (nt[t] + vbeta)
            cum[t] = total
        u = uniforms[i] * total
        k = n_top - 1
        for t in range(n_top):
            if u < cum[t]:
                k = t
                break
        z[i] = k
        ndt[d, k] += 1
        ntw[k, w] += 1
        nt[k] += 1


def lda_infer_sweep(const int64_t[::1] words, int64_t[::1] z, int64_t[::1] ndk,
                    const double[:, ::1] phi, double alpha,
                    const double[::1] uniforms, double[::1] accum):
    """One fixed-topic Gibbs sweep over a single document.

    ``accum`` gets each token's full conditional added to it.
    """
    cdef Py_ssize_t n_tok = words.shape[0]
    cdef Py_ssize_t n_top = ndk.shape[0]
    cdef double[::1] p = np.empty(n_top, dtype=np.float64)
    cdef Py_ssize_t i, t
    cdef int64_t w, k
    cdef double total, u, run

    for i in range(n_tok):
        w = words[i]
        k = z[i]
        ndk[k] -= 1
        total = 0.0
        for t in range(n_top):
            p[t] = (ndk[t] + alpha) * phi[t, w]
            total += p[t]
        for t in range(n_top):
            accum[t] += p[t] / total
        u = uniforms[i] * total
        k = n_top - 1
        run = 0.0
        for t in range(n_top):
            run += p[t]
            if u < run:
                k = t
                break
        z[i] = k
        ndk[k] += 1
