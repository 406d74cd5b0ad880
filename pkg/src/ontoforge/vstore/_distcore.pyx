# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the vector index hot path.

``search_layer`` runs the HNSW beam search over one graph layer with C
heaps; ``gather_dot``/``dot_all`` are the batch similarity primitives.
Results match the numpy fallback in ``kernels.py`` up to float32
rounding of the accumulated dot products.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def gather_dot(const float[:, ::1] matrix, const long long[::1] ids, const float[::1] query):
    """Dot products of matrix rows selected by ``ids`` against ``query``."""
    cdef Py_ssize_t m = ids.shape[0]
    cdef Py_ssize_t dim = matrix.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=1] out = np.empty(m, dtype=np.float32)
    cdef float[::1] out_view = out
    cdef Py_ssize_t i, j
    cdef long long row
    cdef double acc
    for i in range(m):
        row = ids[i]
        acc = 0.0
        for j in range(dim):
            acc += matrix[row, j] * query[j]
        out_view[i] = <float> acc
    return out


def dot_all(const float[:, ::1] matrix, const float[::1] query):
    """Dot products of every matrix row against ``query``."""
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t dim = matrix.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=1] out = np.empty(n, dtype=np.float32)
    cdef float[::1] out_view = out
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(dim):
            acc += matrix[i, j] * query[j]
        out_view[i] = <float> acc
    return out


cdef inline double _row_dot(const float[:, ::1] matrix, long long row, const float[::1] query) noexcept:
    cdef Py_ssize_t j
    cdef double acc = 0.0
    for j in range(matrix.shape[1]):
        acc += matrix[row, j] * query[j]
    return acc


cdef inline void _heap_push(double* hd, long long* hi, int* n, double d, long long idx) noexcept:
    cdef int pos = n[0]
    cdef int parent
    cdef double td
    cdef long long ti
    hd[pos] = d
    hi[pos] = idx
    n[0] = pos + 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if hd[parent] <= hd[pos]:
            break
        td = hd[parent]; hd[parent] = hd[pos]; hd[pos] = td
        ti = hi[parent]; hi[parent] = hi[pos]; hi[pos] = ti
        pos = parent


cdef inline void _heap_pop(double* hd, long long* hi, int* n) noexcept:
    """Remove the root; the caller reads hd[0]/hi[0] beforehand."""
    cdef int size = n[0] - 1
    cdef int pos = 0
    cdef int child
    cdef double td
    cdef long long ti
    n[0] = size
    hd[0] = hd[size]
    hi[0] = hi[size]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and hd[child + 1] < hd[child]:
            child += 1
        if hd[pos] <= hd[child]:
            break
        td = hd[pos]; hd[pos] = hd[child]; hd[child] = td
        ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
        pos = child


def search_layer(const float[:, ::1] matrix,
                 const int[:, ::1] nbr,
                 const int[::1] cnt,
                 const float[::1] query,
                 const long long[::1] entry_ids,
                 int ef):
    """Beam search on one layer.

    ``nbr``/``cnt`` hold each node's neighbor ids and degree on this
    layer. Returns (distances, ids) ascending by distance, where
    distance = -cosine similarity; at most ``ef`` results.
    """
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t n_entries = entry_ids.shape[0]

    visited_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] visited = visited_arr

    # candidate min-heap: every node pushed at most once
    cand_d_arr = np.empty(n + 1, dtype=np.float64)
    cand_i_arr = np.empty(n + 1, dtype=np.int64)
    cdef double[::1] cand_d = cand_d_arr
    cdef long long[::1] cand_i = cand_i_arr
    cdef int cand_n = 0

    # best max-heap (stores negated distance), bounded by min(ef, n)
    cdef int best_cap = ef if ef < n else <int> n
    best_d_arr = np.empty(best_cap + 1, dtype=np.float64)
    best_i_arr = np.empty(best_cap + 1, dtype=np.int64)
    cdef double[::1] best_d = best_d_arr
    cdef long long[::1] best_i = best_i_arr
    cdef int best_n = 0

    cdef Py_ssize_t i, j
    cdef long long ep, node, other
    cdef int degree
    cdef double dist, ndist, worst

    for i in range(n_entries):
        ep = entry_ids[i]
        if visited[ep]:
            continue
        visited[ep] = 1
        dist = -_row_dot(matrix, ep, query)
        if best_n < ef:
            _heap_push(&cand_d[0], &cand_i[0], &cand_n, dist, ep)
            _heap_push(&best_d[0], &best_i[0], &best_n, -dist, ep)
        elif dist < -best_d[0]:
            _heap_push(&cand_d[0], &cand_i[0], &cand_n, dist, ep)
            _heap_pop(&best_d[0], &best_i[0], &best_n)
            _heap_push(&best_d[0], &best_i[0], &best_n, -dist, ep)

    while cand_n > 0:
        dist = cand_d[0]
        node = cand_i[0]
        _heap_pop(&cand_d[0], &cand_i[0], &cand_n)
        worst = -best_d[0]
        if best_n >= ef and dist > worst:
            break
        degree = cnt[node]
        for j in range(degree):
            other = nbr[node, j]
            if visited[other]:
                continue
            visited[other] = 1
            ndist = -_row_dot(matrix, other, query)
            if best_n < ef:
                _heap_push(&cand_d[0], &cand_i[0], &cand_n, ndist, other)
                _heap_push(&best_d[0], &best_i[0], &best_n, -ndist, other)
            elif ndist < -best_d[0]:
                _heap_push(&cand_d[0], &cand_i[0], &cand_n, ndist, other)
                _heap_pop(&best_d[0], &best_i[0], &best_n)
                _heap_push(&best_d[0], &best_i[0], &best_n, -ndist, other)

    out_d_arr = np.empty(best_n, dtype=np.float64)
    out_i_arr = np.empty(best_n, dtype=np.int64)
    cdef double[::1] out_d = out_d_arr
    cdef long long[::1] out_i = out_i_arr
    cdef int pos = best_n - 1
    while best_n > 0:
        out_d[pos] = -best_d[0]
        out_i[pos] = best_i[0]
        _heap_pop(&best_d[0], &best_i[0], &best_n)
        pos -= 1
    return out_d_arr, out_i_arr
