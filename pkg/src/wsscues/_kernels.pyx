# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, sqrt, llrint
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport malloc, free
from libc.string cimport memcmp, memcpy

cnp.import_array()

NAME = "cython"


cdef inline Py_ssize_t _find(int64_t* parent, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def fh_merge(a, b, w, Py_ssize_t n, double k, Py_ssize_t min_size):
    cdef const int64_t[::1] ea = np.ascontiguousarray(a, dtype=np.int64)
    cdef const int64_t[::1] eb = np.ascontiguousarray(b, dtype=np.int64)
    cdef const double[::1] ew = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t m = ea.shape[0]
    parent_arr = np.arange(n, dtype=np.int64)
    rank_arr = np.zeros(n, dtype=np.int64)
    size_arr = np.ones(n, dtype=np.int64)
    thresh_arr = np.full(n, k, dtype=np.float64)
    cdef int64_t[::1] parent = parent_arr
    cdef int64_t[::1] rank = rank_arr
    cdef int64_t[::1] size = size_arr
    cdef double[::1] thresh = thresh_arr
    cdef Py_ssize_t e, ra, rb, t
    cdef int64_t* pp = &parent[0] if n > 0 else NULL

    with nogil:
        for e in range(m):
            ra = _find(pp, ea[e])
            rb = _find(pp, eb[e])
            if ra != rb and ew[e] <= thresh[ra] and ew[e] <= thresh[rb]:
                if rank[ra] < rank[rb]:
                    t = ra; ra = rb; rb = t
                parent[rb] = ra
                size[ra] += size[rb]
                if rank[ra] == rank[rb]:
                    rank[ra] += 1
                thresh[ra] = ew[e] + k / size[ra]
        for e in range(m):
            ra = _find(pp, ea[e])
            rb = _find(pp, eb[e])
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                if rank[ra] < rank[rb]:
                    t = ra; ra = rb; rb = t
                parent[rb] = ra
                size[ra] += size[rb]
                if rank[ra] == rank[rb]:
                    rank[ra] += 1
        for e in range(n):
            _find(pp, e)
    return parent_arr


cdef struct HashTable:
    int64_t* keys      # capacity * d
    int64_t* entries   # table_size, -1 when empty
    Py_ssize_t d
    Py_ssize_t filled
    Py_ssize_t capacity
    uint64_t mask


cdef int _ht_init(HashTable* ht, Py_ssize_t d, Py_ssize_t capacity) noexcept nogil:
    cdef uint64_t size = 1
    cdef Py_ssize_t i
    while size < <uint64_t>(2 * capacity + 2):
        size <<= 1
    ht.d = d
    ht.filled = 0
    ht.capacity = capacity
    ht.mask = size - 1
    ht.keys = <int64_t*>malloc(capacity * d * sizeof(int64_t) + 1)
    ht.entries = <int64_t*>malloc(size * sizeof(int64_t))
    if ht.keys == NULL or ht.entries == NULL:
        return -1
    for i in range(<Py_ssize_t>size):
        ht.entries[i] = -1
    return 0


cdef void _ht_free(HashTable* ht) noexcept nogil:
    free(ht.keys)
    free(ht.entries)


cdef inline uint64_t _hash(const int64_t* key, Py_ssize_t d) noexcept nogil:
    cdef uint64_t h = 0
    cdef Py_ssize_t i
    for i in range(d):
        h = (h + <uint64_t>key[i]) * 2531011ULL
    return h ^ (h >> 29)


cdef Py_ssize_t _ht_find(HashTable* ht, const int64_t* key, bint create) noexcept nogil:
    cdef uint64_t h = _hash(key, ht.d) & ht.mask
    cdef int64_t e
    while True:
        e = ht.entries[h]
        if e < 0:
            if not create:
                return -1
            memcpy(&ht.keys[ht.filled * ht.d], key, ht.d * sizeof(int64_t))
            ht.entries[h] = ht.filled
            ht.filled += 1
            return ht.filled - 1
        if memcmp(&ht.keys[e * ht.d], key, ht.d * sizeof(int64_t)) == 0:
            return e
        h = (h + 1) & ht.mask


def lattice_build(features):
    cdef const double[:, ::1] f = np.ascontiguousarray(features, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0], d = f.shape[1]
    cdef Py_ssize_t dp1 = d + 1
    cdef double inv_std = sqrt(2.0 / 3.0) * dp1
    cdef double down_factor = 1.0 / dp1

    offsets_arr = np.empty((n, dp1), dtype=np.int64)
    bary_arr = np.empty((n, dp1), dtype=np.float64)
    rank_arr = np.empty((n, dp1), dtype=np.int64)
    cdef int64_t[:, ::1] offsets = offsets_arr
    cdef double[:, ::1] bary_out = bary_arr
    cdef int64_t[:, ::1] rank_out = rank_arr

    cdef double* el = <double*>malloc(dp1 * sizeof(double))
    cdef double* rem0 = <double*>malloc(dp1 * sizeof(double))
    cdef double* bary = <double*>malloc((dp1 + 1) * sizeof(double))
    cdef double* scale = <double*>malloc(d * sizeof(double) + 1)
    cdef int64_t* rank = <int64_t*>malloc(dp1 * sizeof(int64_t))
    cdef int64_t* key = <int64_t*>malloc(dp1 * sizeof(int64_t))
    cdef int64_t* canon = <int64_t*>malloc(dp1 * dp1 * sizeof(int64_t))
    cdef HashTable ht
    if _ht_init(&ht, d, n * dp1) != 0:
        raise MemoryError()

    cdef Py_ssize_t p, i, j, r
    cdef double sm, cf, v, up, down, delta
    cdef int64_t total
    for r in range(dp1):
        for j in range(dp1):
            canon[r * dp1 + j] = r if j <= d - r else r - dp1
    for i in range(1, d + 1):
        scale[i - 1] = inv_std / sqrt((i + 1.0) * i)

    with nogil:
        for p in range(n):
            sm = 0.0
            for i in range(d, 0, -1):
                cf = f[p, i - 1] * scale[i - 1]
                el[i] = sm - i * cf
                sm = sm + cf
            el[0] = sm

            total = 0
            for i in range(dp1):
                v = el[i] * down_factor
                up = ceil(v) * dp1
                down = floor(v) * dp1
                if up - el[i] < el[i] - down:
                    rem0[i] = up
                else:
                    rem0[i] = down
            sm = 0.0
            for i in range(dp1):
                sm = sm + rem0[i]
            total = llrint(sm * down_factor)

            for i in range(dp1):
                rank[i] = 0
            for i in range(dp1):
                for j in range(i + 1, dp1):
                    if el[i] - rem0[i] < el[j] - rem0[j]:
                        rank[i] += 1
                    else:
                        rank[j] += 1

            if total > 0:
                for i in range(dp1):
                    if rank[i] >= dp1 - total:
                        rem0[i] -= dp1
                        rank[i] += total - dp1
                    else:
                        rank[i] += total
            elif total < 0:
                for i in range(dp1):
                    if rank[i] < -total:
                        rem0[i] += dp1
                        rank[i] += dp1 + total
                    else:
                        rank[i] += total

            for i in range(dp1 + 1):
                bary[i] = 0.0
            for i in range(dp1):
                delta = (el[i] - rem0[i]) * down_factor
                bary[d - rank[i]] += delta
                bary[dp1 - rank[i]] -= delta
            bary[0] += 1.0 + bary[dp1]

            for r in range(dp1):
                for i in range(d):
                    key[i] = <int64_t>rem0[i] + canon[r * dp1 + rank[i]]
                offsets[p, r] = _ht_find(&ht, key, True)
                bary_out[p, r] = bary[r]
            for i in range(dp1):
                rank_out[p, i] = rank[i]

    cdef Py_ssize_t m = ht.filled
    blur_arr = np.empty((dp1, 2, m), dtype=np.int64)
    cdef int64_t[:, :, ::1] blur = blur_arr
    cdef Py_ssize_t vtx, found
    cdef int side
    with nogil:
        for j in range(dp1):
            for vtx in range(m):
                for side in range(2):
                    for i in range(d):
                        if side == 0:
                            key[i] = ht.keys[vtx * d + i] + 1
                        else:
                            key[i] = ht.keys[vtx * d + i] - 1
                    if j < d:
                        if side == 0:
                            key[j] -= dp1
                        else:
                            key[j] += dp1
                    found = _ht_find(&ht, key, False)
                    blur[j, side, vtx] = m if found < 0 else found

    _ht_free(&ht)
    free(el); free(rem0); free(bary); free(scale); free(rank); free(key); free(canon)
    return offsets_arr, bary_arr, rank_arr, blur_arr


def lattice_filter(offsets, bary, blur, values):
    cdef const int64_t[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:, ::1] b = np.ascontiguousarray(bary, dtype=np.float64)
    cdef const int64_t[:, :, ::1] nb = np.ascontiguousarray(blur, dtype=np.int64)
    cdef const double[:, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = vals.shape[0], nv = vals.shape[1]
    cdef Py_ssize_t dp1 = off.shape[1], m = nb.shape[2]
    lat_arr = np.zeros((m + 1, nv), dtype=np.float64)
    tmp_arr = np.zeros((m + 1, nv), dtype=np.float64)
    out_arr = np.zeros((n, nv), dtype=np.float64)
    cdef double[:, ::1] lat = lat_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] swap
    cdef Py_ssize_t p, r, c, j, vtx, n1, n2
    cdef double w
    with nogil:
        for p in range(n):
            for r in range(dp1):
                w = b[p, r]
                for c in range(nv):
                    lat[off[p, r], c] += w * vals[p, c]
        for j in range(dp1):
            for vtx in range(m):
                n1 = nb[j, 0, vtx]
                n2 = nb[j, 1, vtx]
                for c in range(nv):
                    tmp[vtx, c] = 0.5 * lat[vtx, c] + 0.25 * (lat[n1, c] + lat[n2, c])
            swap = lat
            lat = tmp
            tmp = swap
        for p in range(n):
            for r in range(dp1):
                w = b[p, r]
                for c in range(nv):
                    out[p, c] += w * lat[off[p, r], c]
    return out_arr
