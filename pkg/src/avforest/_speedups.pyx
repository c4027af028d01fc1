# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: the fast twin of ``_kernels_py``.

Same algorithms, same RNG consumption, same status codes; the test suite
checks bit-identical output of the two backends.  See _kernels_py.py for
the conventions (slot-encoded forests, burn times, self-loop rules).
"""

import numpy as np

BACKEND = "cython"

OK = 0
WAVE_VIOLATION = 1
RELABELED = 2

cdef enum:
    INTERNAL = 0
    BOUNDARY = 1
    SELF = 2
    C_OK = 0
    C_WAVE_VIOLATION = 1
    C_RELABELED = 2

ctypedef long long i64
ctypedef unsigned long long u64


cdef inline u64 _rotl(u64 x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline u64 _next64(u64* s) nogil:
    # xoshiro256++
    cdef u64 result = _rotl(s[0] + s[3], 23) + s[0]
    cdef u64 t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


cdef inline i64 _draw_below(u64* s, i64 n) nogil:
    # uniform in [0, n) by mask-and-reject; n == 1 consumes nothing
    cdef u64 mask, r
    cdef i64 m
    if n <= 1:
        return 0
    m = n - 1
    mask = 0
    while m > 0:
        mask = (mask << 1) | 1
        m >>= 1
    while True:
        r = _next64(s) & mask
        if <i64>r < n:
            return <i64>r


def relax(const i64[::1] ptr, const signed char[::1] kind, const int[::1] target,
          i64[::1] h, i64[::1] topplings):
    cdef Py_ssize_t n = h.shape[0]
    cdef i64 exited = 0
    cdef i64[::1] stack = np.empty(n, dtype=np.int64)
    cdef unsigned char[::1] on_stack = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t top = 0
    cdef i64 v, u, d, s
    cdef signed char k
    for v in range(n):
        if h[v] >= ptr[v + 1] - ptr[v]:
            stack[top] = v
            top += 1
            on_stack[v] = 1
    with nogil:
        while top > 0:
            top -= 1
            v = stack[top]
            on_stack[v] = 0
            d = ptr[v + 1] - ptr[v]
            while h[v] >= d:
                h[v] -= d
                topplings[v] += 1
                for s in range(ptr[v], ptr[v + 1]):
                    k = kind[s]
                    if k == INTERNAL:
                        u = target[s]
                        h[u] += 1
                        if h[u] >= ptr[u + 1] - ptr[u] and not on_stack[u]:
                            on_stack[u] = 1
                            stack[top] = u
                            top += 1
                    elif k == BOUNDARY:
                        exited += 1
                    else:
                        h[v] += 1
    return exited


def burn(const i64[::1] ptr, const signed char[::1] kind, const int[::1] target,
         const i64[::1] h):
    cdef Py_ssize_t n = h.shape[0]
    time_arr = np.full(n, -1, dtype=np.int64)
    parent_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] time = time_arr
    cdef i64[::1] parent = parent_arr
    cdef i64[::1] unburnt = np.empty(n, dtype=np.int64)
    cdef unsigned char[::1] queued = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] frontier = np.empty(n, dtype=np.int64)
    cdef i64[::1] nxt = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t fsize = 0, nsize, i
    cdef i64 v, u, s, t, r, count, burnt_total = 0
    with nogil:
        for v in range(n):
            unburnt[v] = ptr[v + 1] - ptr[v]
            for s in range(ptr[v], ptr[v + 1]):
                if kind[s] == BOUNDARY:
                    unburnt[v] -= 1
        for v in range(n):
            if h[v] >= unburnt[v]:
                frontier[fsize] = v
                fsize += 1
                queued[v] = 1
        t = 1
        while fsize > 0:
            for i in range(fsize):
                v = frontier[i]
                time[v] = t
                r = h[v] - unburnt[v] + 1
                count = 0
                for s in range(ptr[v], ptr[v + 1]):
                    if (kind[s] == BOUNDARY and t == 1) or (
                            kind[s] == INTERNAL and time[target[s]] == t - 1):
                        count += 1
                        if count == r:
                            parent[v] = s
                            break
            burnt_total += fsize
            nsize = 0
            for i in range(fsize):
                v = frontier[i]
                for s in range(ptr[v], ptr[v + 1]):
                    if kind[s] == INTERNAL:
                        u = target[s]
                        if time[u] == -1:
                            unburnt[u] -= 1
                            if h[u] >= unburnt[u] and not queued[u]:
                                queued[u] = 1
                                nxt[nsize] = u
                                nsize += 1
            for i in range(nsize):
                frontier[i] = nxt[i]
            fsize = nsize
            t += 1
    return time_arr, parent_arr, burnt_total == n


def forest_depths(const i64[::1] ptr, const signed char[::1] kind,
                  const int[::1] target, const i64[::1] parent):
    cdef Py_ssize_t n = parent.shape[0]
    t_arr = np.zeros(n, dtype=np.int64)
    cdef i64[::1] t = t_arr
    cdef unsigned char[::1] visiting = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] chain = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t clen, j
    cdef i64 v0, v, s, base
    cdef signed char k
    cdef bint ok = True
    with nogil:
        for v0 in range(n):
            if t[v0] or not ok:
                continue
            clen = 0
            v = v0
            while True:
                if t[v]:
                    base = t[v]
                    break
                if visiting[v]:
                    ok = False
                    break
                s = parent[v]
                if s < ptr[v] or s >= ptr[v + 1]:
                    ok = False
                    break
                k = kind[s]
                if k == SELF:
                    ok = False
                    break
                visiting[v] = 1
                chain[clen] = v
                clen += 1
                if k == BOUNDARY:
                    base = 0
                    break
                v = target[s]
            if not ok:
                break
            for j in range(clen - 1, -1, -1):
                base += 1
                t[chain[j]] = base
                visiting[chain[j]] = 0
    return t_arr, ok


def forest_roots(const i64[::1] ptr, const signed char[::1] kind,
                 const int[::1] target, const i64[::1] parent):
    cdef Py_ssize_t n = parent.shape[0]
    root_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] root = root_arr
    cdef i64[::1] chain = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t clen, j
    cdef i64 v0, v, s, r
    with nogil:
        for v0 in range(n):
            if root[v0] >= 0:
                continue
            clen = 0
            v = v0
            while True:
                if root[v] >= 0:
                    r = root[v]
                    break
                s = parent[v]
                chain[clen] = v
                clen += 1
                if kind[s] == BOUNDARY:
                    r = target[s]
                    break
                v = target[s]
            for j in range(clen):
                root[chain[j]] = r
    return root_arr


def forest_heights(const i64[::1] ptr, const signed char[::1] kind,
                   const int[::1] target, const i64[::1] parent, const i64[::1] t):
    cdef Py_ssize_t n = parent.shape[0]
    h_arr = np.zeros(n, dtype=np.int64)
    cdef i64[::1] h = h_arr
    cdef i64 v, tv, d, b, rank, ps, s, ft
    cdef signed char k
    with nogil:
        for v in range(n):
            tv = t[v]
            d = ptr[v + 1] - ptr[v]
            b = 0
            rank = 0
            ps = parent[v]
            for s in range(ptr[v], ptr[v + 1]):
                k = kind[s]
                if k == BOUNDARY:
                    ft = 0
                elif k == INTERNAL:
                    ft = t[target[s]]
                else:
                    continue
                if ft < tv:
                    b += 1
                    if ft == tv - 1 and s <= ps:
                        rank += 1
            h[v] = d - b + rank - 1
    return h_arr


def wilson_forest(const i64[::1] ptr, const signed char[::1] kind,
                  const int[::1] target, u64[::1] state, const i64[::1] order):
    cdef Py_ssize_t n = ptr.shape[0] - 1
    parent_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] parent = parent_arr
    cdef unsigned char[::1] in_forest = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] nxt = np.full(n, -1, dtype=np.int64)
    cdef u64 s0[4]
    cdef Py_ssize_t i
    cdef i64 start, v, u, d, s
    for i in range(4):
        s0[i] = state[i]
    with nogil:
        for i in range(order.shape[0]):
            start = order[i]
            if in_forest[start]:
                continue
            v = start
            while True:
                d = ptr[v + 1] - ptr[v]
                while True:
                    s = ptr[v] + _draw_below(s0, d)
                    if kind[s] != SELF:
                        break
                nxt[v] = s
                if kind[s] == BOUNDARY:
                    break
                u = target[s]
                if in_forest[u]:
                    break
                v = u
            v = start
            while not in_forest[v]:
                in_forest[v] = 1
                s = nxt[v]
                parent[v] = s
                if kind[s] == BOUNDARY:
                    break
                v = target[s]
    for i in range(4):
        state[i] = s0[i]
    return parent_arr


def permutation_labels(const i64[::1] ptr, const signed char[::1] kind,
                       const int[::1] target, const int[::1] boundary_site,
                       i64[::1] h, const i64[::1] sigma):
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t nb = boundary_site.shape[0]
    labels_arr = np.full(n, -1, dtype=np.int64)
    sizes_arr = np.zeros(nb, dtype=np.int64)
    cdef i64[::1] labels = labels_arr
    cdef i64[::1] sizes = sizes_arr
    cdef i64[::1] topplings = np.zeros(n, dtype=np.int64)
    cdef i64[::1] stack = np.empty(n, dtype=np.int64)
    cdef i64[::1] toppled = np.empty(n, dtype=np.int64)
    cdef unsigned char[::1] on_stack = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t pos, top, ntop, j
    cdef i64 b, v0, v, u, d, s
    cdef int status = C_OK
    with nogil:
        for pos in range(nb):
            b = sigma[pos]
            v0 = boundary_site[b]
            h[v0] += 1
            top = 0
            ntop = 0
            if h[v0] >= ptr[v0 + 1] - ptr[v0]:
                stack[top] = v0
                top += 1
                on_stack[v0] = 1
            while top > 0:
                top -= 1
                v = stack[top]
                on_stack[v] = 0
                d = ptr[v + 1] - ptr[v]
                while h[v] >= d:
                    h[v] -= d
                    topplings[v] += 1
                    if topplings[v] == 1:
                        toppled[ntop] = v
                        ntop += 1
                    else:
                        status = C_WAVE_VIOLATION
                        break
                    for s in range(ptr[v], ptr[v + 1]):
                        if kind[s] == INTERNAL:
                            u = target[s]
                            h[u] += 1
                            if h[u] >= ptr[u + 1] - ptr[u] and not on_stack[u]:
                                on_stack[u] = 1
                                stack[top] = u
                                top += 1
                        elif kind[s] == SELF:
                            h[v] += 1
                if status != C_OK:
                    break
            if status != C_OK:
                break
            for j in range(ntop):
                v = toppled[j]
                if labels[v] != -1:
                    status = C_RELABELED
                    break
                labels[v] = b
                topplings[v] = 0
            if status != C_OK:
                break
            sizes[b] = ntop
    return labels_arr, sizes_arr, status
