# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree kernels; same contract as ``tfaml._pytree``."""

from libc.stdint cimport uint64_t, int64_t
from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline uint64_t _splitmix(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef struct Builder:
    const double* X
    const Py_ssize_t* y
    Py_ssize_t n_features
    Py_ssize_t max_features
    Py_ssize_t min_split
    Py_ssize_t min_leaf
    Py_ssize_t max_depth
    uint64_t rng


cdef struct Nodes:
    vector[int64_t] feature
    vector[double] threshold
    vector[int64_t] left
    vector[int64_t] right
    vector[double] value
    vector[int64_t] n_node


cdef void _sample_features(Builder* b, vector[Py_ssize_t]& perm,
                           vector[Py_ssize_t]& chosen) noexcept nogil:
    cdef Py_ssize_t i, j, tmp, d = b.n_features
    cdef Py_ssize_t k = b.max_features if b.max_features < d else d
    for i in range(d):
        perm[i] = i
    for i in range(k):
        j = i + <Py_ssize_t>(_splitmix(&b.rng) % <uint64_t>(d - i))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    chosen.clear()
    for i in range(k):
        chosen.push_back(perm[i])
    sort(chosen.begin(), chosen.end())


cdef Py_ssize_t _best_split(Builder* b, Py_ssize_t* idx, Py_ssize_t n, double total_pos,
                            vector[Py_ssize_t]& features,
                            vector[pair[double, Py_ssize_t]]& buf,
                            double* out_thr) noexcept nogil:
    cdef Py_ssize_t fi, f, i, best_f = -1
    cdef double best = -1.0, proxy, pl, ql, pr, qr, nl, nr, a, c, thr
    cdef double dn = <double>n
    cdef const double* X = b.X
    cdef Py_ssize_t d = b.n_features
    for fi in range(<Py_ssize_t>features.size()):
        f = features[fi]
        for i in range(n):
            buf[i].first = X[idx[i] * d + f]
            buf[i].second = b.y[idx[i]]
        sort(buf.begin(), buf.begin() + n)
        pl = 0.0
        for i in range(n - 1):
            pl += <double>buf[i].second
            nl = <double>(i + 1)
            if i + 1 < b.min_leaf:
                continue
            if n - (i + 1) < b.min_leaf:
                break
            a = buf[i].first
            c = buf[i + 1].first
            if not (a < c):
                continue
            nr = dn - nl
            ql = nl - pl
            pr = total_pos - pl
            qr = nr - pr
            proxy = (pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr
            if best_f < 0 or proxy > best:
                best = proxy
                best_f = f
                thr = (a + c) * 0.5
                if not (a <= thr and thr < c):
                    thr = a
                out_thr[0] = thr
    return best_f


cdef int64_t _grow(Builder* b, Nodes* nodes, Py_ssize_t* idx, Py_ssize_t n, Py_ssize_t depth,
                   vector[Py_ssize_t]& perm, vector[Py_ssize_t]& chosen,
                   vector[pair[double, Py_ssize_t]]& buf) noexcept nogil:
    cdef int64_t node = <int64_t>nodes.feature.size()
    cdef Py_ssize_t i, pos = 0, f, lo, hi, tmp
    cdef double thr = 0.0
    cdef int64_t child
    for i in range(n):
        pos += b.y[idx[i]]
    nodes.feature.push_back(-1)
    nodes.threshold.push_back(0.0)
    nodes.left.push_back(-1)
    nodes.right.push_back(-1)
    nodes.value.push_back(<double>pos / <double>n)
    nodes.n_node.push_back(n)
    if (depth >= b.max_depth or n < b.min_split or pos == 0 or pos == n
            or n < 2 * b.min_leaf):
        return node
    _sample_features(b, perm, chosen)
    f = _best_split(b, idx, n, <double>pos, chosen, buf, &thr)
    if f < 0:
        return node
    # partition: x <= thr to the front
    lo = 0
    hi = n - 1
    while lo <= hi:
        if b.X[idx[lo] * b.n_features + f] <= thr:
            lo += 1
        else:
            tmp = idx[lo]
            idx[lo] = idx[hi]
            idx[hi] = tmp
            hi -= 1
    nodes.feature[node] = f
    nodes.threshold[node] = thr
    child = _grow(b, nodes, idx, lo, depth + 1, perm, chosen, buf)
    nodes.left[node] = child
    child = _grow(b, nodes, idx + lo, n - lo, depth + 1, perm, chosen, buf)
    nodes.right[node] = child
    return node


def build_tree(X, y, sample, Py_ssize_t min_split, Py_ssize_t min_leaf,
               Py_ssize_t max_depth, Py_ssize_t max_features, seed):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const Py_ssize_t[::1] yv = np.ascontiguousarray(y, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = np.array(sample, dtype=np.intp, copy=True)
    cdef Builder b
    cdef Nodes nodes
    cdef Py_ssize_t n = idx.shape[0]
    cdef vector[Py_ssize_t] perm
    cdef vector[Py_ssize_t] chosen
    cdef vector[pair[double, Py_ssize_t]] buf
    if n == 0:
        raise ValueError("empty sample")
    b.X = &Xv[0, 0]
    b.y = &yv[0]
    b.n_features = Xv.shape[1]
    b.max_features = max_features
    b.min_split = min_split
    b.min_leaf = min_leaf
    b.max_depth = max_depth
    b.rng = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    perm.resize(b.n_features)
    buf.resize(n)
    with nogil:
        _grow(&b, &nodes, &idx[0], n, 0, perm, chosen, buf)
    m = nodes.feature.size()
    feature = np.empty(m, dtype=np.int64)
    threshold = np.empty(m, dtype=np.float64)
    left = np.empty(m, dtype=np.int64)
    right = np.empty(m, dtype=np.int64)
    value = np.empty(m, dtype=np.float64)
    n_node = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] fv = feature, lv = left, rv = right, nv = n_node
    cdef double[::1] tv = threshold, vv = value
    cdef size_t i
    for i in range(m):
        fv[i] = nodes.feature[i]
        tv[i] = nodes.threshold[i]
        lv[i] = nodes.left[i]
        rv[i] = nodes.right[i]
        vv[i] = nodes.value[i]
        nv[i] = nodes.n_node[i]
    return feature, threshold, left, right, value, n_node


def predict_tree(const int64_t[::1] feature, const double[::1] threshold,
                 const int64_t[::1] left, const int64_t[::1] right,
                 const double[::1] value, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t r, n = Xv.shape[0]
    cdef int64_t node
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for r in range(n):
            node = 0
            while feature[node] >= 0:
                if Xv[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            ov[r] = value[node]
    return out
