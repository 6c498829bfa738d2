# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled versions of the hot kernels; see ``_fallback`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs
from libcpp.vector cimport vector
from libcpp.unordered_map cimport unordered_map
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort
from cython.operator cimport dereference as deref, preincrement as inc

cnp.import_array()

NAME = "compiled"

SUCCESS, CERTIFICATE, EXHAUSTED = 0, 1, 2
cdef double CERT_MARGIN = 1e-12


def cancel_groups(const cnp.int64_t[::1] ids, const cnp.int64_t[::1] group_ptr, double[::1] delta,
                  double[::1] flow, long long base, long long e2_base, long long K, long long npairs):
    cdef Py_ssize_t gi, lo, hi, ip, jn
    cdef long long u, v, cu, lu, lv, a, b, e
    cdef double x
    for gi in range(group_ptr.shape[0] - 1):
        lo = group_ptr[gi]
        hi = group_ptr[gi + 1]
        ip = lo
        jn = lo
        while True:
            while ip < hi and delta[ids[ip]] <= 0.0:
                ip += 1
            while jn < hi and delta[ids[jn]] >= 0.0:
                jn += 1
            if ip >= hi or jn >= hi:
                break
            u = ids[ip]
            v = ids[jn]
            x = delta[u] if delta[u] < -delta[v] else -delta[v]
            cu = (u - base) // K
            lu = (u - base) % K
            lv = (v - base) % K
            if lu < lv:
                a = lu
                b = lv
            else:
                a = lv
                b = lu
            e = e2_base + cu * npairs + a * (2 * K - a - 1) // 2 + (b - a - 1)
            if v < u:
                flow[e] += x
            else:
                flow[e] -= x
            delta[u] -= x
            delta[v] += x


cdef inline double _csr_dot_row(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                                const double[::1] x, Py_ssize_t row) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t t
    for t in range(indptr[row], indptr[row + 1]):
        acc += data[t] * x[indices[t]]
    return acc


def mwu_run(R, RT, tails_in, heads_in, w_in, target, double eta, double tol, long max_rounds):
    cdef const int[::1] rp = R.indptr.astype(np.int32, copy=False)
    cdef const int[::1] ri = R.indices.astype(np.int32, copy=False)
    cdef const double[::1] rd = R.data.astype(np.float64, copy=False)
    cdef const int[::1] tp = RT.indptr.astype(np.int32, copy=False)
    cdef const int[::1] ti = RT.indices.astype(np.int32, copy=False)
    cdef const double[::1] td = RT.data.astype(np.float64, copy=False)
    cdef const cnp.int64_t[::1] tails = np.ascontiguousarray(tails_in, dtype=np.int64)
    cdef const cnp.int64_t[::1] heads = np.ascontiguousarray(heads_in, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const double[::1] tgt = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t rows = R.shape[0], nv = R.shape[1], m = tails.shape[0]
    g_arr = np.zeros(m)
    gacc_arr = np.zeros(m)
    ysum_arr = np.zeros(rows)
    y_arr = np.zeros(rows)
    v1_arr = np.zeros(nv)
    v2_arr = np.zeros(nv)
    cdef double[::1] g = g_arr, gacc = gacc_arr, ysum = ysum_arr, y = y_arr, v1 = v1_arr, v2 = v2_arr
    cdef double zmax, z, wp, wm, total, res, r, yb, gmax, val, x
    cdef Py_ssize_t i, row
    cdef long long h
    cdef long rnd
    with nogil:
        for rnd in range(max_rounds + 1):
            zmax = 0.0
            for i in range(m):
                z = fabs(eta * gacc[i])
                if z > zmax:
                    zmax = z
            total = 0.0
            for i in range(m):
                z = eta * gacc[i]
                wp = exp(-z - zmax)
                wm = exp(z - zmax)
                g[i] = wp - wm
                total += wp + wm
            for i in range(nv):
                v1[i] = 0.0
                v2[i] = 0.0
            for i in range(m):
                g[i] /= total
                x = w[i] * g[i]
                v1[tails[i]] += x
            for i in range(m):
                h = heads[i]
                if h >= 0:
                    v2[h] += w[i] * g[i]
            for i in range(nv):
                v1[i] = v1[i] - v2[i]
            res = 0.0
            for row in range(rows):
                r = _csr_dot_row(rp, ri, rd, v1, row) - tgt[row]
                y[row] = 1.0 if r >= 0.0 else -1.0
                res += fabs(r)
            if res <= tol:
                with gil:
                    return SUCCESS, g_arr, rnd, ysum_arr, gacc_arr
            if rnd == max_rounds:
                break
            yb = 0.0
            for row in range(rows):
                ysum[row] += y[row]
                yb += ysum[row] * tgt[row]
            for i in range(nv):
                v2[i] = _csr_dot_row(tp, ti, td, y, i)
            gmax = 0.0
            for i in range(m):
                h = heads[i]
                val = v2[tails[i]] - (v2[h] if h >= 0 else 0.0)
                val = gacc[i] + w[i] * val
                gacc[i] = val
                if fabs(val) > gmax:
                    gmax = fabs(val)
            if yb + gmax < -CERT_MARGIN * (fabs(yb) + gmax):
                with gil:
                    return CERTIFICATE, g_arr, rnd + 1, ysum_arr, gacc_arr
    return EXHAUSTED, g_arr, max_rounds, ysum_arr, gacc_arr


ctypedef long long i64
ctypedef unordered_map[i64, double] Row
ctypedef pair[i64, double] Entry


cdef inline void _add(vector[Row]& adj, long long u, long long v, double x):
    cdef double val = 0.0
    cdef Row.iterator it = adj[u].find(v)
    if it != adj[u].end():
        val = deref(it).second
    val += x
    if val == 0.0:
        adj[u].erase(v)
        adj[v].erase(u)
    else:
        adj[u][v] = val
        adj[v][u] = -val


cdef inline double _get(vector[Row]& adj, long long u, long long v):
    cdef Row.iterator it = adj[u].find(v)
    if it == adj[u].end():
        return 0.0
    return deref(it).second


def cancel_sweep(const cnp.int64_t[::1] tails, const cnp.int64_t[::1] heads, const double[::1] values,
                 const cnp.int64_t[::1] order, long long n, double tau):
    cdef Py_ssize_t V = 0, t, k, i, j
    for t in range(tails.shape[0]):
        if tails[t] + 1 > V:
            V = tails[t] + 1
        if heads[t] + 1 > V:
            V = heads[t] + 1
    for t in range(order.shape[0]):
        if order[t] + 1 > V:
            V = order[t] + 1
    cdef vector[Row] adj = vector[Row](V)
    cdef vector[long long] ins, outs
    cdef Row.iterator it
    cdef long long u, v, w
    cdef double x, a
    for t in range(tails.shape[0]):
        if fabs(values[t]) > tau:
            _add(adj, tails[t], heads[t], values[t])
    for k in range(order.shape[0]):
        u = order[k]
        ins.clear()
        outs.clear()
        it = adj[u].begin()
        while it != adj[u].end():
            a = deref(it).second
            if a < -tau:
                ins.push_back(deref(it).first)
            elif a > tau:
                outs.push_back(deref(it).first)
            inc(it)
        sort(ins.begin(), ins.end())
        sort(outs.begin(), outs.end())
        i = 0
        j = 0
        while i < <Py_ssize_t>ins.size() and j < <Py_ssize_t>outs.size():
            v = ins[i]
            w = outs[j]
            a = -_get(adj, u, v)
            x = _get(adj, u, w)
            if a < x:
                x = a
            _add(adj, v, u, -x)
            _add(adj, u, w, -x)
            _add(adj, v, w, x)
            if -_get(adj, u, v) <= tau:
                i += 1
            if _get(adj, u, w) <= tau:
                j += 1
    src, dst, amt = [], [], []
    cdef vector[Entry] row
    cdef Py_ssize_t r
    for u in range(min(n, V)):
        row.clear()
        it = adj[u].begin()
        while it != adj[u].end():
            if deref(it).first < n and deref(it).second > 0:
                row.push_back(Entry(deref(it).first, deref(it).second))
            inc(it)
        sort(row.begin(), row.end())
        for r in range(<Py_ssize_t>row.size()):
            src.append(u)
            dst.append(row[r].first)
            amt.append(row[r].second)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(amt, dtype=np.float64)
