# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Mirrors ``_pykernels`` operation for operation: same Philox4x32-10 keyed
streams, same Box-Muller map, same Euler/reflection arithmetic.  Replicas
(streams for the single/pair kernels, whole networks for the network
kernels) are independent and are distributed with OpenMP; the output does
not depend on the thread count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport cos, exp, fabs, floor, log, sin, sqrt
from libc.stdint cimport int64_t, uint32_t, uint64_t

cnp.import_array()

cdef double SQRT2 = 1.4142135623730951
cdef double INV_SQRT2 = 1.0 / 1.4142135623730951
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double FIX_SCALE = 1125899906842624.0
cdef double FIX_INV = 1.0 / 1125899906842624.0


cdef struct Model:
    double v_l, v_e, g_l, gamma, a, s2a
    int kind
    double c0, c1, c2, c3


cdef Model _unpack(double[::1] m):
    cdef Model out
    out.v_l = m[0]
    out.v_e = m[1]
    out.g_l = m[2]
    out.gamma = m[3]
    out.a = m[4]
    out.s2a = SQRT2 * m[4]
    out.kind = <int>m[5]
    out.c0 = m[6]
    out.c1 = m[7]
    out.c2 = m[8]
    out.c3 = m[9]
    return out


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(10):
        p0 = 0xD2511F53ULL * <uint64_t>c0
        p1 = 0xCD9E8D57ULL * <uint64_t>c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + <uint32_t>0x9E3779B9U
        k1 = k1 + <uint32_t>0xBB67AE85U
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


cdef inline void _normal_pair(uint64_t seed, uint64_t stream, uint32_t lane, uint64_t block,
                              double* z0, double* z1) noexcept nogil:
    cdef uint32_t c[4]
    cdef uint64_t a, b
    cdef double u1, u2, r, th
    c[0] = <uint32_t>(block & 0xFFFFFFFFULL)
    c[1] = <uint32_t>((block >> 32) & 0xFFFFULL) | (lane << 16)
    c[2] = <uint32_t>(stream & 0xFFFFFFFFULL)
    c[3] = <uint32_t>(stream >> 32)
    _philox(c, <uint32_t>(seed & 0xFFFFFFFFULL), <uint32_t>(seed >> 32))
    a = ((<uint64_t>(c[0] >> 5)) << 26) | <uint64_t>(c[1] >> 6)
    b = ((<uint64_t>(c[2] >> 5)) << 26) | <uint64_t>(c[3] >> 6)
    u1 = 1.0 - <double>a * INV_2_53
    u2 = <double>b * INV_2_53
    r = sqrt(-2.0 * log(u1))
    th = TWO_PI * u2
    z0[0] = r * cos(th)
    z1[0] = r * sin(th)


cdef inline double _cond(const Model* m, double v) noexcept nogil:
    cdef double x
    if m.kind == 0:
        return m.c0
    if m.kind == 1:
        return m.c0 + m.c1 / (1.0 + exp(-m.c2 * (v - m.c3)))
    x = m.c0 * v + m.c1
    return x if x > m.c2 else m.c2


cdef inline void _step(const Model* m, double* v, double* g, double dt, double dW,
                       double extra, bint has_extra) noexcept nogil:
    cdef double vv = v[0], gg = g[0]
    cdef double dv = m.g_l * (m.v_l - vv) + gg * (m.v_e - vv)
    cdef double Gv = _cond(m, vv)
    cdef double dg, vn
    if has_extra:
        Gv = Gv + extra
    dg = m.gamma * (Gv - gg)
    vn = vv + dv * dt
    if vn < m.v_l:
        vn = m.v_l
    if vn > m.v_e:
        vn = m.v_e
    v[0] = vn
    g[0] = fabs(gg + dg * dt + m.s2a * dW)


cdef inline double _beta(int kind, double s, double xi) noexcept nogil:
    cdef double h, t, w
    if kind == 0:
        return 0.0
    h = 0.5 * xi
    t = (s - h) / h
    if t < 0.0:
        t = 0.0
    if t > 1.0:
        t = 1.0
    w = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    if w > 1.0:  # rounding just below t = 1
        w = 1.0
    if kind == 2:
        return w * INV_SQRT2
    return w


cdef inline void _pair_step(const Model* m, double* v, double* g, double* vp, double* gp,
                            double dt, double dB, double dBp, int kind, double xi,
                            double e1, double e2, bint has_extra) noexcept nogil:
    cdef double beta = _beta(kind, fabs(g[0] - gp[0]), xi)
    cdef double alpha = sqrt(1.0 - beta * beta)
    cdef double w1 = alpha * dB + beta * dBp
    cdef double w2 = alpha * dB - beta * dBp
    _step(m, v, g, dt, w1, e1, has_extra)
    _step(m, vp, gp, dt, w2, e2, has_extra)


cdef inline double _sigmoid(const double* h1, double v) noexcept nogil:
    return 1.0 / (1.0 + exp(-h1[2] * (v - h1[3])))


cdef inline int64_t _fix(double s) noexcept nogil:
    return <int64_t>floor(s * FIX_SCALE + 0.5)


def run_single(double[::1] model, v0, g0, uint64_t seed, streams, Py_ssize_t n_steps,
               double dt, Py_ssize_t stride, int threads=1):
    cdef Model m = _unpack(model)
    cdef double[::1] v = np.array(v0, dtype=np.float64).ravel()
    cdef double[::1] g = np.array(g0, dtype=np.float64).ravel()
    cdef const uint64_t[::1] st = np.ascontiguousarray(streams, dtype=np.uint64).ravel()
    cdef Py_ssize_t n = v.shape[0], n_snap = n_steps // stride + 1
    vs_arr = np.empty((n_snap, n))
    gs_arr = np.empty((n_snap, n))
    cdef double[:, ::1] vs = vs_arr
    cdef double[:, ::1] gs = gs_arr
    cdef double sqdt = sqrt(dt)
    cdef Py_ssize_t i, k, j, left
    cdef double vv, gg, z0, z1
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        vv = v[i]
        gg = g[i]
        vs[0, i] = vv
        gs[0, i] = gg
        z0 = 0.0
        z1 = 0.0
        left = stride
        j = 0
        for k in range(n_steps):
            if k & 1 == 0:
                _normal_pair(seed, st[i], 0, <uint64_t>(k >> 1), &z0, &z1)
                _step(&m, &vv, &gg, dt, sqdt * z0, 0.0, False)
            else:
                _step(&m, &vv, &gg, dt, sqdt * z1, 0.0, False)
            left = left - 1
            if left == 0:
                left = stride
                j = j + 1
                vs[j, i] = vv
                gs[j, i] = gg
    return vs_arr, gs_arr


def run_pair(double[::1] model, v0, g0, vp0, gp0, uint64_t seed, streams, Py_ssize_t n_steps,
             double dt, Py_ssize_t stride, int kind, double xi, int threads=1):
    cdef Model m = _unpack(model)
    cdef double[::1] v = np.array(v0, dtype=np.float64).ravel()
    cdef double[::1] g = np.array(g0, dtype=np.float64).ravel()
    cdef double[::1] vp = np.array(vp0, dtype=np.float64).ravel()
    cdef double[::1] gp = np.array(gp0, dtype=np.float64).ravel()
    cdef const uint64_t[::1] st = np.ascontiguousarray(streams, dtype=np.uint64).ravel()
    cdef Py_ssize_t n = v.shape[0], n_snap = n_steps // stride + 1
    out = [np.empty((n_snap, n)) for _ in range(4)]
    cdef double[:, ::1] o1 = out[0]
    cdef double[:, ::1] o2 = out[1]
    cdef double[:, ::1] o3 = out[2]
    cdef double[:, ::1] o4 = out[3]
    cdef double sqdt = sqrt(dt)
    cdef Py_ssize_t i, k, j, left
    cdef double a1, b1, a2, b2, z0, z1, y0, y1, dB, dBp
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        a1 = v[i]
        b1 = g[i]
        a2 = vp[i]
        b2 = gp[i]
        o1[0, i] = a1
        o2[0, i] = b1
        o3[0, i] = a2
        o4[0, i] = b2
        z0 = 0.0
        z1 = 0.0
        y0 = 0.0
        y1 = 0.0
        left = stride
        j = 0
        for k in range(n_steps):
            if k & 1 == 0:
                _normal_pair(seed, st[i], 0, <uint64_t>(k >> 1), &z0, &z1)
                _normal_pair(seed, st[i], 1, <uint64_t>(k >> 1), &y0, &y1)
                dB = sqdt * z0
                dBp = sqdt * y0
            else:
                dB = sqdt * z1
                dBp = sqdt * y1
            _pair_step(&m, &a1, &b1, &a2, &b2, dt, dB, dBp, kind, xi, 0.0, 0.0, False)
            left = left - 1
            if left == 0:
                left = stride
                j = j + 1
                o1[j, i] = a1
                o2[j, i] = b1
                o3[j, i] = a2
                o4[j, i] = b2
    return tuple(out)


cdef void _field(const double* h1, const double* v, double* s, int64_t* q, double* out,
                 Py_ssize_t n, bint self_inclusive) noexcept nogil:
    cdef Py_ssize_t j
    cdef int64_t S = 0
    cdef double mean
    for j in range(n):
        s[j] = _sigmoid(h1, v[j])
        q[j] = _fix(s[j])
        S = S + q[j]
    for j in range(n):
        if self_inclusive:
            mean = <double>S * FIX_INV / n
        else:
            mean = (<double>(S - q[j]) * FIX_INV) / (n - 1)
        out[j] = h1[0] + h1[1] * s[j] * mean


def run_network(double[::1] model, double[::1] h1, v0, g0, uint64_t seed, streams,
                Py_ssize_t n_steps, double dt, Py_ssize_t stride, bint self_inclusive,
                int threads=1):
    cdef Model m = _unpack(model)
    cdef double[:, ::1] v = np.array(v0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] g = np.array(g0, dtype=np.float64, ndmin=2, order="C")
    cdef const uint64_t[:, ::1] st = np.ascontiguousarray(np.atleast_2d(streams), dtype=np.uint64)
    cdef Py_ssize_t R = v.shape[0], N = v.shape[1], n_snap = n_steps // stride + 1
    vs_arr = np.empty((n_snap, R, N))
    gs_arr = np.empty((n_snap, R, N))
    cdef double[:, :, ::1] vs = vs_arr
    cdef double[:, :, ::1] gs = gs_arr
    cdef double[:, ::1] s = np.empty((R, N))
    cdef double[:, ::1] f = np.empty((R, N))
    cdef double[:, ::1] z0 = np.zeros((R, N))
    cdef double[:, ::1] z1 = np.zeros((R, N))
    cdef int64_t[:, ::1] q = np.empty((R, N), dtype=np.int64)
    cdef double sqdt = sqrt(dt)
    cdef Py_ssize_t r, k, i, j
    vs[0, :, :] = v
    gs[0, :, :] = g
    for r in prange(R, nogil=True, num_threads=threads, schedule="static"):
        for k in range(n_steps):
            _field(&h1[0], &v[r, 0], &s[r, 0], &q[r, 0], &f[r, 0], N, self_inclusive)
            for i in range(N):
                if k & 1 == 0:
                    _normal_pair(seed, st[r, i], 0, <uint64_t>(k >> 1), &z0[r, i], &z1[r, i])
                    _step(&m, &v[r, i], &g[r, i], dt, sqdt * z0[r, i], f[r, i], True)
                else:
                    _step(&m, &v[r, i], &g[r, i], dt, sqdt * z1[r, i], f[r, i], True)
            if (k + 1) % stride == 0:
                j = (k + 1) // stride
                for i in range(N):
                    vs[j, r, i] = v[r, i]
                    gs[j, r, i] = g[r, i]
    return vs_arr, gs_arr


def run_network_pair(double[::1] model, double[::1] h1, v0, g0, vp0, gp0, uint64_t seed, streams,
                     Py_ssize_t n_steps, double dt, Py_ssize_t stride, int kind, double xi,
                     int threads=1):
    cdef Model m = _unpack(model)
    cdef double[:, ::1] v = np.array(v0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] g = np.array(g0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] vp = np.array(vp0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] gp = np.array(gp0, dtype=np.float64, ndmin=2, order="C")
    cdef const uint64_t[:, ::1] st = np.ascontiguousarray(np.atleast_2d(streams), dtype=np.uint64)
    cdef Py_ssize_t R = v.shape[0], N = v.shape[1], n_snap = n_steps // stride + 1
    out = [np.empty((n_snap, R, N)) for _ in range(4)]
    cdef double[:, :, ::1] o1 = out[0]
    cdef double[:, :, ::1] o2 = out[1]
    cdef double[:, :, ::1] o3 = out[2]
    cdef double[:, :, ::1] o4 = out[3]
    cdef double[:, ::1] s = np.empty((R, N))
    cdef double[:, ::1] f1 = np.empty((R, N))
    cdef double[:, ::1] f2 = np.empty((R, N))
    cdef double[:, ::1] z0 = np.zeros((R, N))
    cdef double[:, ::1] z1 = np.zeros((R, N))
    cdef double[:, ::1] y0 = np.zeros((R, N))
    cdef double[:, ::1] y1 = np.zeros((R, N))
    cdef int64_t[:, ::1] q = np.empty((R, N), dtype=np.int64)
    cdef double sqdt = sqrt(dt)
    cdef double dB, dBp
    cdef Py_ssize_t r, k, i, j
    o1[0, :, :] = v
    o2[0, :, :] = g
    o3[0, :, :] = vp
    o4[0, :, :] = gp
    for r in prange(R, nogil=True, num_threads=threads, schedule="static"):
        for k in range(n_steps):
            _field(&h1[0], &v[r, 0], &s[r, 0], &q[r, 0], &f1[r, 0], N, False)
            _field(&h1[0], &vp[r, 0], &s[r, 0], &q[r, 0], &f2[r, 0], N, False)
            for i in range(N):
                if k & 1 == 0:
                    _normal_pair(seed, st[r, i], 0, <uint64_t>(k >> 1), &z0[r, i], &z1[r, i])
                    _normal_pair(seed, st[r, i], 1, <uint64_t>(k >> 1), &y0[r, i], &y1[r, i])
                    dB = sqdt * z0[r, i]
                    dBp = sqdt * y0[r, i]
                else:
                    dB = sqdt * z1[r, i]
                    dBp = sqdt * y1[r, i]
                _pair_step(&m, &v[r, i], &g[r, i], &vp[r, i], &gp[r, i], dt, dB, dBp, kind, xi,
                           f1[r, i], f2[r, i], True)
            if (k + 1) % stride == 0:
                j = (k + 1) // stride
                for i in range(N):
                    o1[j, r, i] = v[r, i]
                    o2[j, r, i] = g[r, i]
                    o3[j, r, i] = vp[r, i]
                    o4[j, r, i] = gp[r, i]
    return tuple(out)


def run_chaos(double[::1] model, double[::1] h1, v0, g0, va0, ga0, uint64_t seed, uint64_t seed_aux,
              streams, streams_aux, Py_ssize_t n_steps, double dt, Py_ssize_t stride, int threads=1):
    cdef Model m = _unpack(model)
    cdef double[:, ::1] v = np.array(v0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] g = np.array(g0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] vp = np.array(v0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] gp = np.array(g0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] va = np.array(va0, dtype=np.float64, ndmin=2, order="C")
    cdef double[:, ::1] ga = np.array(ga0, dtype=np.float64, ndmin=2, order="C")
    cdef const uint64_t[:, ::1] st = np.ascontiguousarray(np.atleast_2d(streams), dtype=np.uint64)
    cdef const uint64_t[:, ::1] sta = np.ascontiguousarray(np.atleast_2d(streams_aux), dtype=np.uint64)
    cdef Py_ssize_t R = v.shape[0], N = v.shape[1], M = va.shape[1]
    cdef Py_ssize_t n_snap = n_steps // stride + 1
    sq_arr = np.empty((n_snap, R))
    cdef double[:, ::1] sq = sq_arr
    cdef double[:, ::1] s = np.empty((R, N))
    cdef double[:, ::1] f = np.empty((R, N))
    cdef double[:, ::1] sa = np.empty((R, M))
    cdef double[:, ::1] fa = np.empty((R, M))
    cdef double[:, ::1] fs = np.empty((R, N))
    cdef double[:, ::1] z0 = np.zeros((R, N))
    cdef double[:, ::1] z1 = np.zeros((R, N))
    cdef double[:, ::1] x0 = np.zeros((R, M))
    cdef double[:, ::1] x1 = np.zeros((R, M))
    cdef int64_t[:, ::1] q = np.empty((R, N), dtype=np.int64)
    cdef int64_t[:, ::1] qa = np.empty((R, M), dtype=np.int64)
    cdef double[::1] mean_aux = np.empty(R)
    cdef double sqdt = sqrt(dt)
    cdef double dW, acc, d1, d2
    cdef Py_ssize_t r, k, i, j
    cdef int64_t Sa
    for r in range(R):
        sq[0, r] = 0.0
    for r in prange(R, nogil=True, num_threads=threads, schedule="static"):
        for k in range(n_steps):
            _field(&h1[0], &v[r, 0], &s[r, 0], &q[r, 0], &f[r, 0], N, False)
            _field(&h1[0], &va[r, 0], &sa[r, 0], &qa[r, 0], &fa[r, 0], M, True)
            Sa = 0
            for j in range(M):
                Sa = Sa + qa[r, j]
            mean_aux[r] = <double>Sa * FIX_INV / M
            for i in range(N):
                fs[r, i] = h1[0] + h1[1] * _sigmoid(&h1[0], vp[r, i]) * mean_aux[r]
            for i in range(N):
                if k & 1 == 0:
                    _normal_pair(seed, st[r, i], 0, <uint64_t>(k >> 1), &z0[r, i], &z1[r, i])
                    dW = sqdt * z0[r, i]
                else:
                    dW = sqdt * z1[r, i]
                _step(&m, &v[r, i], &g[r, i], dt, dW, f[r, i], True)
                _step(&m, &vp[r, i], &gp[r, i], dt, dW, fs[r, i], True)
            for j in range(M):
                if k & 1 == 0:
                    _normal_pair(seed_aux, sta[r, j], 0, <uint64_t>(k >> 1), &x0[r, j], &x1[r, j])
                    _step(&m, &va[r, j], &ga[r, j], dt, sqdt * x0[r, j], fa[r, j], True)
                else:
                    _step(&m, &va[r, j], &ga[r, j], dt, sqdt * x1[r, j], fa[r, j], True)
            if (k + 1) % stride == 0:
                acc = 0.0
                for i in range(N):
                    d1 = v[r, i] - vp[r, i]
                    d2 = g[r, i] - gp[r, i]
                    acc = acc + (d1 * d1 + d2 * d2)
                sq[(k + 1) // stride, r] = acc
    return sq_arr, (np.asarray(v), np.asarray(g), np.asarray(vp), np.asarray(gp))
