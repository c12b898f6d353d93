# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the reference."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, asin, fabs, fmin, fmax, hypot

cnp.import_array()

cdef enum:
    NG = 16
cdef double GX[NG]
cdef double GW[NG]
_gx, _gw = np.polynomial.legendre.leggauss(NG)
for _i in range(NG):
    GX[_i] = _gx[_i]
    GW[_i] = _gw[_i]


cdef inline double _anti(double x, double r) noexcept nogil:
    cdef double s, a
    if r <= 0:
        return 0.0
    if x > r:
        x = r
    elif x < -r:
        x = -r
    s = sqrt(fmax(r * r - x * x, 0.0))
    a = x / r
    if a > 1:
        a = 1
    elif a < -1:
        a = -1
    return 0.5 * (x * s + r * r * asin(a))


cdef inline void _sort(double* v, int n) noexcept nogil:
    cdef int i, j
    cdef double key
    for i in range(1, n):
        key = v[i]
        j = i - 1
        while j >= 0 and v[j] > key:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = key


cdef double _box_disk(double x0, double x1, double y0, double y1, double r) noexcept nogil:
    cdef double bp[6]
    cdef double a, b, hi, p, q, m, s, dg, top, bot, area, xs, w
    cdef int k
    if r <= 0:
        return 0.0
    a = fmax(x0, -r)
    b = fmin(x1, r)
    if b <= a:
        return 0.0
    bp[0] = a
    bp[1] = b
    xs = sqrt(fmax(r * r - y0 * y0, 0.0))
    bp[2] = xs
    bp[3] = -xs
    xs = sqrt(fmax(r * r - y1 * y1, 0.0))
    bp[4] = xs
    bp[5] = -xs
    for k in range(6):
        bp[k] = fmin(fmax(bp[k], a), b)
    _sort(bp, 6)
    area = 0.0
    for k in range(5):
        p = bp[k]
        q = bp[k + 1]
        w = q - p
        if w <= 0:
            continue
        m = 0.5 * (p + q)
        s = sqrt(fmax(r * r - m * m, 0.0))
        if fmin(y1, s) <= fmax(y0, -s):
            continue
        dg = _anti(q, r) - _anti(p, r)
        top = y1 * w if y1 < s else dg
        bot = y0 * w if y0 > -s else -dg
        area += top - bot
    return area


cdef double _box_ball(double x0, double x1, double y0, double y1,
                      double z0, double z1, double R) noexcept nogil:
    cdef double bp[18]
    cdef double ks[8]
    cdef double a, b, zk, p, q, half, mid, z, rz, vol
    cdef int k, g, nb
    a = fmax(z0, -R)
    b = fmin(z1, R)
    if b <= a:
        return 0.0
    ks[0] = fabs(x0)
    ks[1] = fabs(x1)
    ks[2] = fabs(y0)
    ks[3] = fabs(y1)
    ks[4] = hypot(x0, y0)
    ks[5] = hypot(x0, y1)
    ks[6] = hypot(x1, y0)
    ks[7] = hypot(x1, y1)
    bp[0] = a
    bp[1] = b
    nb = 2
    for k in range(8):
        if ks[k] < R:
            zk = sqrt(R * R - ks[k] * ks[k])
            bp[nb] = fmin(fmax(zk, a), b)
            bp[nb + 1] = fmin(fmax(-zk, a), b)
            nb += 2
    _sort(bp, nb)
    vol = 0.0
    for k in range(nb - 1):
        p = bp[k]
        q = bp[k + 1]
        if q <= p:
            continue
        half = 0.5 * (q - p)
        mid = 0.5 * (q + p)
        for g in range(NG):
            # cubic substitution flattens the fractional powers at the breakpoints
            z = mid + half * 0.5 * GX[g] * (3.0 - GX[g] * GX[g])
            rz = sqrt(fmax(R * R - z * z, 0.0))
            vol += GW[g] * 1.5 * (1.0 - GX[g] * GX[g]) * half * _box_disk(x0, x1, y0, y1, rz)
    return vol


def box_disk_area(x0, x1, y0, y1, r):
    """Exact area of rectangles intersected with a centred disk (broadcasting)."""
    x0, x1, y0, y1, r = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (x0, x1, y0, y1, r)])
    shape = x0.shape
    cdef const double[::1] a0 = np.ascontiguousarray(x0).ravel()
    cdef const double[::1] a1 = np.ascontiguousarray(x1).ravel()
    cdef const double[::1] b0 = np.ascontiguousarray(y0).ravel()
    cdef const double[::1] b1 = np.ascontiguousarray(y1).ravel()
    cdef const double[::1] rr = np.ascontiguousarray(r).ravel()
    out = np.empty(a0.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(a0.shape[0]):
            o[i] = _box_disk(a0[i], a1[i], b0[i], b1[i], rr[i])
    return out.reshape(shape)


def box_ball_volume(lo, hi, double radius):
    """Volumes of 3-d boxes intersected with a centred ball."""
    cdef double[:, ::1] l = np.ascontiguousarray(np.atleast_2d(lo), dtype=float)
    cdef double[:, ::1] h = np.ascontiguousarray(np.atleast_2d(hi), dtype=float)
    out = np.empty(l.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(l.shape[0]):
            o[i] = _box_ball(l[i, 0], h[i, 0], l[i, 1], h[i, 1], l[i, 2], h[i, 2], radius)
    return out


def ball_overlap_sum(lo, hi, center, double radius):
    """Sum over boxes of ``|box ∩ ball|`` (2-d disk or 3-d ball)."""
    cdef double[:, ::1] l = np.ascontiguousarray(lo, dtype=float)
    cdef double[:, ::1] h = np.ascontiguousarray(hi, dtype=float)
    cdef double[::1] c = np.ascontiguousarray(center, dtype=float)
    cdef Py_ssize_t i, k, n = l.shape[0]
    cdef int d = l.shape[1]
    cdef double r2 = radius * radius, dn, df, a, b, vol, total = 0.0
    cdef double lo_[3]
    cdef double hi_[3]
    with nogil:
        for i in range(n):
            dn = 0.0
            df = 0.0
            vol = 1.0
            for k in range(d):
                a = l[i, k] - c[k]
                b = h[i, k] - c[k]
                lo_[k] = a
                hi_[k] = b
                vol *= b - a
                if a > 0:
                    dn += a * a
                elif b < 0:
                    dn += b * b
                df += fmax(a * a, b * b)
            if df <= r2:
                total += vol
            elif dn < r2:
                if d == 2:
                    total += _box_disk(lo_[0], hi_[0], lo_[1], hi_[1], radius)
                else:
                    total += _box_ball(lo_[0], hi_[0], lo_[1], hi_[1], lo_[2], hi_[2], radius)
    return total


def contact_mask(points, u, grad, double slack, double h):
    """Global supporting-plane test (see the reference implementation)."""
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=float)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=float)
    cdef double[:, ::1] g = np.ascontiguousarray(grad, dtype=float)
    cdef Py_ssize_t n = p.shape[0], i, j
    cdef int d = p.shape[1], k
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef double lin, dist, dk, ok
    with nogil:
        for i in range(n):
            ok = 1
            for j in range(n):
                lin = uu[i]
                dist = 0.0
                for k in range(d):
                    dk = p[j, k] - p[i, k]
                    lin += g[i, k] * dk
                    dist += dk * dk
                if uu[j] < lin - slack * (h + sqrt(dist) * h):
                    ok = 0
                    break
            o[i] = <unsigned char>ok
    return out.astype(bool)


def legendre_max(queries, points, values):
    """``max_j <q_i, p_j> - values_j`` with the first maximising index."""
    cdef double[:, ::1] q = np.ascontiguousarray(queries, dtype=float)
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=float)
    cdef double[::1] v = np.ascontiguousarray(values, dtype=float)
    cdef Py_ssize_t m = q.shape[0], n = p.shape[0], i, j
    cdef int d = q.shape[1], k
    best = np.empty(m)
    arg = np.empty(m, dtype=np.int64)
    cdef double[::1] b = best
    cdef long long[::1] a = arg
    cdef double f, bv
    cdef long long ba
    with nogil:
        for i in range(m):
            bv = -1e308
            ba = 0
            for j in range(n):
                f = -v[j]
                for k in range(d):
                    f += q[i, k] * p[j, k]
                if f > bv:
                    bv = f
                    ba = j
            b[i] = bv
            a[i] = ba
    return best, arg
