"""Pure numpy implementations of the hot kernels.

These are the reference implementations; ``_kernels.pyx`` mirrors them
loop by loop.  All functions are deterministic and break ties towards the
lowest index.
"""
import numpy as np

_GX, _GW = np.polynomial.legendre.leggauss(16)
_CHUNK = 2048


def _seg_antideriv(x, r):
    # antiderivative of sqrt(r^2 - x^2)
    x = np.clip(x, -r, r)
    s = np.sqrt(np.maximum(r * r - x * x, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(r > 0, np.arcsin(np.clip(x / np.where(r > 0, r, 1.0), -1, 1)), 0.0)
    return 0.5 * (x * s + r * r * a)


def box_disk_area(x0, x1, y0, y1, r):
    """Exact area of ``[x0,x1] x [y0,y1]`` intersected with the disk of radius ``r`` at 0.

    All arguments broadcast.  The integrand ``min(y1, s) - max(y0, -s)``
    with ``s = sqrt(r^2 - x^2)`` is split at the abscissae where ``s``
    meets ``|y0|`` or ``|y1|``; on each piece it is a combination of
    constants and ``s``, integrated in closed form.
    """
    x0, x1, y0, y1, r = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (x0, x1, y0, y1, r)])
    r = np.maximum(r, 0.0)
    a = np.maximum(x0, -r)
    b = np.minimum(x1, r)
    bp = [a, b]
    for y in (y0, y1):
        xs = np.sqrt(np.maximum(r * r - y * y, 0.0))
        bp.append(xs)
        bp.append(-xs)
    bp = np.stack(bp, axis=-1)
    bp = np.clip(bp, a[..., None], np.maximum(a, b)[..., None])
    bp.sort(axis=-1)
    area = np.zeros(a.shape)
    for k in range(bp.shape[-1] - 1):
        p, q = bp[..., k], bp[..., k + 1]
        width = q - p
        m = 0.5 * (p + q)
        s = np.sqrt(np.maximum(r * r - m * m, 0.0))
        dg = _seg_antideriv(q, r) - _seg_antideriv(p, r)
        top = np.where(y1 < s, y1 * width, dg)
        bot = np.where(y0 > -s, y0 * width, -dg)
        ok = (np.minimum(y1, s) > np.maximum(y0, -s)) & (width > 0)
        area += np.where(ok, top - bot, 0.0)
    return area


def box_ball_volume(lo, hi, radius):
    """Volume of boxes ``[lo, hi]`` (rows, 3-d) intersected with the ball of ``radius`` at 0.

    Integrates the exact disk-rectangle area over the vertical coordinate
    on pieces split at every height where the slice circle passes through a
    rectangle corner or touches an edge line.  The slice area has
    fractional-power behaviour at those heights, so each piece uses the
    cubic substitution ``z = mid + half (3u - u^3) / 2`` before a 16-point
    Gauss rule.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    R = float(radius)
    x0, y0, z0 = lo.T
    x1, y1, z1 = hi.T
    a = np.maximum(z0, -R)
    b = np.minimum(z1, R)
    ks = [np.abs(x0), np.abs(x1), np.abs(y0), np.abs(y1)]
    for xx in (x0, x1):
        for yy in (y0, y1):
            ks.append(np.hypot(xx, yy))
    bp = [a, b]
    for k in ks:
        zk = np.sqrt(np.maximum(R * R - k * k, 0.0))
        bp.append(np.where(k < R, zk, a))
        bp.append(np.where(k < R, -zk, a))
    bp = np.stack(bp, axis=-1)
    bp = np.clip(bp, a[:, None], np.maximum(a, b)[:, None])
    bp.sort(axis=-1)
    vol = np.zeros(lo.shape[0])
    for k in range(bp.shape[-1] - 1):
        p, q = bp[:, k], bp[:, k + 1]
        half = 0.5 * (q - p)
        mid = 0.5 * (q + p)
        for gx, gw in zip(_GX, _GW):
            z = mid + half * 0.5 * gx * (3.0 - gx * gx)
            rz = np.sqrt(np.maximum(R * R - z * z, 0.0))
            vol += gw * 1.5 * (1.0 - gx * gx) * half * box_disk_area(x0, x1, y0, y1, rz)
    return vol


def ball_overlap_sum(lo, hi, center, radius):
    """Sum over boxes of ``|box ∩ ball|`` for a disk (2-d) or ball (3-d)."""
    lo = np.asarray(lo, dtype=float) - center
    hi = np.asarray(hi, dtype=float) - center
    if lo.shape[0] == 0:
        return 0.0
    near = np.clip(0.0, lo, hi)
    far = np.maximum(np.abs(lo), np.abs(hi))
    dnear = np.sum(near * near, axis=1)
    dfar = np.sum(far * far, axis=1)
    r2 = radius * radius
    inside = dfar <= r2
    bnd = (~inside) & (dnear < r2)
    total = float(np.sum(np.prod(hi[inside] - lo[inside], axis=1)))
    if np.any(bnd):
        l, h = lo[bnd], hi[bnd]
        if lo.shape[1] == 2:
            total += float(np.sum(box_disk_area(l[:, 0], h[:, 0], l[:, 1], h[:, 1], radius)))
        else:
            total += float(np.sum(box_ball_volume(l, h, radius)))
    return total


def contact_mask(points, u, grad, slack, h):
    """Global supporting-plane test for every sample point.

    Point ``i`` passes iff for all ``j``:
    ``u[j] >= u[i] + <grad[i], p[j] - p[i]> - slack * (h + |p[j] - p[i]| * h)``.
    """
    points = np.ascontiguousarray(points, dtype=float)
    n = points.shape[0]
    mask = np.zeros(n, dtype=bool)
    for s in range(0, n, _CHUNK // 4):
        e = min(n, s + _CHUNK // 4)
        d = points[None, :, :] - points[s:e, None, :]
        lin = u[s:e, None] + np.einsum("ik,ijk->ij", grad[s:e], d)
        dist = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        ok = u[None, :] >= lin - slack * (h + dist * h)
        mask[s:e] = np.all(ok, axis=1)
    return mask


def legendre_max(queries, points, values):
    """``max_j <q_i, p_j> - values_j`` and the first maximising index ``j``."""
    queries = np.ascontiguousarray(queries, dtype=float)
    points = np.ascontiguousarray(points, dtype=float)
    values = np.ascontiguousarray(values, dtype=float)
    m = queries.shape[0]
    best = np.empty(m)
    arg = np.empty(m, dtype=np.int64)
    for s in range(0, m, _CHUNK):
        e = min(m, s + _CHUNK)
        f = queries[s:e] @ points.T - values[None, :]
        arg[s:e] = np.argmax(f, axis=1)
        best[s:e] = f[np.arange(e - s), arg[s:e]]
    return best, arg
