"""Capillarity energy, deficit, asymmetries and auxiliary integrals.

Every function accepts a :class:`~capiso.geometry.Bubble`, a
:class:`~capiso.geometry.ProfileSet` or a :class:`~capiso.geometry.VoxelSet`
unless stated otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import DomainError, PreconditionError, SearchError
from .geometry import (
    Bubble, CapillarityParams, MeasureTriple, ProfileSet, VoxelSet,
    bubble_measures, bubble_profile, bubble_slice_radius, exposed_faces,
    profile_measures, unit_ball_volume, voxel_measures, _power_mean_linear,
)

_GX8, _GW8 = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------- measures

def measures(obj, params: CapillarityParams) -> MeasureTriple:
    """Measures of any supported set in dimension ``params.n``."""
    if isinstance(obj, Bubble):
        return bubble_measures(obj)
    if isinstance(obj, ProfileSet):
        return profile_measures(obj, params.n)
    if isinstance(obj, VoxelSet):
        if obj.dim != params.n:
            raise DomainError(f"voxel set has dimension {obj.dim}, params say {params.n}")
        return voxel_measures(obj)
    raise TypeError(f"unsupported set type {type(obj).__name__}")


def capillarity_perimeter(m: MeasureTriple, lam: float) -> float:
    """``P_lambda = rel_perimeter - lam * wetted_area``."""
    return m.rel_perimeter - lam * m.wetted_area


def capillarity_perimeter_flux(obj, lam: float, n: int | None = None) -> float:
    """Energy as the integral of ``1 - lam <e_n, nu>`` over the relative boundary.

    Voxel faces have exact axis normals; profile pieces use the frustum
    normal.  Agrees with :func:`capillarity_perimeter` by the divergence
    theorem.
    """
    if isinstance(obj, VoxelSet):
        total = 0.0
        for ax in range(obj.dim):
            area = obj.face_areas(ax)
            plus, minus = exposed_faces(obj, ax)
            if ax == obj.dim - 1:
                minus = minus.copy()
                minus[(slice(None),) * ax + (0,)] = False
                total += (1 - lam) * float(np.sum(np.broadcast_to(area, plus.shape)[plus]))
                total += (1 + lam) * float(np.sum(np.broadcast_to(area, minus.shape)[minus]))
            else:
                total += float(np.sum(np.broadcast_to(area, plus.shape)[plus]))
                total += float(np.sum(np.broadcast_to(area, minus.shape)[minus]))
        return total
    if isinstance(obj, Bubble):
        n = obj.params.n
        obj = bubble_profile(obj)
    if isinstance(obj, ProfileSet):
        if n is None:
            raise DomainError("profile sets need the dimension n")
        t, r = obj.heights, obj.radii
        dt, dr = np.diff(t), np.diff(r)
        slant = np.hypot(dt, dr)
        lateral = (n - 1) * unit_ball_volume(n - 1) * slant * _power_mean_linear(r[:-1], r[1:], n - 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            nu_n = np.where(slant > 0, -dr / np.where(slant > 0, slant, 1.0), 0.0)
        return float(np.sum(lateral * (1.0 - lam * nu_n)))
    raise TypeError(f"unsupported set type {type(obj).__name__}")


def deficit(obj, params: CapillarityParams) -> float:
    """Normalised energy excess ``P_lambda(E) / (n |B^lam|^{1/n} v^{(n-1)/n}) - 1``."""
    m = measures(obj, params)
    if not m.volume > 0:
        raise DomainError("deficit of a set with zero volume")
    return capillarity_perimeter(m, params.lam) / params.reference_energy(m.volume) - 1.0


def psi_concave(t, n: int):
    """``psi(t) = t^{(n-1)/n} + (1-t)^{(n-1)/n} - 1`` on [0, 1]."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise DomainError("psi is defined on [0, 1]")
    e = (n - 1) / n
    out = t**e + (1 - t) ** e - 1
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- slices

@dataclass(frozen=True, eq=False)
class SliceFunction:
    """Samples of the slice area ``v_E(t)``.

    ``kind`` is ``"profile"`` (values at nodes of a piecewise-linear radius,
    exponent ``n - 1``) or ``"rows"`` (constant on voxel rows of height
    ``row_height`` sampled at row centres).
    """

    heights: np.ndarray
    values: np.ndarray
    kind: str
    n: int
    row_height: float = 0.0

    def integral(self) -> float:
        if self.kind == "rows":
            return float(np.sum(self.values) * self.row_height)
        om = unit_ball_volume(self.n - 1)
        r = (self.values / om) ** (1.0 / (self.n - 1))
        mean = _power_mean_linear(r[:-1], r[1:], self.n - 1)
        return float(om * np.sum(np.diff(self.heights) * mean))


def _row_areas(voxel: VoxelSet) -> np.ndarray:
    area = voxel.face_areas(voxel.dim - 1)
    return np.sum(np.where(voxel.occupancy, area, 0.0), axis=tuple(range(voxel.dim - 1)))


def slice_function(obj, n: int | None = None) -> SliceFunction:
    """Slice areas at profile nodes or voxel row centres."""
    if isinstance(obj, Bubble):
        n = obj.params.n
        obj = bubble_profile(obj)
    if isinstance(obj, ProfileSet):
        if n is None:
            raise DomainError("profile sets need the dimension n")
        return SliceFunction(obj.heights.copy(), unit_ball_volume(n - 1) * obj.radii ** (n - 1), "profile", n)
    if isinstance(obj, VoxelSet):
        h = obj.spacing
        rows = _row_areas(obj)
        return SliceFunction((np.arange(rows.size) + 0.5) * h, rows, "rows", obj.dim, h)
    raise TypeError(f"unsupported set type {type(obj).__name__}")


def _profile_cumulative_volume(profile: ProfileSet, n: int) -> np.ndarray:
    t, r = profile.heights, profile.radii
    piece = unit_ball_volume(n - 1) * np.diff(t) * _power_mean_linear(r[:-1], r[1:], n - 1)
    return np.concatenate([[0.0], np.cumsum(piece)])


def slice_lower_bound_residual(obj, params: CapillarityParams, vol_tol: float = 1e-6) -> float:
    """Minimum over heights of the slice lower bound residual.

    The residual at height ``t`` is ``v_E(t) - P/2 [(omega_n/|B|)^{1/n}
    (1 - g(t))^{(n-1)/n} - 1 - D]`` with ``g(t) = |E ∩ {x_n < t}| / |B|``
    and ``P`` the energy of the unit cap.  For voxel sets ``v_E`` is
    constant on each row and the residual is smallest at the row bottom,
    which is where it is evaluated; profiles are evaluated at every node.
    """
    n = params.n
    if isinstance(obj, Bubble):
        obj = bubble_profile(obj)
    m = measures(obj, params)
    if abs(m.volume - params.cap_volume) > vol_tol * params.cap_volume:
        raise PreconditionError("normalise the set to the unit cap volume first")
    d = capillarity_perimeter(m, params.lam) / params.reference_energy(m.volume) - 1.0
    if isinstance(obj, ProfileSet):
        below = _profile_cumulative_volume(obj, n)
        v = unit_ball_volume(n - 1) * obj.radii ** (n - 1)
        keep = obj.heights > 0
        g, v = below[keep] / params.cap_volume, v[keep]
    elif isinstance(obj, VoxelSet):
        rows = _row_areas(obj)
        below = np.concatenate([[0.0], np.cumsum(rows * obj.spacing)])[:-1]
        g, v = below / params.cap_volume, rows
    else:
        raise TypeError(f"unsupported set type {type(obj).__name__}")
    g = np.clip(g, 0.0, 1.0)
    c = (unit_ball_volume(n) / params.cap_volume) ** (1.0 / n)
    rhs = 0.5 * params.ref_energy * (c * (1 - g) ** ((n - 1) / n) - 1 - d)
    return float(np.min(v - rhs))


# ---------------------------------------------------------------- asymmetry

@dataclass(frozen=True)
class SearchConfig:
    """Budget of the translation search for voxel sets.

    ``coarse_points`` caps the number of grid points per translated axis
    (the grid spacing is ``max(h, window / coarse_points)``), ``starts``
    is the number of coarse minima that are refined, ``rel_tol`` the
    golden-section tolerance relative to the bubble scale.
    """

    window: float = 4.0
    coarse_points_1d: int = 401
    coarse_points_2d: int = 25
    starts: int = 3
    rel_tol: float = 1e-4
    sweeps: int = 4
    max_evals: int = 20000


DEFAULT_SEARCH = SearchConfig()
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden(f, a, b, tol, budget):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    used = 2
    while b - a > tol and used < budget:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        used += 1
    return (c, fc, used) if fc <= fd else (d, fd, used)


def translation_search(objective, anchor, scale, h, free_axes, cfg: SearchConfig = DEFAULT_SEARCH):
    """Minimise ``objective(x)`` over wall translations ``x``.

    A coarse grid over a window of width ``cfg.window * scale`` centred at
    ``anchor`` is scanned along ``free_axes``; the best ``cfg.starts``
    grid points are refined by golden-section coordinate descent.  Ties
    are broken by the lexicographic order of the centre.

    Returns
    -------
    value : float
    center : ndarray
    """
    anchor = np.asarray(anchor, dtype=float)
    free_axes = list(free_axes)
    if not free_axes:
        return float(objective(anchor)), anchor
    k = len(free_axes)
    width = cfg.window * scale
    cap = cfg.coarse_points_1d if k == 1 else cfg.coarse_points_2d
    step = max(h, width / cap)
    npts = int(np.floor(width / step / 2))
    offs = np.arange(-npts, npts + 1) * step
    grids = np.meshgrid(*([offs] * k), indexing="ij")
    cand = np.tile(anchor, (grids[0].size, 1))
    for i, ax in enumerate(free_axes):
        cand[:, ax] += grids[i].ravel()
    vals = np.array([objective(c) for c in cand])
    evals = len(vals)
    order = np.lexsort(tuple(cand[:, ax] for ax in reversed(free_axes)) + (vals,))
    results = []
    tol = cfg.rel_tol * scale
    for idx in order[: cfg.starts]:
        x = cand[idx].copy()
        fx = vals[idx]
        for _ in range(cfg.sweeps):
            before = fx
            for ax in free_axes:
                def f1(s, ax=ax):
                    y = x.copy()
                    y[ax] = s
                    return objective(y)
                s, fs, used = _golden(f1, x[ax] - step, x[ax] + step, tol, cfg.max_evals)
                evals += used
                if fs < fx:
                    x[ax], fx = s, fs
            if before - fx <= 1e-14 * max(1.0, abs(before)):
                break
        results.append((fx, tuple(x), x))
        if evals > cfg.max_evals:
            best = min(results)
            raise SearchError("translation search exceeded its evaluation budget", best=(best[0], best[2]))
    fx, _, x = min(results, key=lambda r: (r[0], r[1]))
    return float(fx), x


def _wall_anchor(voxel: VoxelSet) -> np.ndarray:
    occ = voxel.occupancy
    bottom = occ[(slice(None),) * (voxel.dim - 1) + (0,)]
    weights = bottom if np.any(bottom) else np.any(occ, axis=-1)
    area = voxel.face_areas(voxel.dim - 1)[(slice(None),) * (voxel.dim - 1) + (0,)]
    w = np.where(weights, area, 0.0)
    out = []
    for ax in range(voxel.dim - 1):
        sh = [1] * (voxel.dim - 1)
        sh[ax] = -1
        out.append(float(np.sum(w * voxel.centers(ax).reshape(sh)) / np.sum(w)))
    return np.array(out)


def voxel_overlap(voxel: VoxelSet, bubble: Bubble, boxes=None) -> float:
    """``|E ∩ B|`` for a voxel set and a bubble (closed form in 2-d, quadrature to ~1e-10 in 3-d)."""
    lo, hi = boxes if boxes is not None else voxel.occupied_boxes()
    return kernels.ball_overlap_sum(lo, hi, bubble.ball_center, bubble.scale)


def voxel_alpha_search(voxel: VoxelSet, params: CapillarityParams, fixed=None,
                       cfg: SearchConfig = DEFAULT_SEARCH):
    """Minimal ``|E Δ B^lam(v, x)|`` over wall translations, optionally with fixed coordinates.

    Returns ``(symmetric difference volume, center)``.
    """
    m = voxel_measures(voxel)
    if not m.volume > 0:
        raise DomainError("asymmetry of a set with zero volume")
    v = m.volume
    base = Bubble(params, v)
    boxes = voxel.occupied_boxes()
    cz = base.ball_center_height

    def sdiff(x):
        ov = kernels.ball_overlap_sum(boxes[0], boxes[1], np.append(x, cz), base.scale)
        return 2.0 * v - 2.0 * ov

    anchor = _wall_anchor(voxel)
    fixed = dict(fixed or {})
    for ax, val in fixed.items():
        anchor[ax] = val
    free = [ax for ax in range(voxel.dim - 1) if ax not in fixed]
    return translation_search(sdiff, anchor, base.scale, voxel.spacing, free, cfg)


def _profile_alpha(profile: ProfileSet, params: CapillarityParams) -> float:
    n = params.n
    v = profile_measures(profile, n).volume
    bub = Bubble(params, v)
    top = max(profile.top, bub.top)
    grid = np.linspace(0.0, top, 513)
    tb = bub.top
    graded = tb - tb * 2.0 ** -np.arange(1, 40)
    pts = np.unique(np.concatenate([profile.heights, grid, [tb], graded]))

    def f(t):
        return profile.rho(t) ** (n - 1) - bubble_slice_radius(bub, t) ** (n - 1)

    a, b = pts[:-1], pts[1:]
    fa, fb = f(a), f(b)
    # one sign change per piece is located by bisection
    cross = (fa * fb < 0)
    lo_, hi_ = a[cross].copy(), b[cross].copy()
    flo = fa[cross]
    for _ in range(60):
        mid = 0.5 * (lo_ + hi_)
        fm = f(mid)
        left = np.sign(fm) == np.sign(flo)
        lo_ = np.where(left, mid, lo_)
        flo = np.where(left, fm, flo)
        hi_ = np.where(left, hi_, mid)
    roots = 0.5 * (lo_ + hi_)
    pts = np.unique(np.concatenate([pts, roots]))
    a, b = pts[:-1], pts[1:]
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    tq = mid[:, None] + half[:, None] * _GX8[None, :]
    # profile nodes are breakpoints, so evaluate rho on the open piece
    vals = np.abs(f(tq))
    integral = np.sum(half * (vals @ _GW8))
    return float(unit_ball_volume(n - 1) * integral / v)


def asymmetry_alpha(obj, params: CapillarityParams, cfg: SearchConfig = DEFAULT_SEARCH):
    """Fraenkel-type asymmetry ``min_x |E Δ B^lam(v, x)| / v`` and the optimal centre."""
    if isinstance(obj, Bubble):
        return 0.0, np.array(obj.center)
    if isinstance(obj, ProfileSet):
        return _profile_alpha(obj, params), np.zeros(params.n - 1)
    if isinstance(obj, VoxelSet):
        v = voxel_measures(obj).volume
        sd, x = voxel_alpha_search(obj, params, cfg=cfg)
        return float(min(2.0, max(0.0, sd / v))), x
    raise TypeError(f"unsupported set type {type(obj).__name__}")


def _footprint_intervals(voxel: VoxelSet):
    bottom = voxel.occupancy[:, 0]
    e = voxel.edges(0)
    idx = np.nonzero(bottom)[0]
    if idx.size == 0:
        return np.zeros((0, 2))
    # merge runs of adjacent occupied cells
    brk = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[idx[0]], idx[brk + 1]])
    ends = np.concatenate([idx[brk], [idx[-1]]])
    return np.column_stack([e[starts], e[ends + 1]])


def _interval_overlap(iv, x, r):
    return float(np.sum(np.clip(np.minimum(iv[:, 1], x + r) - np.maximum(iv[:, 0], x - r), 0.0, None)))


def asymmetry_beta(obj, params: CapillarityParams, cfg: SearchConfig = DEFAULT_SEARCH):
    """Trace asymmetry ``min_x |T Δ D(x)| / |D|`` and the optimal centre.

    ``T`` is the wetted trace and ``D(x)`` the trace of the bubble of the
    same volume centred at ``x``.  An empty trace gives 1.
    """
    n = params.n
    om = unit_ball_volume(n - 1)
    if isinstance(obj, Bubble):
        return 0.0, np.array(obj.center)
    m = measures(obj, params)
    if not m.volume > 0:
        raise DomainError("asymmetry of a set with zero volume")
    bub = Bubble(params, m.volume)
    rw = bub.trace_radius
    dvol = om * rw ** (n - 1)
    if isinstance(obj, ProfileSet):
        r0 = obj.radii[0]
        return float(abs(r0 ** (n - 1) - rw ** (n - 1)) / rw ** (n - 1)), np.zeros(n - 1)
    if not isinstance(obj, VoxelSet):
        raise TypeError(f"unsupported set type {type(obj).__name__}")
    if m.wetted_area == 0:
        return 1.0, _wall_anchor(obj)
    if n == 2:
        iv = _footprint_intervals(obj)
        cand = np.unique(np.concatenate([iv[:, 0] - rw, iv[:, 0] + rw, iv[:, 1] - rw, iv[:, 1] + rw]))
        ov = np.array([_interval_overlap(iv, x, rw) for x in cand])
        best = ov.max()
        tie = cand[ov >= best - 1e-12 * max(1.0, best)]
        x = tie[0]
        mid = 0.5 * (tie[0] + tie[-1])
        if _interval_overlap(iv, mid, rw) >= best - 1e-12 * max(1.0, best):
            x = mid
        sd = m.wetted_area + dvol - 2.0 * _interval_overlap(iv, x, rw)
        return float(max(sd, 0.0) / dvol), np.array([x])
    bottom = obj.occupancy[:, :, 0]
    ix, iy = np.nonzero(bottom)
    ex, ey = obj.edges(0), obj.edges(1)
    lo = np.column_stack([ex[ix], ey[iy]])
    hi = np.column_stack([ex[ix + 1], ey[iy + 1]])

    def sdiff(x):
        return m.wetted_area + dvol - 2.0 * kernels.ball_overlap_sum(lo, hi, x, rw)

    val, x = translation_search(sdiff, _wall_anchor(obj), bub.scale, obj.spacing, [0, 1], cfg)
    return float(max(val, 0.0) / dvol), x


# ---------------------------------------------------------------- boundary sampling

def _densify_polyline(p, res):
    seg = np.hypot(*np.diff(p, axis=0).T)
    out = [p[:1]]
    for i in np.nonzero(seg > 0)[0]:
        k = max(1, int(np.ceil(seg[i] / res)))
        s = np.arange(1, k + 1)[:, None] / k
        out.append(p[i] + s * (p[i + 1] - p[i]))
    return np.concatenate(out)


def _revolve(mer, n, res):
    # mer rows are (radius, height)
    if n == 2:
        return np.concatenate([np.column_stack([mer[:, 0], mer[:, 1]]),
                               np.column_stack([-mer[:, 0], mer[:, 1]])])
    pts = []
    for r, t in mer:
        k = max(1, int(np.ceil(2 * pi * r / res)))
        ph = np.arange(k) * 2 * pi / k
        pts.append(np.column_stack([r * np.cos(ph), r * np.sin(ph), np.full(k, t)]))
    return np.concatenate(pts)


def _bubble_meridian(bub: Bubble, res):
    lam = bub.params.lam
    phi0 = np.arcsin(lam)
    k = max(2, int(np.ceil(bub.scale * (pi / 2 - phi0) / res)) + 1)
    phi = np.linspace(phi0, pi / 2, k)
    mer = np.column_stack([bub.scale * np.cos(phi), bub.scale * (np.sin(phi) - lam)])
    mer[0, 1] = 0.0
    mer[-1, 0] = 0.0
    return mer


def _profile_meridian(profile: ProfileSet, res):
    return _densify_polyline(np.column_stack([profile.radii, profile.heights]), res)


def boundary_samples(obj, n: int, res: float) -> np.ndarray:
    """Point samples at spacing ``<= res`` of the closed relative boundary."""
    if isinstance(obj, Bubble):
        pts = _revolve(_bubble_meridian(obj, res), n, res)
        pts[:, :-1] += np.array(obj.center)
        return pts
    if isinstance(obj, ProfileSet):
        return _revolve(_profile_meridian(obj, res), n, res)
    if isinstance(obj, VoxelSet):
        out = []
        for ax in range(obj.dim):
            plus, minus = exposed_faces(obj, ax)
            faces = plus | minus
            if ax == obj.dim - 1:
                # wall faces are not part of the relative boundary
                faces[(slice(None),) * ax + (0,)] = plus[(slice(None),) * ax + (0,)]
            idx = np.nonzero(faces)
            if idx[0].size == 0:
                continue
            ranges = []
            for a2 in range(obj.dim):
                e = obj.edges(a2)
                if a2 == ax:
                    ranges.append(None)
                    continue
                ranges.append((e[idx[a2]], e[idx[a2] + 1]))
            pos = obj.edges(ax)[idx[ax]]
            other = [a2 for a2 in range(obj.dim) if a2 != ax]
            kmax = max(1, int(np.ceil(max(np.max(ranges[a][1] - ranges[a][0]) for a in other) / res)))
            s = np.linspace(0.0, 1.0, kmax + 1)
            grids = np.meshgrid(*([s] * len(other)), indexing="ij")
            for g in zip(*[gg.ravel() for gg in grids]):
                p = np.empty((pos.size, obj.dim))
                p[:, ax] = pos
                for a2, gv in zip(other, g):
                    lo, hi = ranges[a2]
                    p[:, a2] = lo + gv * (hi - lo)
                out.append(p)
        if not out:
            raise DomainError("empty boundary")
        return np.unique(np.concatenate(out), axis=0)
    raise TypeError(f"unsupported set type {type(obj).__name__}")


def _default_resolution(obj, bubble):
    if isinstance(obj, VoxelSet):
        return obj.spacing / 2
    if isinstance(obj, ProfileSet):
        seg = np.hypot(np.diff(obj.heights), np.diff(obj.radii))
        return float(np.median(seg[seg > 0]))
    return bubble.scale * 1e-3


def _hausdorff(a, b):
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def hausdorff_boundary_distance(obj, bubble: Bubble, res: float | None = None) -> float:
    """Two-sided Hausdorff distance between closed relative boundaries.

    Profiles against a bubble on the axis are compared in the meridian
    half-plane, which is exact for sets of revolution about the same axis.
    """
    n = bubble.params.n
    if res is None:
        res = _default_resolution(obj, bubble)
    if isinstance(obj, ProfileSet) and not any(bubble.center):
        return _hausdorff(_profile_meridian(obj, res), _bubble_meridian(bubble, res))
    a = boundary_samples(obj, n, res)
    b = boundary_samples(bubble, n, res)
    return _hausdorff(a, b)


# ---------------------------------------------------------------- radial excess

def radial_excess_integral(obj, x0, n: int | None = None, sub: int = 2, azimuth: int = 128) -> float:
    """``∫ | |x - x0| - 1 |`` over the relative boundary.

    Profiles use 8-point Gauss rules on each (subdivided) meridian piece,
    exact azimuthal symmetry when ``x0`` is on the axis and a periodic
    trapezoid rule otherwise.  Voxel faces are split into ``sub^{n-1}``
    sub-faces evaluated at their midpoints.
    """
    x0 = np.asarray(x0, dtype=float)
    if isinstance(obj, Bubble):
        n = obj.params.n
        x0 = x0.copy()
        x0[:-1] -= np.array(obj.center)
        obj = bubble_profile(obj)
    if isinstance(obj, VoxelSet):
        total = 0.0
        for ax in range(obj.dim):
            plus, minus = exposed_faces(obj, ax)
            faces = plus | minus
            if ax == obj.dim - 1:
                faces[(slice(None),) * ax + (0,)] = plus[(slice(None),) * ax + (0,)]
            idx = np.nonzero(faces)
            if idx[0].size == 0:
                continue
            other = [a for a in range(obj.dim) if a != ax]
            s = (np.arange(sub) + 0.5) / sub
            grids = np.meshgrid(*([s] * len(other)), indexing="ij")
            area = np.ones(idx[0].size)
            for a in other:
                e = obj.edges(a)
                area = area * (e[idx[a] + 1] - e[idx[a]])
            for g in zip(*[gg.ravel() for gg in grids]):
                p = np.empty((idx[0].size, obj.dim))
                p[:, ax] = obj.edges(ax)[idx[ax]]
                for a, gv in zip(other, g):
                    e = obj.edges(a)
                    p[:, a] = e[idx[a]] + gv * (e[idx[a] + 1] - e[idx[a]])
                d = np.linalg.norm(p - x0, axis=1)
                total += float(np.sum(np.abs(d - 1.0) * area)) / sub ** len(other)
        return total
    if not isinstance(obj, ProfileSet):
        raise TypeError(f"unsupported set type {type(obj).__name__}")
    if n is None:
        raise DomainError("profile sets need the dimension n")
    mer = np.column_stack([obj.radii, obj.heights])
    seg = np.hypot(*np.diff(mer, axis=0).T)
    total_len = seg.sum()
    k = np.maximum(1, np.ceil(seg / (total_len / 2048)).astype(int))
    a_list, b_list = [], []
    for i in np.nonzero(seg > 0)[0]:
        s = np.linspace(0, 1, k[i] + 1)[:, None]
        pts = mer[i] + s * (mer[i + 1] - mer[i])
        a_list.append(pts[:-1])
        b_list.append(pts[1:])
    a, b = np.concatenate(a_list), np.concatenate(b_list)
    length = np.hypot(*(b - a).T)
    q = 0.5 * (a[:, None, :] + b[:, None, :]) + 0.5 * (b - a)[:, None, :] * _GX8[None, :, None]
    rho, t = q[..., 0], q[..., 1]
    w = 0.5 * length[:, None] * _GW8[None, :]
    if n == 2:
        dr = np.abs(np.hypot(rho - x0[0], t - x0[1]) - 1) + np.abs(np.hypot(-rho - x0[0], t - x0[1]) - 1)
        return float(np.sum(w * dr))
    if n != 3:
        raise DomainError("radial excess for profiles supports n = 2 or 3")
    if x0[0] == 0 and x0[1] == 0:
        f = np.abs(np.hypot(rho, t - x0[2]) - 1) * rho * 2 * pi
        return float(np.sum(w * f))
    ph = np.arange(azimuth) * 2 * pi / azimuth
    acc = np.zeros_like(rho)
    for p in ph:
        d = np.sqrt((rho * np.cos(p) - x0[0]) ** 2 + (rho * np.sin(p) - x0[1]) ** 2 + (t - x0[2]) ** 2)
        acc += np.abs(d - 1)
    return float(np.sum(w * acc * rho) * 2 * pi / azimuth)


# ---------------------------------------------------------------- report

@dataclass
class EvalReport:
    """All functionals of one set."""

    measures: MeasureTriple
    p_lambda: float
    deficit: float
    alpha: float
    alpha_center: list
    beta: float
    beta_center: list
    hausdorff: float

    def to_dict(self) -> dict:
        return {
            "volume": self.measures.volume,
            "rel_perimeter": self.measures.rel_perimeter,
            "wetted_area": self.measures.wetted_area,
            "p_lambda": self.p_lambda,
            "deficit": self.deficit,
            "alpha": self.alpha,
            "alpha_center": [float(x) for x in self.alpha_center],
            "beta": self.beta,
            "beta_center": [float(x) for x in self.beta_center],
            "hausdorff": self.hausdorff,
        }

    def check(self, lam: float, tol: float = 1e-10) -> list:
        """Names of violated report invariants (empty when all hold)."""
        bad = []
        m = self.measures
        if not (-tol <= self.alpha <= 2 + tol):
            bad.append("alpha in [0, 2]")
        if self.deficit < -max(tol, 1e-9):
            bad.append("deficit >= 0")
        if self.p_lambda < -tol:
            bad.append("p_lambda >= 0")
        if self.p_lambda < (1 - lam) / 2 * (m.rel_perimeter + m.wetted_area) - tol * max(1.0, self.p_lambda):
            bad.append("energy lower bound")
        if self.beta < -tol:
            bad.append("beta >= 0")
        return bad


def evaluate(obj, params: CapillarityParams, cfg: SearchConfig = DEFAULT_SEARCH,
             hausdorff_res: float | None = None) -> EvalReport:
    """Compute the full :class:`EvalReport` of a set."""
    m = measures(obj, params)
    if not m.volume > 0:
        raise DomainError("evaluation of a set with zero volume")
    p = capillarity_perimeter(m, params.lam)
    d = p / params.reference_energy(m.volume) - 1.0
    a, ac = asymmetry_alpha(obj, params, cfg)
    b, bc = asymmetry_beta(obj, params, cfg)
    bub = Bubble(params, m.volume, tuple(ac))
    hd = hausdorff_boundary_distance(obj, bub, hausdorff_res)
    return EvalReport(m, p, d, a, list(np.atleast_1d(ac)), b, list(np.atleast_1d(bc)), hd)
