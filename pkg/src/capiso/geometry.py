"""Set representations in the half-space {x_n > 0} and their measures.

Three kinds of sets are handled:

* :class:`Bubble`, the truncated ball with flat face on the wall,
* :class:`ProfileSet`, an axially symmetric set given by its slice radius
  as a piecewise-linear function of height,
* :class:`VoxelSet`, a finite union of axis-aligned cells.

The last coordinate is always the vertical one; the wall is {x_n = 0}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma, pi, sqrt, asin

import numpy as np
from scipy import integrate

from .errors import DomainError, ResourceError, SingularityError, ValidationError

QUAD_TOL = 1e-10
DEFAULT_CELL_BUDGET = 20_000_000


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (``omega_k``)."""
    if k < 0:
        raise DomainError(f"dimension must be nonnegative, got {k}")
    return pi ** (k / 2) / gamma(k / 2 + 1)


def _check_lambda_n(lam, n):
    if not (-1.0 < lam < 1.0):
        raise DomainError(f"lambda must lie in (-1, 1), got {lam}")
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n}")


@lru_cache(maxsize=256)
def _cos_power_integral(power: int, lam: float) -> float:
    # int_{asin lam}^{pi/2} cos^power(theta) d theta, i.e. the t = sin(theta)
    # form of int_lam^1 (1-t^2)^{(power-1)/2} dt, smooth at both ends
    val, _ = integrate.quad(
        lambda th: np.cos(th) ** power, asin(lam), pi / 2,
        epsabs=QUAD_TOL * 1e-3, epsrel=QUAD_TOL * 1e-3, limit=200,
    )
    return val


def unit_cap_volume(lam: float, n: int) -> float:
    """Volume of the unit cap ``{x in B_1 : x_n > lam}``.

    Parameters
    ----------
    lam : float
        Wetting parameter in (-1, 1).
    n : int
        Ambient dimension, at least 2.

    Returns
    -------
    float
        ``int_lam^1 omega_{n-1} (1 - t^2)^{(n-1)/2} dt``.
    """
    _check_lambda_n(lam, n)
    return unit_ball_volume(n - 1) * _cos_power_integral(int(n), float(lam))


def _unit_rel_perimeter(lam: float, n: int) -> float:
    return (n - 1) * unit_ball_volume(n - 1) * _cos_power_integral(int(n) - 2, float(lam))


def _unit_wetted_area(lam: float, n: int) -> float:
    return unit_ball_volume(n - 1) * (1.0 - lam * lam) ** ((n - 1) / 2)


@dataclass(frozen=True)
class CapillarityParams:
    """Wetting parameter and dimension with the constants of the unit cap."""

    lam: float
    n: int
    cap_volume: float = field(init=False)
    wetted_radius: float = field(init=False)
    r_small: float = field(init=False)
    r_big: float = field(init=False)
    ref_energy: float = field(init=False)

    def __post_init__(self):
        _check_lambda_n(self.lam, self.n)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lam", float(self.lam))
        cap = unit_cap_volume(self.lam, self.n)
        w = sqrt(1.0 - self.lam**2)
        object.__setattr__(self, "cap_volume", cap)
        object.__setattr__(self, "wetted_radius", w)
        object.__setattr__(self, "r_small", min(w, 1.0 - self.lam))
        object.__setattr__(self, "r_big", max(w, 1.0 - self.lam))
        object.__setattr__(self, "ref_energy", self.n * cap)

    def reference_energy(self, volume: float) -> float:
        """Energy of the optimal bubble of the given volume."""
        return self.n * self.cap_volume ** (1.0 / self.n) * volume ** ((self.n - 1) / self.n)


@dataclass(frozen=True)
class MeasureTriple:
    """Volume, relative perimeter in {x_n > 0} and wetted area on the wall."""

    volume: float
    rel_perimeter: float
    wetted_area: float


@dataclass(frozen=True)
class Bubble:
    """Optimal set: ball of radius ``scale`` centred at (center, -scale*lam), cut by the wall."""

    params: CapillarityParams
    volume: float
    center: tuple = None
    scale: float = field(init=False)
    ball_center_height: float = field(init=False)

    def __post_init__(self):
        if not (self.volume > 0 and np.isfinite(self.volume)):
            raise ValidationError(f"bubble volume must be positive, got {self.volume}")
        c = self.center
        if c is None:
            c = (0.0,) * (self.params.n - 1)
        c = tuple(float(x) for x in np.atleast_1d(c))
        if len(c) != self.params.n - 1:
            raise ValidationError("bubble center needs n-1 wall coordinates")
        object.__setattr__(self, "center", c)
        s = (self.volume / self.params.cap_volume) ** (1.0 / self.params.n)
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "ball_center_height", -s * self.params.lam)

    @property
    def ball_center(self) -> np.ndarray:
        return np.array(self.center + (self.ball_center_height,))

    @property
    def top(self) -> float:
        """Height of the apex."""
        return self.scale * (1.0 - self.params.lam)

    @property
    def trace_radius(self) -> float:
        return self.scale * self.params.wetted_radius

    def translated(self, center) -> "Bubble":
        return Bubble(self.params, self.volume, tuple(center))


def bubble_measures(bubble: Bubble) -> MeasureTriple:
    """Exact measures of a bubble (one-dimensional quadrature)."""
    p = bubble.params
    s = bubble.scale
    return MeasureTriple(
        volume=bubble.volume,
        rel_perimeter=s ** (p.n - 1) * _unit_rel_perimeter(p.lam, p.n),
        wetted_area=s ** (p.n - 1) * _unit_wetted_area(p.lam, p.n),
    )


def bubble_slice_radius(bubble: Bubble, t):
    """Radius of the horizontal slice of a bubble at height ``t`` (0 above the apex)."""
    t = np.asarray(t, dtype=float)
    rad = bubble.scale**2 - (t - bubble.ball_center_height) ** 2
    out = np.sqrt(np.clip(rad, 0.0, None))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- profiles

def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProfileSet:
    """Axially symmetric set ``{(x', t) : |x'| < rho(t)}``.

    ``rho`` is piecewise linear between the nodes ``heights``.  A height may
    repeat once: the pair of nodes then describes a horizontal annular face
    (a jump of the radius), which is how stacked cylinders are encoded.
    """

    heights: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        t = _readonly(self.heights)
        r = _readonly(self.radii)
        object.__setattr__(self, "heights", t)
        object.__setattr__(self, "radii", r)
        if t.ndim != 1 or t.shape != r.shape or t.size < 2:
            raise ValidationError("heights and radii must be 1-d arrays of equal length >= 2")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r))):
            raise ValidationError("profile contains non-finite values")
        if t[0] != 0.0:
            raise ValidationError("profile must start at height 0")
        dt = np.diff(t)
        if np.any(dt < 0):
            raise ValidationError("heights must be nondecreasing")
        if dt[0] <= 0:
            raise ValidationError("the first piece must have positive height")
        if np.any((dt[:-1] == 0) & (dt[1:] == 0)):
            raise ValidationError("a height may appear at most twice")
        if np.any(r < 0):
            raise ValidationError("radii must be nonnegative")
        if r[-1] != 0.0:
            raise ValidationError("profile must close at the top (final radius 0)")
        if not np.any((dt > 0) & ((r[:-1] > 0) | (r[1:] > 0))):
            raise ValidationError("profile has zero volume")

    @property
    def top(self) -> float:
        return float(self.heights[-1])

    def scaled(self, s: float) -> "ProfileSet":
        return ProfileSet(self.heights * s, self.radii * s)

    def rho(self, t):
        """Slice radius at height ``t`` (right limit at a step)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.heights, t, side="right")
        idx = np.clip(idx, 1, self.heights.size - 1)
        t0, t1 = self.heights[idx - 1], self.heights[idx]
        r0, r1 = self.radii[idx - 1], self.radii[idx]
        dt = np.where(t1 > t0, t1 - t0, 1.0)
        w = np.clip((t - t0) / dt, 0.0, 1.0)
        out = np.where((t < 0) | (t > self.top), 0.0, r0 + w * (r1 - r0))
        return float(out) if out.ndim == 0 else out


def _power_mean_linear(r0, r1, k: int):
    # int_0^1 (r0 (1-s) + r1 s)^k ds, exact and stable for r0 ~ r1
    if k == 0:
        return np.ones_like(np.asarray(r0, dtype=float))
    acc = np.zeros_like(np.asarray(r0, dtype=float))
    for j in range(k + 1):
        acc = acc + r0**j * r1 ** (k - j)
    return acc / (k + 1)


def _gauss_power_mean(r0, r1, k: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (x + 1.0)
    vals = (r0[:, None] * (1 - s) + r1[:, None] * s) ** k
    return 0.5 * vals @ w


def profile_volume(profile: ProfileSet, n: int, method: str = "exact") -> float:
    """Volume of a profile set.

    ``method="exact"`` uses the closed-form monomial mean on each piece,
    ``method="gauss"`` uses Gauss-Legendre quadrature of order ``n``; the
    two routes agree to rounding.
    """
    t, r = profile.heights, profile.radii
    dt = np.diff(t)
    if method == "exact":
        mean = _power_mean_linear(r[:-1], r[1:], n - 1)
    else:
        mean = _gauss_power_mean(r[:-1], r[1:], n - 1, max(2, n))
    return float(unit_ball_volume(n - 1) * np.sum(dt * mean))


def profile_measures(profile: ProfileSet, n: int) -> MeasureTriple:
    """Exact measures of a piecewise-linear profile revolved in R^n.

    Each linear piece is a frustum (or an annulus when its height is 0);
    its lateral area is ``(n-1) omega_{n-1} L * mean(rho^{n-2})`` with
    ``L`` the slant length.  Pieces with zero radius at both ends are gaps
    along the axis and contribute nothing.
    """
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n}")
    t, r = profile.heights, profile.radii
    dt, dr = np.diff(t), np.diff(r)
    om = unit_ball_volume(n - 1)
    slant = np.hypot(dt, dr)
    lateral = (n - 1) * om * slant * _power_mean_linear(r[:-1], r[1:], n - 2)
    # pieces on the axis bound nothing (matters for n = 2 where rho^0 = 1)
    lateral = np.where((r[:-1] == 0) & (r[1:] == 0), 0.0, lateral)
    return MeasureTriple(
        volume=profile_volume(profile, n),
        rel_perimeter=float(np.sum(lateral)),
        wetted_area=float(om * r[0] ** (n - 1)),
    )


def bubble_profile(bubble: Bubble, m: int = 4096) -> ProfileSet:
    """Profile of a bubble sampled at ``m`` nodes, uniform in the polar angle."""
    lam = bubble.params.lam
    phi = np.linspace(asin(lam), pi / 2, m)
    t = bubble.scale * (np.sin(phi) - lam)
    rho = bubble.scale * np.cos(phi)
    t[0], rho[-1] = 0.0, 0.0
    return ProfileSet(t, rho)


def mean_curvature_profile(profile: ProfileSet, s: float, n: int) -> float:
    """Signed mean curvature of the revolved surface at arclength ``s``.

    The generatrix ``gamma = (alpha, beta) = (rho, t)`` is traversed upwards
    and ``nu`` is its outward normal ``(beta', -alpha')``.  The returned value
    is ``<k_gamma, nu> - (n-2) beta'/alpha``, which is ``-(n-1)/R`` on a
    sphere of radius ``R``.  Derivatives come from the quadratic through the
    three nodes nearest to ``s`` in chord-length parametrisation.
    """
    p = np.column_stack([profile.radii, profile.heights])
    seg = np.hypot(*np.diff(p, axis=0).T)
    keep = np.concatenate([[True], seg > 0])
    p = p[keep]
    sig = np.concatenate([[0.0], np.cumsum(seg[seg > 0])])
    if not (0.0 <= s <= sig[-1]):
        raise DomainError(f"arclength {s} outside [0, {sig[-1]}]")
    k = int(np.clip(np.searchsorted(sig, s), 1, len(sig) - 2))
    if k + 1 < len(sig) - 1 and abs(sig[k + 1] - s) < abs(sig[k - 1] - s):
        k += 1
    idx = [k - 1, k, k + 1]
    x = sig[idx]
    d1 = np.zeros(2)
    d2 = np.zeros(2)
    a = 0.0
    for c in range(2):
        coef = np.polyfit(x - s, p[idx, c], 2)
        d2[c] = 2 * coef[0]
        d1[c] = coef[1]
        if c == 0:
            a = coef[2]
    if a <= 1e-12 * max(1.0, sig[-1]):
        raise SingularityError("mean curvature requested on the symmetry axis")
    speed = np.hypot(*d1)
    tb = d1[1] / speed
    kappa_left = (d1[0] * d2[1] - d1[1] * d2[0]) / speed**3
    return float(-kappa_left - (n - 2) * tb / a)


# ---------------------------------------------------------------- voxels

@dataclass(frozen=True, eq=False)
class VoxelSet:
    """Union of axis-aligned cells on a rectilinear grid.

    Parameters
    ----------
    occupancy : ndarray of bool
        Raster of shape ``(N_1, ..., N_n)``; the last axis is vertical.
    spacing : float
        Cell edge ``h`` (vertical edge, and wall-parallel edge unless
        ``widths`` overrides it).
    origin : sequence of float
        Lower corner of the grid.  The vertical entry must be 0 so that the
        bottom faces lie on the wall.
    widths : tuple or None
        Optional per-axis arrays of cell widths for wall-parallel axes
        (``None`` entries mean uniform ``spacing``).  Produced by reflection
        through a plane that cuts a cell.
    """

    occupancy: np.ndarray
    spacing: float
    origin: tuple = None
    widths: tuple = None

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=bool)
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        if occ.ndim not in (2, 3):
            raise ValidationError("voxel sets must have dimension 2 or 3")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValidationError("spacing must be positive")
        org = self.origin
        if org is None:
            org = (0.0,) * occ.ndim
        org = tuple(float(x) for x in org)
        if len(org) != occ.ndim:
            raise ValidationError("origin needs one entry per axis")
        if org[-1] != 0.0:
            raise ValidationError("the vertical origin must be 0 (bottom faces on the wall)")
        object.__setattr__(self, "origin", org)
        w = self.widths
        if w is not None:
            w = list(w) + [None] * (occ.ndim - len(w))
            out = []
            for ax, wa in enumerate(w):
                if wa is None:
                    out.append(None)
                    continue
                if ax == occ.ndim - 1:
                    raise ValidationError("the vertical axis must be uniform")
                wa = _readonly(wa)
                if wa.shape != (occ.shape[ax],) or np.any(wa <= 0):
                    raise ValidationError(f"bad widths on axis {ax}")
                out.append(wa)
            w = tuple(out) if any(x is not None for x in out) else None
        object.__setattr__(self, "widths", w)

    @property
    def dim(self) -> int:
        return self.occupancy.ndim

    @property
    def shape(self) -> tuple:
        return self.occupancy.shape

    @property
    def is_uniform(self) -> bool:
        return self.widths is None

    def axis_widths(self, axis: int) -> np.ndarray:
        if self.widths is not None and self.widths[axis] is not None:
            return self.widths[axis]
        return np.full(self.shape[axis], self.spacing)

    def edges(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.concatenate([[0.0], np.cumsum(self.axis_widths(axis))])

    def centers(self, axis: int) -> np.ndarray:
        e = self.edges(axis)
        return 0.5 * (e[:-1] + e[1:])

    def cell_volumes(self) -> np.ndarray:
        """Volumes of all cells (occupied or not), shape of the raster."""
        vol = np.ones(self.shape)
        for ax in range(self.dim):
            sh = [1] * self.dim
            sh[ax] = -1
            vol = vol * self.axis_widths(ax).reshape(sh)
        return vol

    def occupied_boxes(self):
        """Lower and upper corners of occupied cells, each of shape ``(N, dim)``."""
        idx = np.nonzero(self.occupancy)
        lo = np.empty((idx[0].size, self.dim))
        hi = np.empty_like(lo)
        for ax in range(self.dim):
            e = self.edges(ax)
            lo[:, ax] = e[idx[ax]]
            hi[:, ax] = e[idx[ax] + 1]
        return lo, hi

    def with_occupancy(self, occ) -> "VoxelSet":
        return VoxelSet(occ, self.spacing, self.origin, self.widths)

    def scaled(self, s: float) -> "VoxelSet":
        w = None
        if self.widths is not None:
            w = tuple(None if a is None else a * s for a in self.widths)
        return VoxelSet(self.occupancy, self.spacing * s, tuple(o * s for o in self.origin), w)

    def translated(self, shift) -> "VoxelSet":
        """Translate along the wall by ``shift`` (n-1 coordinates)."""
        o = tuple(a + float(b) for a, b in zip(self.origin[:-1], shift)) + (0.0,)
        return VoxelSet(self.occupancy, self.spacing, o, self.widths)

    def face_areas(self, axis: int) -> np.ndarray:
        """Area of the cell faces orthogonal to ``axis``, broadcastable to the raster."""
        a = np.ones([1] * self.dim)
        for ax in range(self.dim):
            if ax == axis:
                continue
            sh = [1] * self.dim
            sh[ax] = -1
            a = a * self.axis_widths(ax).reshape(sh)
        return a


def exposed_faces(voxel: VoxelSet, axis: int):
    """Exposed faces orthogonal to ``axis``.

    Returns two boolean arrays of shape ``shape`` with ``shape[axis] + 1``
    entries along ``axis``: faces whose occupied side is below (outward
    normal ``+e_axis``) and above (outward normal ``-e_axis``).
    """
    occ = voxel.occupancy
    pad = [(0, 0)] * voxel.dim
    pad[axis] = (1, 1)
    o = np.pad(occ, pad)
    lo = np.take(o, np.arange(o.shape[axis] - 1), axis=axis)
    hi = np.take(o, np.arange(1, o.shape[axis]), axis=axis)
    return lo & ~hi, hi & ~lo


def voxel_measures(voxel: VoxelSet) -> MeasureTriple:
    """Exact measures of the polyhedral cell union."""
    occ = voxel.occupancy
    vol = float(np.sum(voxel.cell_volumes()[occ]))
    rel = 0.0
    wet = 0.0
    for ax in range(voxel.dim):
        area = voxel.face_areas(ax)
        plus, minus = exposed_faces(voxel, ax)
        if ax == voxel.dim - 1:
            bottom = np.take(minus, [0], axis=ax)
            wet = float(np.sum(np.broadcast_to(area, bottom.shape)[bottom]))
            minus = minus.copy()
            idx = [slice(None)] * voxel.dim
            idx[ax] = 0
            minus[tuple(idx)] = False
        rel += float(np.sum(np.broadcast_to(area, plus.shape)[plus]))
        rel += float(np.sum(np.broadcast_to(area, minus.shape)[minus]))
    return MeasureTriple(vol, rel, wet)


def voxelize(profile: ProfileSet, n: int, h: float, cell_budget: int = DEFAULT_CELL_BUDGET) -> VoxelSet:
    """Rasterise a profile set: a cell is occupied iff its centre lies in the set.

    The grid is symmetric about the axis and starts at the wall.
    """
    if n not in (2, 3):
        raise DomainError("voxelize supports n = 2 or 3")
    if not h > 0:
        raise DomainError("h must be positive")
    rmax = float(np.max(profile.radii))
    half = max(1, int(np.ceil(rmax / h)))
    m = max(1, int(np.ceil(profile.top / h)))
    shape = (2 * half,) * (n - 1) + (m,)
    if int(np.prod([float(s) for s in shape])) > cell_budget:
        raise ResourceError(f"raster {shape} exceeds the cell budget {cell_budget}")
    c = (np.arange(2 * half) + 0.5 - half) * h
    tc = (np.arange(m) + 0.5) * h
    rho = profile.rho(tc)
    rho = np.where(tc < profile.top, rho, 0.0)
    if n == 2:
        occ = np.abs(c)[:, None] < rho[None, :]
    else:
        rr = np.hypot(c[:, None], c[None, :])
        occ = rr[:, :, None] < rho[None, None, :]
    return VoxelSet(occ, h, (-half * h,) * (n - 1) + (0.0,))
