"""Reduction steps: normalisation, truncation to bounded sets, reflection
bisection and Schwarz symmetrisation."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, PreconditionError
from .functionals import (
    DEFAULT_SEARCH, SearchConfig, asymmetry_alpha, capillarity_perimeter,
    deficit, measures, psi_concave, _profile_cumulative_volume, _row_areas,
)
from .geometry import (
    Bubble, CapillarityParams, ProfileSet, VoxelSet, unit_ball_volume, voxel_measures,
)


def normalize(obj, params: CapillarityParams, target_volume: float | None = None):
    """Scale a set uniformly to ``target_volume`` (default ``|B^lam|``).

    Voxel sets are scaled by their spacing, so the result is exact and all
    scale-invariant functionals are unchanged.
    """
    if target_volume is None:
        target_volume = params.cap_volume
    v = measures(obj, params).volume
    if not v > 0:
        raise DomainError("cannot normalise a set with zero volume")
    s = (target_volume / v) ** (1.0 / params.n)
    if isinstance(obj, Bubble):
        return Bubble(obj.params, target_volume, tuple(c * s for c in obj.center))
    return obj.scaled(s)


def schwarz_symmetrize(voxel: VoxelSet) -> ProfileSet:
    """Replace every voxel row by the centred ball of the same area.

    The result is a stack of cylinders, encoded as a profile whose heights
    repeat at row boundaries.
    """
    n = voxel.dim
    rows = _row_areas(voxel)
    nz = np.nonzero(rows > 0)[0]
    if nz.size == 0:
        raise DomainError("cannot symmetrise an empty voxel set")
    rows = rows[: nz[-1] + 1]
    rho = (rows / unit_ball_volume(n - 1)) ** (1.0 / (n - 1))
    h = voxel.spacing
    m = rows.size
    heights = [0.0]
    radii = [rho[0]]
    for k in range(1, m + 1):
        nxt = rho[k] if k < m else 0.0
        heights += [k * h, k * h]
        radii += [rho[k - 1], nxt]
    return ProfileSet(np.array(heights), np.array(radii))


def _column_volumes(voxel: VoxelSet, axis: int) -> np.ndarray:
    vol = np.where(voxel.occupancy, voxel.cell_volumes(), 0.0)
    other = tuple(a for a in range(voxel.dim) if a != axis)
    return np.sum(vol, axis=other)


def median_cut(voxel: VoxelSet, axis: int):
    """Column index ``k``, fraction ``f`` and coordinate ``a`` of the plane
    ``{x_axis = a}`` that halves the volume.

    The plane cuts column ``k`` at fraction ``f`` of its width; the running
    volume is linear inside a column, so the cut is exact.
    """
    col = _column_volumes(voxel, axis)
    total = col.sum()
    if not total > 0:
        raise DomainError("cannot bisect an empty set")
    cum = np.concatenate([[0.0], np.cumsum(col)])
    k = int(min(np.searchsorted(cum, total / 2, side="right") - 1, col.size - 1))
    f = (total / 2 - cum[k]) / col[k] if col[k] > 0 else 0.0
    # snap rounding noise so symmetric inputs keep a uniform grid
    f = 0.0 if f < 1e-12 else (1.0 if f > 1 - 1e-12 else f)
    a = float(voxel.edges(axis)[k] + f * voxel.axis_widths(axis)[k])
    return k, f, a


def bisect_reflect(voxel: VoxelSet, axis: int):
    """Split by the wall-orthogonal hyperplane ``{x_axis = a}`` halving the volume.

    Each half is united with its mirror image.  When the plane cuts a cell
    column, the column is kept with the matching fraction of its width (the
    output grid is then rectilinear), so both outputs have exactly the
    input volume.

    Returns
    -------
    (VoxelSet, VoxelSet)
        The sets built from the half below ``a`` and above ``a``.
    """
    if not (0 <= axis < voxel.dim - 1):
        raise DomainError("only wall-parallel axes can be reflected")
    k, f, a = median_cut(voxel, axis)
    col = _column_volumes(voxel, axis)
    w = voxel.axis_widths(axis)
    e = voxel.edges(axis)
    occ = voxel.occupancy
    take = lambda idx: np.take(occ, idx, axis=axis)
    h = voxel.spacing

    def build(cols, widths, left):
        o = np.concatenate(cols, axis=axis)
        ws = np.concatenate(widths)
        org = list(voxel.origin)
        org[axis] = left
        wl = list(voxel.widths) if voxel.widths is not None else [None] * voxel.dim
        wl[axis] = None if np.allclose(ws, h, rtol=0, atol=1e-12 * h) else ws
        return VoxelSet(o, h, tuple(org), tuple(wl))

    left_idx = np.arange(k)
    cols, widths = [take(left_idx)], [w[left_idx]]
    if f == 1:
        # plane on the right edge of column k: keep the grid uniform
        cols.append(take([k, k]))
        widths.append([w[k], w[k]])
    elif f > 0:
        cols.append(take([k]))
        widths.append([2 * f * w[k]])
    cols.append(take(left_idx[::-1]))
    widths.append(w[left_idx[::-1]])
    minus = build(cols, widths, e[0])

    right_idx = np.arange(k + 1, col.size)
    cols, widths = [take(right_idx[::-1])], [w[right_idx[::-1]]]
    if f == 0:
        cols.append(take([k, k]))
        widths.append([w[k], w[k]])
    elif f < 1:
        cols.append(take([k]))
        widths.append([2 * (1 - f) * w[k]])
    cols.append(take(right_idx))
    widths.append(w[right_idx])
    left = a - (np.sum(w[right_idx]) + (1 - f) * w[k])
    plus = build(cols, widths, left)
    return minus, plus


@dataclass
class ReflectionStep:
    axis: int
    plane: float
    alpha_parent: float
    alpha_minus: float
    alpha_plus: float
    chosen: str
    meets_third: bool


def symmetrize_axes(voxel: VoxelSet, params: CapillarityParams, cfg: SearchConfig = DEFAULT_SEARCH):
    """Bisect and reflect along every wall-parallel axis in turn.

    At each step the half whose asymmetry is at least a third of the
    parent's is kept (the first such, minus before plus); if neither
    qualifies the more asymmetric one is kept and the step is flagged.

    Returns
    -------
    VoxelSet
        Set symmetric about one hyperplane per wall-parallel axis.
    list of ReflectionStep
    """
    steps = []
    cur = voxel
    for ax in range(voxel.dim - 1):
        plane = median_cut(cur, ax)[2]
        a0, _ = asymmetry_alpha(cur, params, cfg)
        minus, plus = bisect_reflect(cur, ax)
        am, _ = asymmetry_alpha(minus, params, cfg)
        ap, _ = asymmetry_alpha(plus, params, cfg)
        if am >= a0 / 3:
            chosen, ok = "minus", True
        elif ap >= a0 / 3:
            chosen, ok = "plus", True
        else:
            chosen, ok = ("minus" if am >= ap else "plus"), False
        cur = minus if chosen == "minus" else plus
        steps.append(ReflectionStep(ax, plane, a0, am, ap, chosen, ok))
    return cur, steps


def four_reflections(voxel: VoxelSet, params: CapillarityParams, cfg: SearchConfig = DEFAULT_SEARCH):
    """All four half-reflections across two orthogonal median planes (3-d sets).

    Returns a list of ``(axis, side, set, alpha)`` sorted so that the
    candidate with the largest asymmetry comes first.
    """
    if voxel.dim != 3:
        raise DomainError("four reflections need two wall-parallel axes")
    out = []
    for ax in (0, 1):
        minus, plus = bisect_reflect(voxel, ax)
        for side, s in (("minus", minus), ("plus", plus)):
            out.append((ax, side, s, asymmetry_alpha(s, params, cfg)[0]))
    out.sort(key=lambda r: (-r[3], r[0], r[1]))
    return out


# ---------------------------------------------------------------- truncation

@dataclass
class TruncationRecord:
    """Bookkeeping of one truncation-and-rescale run."""

    axes: list = field(default_factory=list)
    sigma: float = 1.0
    pre_deficit: float = 0.0
    post_deficit: float = 0.0
    pre_volume: float = 0.0
    post_volume: float = 0.0
    noop: bool = False
    notes: list = field(default_factory=list)
    box: list = field(default_factory=list)
    deficit_ratio: float | None = None
    alpha_pre: float | None = None
    alpha_post: float | None = None
    alpha_constant: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def small_deficit_gate(n: int) -> float:
    """Largest deficit accepted by :func:`truncate_and_rescale`."""
    return (2.0 ** (1.0 / n) - 1.0) / 4.0


def _psi_level(d: float, n: int) -> float:
    # s in (0, 1/2] with psi(s) = 2 d; psi is increasing there
    target = 2.0 * d
    top = psi_concave(0.5, n)
    if target >= top:
        return 0.5
    return brentq(lambda s: psi_concave(s, n) - target, 0.0, 0.5, xtol=1e-15)


def _inverse_cumulative(edges, cum, level):
    # piecewise-linear inverse of the running volume
    j = int(np.clip(np.searchsorted(cum, level, side="left"), 1, cum.size - 1))
    c0, c1 = cum[j - 1], cum[j]
    f = 0.0 if c1 == c0 else (level - c0) / (c1 - c0)
    return edges[j - 1] + f * (edges[j] - edges[j - 1]), j - 1


def _truncate_voxel_axis(vox: VoxelSet, params, ax, d):
    vol = voxel_measures(vox).volume
    cap = params.cap_volume
    thr = params.n * cap * d / 2.0
    col = _column_volumes(vox, ax)
    w = vox.axis_widths(ax)
    e = vox.edges(ax)
    slice_area = col / w
    cum = np.concatenate([[0.0], np.cumsum(col)])
    s1 = _psi_level(d, params.n)
    vertical = ax == vox.dim - 1
    t1, j1 = _inverse_cumulative(e, cum, s1 * cap)
    t2, j2 = _inverse_cumulative(e, cum, (1 - s1) * cap)
    lo, hi = 0, col.size - 1
    if not vertical:
        for j in range(j1, -1, -1):
            if slice_area[j] <= thr:
                lo = j
                break
    for j in range(j2, col.size):
        if slice_area[j] <= thr and (not vertical or cum[j] < vol):
            hi = j
            break
    rec = {"axis": ax, "t1": float(t1), "t2": float(t2), "threshold": float(thr),
           "tau1": float(e[lo]) if not vertical else 0.0, "tau2": float(e[hi + 1])}
    occ = vox.occupancy.copy()
    idx = [slice(None)] * vox.dim
    if lo > 0:
        idx[ax] = slice(0, lo)
        occ[tuple(idx)] = False
    if hi < col.size - 1:
        idx[ax] = slice(hi + 1, None)
        occ[tuple(idx)] = False
    out = vox.with_occupancy(occ)
    kept = voxel_measures(out).volume
    sigma = (cap / kept) ** (1.0 / params.n)
    rec.update(removed_volume=float(vol - kept), sigma=float(sigma))
    return out.scaled(sigma), rec, sigma


def _truncate_profile_vertical(profile: ProfileSet, params, d):
    n = params.n
    cap = params.cap_volume
    om = unit_ball_volume(n - 1)
    thr = n * cap * d / 2.0
    cum = _profile_cumulative_volume(profile, n)
    vol = cum[-1]
    s1 = _psi_level(d, n)
    t = profile.heights
    t1, _ = _inverse_cumulative(t, cum, s1 * cap)
    t2, _ = _inverse_cumulative(t, cum, (1 - s1) * cap)
    v = om * profile.radii ** (n - 1)
    rec = {"axis": n - 1, "t1": float(t1), "t2": float(t2), "threshold": float(thr), "tau1": 0.0}
    cut = None
    # first height >= t2 with slice area <= thr and mass above it
    start = int(np.searchsorted(t, t2, side="left"))
    if start > 0 and np.interp(t2, t, v) <= thr:
        cut = t2
    else:
        for k in range(max(start, 1), t.size):
            if v[k] <= thr:
                a, b = v[k - 1], v[k]
                rt = (thr / om) ** (1.0 / (n - 1))
                r0, r1 = profile.radii[k - 1], profile.radii[k]
                f = 1.0 if r0 == r1 else np.clip((r0 - rt) / (r0 - r1), 0.0, 1.0)
                cut = max(t2, t[k - 1] + f * (t[k] - t[k - 1])) if b < a else t[k]
                break
    if cut is None or cut >= profile.top or np.interp(cut, cum * 0 + t, cum) >= vol:
        rec.update(tau2=float(profile.top), removed_volume=0.0, sigma=1.0)
        return profile.scaled((cap / vol) ** (1.0 / n)), rec, (cap / vol) ** (1.0 / n)
    keep = t < cut
    rc = float(profile.rho(cut)) if cut not in t else float(profile.radii[np.searchsorted(t, cut)])
    heights = np.concatenate([t[keep], [cut, cut]])
    radii = np.concatenate([profile.radii[keep], [rc, 0.0]])
    out = ProfileSet(heights, radii)
    kept = _profile_cumulative_volume(out, n)[-1]
    sigma = (cap / kept) ** (1.0 / n)
    rec.update(tau2=float(cut), removed_volume=float(vol - kept), sigma=float(sigma))
    return out.scaled(sigma), rec, sigma


def _bounding_box(obj, params):
    if isinstance(obj, ProfileSet):
        r = float(np.max(obj.radii))
        return [[-r, r]] * (params.n - 1) + [[0.0, obj.top]]
    occ = obj.occupancy
    box = []
    for ax in range(obj.dim):
        other = tuple(a for a in range(obj.dim) if a != ax)
        nz = np.nonzero(np.any(occ, axis=other))[0]
        e = obj.edges(ax)
        box.append([float(e[nz[0]]), float(e[nz[-1] + 1])])
    return box


def truncate_and_rescale(obj, params: CapillarityParams, vol_tol: float = 1e-9,
                         zero_tol: float = 1e-8, compute_alpha: bool = False,
                         cfg: SearchConfig = DEFAULT_SEARCH, enforce_gate: bool = True):
    """Cut a near-optimal set to a bounded one and rescale to ``|B^lam|``.

    For each wall-parallel axis the running volume ``g`` locates ``t1 < t2``
    with ``psi(g(t1)) = psi(g(t2)) = 2D``; the set is cut at the nearest
    cell boundaries outside ``[t1, t2]`` where the slice area drops to
    ``n |B^lam| D / 2`` and rescaled.  The vertical axis is cut from above
    only.  Profiles are cut along the vertical axis only, since a
    wall-parallel cut leaves the class of axially symmetric sets.

    Staircase rasters of round shapes have deficits far above the gate, so
    ``enforce_gate=False`` runs the construction anyway (noted in the
    record) as long as ``2D`` is in the range of ``psi``.

    Returns
    -------
    set, TruncationRecord
    """
    m = measures(obj, params)
    if abs(m.volume - params.cap_volume) > vol_tol * params.cap_volume:
        raise PreconditionError("normalise the set to the unit cap volume first")
    d0 = capillarity_perimeter(m, params.lam) / params.reference_energy(m.volume) - 1.0
    gate = small_deficit_gate(params.n)
    rec = TruncationRecord(pre_deficit=d0, pre_volume=m.volume)
    if d0 >= gate:
        if enforce_gate or 2 * d0 >= psi_concave(0.5, params.n):
            raise PreconditionError(f"deficit {d0:.6g} is above the small-deficit gate {gate:.6g}")
        rec.notes.append(f"gate {gate:.6g} bypassed at deficit {d0:.6g}")
    if d0 <= zero_tol:
        rec.noop = True
        rec.post_deficit = d0
        rec.post_volume = m.volume
        rec.notes.append("deficit vanishes: identity transform")
        rec.box = _bounding_box(obj, params) if not isinstance(obj, Bubble) else []
        return obj, rec
    cur = obj
    sigma = 1.0
    if isinstance(cur, VoxelSet):
        for ax in range(cur.dim):
            d = deficit(cur, params)
            if d <= zero_tol:
                rec.notes.append(f"axis {ax}: deficit vanished, skipped")
                continue
            cur, r, s = _truncate_voxel_axis(cur, params, ax, d)
            r["deficit_before"] = float(d)
            rec.axes.append(r)
            sigma *= s
    elif isinstance(cur, ProfileSet):
        rec.notes.append("wall-parallel axes skipped for an axially symmetric set")
        cur, r, s = _truncate_profile_vertical(cur, params, d0)
        r["deficit_before"] = float(d0)
        rec.axes.append(r)
        sigma *= s
    else:
        raise DomainError("truncation applies to profile or voxel sets")
    rec.sigma = float(sigma)
    rec.noop = all(r["removed_volume"] == 0 for r in rec.axes)
    mm = measures(cur, params)
    rec.post_volume = mm.volume
    rec.post_deficit = capillarity_perimeter(mm, params.lam) / params.reference_energy(mm.volume) - 1.0
    rec.deficit_ratio = rec.post_deficit / d0
    rec.box = _bounding_box(cur, params)
    if compute_alpha:
        a0 = asymmetry_alpha(obj, params, cfg)[0]
        a1 = asymmetry_alpha(cur, params, cfg)[0]
        rec.alpha_pre, rec.alpha_post = a0, a1
        rec.alpha_constant = (a0 - a1) / d0
    return cur, rec


@dataclass
class StageRow:
    stage: str
    volume: float
    p_lambda: float
    deficit: float
    alpha: float


def reduction_pipeline(obj, params: CapillarityParams, cfg: SearchConfig = DEFAULT_SEARCH,
                       truncate: str = "auto"):
    """Normalise, truncate, symmetrise across wall-parallel axes and Schwarz-symmetrise.

    ``truncate`` is ``"auto"`` (a gate refusal is recorded and the stage
    skipped), ``"require"`` (a refusal raises) or ``"off"``.  Profile inputs
    are already symmetric and skip the reflection and Schwarz stages.

    Returns
    -------
    dict
        ``stages`` (list of :class:`StageRow`), ``sets`` (stage name to set),
        ``truncation`` (:class:`TruncationRecord` or None), ``refusal``
        (message or None), ``reflections``.
    """
    if truncate not in ("auto", "require", "off"):
        raise DomainError(f"unknown truncation mode {truncate!r}")
    sets = {}
    stages = []

    def row(name, s):
        m = measures(s, params)
        p = capillarity_perimeter(m, params.lam)
        d = p / params.reference_energy(m.volume) - 1.0
        a = asymmetry_alpha(s, params, cfg)[0]
        stages.append(StageRow(name, m.volume, p, d, a))
        sets[name] = s

    row("input", obj)
    cur = normalize(obj, params)
    row("normalized", cur)
    trec, refusal = None, None
    if truncate != "off":
        try:
            cur, trec = truncate_and_rescale(cur, params)
            row("truncated", cur)
        except PreconditionError as e:
            if truncate == "require":
                raise
            refusal = str(e)
    refl = []
    if isinstance(cur, VoxelSet):
        cur, refl = symmetrize_axes(cur, params, cfg)
        row("reflected", cur)
        cur = schwarz_symmetrize(cur)
        row("schwarz", cur)
    cur = normalize(cur, params)
    row("final", cur)
    return {"stages": stages, "sets": sets, "truncation": trec, "refusal": refusal, "reflections": refl}
