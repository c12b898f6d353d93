"""Perturbation families, sweeps, exponent fits, random corpora and brute-force
checks of the discrete lemmas."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre
from scipy.stats import linregress

from .errors import DomainError, GenerationError
from .functionals import (
    DEFAULT_SEARCH, SearchConfig, asymmetry_alpha, asymmetry_beta, deficit,
    hausdorff_boundary_distance, measures, voxel_alpha_search,
)
from .geometry import Bubble, CapillarityParams, ProfileSet, VoxelSet, profile_volume, voxelize


def pmap(fn, items, jobs: int = 1):
    """Ordered map, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------- perturbations

@dataclass(frozen=True)
class PerturbationSpec:
    """Radial perturbation ``phi = phi_lam (1 + eps psi)`` of the unit bubble.

    ``mode`` is a Legendre index ``k >= 1`` (``psi = P_k(cos theta)``, theta
    the angle to the vertical axis) or ``"edge"`` for a bump at the contact
    line.
    """

    mode: int | str = 2
    volume_renormalize: bool = True
    nodes: int = 4096

    def shape(self, theta):
        if self.mode == "edge":
            return np.exp(-(((np.pi / 2 - theta) / 0.2) ** 2))
        k = int(self.mode)
        if k < 1:
            raise DomainError("Legendre modes start at 1")
        return eval_legendre(k, np.cos(theta))


def bubble_radial_graph(lam: float, theta):
    """Distance from the origin to the unit bubble's boundary in direction ``theta``."""
    c = np.cos(theta)
    return -lam * c + np.sqrt(lam * lam * c * c + 1.0 - lam * lam)


def _raw_profile(params, spec, eps):
    # nodes equispaced in the angle about the ball centre, as for the bubble itself
    a = np.linspace(math.asin(params.lam), np.pi / 2, spec.nodes)
    theta = np.arctan2(np.cos(a), np.sin(a) - params.lam)
    theta[0], theta[-1] = np.pi / 2, 0.0
    phi = bubble_radial_graph(params.lam, theta) * (1.0 + eps * spec.shape(theta))
    return theta, phi, phi * np.cos(theta), phi * np.sin(theta)


def _is_graph(phi, t):
    return bool(np.all(phi > 0) and np.all(np.diff(t) > 0))


def eps_max(params: CapillarityParams, spec: PerturbationSpec, hi: float = 1.0) -> float:
    """Largest amplitude keeping the profile a positive single-valued graph.

    Doubling then bisection; ``inf`` when no amplitude up to 1e3 fails.
    """
    lo = 0.0
    while True:
        _, phi, t, _ = _raw_profile(params, spec, hi)
        if not _is_graph(phi, t):
            break
        if hi >= 1e3:
            return math.inf
        lo, hi = hi, 2 * hi
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        _, phi, t, _ = _raw_profile(params, spec, mid)
        lo, hi = (mid, hi) if _is_graph(phi, t) else (lo, mid)
    return lo


def graph_perturbation_family(params: CapillarityParams, spec: PerturbationSpec, eps: float) -> ProfileSet:
    """Profile of the perturbed bubble, rescaled to ``|B^lam|`` when requested."""
    if eps < 0:
        raise DomainError("amplitude must be nonnegative")
    _, phi, t, rho = _raw_profile(params, spec, eps)
    if not _is_graph(phi, t):
        raise GenerationError(f"amplitude {eps} leaves the graph class", eps_max=eps_max(params, spec))
    t = t - t[0]
    rho = rho.copy()
    rho[-1] = 0.0
    prof = ProfileSet(t, rho)
    if spec.volume_renormalize:
        v = profile_volume(prof, params.n)
        prof = prof.scaled((params.cap_volume / v) ** (1.0 / params.n))
    return prof


def perturbation_c1_distance(params: CapillarityParams, spec: PerturbationSpec, eps: float) -> float:
    """``sup |phi - phi_lam| + sup |phi' - phi_lam'|`` over the half sphere."""
    theta, phi, t, rho = _raw_profile(params, spec, eps)
    base = bubble_radial_graph(params.lam, theta)
    if spec.volume_renormalize:
        v = profile_volume(ProfileSet(t - t[0], np.append(rho[:-1], 0.0)), params.n)
        phi = phi * (params.cap_volume / v) ** (1.0 / params.n)
    d = phi - base
    return float(np.max(np.abs(d)) + np.max(np.abs(np.gradient(d, theta))))


# ---------------------------------------------------------------- sweeps

SWEEP_COLUMNS = ("eps", "volume", "p_lambda", "deficit", "alpha", "beta", "hausdorff", "r1", "r2",
                 "alpha2_over_deficit", "beta_ratio")


@dataclass
class SweepTable:
    rows: list
    meta: dict = field(default_factory=dict)
    failed: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = SWEEP_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def _ratio(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return a / b


def _sweep_row(args):
    params, spec, eps, rep, h, cfg, with_abp = args
    prof = graph_perturbation_family(params, spec, eps)
    obj = prof if rep == "profile" else voxelize(prof, params.n, h)
    m = measures(obj, params)
    p = m.rel_perimeter - params.lam * m.wetted_area
    d = p / params.reference_energy(m.volume) - 1.0
    a = asymmetry_alpha(obj, params, cfg)[0]
    b = asymmetry_beta(obj, params, cfg)[0]
    hd = hausdorff_boundary_distance(obj, Bubble(params, m.volume))
    r1 = r2 = math.nan
    if with_abp:
        from .abp import run_abp
        from .symmetrize import normalize
        vx = obj if rep == "voxel" else voxelize(prof, params.n, h)
        rep_abp = run_abp(normalize(vx, params), params)[0]
        r1, r2 = rep_abp.r1, rep_abp.r2
    dpos = max(d, 0.0)
    a2d = _ratio(a * a, dpos) if eps > 0 else math.nan
    bnd = max(dpos, dpos ** (1.0 / (2 * params.n)))
    return (eps, m.volume, p, d, a, b, hd, r1, r2, a2d, _ratio(b, bnd))


def sweep(params: CapillarityParams, spec: PerturbationSpec, eps_schedule, rep: str = "profile",
          h: float = 0.005, cfg: SearchConfig = DEFAULT_SEARCH, with_abp: bool = False,
          jobs: int = 1) -> SweepTable:
    """Evaluate every functional along the family, in increasing amplitude."""
    eps_schedule = sorted(float(e) for e in eps_schedule)
    table = SweepTable([], {"lambda": params.lam, "n": params.n, "mode": spec.mode, "rep": rep,
                            "h": h, "nodes": spec.nodes, "with_abp": with_abp})
    good = []
    for e in eps_schedule:
        try:
            graph_perturbation_family(params, spec, e)
            good.append(e)
        except GenerationError as err:
            table.failed.append({"eps": e, "error": str(err), "eps_max": err.eps_max})
    table.rows = pmap(_sweep_row, [(params, spec, e, rep, h, cfg, with_abp) for e in good], jobs)
    return table


def fit_loglog(table_or_x, x_col=None, y_col=None):
    """Least-squares slope of ``log y`` against ``log x`` and its standard error.

    Accepts a :class:`SweepTable` with column names or two arrays.
    """
    if isinstance(table_or_x, SweepTable):
        x, y = table_or_x.column(x_col), table_or_x.column(y_col)
    else:
        x, y = np.asarray(table_or_x, dtype=float), np.asarray(x_col, dtype=float)
    if x.size < 4:
        raise DomainError("need at least 4 points")
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise DomainError("log-log fit needs positive data")
    r = linregress(np.log(x), np.log(y))
    return float(r.slope), float(r.stderr)


# ---------------------------------------------------------------- 1-d sets

@dataclass(frozen=True)
class Interval1DSet:
    """Finite union of disjoint closed intervals in ``[0, inf)``."""

    intervals: tuple

    @classmethod
    def from_pairs(cls, pairs):
        iv = sorted((float(a), float(b)) for a, b in pairs if b > a)
        merged = []
        for a, b in iv:
            if a < 0:
                raise DomainError("intervals must lie in [0, inf)")
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return cls(tuple(merged))

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def boundary(self) -> list:
        """Reduced boundary in ``(0, inf)`` (the endpoint 0 is not a boundary point)."""
        pts = []
        for a, b in self.intervals:
            if a > 0:
                pts.append(a)
            pts.append(b)
        return pts

    def moment(self, n: int, lo: float = 0.0, hi: float = math.inf) -> float:
        """``int_{E cap [lo, hi]} t^{n-1} dt`` in closed form."""
        s = 0.0
        for a, b in self.intervals:
            a, b = max(a, lo), min(b, hi)
            if b > a:
                s += (b**n - a**n) / n
        return s


def _mono(n, a, b):
    return (b**n - a**n) / n if b > a else 0.0


def lemma1d_terms(E: Interval1DSet, n: int, l: float, r_small: float):
    """Left side ``int_{E sym [0,l]} t^{n-1}`` and the bracket on the right."""
    lhs = E.moment(n, l) + _mono(n, 0.0, l) - E.moment(n, 0.0, l)
    half = r_small / 2
    bracket = _mono(n, 0.0, half) - E.moment(n, 0.0, half)
    bracket += sum(t ** (n - 1) * abs(l - t) for t in E.boundary())
    return lhs, bracket


def random_interval_set(rng, max_intervals: int = 6, top: float = 3.0) -> Interval1DSet:
    k = int(rng.integers(0, max_intervals + 1))
    ends = np.sort(rng.uniform(0.0, top, size=2 * k))
    return Interval1DSet.from_pairs(zip(ends[0::2], ends[1::2]))


@dataclass
class FitRecord:
    """Fit-then-validate record for an empirical constant."""

    fitted: float
    held_out: float
    trials: int
    worst: dict = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        return math.isfinite(self.fitted) and self.held_out <= 3.0 * self.fitted

    def to_dict(self) -> dict:
        return {"fitted": self.fitted, "held_out": self.held_out, "trials": self.trials,
                "stable": self.stable, "worst": self.worst}


def lemma1d_check(params: CapillarityParams, l: float, trials: int = 10_000, seed: int = 0) -> FitRecord:
    """Largest ratio of the 1-d inequality over random interval sets.

    Half the trials fit the constant, the other half are held out.
    """
    lo, hi = 7 / 8 * params.r_small, 9 / 8 * params.r_big
    if not (lo - 1e-15 <= l <= hi + 1e-15):
        raise DomainError(f"l = {l} outside [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    sets = []
    for i in range(trials):
        E = random_interval_set(rng)
        lhs, br = lemma1d_terms(E, params.n, l, params.r_small)
        ratios[i] = _ratio(lhs, br)
        sets.append(E)
    half = trials // 2
    fit = float(np.max(ratios[:half]))
    held = float(np.max(ratios[half:]))
    k = int(np.argmax(ratios))
    return FitRecord(fit, held, trials, {"ratio": float(ratios[k]), "intervals": [list(x) for x in sets[k].intervals]})


# ---------------------------------------------------------------- random corpora

def random_voxel_set(rng, dim: int, h: float = 1.0, max_side: int = 10) -> VoxelSet:
    """Random raster: a union of a few random boxes, optionally lifted off the wall."""
    shape = tuple(int(rng.integers(2, max_side + 1)) for _ in range(dim))
    occ = np.zeros(shape, dtype=bool)
    for _ in range(int(rng.integers(1, 5))):
        lo = [int(rng.integers(0, s)) for s in shape]
        hi = [int(rng.integers(a + 1, s + 1)) for a, s in zip(lo, shape)]
        if rng.random() < 0.7:
            lo[-1] = 0
        occ[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
    if rng.random() < 0.3:
        occ &= rng.random(shape) < 0.85
    if not occ.any():
        occ[(0,) * dim] = True
    origin = tuple(-0.5 * shape[a] * h for a in range(dim - 1)) + (0.0,)
    return VoxelSet(occ, h, origin)


def random_profile_set(rng, max_nodes: int = 12) -> ProfileSet:
    m = int(rng.integers(2, max_nodes + 1))
    t = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 3.0, size=m))])
    t = np.unique(t)
    r = rng.uniform(0.0, 2.0, size=t.size)
    if rng.random() < 0.2:
        r[0] = 0.0
    r[-1] = 0.0
    if np.all(r == 0):
        r[0] = 1.0
    return ProfileSet(t, r)


def symmetric_voxel_set(rng, dim: int, axes, h: float = 1.0, max_half: int = 6) -> VoxelSet:
    """Random raster mirrored across ``{x_a = 0}`` for every ``a`` in ``axes``."""
    shape = [int(rng.integers(2, 2 * max_half + 1)) for _ in range(dim)]
    for a in axes:
        shape[a] = int(rng.integers(1, max_half + 1))
    occ = np.zeros(shape, dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        lo = [int(rng.integers(0, s)) for s in shape]
        hi = [int(rng.integers(a + 1, s + 1)) for a, s in zip(lo, shape)]
        lo[-1] = 0 if rng.random() < 0.8 else lo[-1]
        occ[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
    for a in axes:
        occ = np.concatenate([np.flip(occ, axis=a), occ], axis=a)
    origin = tuple(-0.5 * occ.shape[a] * h for a in range(dim - 1)) + (0.0,)
    return VoxelSet(occ, h, origin)


def near_bubble_profile(rng, params: CapillarityParams, max_eps: float = 0.1, nodes: int = 2048) -> ProfileSet:
    """Bubble perturbed by a random Legendre mode and amplitude."""
    mode = int(rng.integers(1, 6))
    spec = PerturbationSpec(mode, True, nodes)
    emax = min(max_eps, 0.9 * eps_max(params, spec, 1.0))
    return graph_perturbation_family(params, spec, float(rng.uniform(0.0, emax)))


def mixed_profile_corpus(rng, params: CapillarityParams, size: int) -> list:
    """Near-bubbles, detached droplets, columns, cones and random profiles."""
    out = []
    for i in range(size):
        kind = i % 5
        if kind == 0:
            out.append(near_bubble_profile(rng, params, 0.2, 1024))
        elif kind == 1:
            # droplet touching the wall at a single point
            r = rng.uniform(0.3, 1.5)
            s = np.linspace(0, np.pi, 257)
            out.append(ProfileSet(r * (1 - np.cos(s)), np.append(r * np.sin(s)[:-1], 0.0)))
        elif kind == 2:
            w, H = rng.uniform(0.05, 0.5), rng.uniform(1.0, 6.0)
            out.append(ProfileSet(np.array([0.0, H, H]), np.array([w, w, 0.0])))
        elif kind == 3:
            out.append(ProfileSet(np.array([0.0, rng.uniform(0.2, 3.0)]), np.array([rng.uniform(0.2, 3.0), 0.0])))
        else:
            out.append(random_profile_set(rng))
    return out


# ---------------------------------------------------------------- lemma checks

def _factor3_item(args):
    params, occ, h, origin, axes, cfg = args
    vx = VoxelSet(occ, h, origin)
    free, _ = voxel_alpha_search(vx, params, None, cfg)
    fixed, _ = voxel_alpha_search(vx, params, {a: 0.0 for a in axes}, cfg)
    return free, fixed


def factor3_check(params: CapillarityParams, trials: int = 200, seed: int = 0,
                  cfg: SearchConfig = DEFAULT_SEARCH, tol: float = 1e-3, jobs: int = 1) -> dict:
    """Compare centred and free bubble fits for mirror-symmetric rasters.

    Returns the worst ratio and the largest excess
    ``restricted - 3 * unrestricted``, normalised by ``|E|``.
    """
    rng = np.random.default_rng(seed)
    n = params.n
    items = []
    for _ in range(trials):
        k = int(rng.integers(1, n))
        axes = tuple(sorted(rng.choice(n - 1, size=k, replace=False).tolist()))
        vx = symmetric_voxel_set(rng, n, axes, h=0.25)
        items.append((params, vx.occupancy, vx.spacing, vx.origin, axes, cfg))
    res = pmap(_factor3_item, items, jobs)
    vols = np.array([np.sum(it[1]) * it[2] ** n for it in items])
    free = np.array([r[0] for r in res]) / vols
    fixed = np.array([r[1] for r in res]) / vols
    excess = fixed - 3.0 * free
    ratio = np.where(free > 0, fixed / np.where(free > 0, free, 1.0), np.where(fixed > 0, np.inf, 0.0))
    return {"trials": trials, "max_ratio": float(np.max(ratio)), "max_excess": float(np.max(excess)),
            "tol": tol, "ok": bool(np.max(excess) <= tol)}


def _scan_item(args):
    params, prof, cfg = args
    d = deficit(prof, params)
    b = asymmetry_beta(prof, params, cfg)[0]
    dpos = max(d, 0.0)
    bound = max(dpos, dpos ** (1.0 / (2 * params.n)))
    return d, b, _ratio(b, bound)


def deficit_beta_scan(params: CapillarityParams, corpus, cfg: SearchConfig = DEFAULT_SEARCH,
                      jobs: int = 1) -> np.ndarray:
    """Rows ``(D, beta, beta / max(D, D^{1/(2n)}))`` for every set of the corpus."""
    return np.array(pmap(_scan_item, [(params, p, cfg) for p in corpus], jobs), dtype=float).reshape(-1, 3)


def fit_then_validate(values_fit, values_held) -> FitRecord:
    """Empirical constant from one half, checked on the other (``<= 3x``)."""
    a = np.asarray(values_fit, dtype=float)
    b = np.asarray(values_held, dtype=float)
    return FitRecord(float(np.max(a)), float(np.max(b)), int(a.size + b.size))
