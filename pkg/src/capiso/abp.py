"""Neumann solve, lower contact set, gradient coverage and the K-envelope
coupling on planar voxel domains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import binary_dilation, label
from scipy.sparse.linalg import spsolve

from . import kernels
from .errors import DomainError, InvariantError, NumericError
from .geometry import CapillarityParams, VoxelSet, exposed_faces, voxel_measures

_DIRS = ((0, 1), (0, -1), (1, 1), (1, -1))  # (axis, sign)


@dataclass
class BoundaryFaces:
    """Exposed faces of a planar domain.

    ``cell`` is the index of the occupied cell, ``axis``/``sign`` give the
    outward normal ``sign * e_axis``, ``wetted`` marks faces on the wall.
    """

    cell: np.ndarray
    axis: np.ndarray
    sign: np.ndarray
    midpoint: np.ndarray
    wetted: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        nu = np.zeros((self.cell.size, 2))
        nu[np.arange(self.cell.size), self.axis] = self.sign
        return nu


@dataclass
class NeumannSolution:
    """Cell-centred solution of ``Delta u = rhs`` with prescribed outward flux.

    Attributes
    ----------
    u, grad, hess : ndarray
        Values ``(N,)``, gradients ``(N, 2)`` and symmetric Hessians
        ``(N, 2, 2)`` at the occupied cells, in ``np.nonzero`` order.
    points : ndarray
        Cell centres ``(N, 2)``.
    rhs : float
        The constant right-hand side.
    residual : float
        Relative residual of the linear solve.
    compat_error : float
        ``|sum of boundary flux - rhs |E|| / (rhs |E|)``.
    projection_norm : float
        Norm of the component removed to make the system compatible.
    """

    domain: VoxelSet
    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    points: np.ndarray
    rhs: float
    residual: float
    compat_error: float
    projection_norm: float
    faces: BoundaryFaces
    face_flux: np.ndarray
    index: np.ndarray
    mean_zero: bool = True

    @property
    def h(self) -> float:
        return self.domain.spacing

    @property
    def laplacian(self) -> np.ndarray:
        return self.hess[:, 0, 0] + self.hess[:, 1, 1]


def _check_domain(domain: VoxelSet):
    if domain.dim != 2:
        raise DomainError("the Neumann solve is implemented for planar domains only")
    if not domain.is_uniform:
        raise DomainError("the Neumann solve needs a uniform grid")
    _, ncomp = label(domain.occupancy)
    if ncomp != 1:
        raise DomainError(f"domain has {ncomp} face-connected components, expected 1")


def boundary_faces(domain: VoxelSet, index: np.ndarray) -> BoundaryFaces:
    h = domain.spacing
    cells, axes, signs, mids, wet = [], [], [], [], []
    for ax in range(2):
        plus, minus = exposed_faces(domain, ax)
        for sign, mask in ((1, plus), (-1, minus)):
            fi = np.argwhere(mask)
            if fi.size == 0:
                continue
            ci = fi.copy()
            if sign == 1:
                ci[:, ax] -= 1
            mid = np.empty((fi.shape[0], 2))
            for a in range(2):
                if a == ax:
                    mid[:, a] = domain.origin[a] + fi[:, a] * h
                else:
                    mid[:, a] = domain.origin[a] + (fi[:, a] + 0.5) * h
            cells.append(index[ci[:, 0], ci[:, 1]])
            axes.append(np.full(fi.shape[0], ax))
            signs.append(np.full(fi.shape[0], sign))
            mids.append(mid)
            wet.append((ax == 1) & (sign == -1) & (fi[:, 1] == 0))
    return BoundaryFaces(np.concatenate(cells), np.concatenate(axes), np.concatenate(signs),
                         np.concatenate(mids), np.concatenate(wet))


def parabola_flux(center, scale: float = 1.0):
    """Flux data ``<x - c, nu> / scale`` of the parabola ``|x - c|^2 / (2 scale)``.

    The finite-volume scheme reproduces this parabola exactly at the cell
    centres, which makes it an oracle for the solver.
    """
    c = np.asarray(center, dtype=float)

    def g(mid, nu, wetted):
        return np.sum((mid - c) * nu, axis=1) / scale

    return g


def solve_neumann(domain: VoxelSet, params: CapillarityParams, flux=None) -> NeumannSolution:
    """Finite-volume solve of the capillarity Neumann problem.

    The default data is flux ``+1`` through relative boundary faces and
    ``-lam`` through wetted faces, with ``rhs = P_lam(E) / |E|``.  A callable
    ``flux(midpoints, normals, wetted)`` replaces the data and sets ``rhs``
    to total flux over volume.  The singular system is closed with a
    zero-mean constraint (bordered matrix) and solved directly.
    """
    _check_domain(domain)
    occ = domain.occupancy
    h = domain.spacing
    idx = np.full(occ.shape, -1, dtype=np.int64)
    cells = np.argwhere(occ)
    ncell = cells.shape[0]
    idx[cells[:, 0], cells[:, 1]] = np.arange(ncell)
    points = np.column_stack([domain.origin[a] + (cells[:, a] + 0.5) * h for a in range(2)])
    faces = boundary_faces(domain, idx)
    if flux is None:
        g = np.where(faces.wetted, -params.lam, 1.0)
    else:
        g = np.asarray(flux(faces.midpoint, faces.normal, faces.wetted), dtype=float)
    total = float(np.sum(g) * h)
    vol = ncell * h * h
    if flux is None:
        m = voxel_measures(domain)
        rhs = (m.rel_perimeter - params.lam * m.wetted_area) / m.volume
    else:
        rhs = total / vol
    compat = abs(total - rhs * vol) / max(abs(rhs * vol), 1e-300)

    rows, cols = [], []
    for ax in range(2):
        a = occ[:-1, :] & occ[1:, :] if ax == 0 else occ[:, :-1] & occ[:, 1:]
        p = np.argwhere(a)
        q = p.copy()
        q[:, ax] += 1
        i, j = idx[p[:, 0], p[:, 1]], idx[q[:, 0], q[:, 1]]
        rows += [i, j]
        cols += [j, i]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    off = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(ncell, ncell)).tocsr()
    deg = np.asarray(off.sum(axis=1)).ravel()
    lap = off - sp.diags(deg)
    b = np.bincount(faces.cell, weights=g * h, minlength=ncell)
    f = rhs * h * h - b
    proj = float(np.mean(f))
    f = f - proj
    ones = np.ones((ncell, 1))
    big = sp.bmat([[lap, sp.csr_matrix(ones)], [sp.csr_matrix(ones.T), None]], format="csc")
    sol = spsolve(big, np.concatenate([f, [0.0]]))
    u = sol[:ncell]
    res = float(np.linalg.norm(lap @ u - f) / max(np.linalg.norm(f), 1e-300))
    if not np.isfinite(res) or res > 1e-10:
        raise NumericError("Neumann solve did not converge", residual=res)

    # neighbour or ghost values in each direction; a ghost across a boundary
    # face carries the flux: (u_ghost - u) / h = g
    nb = {}
    for ax, sign in _DIRS:
        c = cells.copy()
        c[:, ax] += sign
        inside = (c[:, ax] >= 0) & (c[:, ax] < occ.shape[ax])
        j = np.full(ncell, -1)
        j[inside] = idx[c[inside, 0], c[inside, 1]]
        val = np.where(j >= 0, u[np.maximum(j, 0)], np.nan)
        sel = (faces.axis == ax) & (faces.sign == sign)
        val[faces.cell[sel]] = u[faces.cell[sel]] + g[sel] * h
        nb[ax, sign] = (val, j)
    grad = np.column_stack([(nb[a, 1][0] - nb[a, -1][0]) / (2 * h) for a in range(2)])
    hess = np.zeros((ncell, 2, 2))
    for a in range(2):
        hess[:, a, a] = (nb[a, 1][0] - 2 * u + nb[a, -1][0]) / (h * h)
    cross = np.zeros((ncell, 2))
    for a in range(2):
        other = 1 - a
        jp, jm = nb[a, 1][1], nb[a, -1][1]
        gp = np.where(jp >= 0, grad[np.maximum(jp, 0), other], np.nan)
        gm = np.where(jm >= 0, grad[np.maximum(jm, 0), other], np.nan)
        d = np.where(np.isfinite(gp) & np.isfinite(gm), (gp - gm) / (2 * h),
                     np.where(np.isfinite(gp), (gp - grad[:, other]) / h,
                              np.where(np.isfinite(gm), (grad[:, other] - gm) / h, 0.0)))
        cross[:, a] = d
    hess[:, 0, 1] = hess[:, 1, 0] = 0.5 * (cross[:, 0] + cross[:, 1])
    return NeumannSolution(domain, u, grad, hess, points, float(rhs), res, float(compat),
                           abs(proj) * np.sqrt(ncell), faces, g, idx)


# ---------------------------------------------------------------- contact set

@dataclass
class ContactSet:
    mask: np.ndarray
    slack: float

    @property
    def fraction(self) -> float:
        return float(np.mean(self.mask))


def lower_contact_set(sol: NeumannSolution, slack: float = 0.05) -> ContactSet:
    """Cells admitting a global supporting plane, up to ``slack * (h + |y - x| h)``."""
    mask = kernels.contact_mask(sol.points, sol.u, sol.grad, float(slack), sol.h)
    return ContactSet(np.asarray(mask, dtype=bool), float(slack))


def cap_contains(xi, lam: float, closed: bool = True) -> np.ndarray:
    """Membership in the gradient cap ``{|xi| < 1, xi_2 > lam}``."""
    xi = np.atleast_2d(xi)
    r2 = np.sum(xi * xi, axis=1)
    if closed:
        return (r2 <= 1.0 + 1e-15) & (xi[:, 1] >= lam - 1e-15)
    return (r2 < 1.0) & (xi[:, 1] > lam)


@dataclass
class CoverageReport:
    covered_fraction: float
    cap_area: float
    chain_middle: float
    chain_right: float
    amgm_min_slack: float
    contact_fraction: float
    xi_step: float
    bins: int

    @property
    def chain(self) -> tuple:
        return (self.cap_area, self.chain_middle, self.chain_right)

    def to_dict(self) -> dict:
        return {"covered_fraction": self.covered_fraction, "chain": list(self.chain),
                "amgm_min_slack": self.amgm_min_slack, "contact_fraction": self.contact_fraction,
                "xi_step": self.xi_step, "bins": self.bins}


def _local_oscillation(sol: NeumannSolution) -> np.ndarray:
    # half-widths of a box holding the gradient image of each cell
    osc = np.zeros_like(sol.grad)
    for ax in range(2):
        c = np.argwhere(sol.domain.occupancy)
        best = np.zeros_like(sol.grad)
        for sign in (1, -1):
            cc = c.copy()
            cc[:, ax] += sign
            inside = (cc[:, ax] >= 0) & (cc[:, ax] < sol.index.shape[ax])
            j = np.full(c.shape[0], -1)
            j[inside] = sol.index[cc[inside, 0], cc[inside, 1]]
            d = np.where((j >= 0)[:, None], np.abs(sol.grad[np.maximum(j, 0)] - sol.grad), 0.0)
            best = np.maximum(best, d)
        osc += 0.5 * best
    return osc


def gradient_coverage(sol: NeumannSolution, contact: ContactSet, params: CapillarityParams,
                      xi_step: float | None = None) -> CoverageReport:
    """Rasterise the gradient image of the contact set over the gradient cap.

    Each contact cell marks the bins whose centres lie in the box around its
    gradient widened by the local gradient oscillation.  Also reports the
    area-formula chain ``|cap| <= sum det D^2u h^2 <= sum (Delta u / n)^n h^2``
    and the least arithmetic-geometric mean slack over positive
    semidefinite contact cells.
    """
    if not np.any(contact.mask):
        raise InvariantError("empty lower contact set")
    if params.n != 2:
        raise DomainError("coverage is implemented for n = 2")
    lam = params.lam
    step = sol.h if xi_step is None else float(xi_step)
    nx = int(np.ceil(2.0 / step))
    ny = int(np.ceil((1.0 - lam) / step))
    x0, y0 = -nx * step / 2, lam
    cx = x0 + (np.arange(nx) + 0.5) * step
    cy = y0 + (np.arange(ny) + 0.5) * step
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    in_cap = (gx**2 + gy**2 < 1.0) & (gy > lam)

    g = sol.grad[contact.mask]
    w = _local_oscillation(sol)[contact.mask] + 0.5 * step
    lo = np.stack([np.ceil((g[:, 0] - w[:, 0] - x0) / step - 0.5),
                   np.ceil((g[:, 1] - w[:, 1] - y0) / step - 0.5)], axis=1).astype(np.int64)
    hi = np.stack([np.floor((g[:, 0] + w[:, 0] - x0) / step - 0.5),
                   np.floor((g[:, 1] + w[:, 1] - y0) / step - 0.5)], axis=1).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, [nx - 1, ny - 1])
    ok = np.all(hi >= lo, axis=1)
    lo, hi = lo[ok], hi[ok]
    diff = np.zeros((nx + 1, ny + 1))
    np.add.at(diff, (lo[:, 0], lo[:, 1]), 1)
    np.add.at(diff, (hi[:, 0] + 1, lo[:, 1]), -1)
    np.add.at(diff, (lo[:, 0], hi[:, 1] + 1), -1)
    np.add.at(diff, (hi[:, 0] + 1, hi[:, 1] + 1), 1)
    hit = np.cumsum(np.cumsum(diff, axis=0), axis=1)[:nx, :ny] > 0
    covered = float(np.sum(hit & in_cap) / max(np.sum(in_cap), 1))

    h2 = sol.h**2
    det = np.linalg.det(sol.hess)
    lap = sol.laplacian
    middle = float(np.sum(det[contact.mask]) * h2)
    right = float(np.sum((lap / 2.0) ** 2) * h2)
    eig = np.linalg.eigvalsh(sol.hess)
    psd = contact.mask & (eig[:, 0] >= 0)
    slack = (lap / 2.0) ** 2 - det
    amgm = float(np.min(slack[psd])) if np.any(psd) else float("inf")
    return CoverageReport(covered, params.cap_volume, middle, right, amgm,
                          contact.fraction, step, int(np.sum(in_cap)))


# ---------------------------------------------------------------- K-envelope

def cap_grid(lam: float, step: float) -> np.ndarray:
    """Points of ``closure(B^lam)`` in the gradient plane, sorted lexicographically.

    A square lattice of spacing ``step`` anchored on the chord, plus samples
    of the arc at arclength spacing ``step`` and the two chord endpoints.
    """
    xs = np.arange(-np.floor(1.0 / step), np.floor(1.0 / step) + 1) * step
    ys = lam + np.arange(0, np.floor((1.0 - lam) / step) + 1) * step
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = pts[cap_contains(pts, lam)]
    a0 = np.arcsin(lam)
    na = max(2, int(np.ceil((np.pi - 2 * a0) / step)) + 1)
    ang = np.linspace(a0, np.pi - a0, na)
    arc = np.column_stack([np.cos(ang), np.sin(ang)])
    pts = np.unique(np.vstack([pts, arc]), axis=0)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


@dataclass
class Conjugate:
    """Samples ``u*(xi) = max_y <xi, y> - u(y)`` on a grid of the gradient cap."""

    xi: np.ndarray
    values: np.ndarray
    argmax: np.ndarray
    step: float
    lam: float


def restricted_legendre(sol: NeumannSolution, xi_step: float, lam: float) -> Conjugate:
    xi = cap_grid(lam, xi_step)
    vals, arg = kernels.legendre_max(xi, sol.points, sol.u)
    return Conjugate(xi, np.asarray(vals), np.asarray(arg), float(xi_step), float(lam))


@dataclass
class CouplingField:
    """The K-envelope ``Psi(x) = max_xi <xi, x> - u*(xi)`` on a domain lattice.

    ``psi`` is sampled on every lattice node within one cell of the domain
    (``support``); ``grad`` (the maximising ``xi``) and ``hess`` (second
    differences of ``psi``) on the domain cells, in ``np.nonzero`` order.
    """

    conjugate: Conjugate
    domain: VoxelSet
    support: np.ndarray
    psi_grid: np.ndarray
    points: np.ndarray
    psi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def evaluate(self, x):
        """Values and maximising ``xi`` at arbitrary points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals, arg = kernels.legendre_max(x, self.conjugate.xi, self.conjugate.values)
        return np.asarray(vals), self.conjugate.xi[np.asarray(arg)]


def k_envelope(conj: Conjugate, domain: VoxelSet) -> CouplingField:
    if domain.dim != 2 or not domain.is_uniform:
        raise DomainError("the envelope is implemented for uniform planar domains")
    occ = np.pad(domain.occupancy, 1)
    support = binary_dilation(occ, structure=np.ones((3, 3), bool))
    h = domain.spacing
    org = np.array(domain.origin) - h
    nodes = np.argwhere(support)
    pts = org + (nodes + 0.5) * h
    vals, arg = kernels.legendre_max(pts, conj.xi, conj.values)
    grid = np.full(occ.shape, np.nan)
    grid[nodes[:, 0], nodes[:, 1]] = vals
    cells = np.argwhere(occ)
    i, j = cells[:, 0], cells[:, 1]
    hess = np.empty((cells.shape[0], 2, 2))
    hess[:, 0, 0] = (grid[i + 1, j] - 2 * grid[i, j] + grid[i - 1, j]) / h**2
    hess[:, 1, 1] = (grid[i, j + 1] - 2 * grid[i, j] + grid[i, j - 1]) / h**2
    hess[:, 0, 1] = hess[:, 1, 0] = (grid[i + 1, j + 1] - grid[i + 1, j - 1]
                                     - grid[i - 1, j + 1] + grid[i - 1, j - 1]) / (4 * h**2)
    pos = np.searchsorted(np.ravel_multi_index(nodes.T, occ.shape),
                          np.ravel_multi_index(cells.T, occ.shape))
    return CouplingField(conj, domain, support, grid, pts[pos], vals[pos],
                         conj.xi[np.asarray(arg)[pos]], hess)


def coupling_residuals(field: CouplingField, domain: VoxelSet, params: CapillarityParams):
    """``R1 = sum_E |D^2 Psi - id|_F h^2`` and ``R2 = sum_faces (1 - |grad Psi|) h``.

    ``R2`` runs over relative boundary faces, with the gradient taken as the
    maximising ``xi`` at each face midpoint.
    """
    h = domain.spacing
    r1 = float(np.sum(np.linalg.norm(field.hess - np.eye(2), axis=(1, 2))) * h * h)
    idx = np.full(domain.shape, -1, dtype=np.int64)
    idx[domain.occupancy] = np.arange(int(domain.occupancy.sum()))
    faces = boundary_faces(domain, idx)
    mids = faces.midpoint[~faces.wetted]
    _, g = field.evaluate(mids)
    r2 = float(np.sum(1.0 - np.linalg.norm(g, axis=1)) * h)
    return r1, r2


@dataclass
class ABPReport:
    coverage: CoverageReport
    r1: float
    r2: float
    rhs: float
    compat_error: float
    residual: float

    def to_dict(self) -> dict:
        d = self.coverage.to_dict()
        d.update(r1=self.r1, r2=self.r2, rhs=self.rhs, compat_error=self.compat_error,
                 solve_residual=self.residual)
        return d


def run_abp(domain: VoxelSet, params: CapillarityParams, slack: float = 0.05,
            xi_step: float | None = None, flux=None):
    """Solve, extract the contact set, and compute coverage and residuals."""
    sol = solve_neumann(domain, params, flux)
    contact = lower_contact_set(sol, slack)
    step = sol.h if xi_step is None else xi_step
    cov = gradient_coverage(sol, contact, params, step)
    field = k_envelope(restricted_legendre(sol, step, params.lam), domain)
    r1, r2 = coupling_residuals(field, domain, params)
    return ABPReport(cov, r1, r2, sol.rhs, sol.compat_error, sol.residual), sol, contact, field
