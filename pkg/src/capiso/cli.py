"""Command-line entry point.

Exit codes: 0 success, 2 a proved inequality or identity failed (always a
bug), 3 a precondition or gate refused the input, 4 I/O or parse failure.
"""
from __future__ import annotations

import functools
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import io
from .config import RunConfig
from .errors import (
    DomainError, GenerationError, InvariantError, ParseError,
    PreconditionError, ResourceError, ValidationError,
)
from .functionals import SearchConfig, evaluate
from .geometry import (
    Bubble, CapillarityParams, ProfileSet, VoxelSet, bubble_measures, bubble_profile, voxelize,
)

EXIT_OK, EXIT_ASSERT, EXIT_GATE, EXIT_IO = 0, 2, 3, 4


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="flat key = value file"),
        click.option("--lambda", "lam", type=float, help="wall parameter in (-1, 1)"),
        click.option("--n", type=int, help="dimension"),
        click.option("--rep", type=click.Choice(["profile", "voxel"])),
        click.option("--h", type=float, help="voxel spacing"),
        click.option("--nodes", type=int, help="profile nodes"),
        click.option("--xi-step", type=float, help="gradient grid step"),
        click.option("--seed", type=int),
        click.option("--out", type=click.Path(file_okay=False)),
        click.option("--jobs", type=int),
        click.option("--slack", type=float, help="contact test slack"),
        click.option("--tol-deficit", type=float),
        click.option("--tol-identity", type=float),
        click.option("--tol-volume", type=float),
        click.option("--tol-search", type=float),
        click.option("--tol-factor3", type=float),
        click.option("--tol-reflect", type=float),
    ]
    for o in reversed(opts):
        f = o(f)

    @functools.wraps(f)
    def wrapper(config_path, **kw):
        try:
            base = RunConfig.load(config_path) if config_path else RunConfig()
            cfg = base.updated(**{k: kw.pop(k) for k in list(kw) if k in RunConfig.__dataclass_fields__})
        except (ParseError, OSError) as e:
            _fail(EXIT_IO, str(e))
        except ValidationError as e:
            _fail(EXIT_GATE, f"invalid configuration: {e}")
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.to_text())
        fails = []
        try:
            files = f(cfg, out, fails, **kw) or []
        except InvariantError as e:
            _fail(EXIT_ASSERT, f"invariant violated: {e}")
        except (PreconditionError, DomainError, GenerationError, ResourceError) as e:
            _fail(EXIT_GATE, f"refused: {e}")
        except (ParseError, OSError) as e:
            _fail(EXIT_IO, str(e))
        io.write_manifest(out, list(files) + [out / "config.txt"], cfg.as_dict())
        if fails:
            _fail(EXIT_ASSERT, "assertion failed: " + "; ".join(fails))
        return 0

    return wrapper


def _fail(code: int, msg: str):
    click.echo(msg, err=True)
    sys.exit(code)


def _params(cfg: RunConfig) -> CapillarityParams:
    return CapillarityParams(cfg.lam, cfg.n)


def _search(cfg: RunConfig) -> SearchConfig:
    return SearchConfig(rel_tol=cfg.tol_search)


def _check(cond: bool, msg: str, failures: list):
    if not cond:
        failures.append(msg)


@click.group()
def main():
    """Numerical laboratory for capillarity isoperimetric inequalities."""


@main.command()
@_common
def bubble(cfg: RunConfig, out: Path, fails: list):
    """Write the optimal bubble's profile and report; check its energy identity."""
    params = _params(cfg)
    b = Bubble(params, params.cap_volume)
    m = bubble_measures(b)
    p = m.rel_perimeter - params.lam * m.wetted_area
    ident = params.n * params.cap_volume ** (1 / params.n) * m.volume ** ((params.n - 1) / params.n)
    rep = evaluate(b, params, _search(cfg))
    files = [io.write_profile(out / "bubble.csv", bubble_profile(b, cfg.nodes)),
             io.write_json(out / "report.json", rep.to_dict())]
    click.echo(f"p_lambda = {p!r}  deficit = {rep.deficit!r}")
    _check(abs(p - ident) <= 1e-8 * ident, "bubble energy identity", fails)
    _check(abs(rep.deficit) <= cfg.tol_identity, "bubble deficit vanishes", fails)
    return files


@main.command(name="eval")
@click.argument("set_file", type=click.Path(dir_okay=False))
@_common
def eval_cmd(cfg: RunConfig, out: Path, fails: list, set_file):
    """Evaluate all functionals of a set file (.csv profile or .json voxel header)."""
    params = _params(cfg)
    obj = io.read_set(set_file)
    if isinstance(obj, VoxelSet) and obj.dim != params.n:
        raise DomainError(f"voxel set has dimension {obj.dim}, config says n = {params.n}")
    rep = evaluate(obj, params, _search(cfg))
    f = io.write_json(out / "report.json", rep.to_dict())
    for k, v in rep.to_dict().items():
        click.echo(f"{k} = {v}")
    fails += rep.check(params.lam, cfg.tol_deficit)
    return [f]


@main.command()
@click.argument("set_file", type=click.Path(dir_okay=False))
@click.option("--truncate", type=click.Choice(["auto", "require", "off"]), default="auto",
              show_default=True, help="how to treat the small-deficit gate")
@_common
def symmetrize(cfg: RunConfig, out: Path, fails: list, set_file, truncate):
    """Run the reduction pipeline and write every stage."""
    from .symmetrize import reduction_pipeline

    params = _params(cfg)
    obj = io.read_set(set_file)
    res = reduction_pipeline(obj, params, _search(cfg), truncate)
    files = []
    for name, s in res["sets"].items():
        files += io.write_set(out / f"stage_{name}", s)
    rows = [(r.stage, r.volume, r.p_lambda, r.deficit, r.alpha) for r in res["stages"]]
    files.append(io.write_csv(out / "stages.csv", ("stage", "volume", "p_lambda", "deficit", "alpha"), rows))
    trunc = {"applied": res["truncation"] is not None}
    if res["truncation"] is not None:
        trunc.update(res["truncation"].to_dict())
    trunc["refusal"] = res["refusal"]
    files.append(io.write_json(out / "truncation.json", trunc))
    files.append(io.write_json(out / "reflections.json", [vars(s) for s in res["reflections"]]))
    click.echo(f"{'stage':<12}{'volume':>14}{'P_lambda':>14}{'D':>14}{'alpha':>14}")
    for r in rows:
        click.echo(f"{r[0]:<12}" + "".join(f"{x:>14.6g}" for x in r[1:]))
    if res["refusal"]:
        click.echo(f"truncation skipped: {res['refusal']}")
    st = {r.stage: r for r in res["stages"]}
    if "schwarz" in st:
        _check(st["schwarz"].p_lambda <= st["reflected"].p_lambda + 1e-9, "Schwarz energy monotonicity", fails)
        _check(abs(st["schwarz"].volume - st["reflected"].volume) <= cfg.tol_volume * st["reflected"].volume,
               "Schwarz volume", fails)
    prev = st.get("truncated", st["normalized"])
    if "reflected" in st:
        _check(st["reflected"].deficit <= 2 ** (params.n - 1) * max(prev.deficit, 0) + cfg.tol_reflect,
               "reflection deficit bound", fails)
    _check(abs(st["final"].volume - params.cap_volume) <= cfg.tol_volume * params.cap_volume, "final volume", fails)
    return files


@main.command()
@click.argument("set_file", type=click.Path(dir_okay=False))
@_common
def abp(cfg: RunConfig, out: Path, fails: list, set_file):
    """Neumann solve, contact set, gradient coverage and coupling residuals (n = 2)."""
    from .abp import run_abp
    from .symmetrize import normalize

    params = _params(cfg)
    if params.n != 2:
        raise DomainError("the ABP engine runs on planar voxel sets (n = 2)")
    obj = io.read_set(set_file)
    if isinstance(obj, ProfileSet):
        obj = voxelize(obj, 2, cfg.h)
    if obj.dim != 2:
        raise DomainError("the ABP engine runs on planar voxel sets (n = 2)")
    dom = normalize(obj, params)
    rep, sol, contact, field = run_abp(dom, params, cfg.slack, cfg.xi_step)
    shape = dom.shape
    chans = {}
    for name, vals in (("u", sol.u), ("grad_x", sol.grad[:, 0]), ("grad_y", sol.grad[:, 1]),
                       ("contact", contact.mask.astype(float))):
        a = np.full(shape, np.nan)
        a[dom.occupancy] = vals
        chans[name] = a
    files = io.write_voxel(out / "solution.json", dom, chans)
    files.append(io.write_json(out / "abp.json", rep.to_dict()))
    for k, v in rep.to_dict().items():
        click.echo(f"{k} = {v}")
    _check(rep.compat_error <= 1e-8, "discrete compatibility", fails)
    _check(rep.coverage.amgm_min_slack >= -1e-8, "arithmetic-geometric mean", fails)
    _check(rep.coverage.chain_middle <= rep.coverage.chain_right + 1e-8, "area chain upper half", fails)
    _check(rep.r2 >= -1e-8, "gradient bound on the envelope", fails)
    return files


@main.command()
@click.option("--eps", "eps_list", default=",".join(repr(0.1 * 2.0**-k) for k in range(7)),
              show_default=True, help="comma-separated amplitudes")
@click.option("--with-abp", is_flag=True, help="also compute coupling residuals (n = 2)")
@_common
def sweep(cfg: RunConfig, out: Path, fails: list, eps_list, with_abp):
    """Evaluate a perturbation family and fit scaling exponents."""
    from .harness import SWEEP_COLUMNS, PerturbationSpec, fit_loglog, sweep as run_sweep

    params = _params(cfg)
    mode = cfg.mode if cfg.mode == "edge" else int(cfg.mode)
    eps = [float(e) for e in eps_list.split(",") if e.strip()]
    table = run_sweep(params, PerturbationSpec(mode, True, cfg.nodes), eps, cfg.rep, cfg.h,
                      _search(cfg), with_abp, cfg.jobs)
    fits = {}
    pos = [r for r in table.rows if r[0] > 0]
    if len(pos) >= 4:
        x = np.array([r[0] for r in pos])
        for col in ("alpha", "deficit", "beta"):
            y = np.array([r[SWEEP_COLUMNS.index(col)] for r in pos])
            if np.all(y > 0):
                fits[f"slope_{col}"] = fit_loglog(x, y)
        a2d = np.array([r[SWEEP_COLUMNS.index("alpha2_over_deficit")] for r in pos])
        fits["alpha2_over_deficit_max"] = float(np.max(a2d))
        fits["alpha2_over_deficit_band"] = float(np.max(a2d) / np.min(a2d)) if np.min(a2d) > 0 else math.inf
    files = [io.write_csv(out / "sweep.csv", SWEEP_COLUMNS, table.rows),
             io.write_json(out / "sweep.json", {"meta": table.meta, "seed": cfg.seed, "fits": fits,
                                                "failed": table.failed, "config": cfg.as_dict()})]
    for r in table.rows:
        click.echo(" ".join(f"{x:.6g}" for x in r))
    for k, v in fits.items():
        click.echo(f"{k} = {v}")
    _check(all(r[3] >= -cfg.tol_deficit for r in table.rows), "nonnegative deficit", fails)
    if table.failed:
        click.echo(f"{len(table.failed)} amplitudes left the graph class", err=True)
    return files


@main.command()
@click.option("--l", "l_values", default=None, help="comma-separated scales (default: ends and middle of the range)")
@click.option("--trials", type=int, default=10_000, show_default=True)
@_common
def lemma1d(cfg: RunConfig, out: Path, fails: list, l_values, trials):
    """Brute-force the 1-d interval inequality and fit its constant."""
    from .harness import lemma1d_check

    params = _params(cfg)
    lo, hi = 7 / 8 * params.r_small, 9 / 8 * params.r_big
    ls = [float(x) for x in l_values.split(",")] if l_values else [lo, 0.5 * (lo + hi), hi]
    recs = {}
    for i, l in enumerate(ls):
        recs[repr(l)] = lemma1d_check(params, l, trials, cfg.seed + i).to_dict()
        click.echo(f"l = {l:.6g}: fitted {recs[repr(l)]['fitted']:.6g}, held-out {recs[repr(l)]['held_out']:.6g}")
    f = io.write_json(out / "lemma1d.json", recs)
    fails += [f"unstable constant at l = {k}" for k, r in recs.items() if not r["stable"]]
    return [f]


@main.command()
@click.option("--trials", type=int, default=200, show_default=True)
@_common
def factor3(cfg: RunConfig, out: Path, fails: list, trials):
    """Centred versus free bubble fits of mirror-symmetric rasters."""
    from .harness import factor3_check

    params = _params(cfg)
    rec = factor3_check(params, trials, cfg.seed, _search(cfg), cfg.tol_factor3, cfg.jobs)
    f = io.write_json(out / "factor3.json", rec)
    click.echo(f"max ratio {rec['max_ratio']:.6g}, max excess {rec['max_excess']:.3g}")
    if not rec["ok"]:
        fails.append("centred fit exceeds three times the free fit")
    return [f]


if __name__ == "__main__":  # pragma: no cover
    main()
