"""Command-line front end: ``cssnorm {solve,moser,verify,sweep,supercritical}``.

One JSON config per invocation; every run writes into
``<out>/<timestamp>-<config hash>/``.  Exit codes:

    0 ok, 1 config error, 2 MaxSteps, 3 DomainTooSmall,
    4 a verification check failed, 5 NoFixedPoint.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import functional as fn
from . import gauge as ga
from . import grid as gr
from . import moser as ms
from . import nonlin as nl
from . import radial as rd
from . import solver as so
from .errors import ConfigError, DomainTooSmall, MaxSteps, NoFixedPoint, NoRoot

log = logging.getLogger("cssnorm")

EXIT_OK, EXIT_CONFIG, EXIT_MAXSTEPS, EXIT_DOMAIN, EXIT_VERIFY, EXIT_NOFIXEDPOINT = range(6)


# -- config parsing ----------------------------------------------------------------

def _get(block: dict, key: str, path: str, kind: Callable = float, default: Any = ...):
    if key not in block or block[key] is None:
        if default is ...:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    try:
        return kind(block[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: {exc}") from None


def _block(cfg: dict, key: str, required: bool = True) -> dict:
    val = cfg.get(key)
    if val is None:
        if required:
            raise ConfigError(f"{key}: missing required block")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"{key}: expected an object")
    return val


def parse_spec(block: dict, path: str = "spec") -> nl.NonlinearitySpec:
    try:
        return nl.NonlinearitySpec.from_dict(block)
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}: missing required field") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_init(block: Optional[dict]) -> so.Init:
    if not block:
        return so.GaussianInit()
    kind = str(block.get("type", "Gaussian")).lower()
    if kind == "gaussian":
        return so.GaussianInit(_get(block, "sigma", "solver.init", float, None))
    if kind in ("moserlike", "moser"):
        return so.MoserLikeInit(_get(block, "n", "solver.init", int, 10), _get(block, "rho", "solver.init", float, 1.0))
    if kind in ("fromfile", "file"):
        return so.FromFileInit(_get(block, "path", "solver.init", str))
    raise ConfigError(f"solver.init.type: unknown init {block.get('type')!r}")


SOLVER_KEYS = {
    "dt": float, "max_steps": int, "grad_tol": float, "j_tol": float, "seed": int, "noise": float,
    "project_every": int, "precondition": bool, "method": str, "log_every": int, "newton": bool,
    "newton_switch": float, "newton_max_iter": int, "check_hypotheses": bool,
}


def parse_solver(block: dict, a_default: Optional[float] = None) -> so.SolverConfig:
    a = _get(block, "a", "solver", float, a_default)
    if a is None:
        raise ConfigError("solver.a: missing required field")
    kw = {k: _get(block, k, "solver", kind) for k, kind in SOLVER_KEYS.items() if k in block}
    unknown = set(block) - set(SOLVER_KEYS) - {"a", "init"}
    if unknown:
        raise ConfigError(f"solver: unknown field(s) {sorted(unknown)}")
    return so.SolverConfig(a=a, init=parse_init(block.get("init")), **kw)


def parse_grid(block: dict, path: str = "grid") -> Optional[gr.Grid]:
    """``{L, N}``; returns None for ``{"auto": true, "N": ...}``."""
    if block.get("auto"):
        _get(block, "N", path, int)
        return None
    try:
        return gr.make_grid(_get(block, "L", path), _get(block, "N", path, float))
    except gr.GridError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _grid_for(cfg: dict, spec: nl.NonlinearitySpec, scfg: so.SolverConfig) -> gr.Grid:
    block = _block(cfg, "grid")
    g = parse_grid(block)
    if g is None:
        g = so.auto_grid(spec, scfg.a, int(block["N"]), cfg=scfg)
    return g


# -- run directory -----------------------------------------------------------------

def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]


def make_run_dir(out: Path, command: str, cfg: dict) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    run = Path(out) / f"{stamp}-{command}-{config_hash(cfg)}"
    run.mkdir(parents=True, exist_ok=True)
    (run / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True))
    return run


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# -- commands --------------------------------------------------------------------

class Context:
    def __init__(self, run: Path, binary: bool, quiet: bool):
        self.run = run
        self.binary = binary
        self.quiet = quiet

    def progress(self):
        return (self.run / "progress.csv").open("w")

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)


def _record_summary(rec: so.SolutionRecord, spec: nl.NonlinearitySpec) -> dict:
    out = rec.summary()
    out["spec"] = spec.to_dict()
    return out


def cmd_solve(cfg: dict, ctx: Context) -> int:
    spec = parse_spec(_block(cfg, "spec"))
    scfg = parse_solver(_block(cfg, "solver"))
    grid = _grid_for(cfg, spec, scfg)
    code = EXIT_OK
    with ctx.progress() as prog:
        try:
            rec = so.minimize_on_sphere(spec, scfg, grid, progress=prog)
        except MaxSteps as err:
            rec, code = err.record, EXIT_MAXSTEPS
            ctx.say(f"MaxSteps: {err}")
        except DomainTooSmall as err:
            rec, code = err.record, EXIT_DOMAIN
            ctx.say(f"DomainTooSmall: {err}")
    summary = _record_summary(rec, spec)
    summary["status"] = ["ok", "", "max_steps", "domain_too_small"][code]
    _write_json(ctx.run / "solution.json", summary)
    gr.write_field(rec.u, ctx.run / "u", binary=ctx.binary)
    ctx.say(f"E = {rec.breakdown.E:.12g}  lambda = {rec.lam:.12g}  J = {rec.breakdown.J:.3e}  -> {ctx.run}")
    return code


def _moser_params_from(block: dict, n: int) -> ms.MoserParams:
    rho = _get(block, "rho", "moser")
    extra = {k: _get(block, k, "moser", float, None) for k in ("alpha0", "theta", "beta0")}
    try:
        if "Rn" in block:
            Rn = _get(block, "Rn", "moser")
            return ms.MoserParams(n, rho, math.sqrt(ms.mass_from_rn(rho, n, Rn)), Rn, **extra)
        a = _get(block, "a", "moser")
        return ms.moser_params(a, rho, n, **extra)
    except (NoRoot, ValueError) as exc:
        raise ConfigError(f"moser: {exc}") from None


def cmd_moser(cfg: dict, ctx: Context) -> int:
    block = _block(cfg, "moser")
    n_list = block.get("n_list")
    if not n_list or not isinstance(n_list, list):
        raise ConfigError("moser.n_list: expected a non-empty list of integers")
    n_list = [int(n) for n in n_list]
    if any(n < 2 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("moser.n_list: integers must be >= 2 and strictly increasing")
    N = _get(block, "N", "moser", int, 1024)
    params = [_moser_params_from(block, n) for n in n_list]
    rows = [ms.moser_row(p, N=N) for p in params]
    ms.write_moser_csv(rows, ctx.run / "moser.csv")
    dec = all(b.l4_quad < a.l4_quad and b.cs_energy < a.cs_energy for a, b in zip(rows, rows[1:]))
    result = {"l4_and_cs_decreasing": dec, "rows": [asdict(r) for r in rows]}
    tblock = block.get("threshold")
    if tblock:
        spec = parse_spec(_block(tblock, "spec"), "moser.threshold.spec")
        if spec.critical_alpha is None:
            raise ConfigError("moser.threshold.spec: threshold check needs a critical-growth spec")
        reports = [asdict(ms.threshold_check(spec, p)) for p in params]
        result["threshold"] = {"c_star": nl.c_star(spec.critical_alpha), "reports": reports,
                               "any_passes": any(r["passes"] for r in reports)}
    _write_json(ctx.run / "threshold.json", result)
    ctx.say(f"moser table with {len(rows)} rows -> {ctx.run}")
    return EXIT_OK


# -- verify -----------------------------------------------------------------------

def corpus_field(grid: gr.Grid, item: dict, i: int) -> gr.Field2D:
    kind = str(item.get("type", "gaussian")).lower()
    path = f"verify.corpus[{i}]"
    if kind == "gaussian":
        s = _get(item, "sigma", path, float, 1.0)
        c = item.get("center", [0.0, 0.0])
        an = item.get("aniso", [1.0, 1.0])
        amp = _get(item, "amplitude", path, float, 1.0)
        return gr.sample(grid, lambda x1, x2: amp * np.exp(-(((x1 - c[0]) / an[0]) ** 2 + ((x2 - c[1]) / an[1]) ** 2) / (2 * s * s)))
    if kind == "bump":
        s = _get(item, "radius", path, float, 1.0)
        c = item.get("center", [0.0, 0.0])

        def bump(x1, x2):
            q = ((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / s ** 2
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(q < 1, np.exp(-1.0 / np.maximum(1 - q, 1e-300)), 0.0)

        return gr.sample(grid, bump)
    raise ConfigError(f"{path}.type: unknown corpus field {kind!r}")


DEFAULT_CORPUS = [
    {"type": "gaussian", "sigma": 1.0},
    {"type": "gaussian", "sigma": 0.7, "center": [0.5, -0.3]},
    {"type": "gaussian", "sigma": 1.2, "aniso": [1.0, 0.6]},
    {"type": "gaussian", "sigma": 0.8, "aniso": [0.7, 1.3], "center": [-0.4, 0.4]},
    {"type": "bump", "radius": 2.5},
    {"type": "bump", "radius": 1.8, "center": [0.6, 0.2]},
]


def _check(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **detail}


def run_verify(spec: nl.NonlinearitySpec, corpus: list[gr.Field2D], r: float = 1.5, lam: float = 1.0,
               c_bar_r: Optional[float] = None) -> tuple[list[dict], ga.GaugeBoundsReport]:
    """The identity/inequality suite; returns check rows and the gauge-bounds report."""
    checks = []
    worst = 0.0
    for u in corpus:
        G = ga.gauge_fields(u)
        lhs = gr.integrate(u.like(G.a0.values * u.values ** 2))
        worst = max(worst, abs(lhs - 2 * G.cs_energy) / max(G.cs_energy, 1e-300))
    checks.append(_check("gauge0", worst <= 1e-6, worst_rel=worst))

    g0 = corpus[0].grid
    radial_u = gr.sample(g0, lambda x1, x2: np.exp(-(x1 * x1 + x2 * x2) / 2))
    rep = rd.radial_crosscheck(radial_u, (0.5, min(3.0, 0.5 * g0.L)))
    checks.append(_check("radial_ansatz", rep.gauge_max_dev <= 1e-3 and rep.cs_rel_dev <= 1e-3,
                         gauge_max_dev=rep.gauge_max_dev, cs_rel_dev=rep.cs_rel_dev))

    worst_id = worst_fd = 0.0
    gap_min = math.inf
    for u in corpus:
        bd = fn.breakdown(u, spec)
        diff = fn.nehari_residual(u, spec, lam, bd) - fn.pohozaev_residual(u, spec, lam, bd) - bd.J
        worst_id = max(worst_id, abs(diff) / (1 + abs(bd.J)))
        fd = fn.FiberData.from_field(u, spec, cs=bd.cs)
        for t in (0.7, 1.3):
            eps = 1e-5 * t
            dE = (fd.energy(t + eps) - fd.energy(t - eps)) / (2 * eps)
            worst_fd = max(worst_fd, abs(dE - fd.constraint(t) / t) / (1 + abs(dE)))
        gap_min = min(gap_min, fn.lower_bound_gap(bd, spec.theta))
    checks.append(_check("nehari_minus_pohozaev_is_J", worst_id <= 1e-10, worst=worst_id))
    checks.append(_check("fiber_derivative", worst_fd <= 1e-5, worst=worst_fd))
    checks.append(_check("lemma_2_6_lower_bound", gap_min >= -1e-10, min_gap=gap_min))

    samples = so.default_samples(spec)
    ar = nl.check_ar(spec, samples)
    checks.append(_check("ar", ar.holds, worst_ratio=ar.worst_ratio, worst_s=ar.worst_s, theta=spec.theta))
    mono = nl.check_fbar_monotone(spec, samples)
    checks.append(_check("fbar_monotone", mono.holds, violations=mono.violations[:5]))
    combo = nl.superquadratic_combo(spec, samples)
    checks.append(_check("superquadratic_combo", bool(np.all(combo > 0)), min_value=float(np.min(combo))))
    alpha = 1.2 * spec.critical_alpha if spec.critical_alpha else 1.0
    env = nl.growth_envelope_check(spec, 0.1, alpha, 4.0, samples[samples <= 10.0])
    checks.append(_check("growth_envelope", env.holds, C_eps=env.C_eps, alpha=alpha))

    gn = [fn.gn_ratio(u, 6.0) for u in corpus]
    checks.append(_check("gn_ratio_finite", all(np.isfinite(gn)), max_ratio=max(gn)))
    tm = [fn.tm_integral(u, 0.9 * 4 * math.pi) for u in corpus]
    checks.append(_check("tm_integral_finite", all(np.isfinite(tm)), max_value=max(tm)))

    bounds = ga.gauge_bounds_report(corpus, r)
    finite = all(np.isfinite([bounds.ratio_a1, bounds.ratio_a2, bounds.ratio_gauge1]))
    checks.append(_check("gauge_bounds_finite", finite, **asdict(bounds)))
    return checks, bounds


def cmd_verify(cfg: dict, ctx: Context) -> int:
    block = _block(cfg, "verify", required=False)
    spec = parse_spec(_block(cfg, "spec"))
    grid = parse_grid(block.get("grid", {"L": 10.0, "N": 128}), "verify.grid")
    if grid is None:
        raise ConfigError("verify.grid: auto sizing is not available for the verification corpus")
    items = block.get("corpus", DEFAULT_CORPUS)
    if not isinstance(items, list) or not items:
        raise ConfigError("verify.corpus: nothing to verify (empty corpus)")
    corpus = [corpus_field(grid, it, i) for i, it in enumerate(items)]
    r = _get(block, "r", "verify", float, 1.5)
    if not 1 < r < 2:
        raise ConfigError("verify.r: must lie in (1, 2)")
    checks, bounds = run_verify(spec, corpus, r)
    (ctx.run / "gauge_bounds.json").write_text(bounds.to_json())
    ok = all(c["passed"] for c in checks)
    _write_json(ctx.run / "verify.json", {"all_passed": ok, "checks": checks})
    for c in checks:
        ctx.say(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(cfg: dict, ctx: Context) -> int:
    spec = parse_spec(_block(cfg, "spec"))
    block = _block(cfg, "sweep")
    a_list = block.get("a_list")
    if not a_list or not isinstance(a_list, list):
        raise ConfigError("sweep.a_list: expected a non-empty list")
    scfg = parse_solver(_block(cfg, "solver", required=False), a_default=float(a_list[0]))
    gblock = cfg.get("grid") or {"auto": True, "N": _get(block, "N", "sweep", int, 512)}
    grid = parse_grid(gblock)
    N = int(gblock["N"])
    try:
        rows = so.mass_sweep(spec, a_list, scfg, N=N, grid=grid, slack=_get(block, "slack", "sweep", float, 1e-4))
    except MaxSteps as err:
        ctx.say(f"MaxSteps: {err}")
        return EXIT_MAXSTEPS
    except DomainTooSmall as err:
        ctx.say(f"DomainTooSmall: {err}")
        return EXIT_DOMAIN
    with (ctx.run / "sweep.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["a", "m", "lambda", "converged", "L", "monotone_ok"])
        for row in rows:
            wr.writerow([repr(row.a), repr(row.m), repr(row.lam), row.converged, repr(row.L), row.monotone_ok])
    ok = all(r.monotone_ok for r in rows)
    ctx.say(f"sweep with {len(rows)} rows, monotone={ok} -> {ctx.run}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_supercritical(cfg: dict, ctx: Context) -> int:
    spec = parse_spec(_block(cfg, "spec"))
    if not isinstance(spec.family, nl.Supercritical):
        raise ConfigError("spec.family: supercritical command needs a Supercritical spec")
    block = _block(cfg, "supercritical")
    scfg = parse_solver(_block(cfg, "solver"))
    R_init = _get(block, "R_init", "supercritical")
    max_outer = _get(block, "max_outer", "supercritical", int, 8)
    mode = block.get("mode", "subcritical_delta")
    try:
        mode = nl.TruncationMode(mode)
    except ValueError:
        raise ConfigError(f"supercritical.mode: unknown mode {mode!r}") from None
    gblock = _block(cfg, "grid")
    fixed = parse_grid(gblock)
    grid = fixed if fixed is not None else (lambda tspec: so.auto_grid(tspec, scfg.a, int(gblock["N"]), cfg=scfg))
    code = EXIT_OK
    with ctx.progress() as prog:
        try:
            rec = so.solve_supercritical(spec, scfg, grid, R_init, max_outer, mode, progress=prog)
        except NoFixedPoint as err:
            rec, code = err.record, EXIT_NOFIXEDPOINT
            ctx.say(f"NoFixedPoint: {err}")
        except MaxSteps as err:
            rec, code = err.record, EXIT_MAXSTEPS
            ctx.say(f"MaxSteps: {err}")
        except DomainTooSmall as err:
            rec, code = err.record, EXIT_DOMAIN
            ctx.say(f"DomainTooSmall: {err}")
    summary = _record_summary(rec, spec)
    _write_json(ctx.run / "supercritical.json", summary)
    gr.write_field(rec.u, ctx.run / "u", binary=ctx.binary)
    if code == EXIT_OK and not rec.extra.get("original_problem_solved"):
        code = EXIT_NOFIXEDPOINT
    ctx.say(f"original_problem_solved={rec.extra.get('original_problem_solved')} -> {ctx.run}")
    return code


COMMANDS = {
    "solve": cmd_solve,
    "moser": cmd_moser,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "supercritical": cmd_supercritical,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cssnorm", description="Normalized ground states of the planar CSS system.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="runs", help="parent directory for run directories")
    p.add_argument("--binary", action="store_true", help="dump fields as float64 little-endian .bin")
    p.add_argument("--quiet", action="store_true", help="suppress console output")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = make_run_dir(Path(args.out), args.command, cfg)
    ctx = Context(run, args.binary, args.quiet)
    try:
        return COMMANDS[args.command](cfg, ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        (run / "error.txt").write_text(str(exc) + "\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
