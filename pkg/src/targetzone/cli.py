"""Command-line front end: ``targetzone <subcommand> [flags]``.

Parameters come from flags, then an optional ``--config`` file of
``key=value`` lines, then the model defaults (in that order of precedence).
Every subcommand is deterministic given the seed and flags.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from targetzone import acceptance, output, pde, regularized, sim
from targetzone.closed_form import ClosedForm
from targetzone.model import (
    ClosedFormOptimal,
    Constant,
    ModelParams,
    RegularizedOptimal,
    Scaled,
    Zero,
    eval_strategy,
    validate,
)

SUBCOMMANDS = ("value", "strategy", "simulate", "ueps", "pde", "converge", "compare", "accept")
FORMATS = ("csv", "json", "svg")

# flag name -> ModelParams field
PARAM_FLAGS = {
    "sigma": "sigma",
    "gamma": "gamma",
    "kappa": "kappa",
    "barrier": "c",
    "s0": "s0",
    "horizon": "horizon",
}


class UsageError(ValueError):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _formats(text):
    out = [x.strip() for x in text.split(",") if x.strip()]
    bad = [x for x in out if x not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    for flag in PARAM_FLAGS:
        g.add_argument(f"--{flag}", type=float, default=None)
    g.add_argument("--config", type=Path, default=None, help="key=value file (sigma, gamma, kappa, c, s0, horizon)")
    r = common.add_argument_group("run")
    r.add_argument("--seed", type=int, default=sim.SimConfig.seed)
    r.add_argument("--paths", type=int, default=None, help="Monte Carlo paths")
    r.add_argument("--steps", type=int, default=None, help="time steps (Monte Carlo or PDE)")
    r.add_argument("--eps", type=_floats, default=None, help="smoothing width(s), comma-separated")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    r.add_argument("--format", type=_formats, default=None, help="comma list of csv,json,svg")

    parser = argparse.ArgumentParser(prog="targetzone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("value", parents=[common], help="closed-form U and v* surfaces")
    p.add_argument("--t-points", type=int, default=51)
    p.add_argument("--z-points", type=int, default=61)
    p.add_argument("--z-max", type=float, default=None)

    p = sub.add_parser("strategy", parents=[common], help="tabulate a strategy on a (t, z) grid")
    p.add_argument("--strategy", default="optimal")
    p.add_argument("--t-points", type=int, default=51)
    p.add_argument("--z-points", type=int, default=61)
    p.add_argument("--z-max", type=float, default=None)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo objective of one strategy")
    p.add_argument("--strategy", default="optimal")
    p.add_argument("--convention", choices=sim.CONVENTIONS, default="pushing")
    p.add_argument("--band", type=float, default=None, help="band width for the band local time")
    p.add_argument("--per-path", action="store_true", help="also write paths.csv")

    for name, help_text in (("ueps", "Feynman-Kac estimates of U_eps"), ("converge", "eps -> 0 study")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--t", type=float, default=None, help="time to go (default: horizon)")
        p.add_argument("--z", type=_floats, default=[0.0, 0.25, 0.5, 1.0], help="offsets from the barrier")
        if name == "converge":
            p.add_argument("--rms-steps", type=int, default=20_000)
            p.add_argument("--rms-band", type=float, default=0.02)

    p = sub.add_parser("pde", parents=[common], help="finite-difference solves")
    p.add_argument("--equation", choices=("singular", "hjb_eps", "hopf_cole"), default="singular")
    p.add_argument("--nz", type=int, default=601)
    p.add_argument("--compare", choices=("closed-form",), default=None)
    p.add_argument("--export-t", type=int, default=101, help="time rows written to CSV")
    p.add_argument("--export-z", type=int, default=121, help="space columns written to CSV")

    p = sub.add_parser("compare", parents=[common], help="rank strategies by Monte Carlo payoff")
    p.add_argument("--strategies", default="optimal,zero,constant:-0.5,constant:0.5")
    p.add_argument("--convention", choices=sim.CONVENTIONS, default="pushing")

    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], default=None)
    return parser


def resolve_params(args) -> ModelParams:
    values = {}
    if args.config is not None:
        values.update(output.read_config(args.config))
    for flag, field in PARAM_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            values[field] = v
    return validate(ModelParams(**values))


def parse_strategy(spec: str, params: ModelParams, steps: int = 2000) -> object:
    """``zero``, ``constant:a``, ``optimal``, ``scaled:f`` or ``regularized:eps``."""
    kind, _, arg = spec.strip().partition(":")
    try:
        if kind == "zero" and not arg:
            return Zero()
        if kind == "optimal" and not arg:
            return ClosedFormOptimal()
        if kind == "constant":
            return Constant(float(arg))
        if kind == "scaled":
            return Scaled(ClosedFormOptimal(), float(arg))
        if kind == "regularized":
            eps = float(arg)
            return RegularizedOptimal.from_surface(params, eps, pde.solve_hjb_eps(params, eps, _eps_grid(params, eps, steps)))
    except ValueError as exc:
        raise UsageError(f"bad strategy {spec!r}: {exc}") from None
    raise UsageError(f"unknown strategy {spec!r}; use zero, constant:a, optimal, scaled:f or regularized:eps")


def _eps_grid(params, eps, nt, nz=601):
    width = 6.0 * params.sigma * math.sqrt(params.horizon)
    nz = max(nz, int(math.ceil(width / (math.sqrt(eps) / 4.0))) + 1)
    return pde.Grid1D.default(params, nz, nt, width)


def _sim_config(args, params, default_paths=10_000, default_steps=1000, band=None):
    return sim.SimConfig(
        n_steps=args.steps or default_steps,
        n_paths=args.paths or default_paths,
        seed=args.seed,
        band_eps=band,
        n_workers=args.workers,
    )


def _want(args, fmt, default=FORMATS):
    return fmt in (args.format or default)


def _grid(args, params):
    z_max = args.z_max if args.z_max is not None else ClosedForm(params).default_z_max()
    if not z_max > params.c:
        raise UsageError("--z-max must exceed the barrier")
    if args.t_points < 2 or args.z_points < 2:
        raise UsageError("need at least two grid points in t and z")
    return np.linspace(0.0, params.horizon, args.t_points), np.linspace(params.c, z_max, args.z_points)


def _slope(params, t, z):
    """``dU/dz`` with its ``t -> 0`` limit (-1 on the barrier, 0 above)."""
    t, z = np.broadcast_arrays(np.asarray(t, float), np.asarray(z, float))
    out = np.where(z == params.c, -1.0, 0.0)
    live = t > 0
    if np.any(live):
        out[live] = ClosedForm(params).du_dz(t[live], z[live])
    return out


def cmd_value(args, params, echo):
    times, zs = _grid(args, params)
    t, z = np.meshgrid(times, zs, indexing="ij")
    u = np.asarray(ClosedForm(params).value_u(t, z))
    uz = _slope(params, t, z)
    v = params.gamma / (2.0 * params.kappa) * _slope(params, params.horizon - t, z)
    written = []
    if _want(args, "csv"):
        rows = zip(t.ravel(), z.ravel(), u.ravel(), uz.ravel(), v.ravel())
        written.append(output.write_csv(args.out / "value.csv", ["t", "z", "U", "dUdz", "v_star"], rows))
    if _want(args, "svg"):
        written.append(output.write_svg_surface(args.out / "value_U.svg", times, zs, u, "value function U(t, z)", "U"))
        written.append(output.write_svg_surface(args.out / "value_vstar.svg", times, zs, v, "optimal speed v*(t, z)", "v*"))
    return written, 0


def cmd_strategy(args, params, echo):
    strategy = parse_strategy(args.strategy, params, args.steps or 2000)
    times, zs = _grid(args, params)
    t, z = np.meshgrid(times, zs, indexing="ij")
    v = np.asarray(eval_strategy(strategy, params, t, z), dtype=float) * np.ones_like(t)
    written = []
    if _want(args, "csv"):
        written.append(output.write_csv(args.out / "strategy.csv", ["t", "z", "v"], zip(t.ravel(), z.ravel(), v.ravel())))
    if _want(args, "svg"):
        written.append(output.write_svg_surface(args.out / "strategy.svg", times, zs, v, f"speed: {strategy.name}", "v"))
    return written, 0


def cmd_simulate(args, params, echo):
    strategy = parse_strategy(args.strategy, params, args.steps or 2000)
    config = _sim_config(args, params, band=args.band)
    batch = sim.simulate_paths(params, strategy, config)
    est = sim.McEstimate.from_samples(batch.payoff(args.convention))
    target = ClosedForm(params).value_u(params.horizon, params.s0)
    summary = {
        "strategy": strategy.name,
        "convention": args.convention,
        "mean": est.mean,
        "std_error": est.std_error,
        "n_paths": config.n_paths,
        "n_steps": config.n_steps,
        "seed": config.seed,
        "band": config.band(params),
        "pushing": float(np.mean(batch.pushing)),
        "band_local_time": float(np.mean(batch.band_local_time)),
        "cost": float(np.mean(batch.cost)),
        "closed_form_target": target,
        "z_score": est.z_score(target),
        "params": _params_dict(params),
    }
    echo(f"{strategy.name}: {est.mean:.6f} +- {est.std_error:.2e} (target {target:.6f}, z = {summary['z_score']:.2f})")
    written = []
    if _want(args, "json"):
        written.append(output.write_json(args.out / "simulate.json", summary))
    if args.per_path:
        header = ["path_index", "terminal_s", "pushing", "band_local_time", "cost", "payoff"]
        rows = zip(
            batch.path_index, batch.terminal_s, batch.pushing, batch.band_local_time, batch.cost, batch.payoff(args.convention)
        )
        written.append(output.write_csv(args.out / "paths.csv", header, rows))
    return written, 0


def _eps_list(args, default):
    eps = args.eps or default
    if any(e <= 0 for e in eps):
        raise UsageError("--eps values must be > 0")
    return sorted(eps, reverse=True)


def _study(args, params, default_eps):
    eps = _eps_list(args, default_eps)
    t = params.horizon if args.t is None else args.t
    zs = [params.c + dz for dz in args.z]
    config = _sim_config(args, params, default_paths=20_000, default_steps=4000)
    return eps, t, zs, config, regularized.convergence_study(params, eps, t, zs, config)


_STUDY_HEADER = ["eps", "z", "U_eps", "std_error", "U_closed_form", "abs_error"]


def cmd_ueps(args, params, echo):
    _, t, _, _, table = _study(args, params, [1e-2])
    for row in table.rows:
        echo("eps={:g} z={:g}: U_eps={:.6f} +- {:.1e} (limit {:.6f})".format(*row[:5]))
    written = []
    if _want(args, "csv"):
        written.append(output.write_csv(args.out / "ueps.csv", _STUDY_HEADER, table.rows))
    return written, 0


def cmd_converge(args, params, echo):
    eps, t, zs, config, table = _study(args, params, [1e-1, 1e-2, 1e-3])
    rms_cfg = sim.SimConfig(n_steps=args.rms_steps, n_paths=max(1, config.n_paths // 10), seed=args.seed, n_workers=args.workers)
    rms = regularized.local_time_rms(params, eps, t, params.c, rms_cfg, band=args.rms_band)
    slopes = regularized.loglog_slopes(eps, rms) if len(eps) > 1 else np.array([])
    for e in eps:
        echo(f"eps={e:g}: sup error {table.sup_errors[e]:.5f}")
    echo(f"sup errors decreasing: {table.decreasing()}; local-time RMS slopes {np.round(slopes, 3).tolist()}")
    written = []
    if _want(args, "csv"):
        written.append(output.write_csv(args.out / "converge.csv", _STUDY_HEADER, table.rows))
    if _want(args, "json"):
        summary = {
            "t": t,
            "z": zs,
            "eps": eps,
            "sup_errors": [table.sup_errors[e] for e in eps],
            "decreasing": table.decreasing(),
            "rms": rms.tolist(),
            "rms_slopes": slopes.tolist(),
            "n_paths": config.n_paths,
            "n_steps": config.n_steps,
        }
        written.append(output.write_json(args.out / "converge.json", summary))
    return written, 0


def _subsample(n, k):
    return np.unique(np.linspace(0, n - 1, min(n, max(k, 2))).round().astype(int))


def cmd_pde(args, params, echo):
    nt = args.steps or 2000
    if args.equation == "singular":
        grid = pde.Grid1D.default(params, args.nz, nt)
        surface = pde.solve_singular(params, grid)
    else:
        eps = _eps_list(args, [1e-2])
        if len(eps) != 1:
            raise UsageError("pde takes a single --eps value")
        grid = _eps_grid(params, eps[0], nt, args.nz)
        if args.equation == "hjb_eps":
            surface = pde.solve_hjb_eps(params, eps[0], grid)
        else:
            surface = pde.solve_hopf_cole(params, eps[0], grid)[1]
    ti = _subsample(grid.nt + 1, args.export_t)
    zi = _subsample(grid.nz, args.export_z)
    times, zs = grid.times[ti], grid.zs[zi]
    values = surface.values[np.ix_(ti, zi)]
    echo(f"{args.equation}: {grid.nz} x {grid.nt + 1} grid, stability ratio {surface.stability:.3g}")
    written = []
    if _want(args, "csv"):
        t, z = np.meshgrid(times, zs, indexing="ij")
        rows = zip(t.ravel(), z.ravel(), values.ravel())
        written.append(output.write_csv(args.out / f"pde_{args.equation}.csv", ["t", "z", "value"], rows))
    if _want(args, "svg"):
        written.append(output.write_svg_surface(args.out / f"pde_{args.equation}.svg", times, zs, values, args.equation, "U"))
    if args.compare == "closed-form":
        exact = pde.sample_closed_form(params, grid).values
        err = np.abs(surface.values - exact)
        slope = pde.boundary_gradient(surface)
        rows = [(grid.times[k], float(err[k].max()), float(slope[k])) for k in ti]
        echo(f"sup |PDE - closed form| = {err.max():.3e}")
        written.append(output.write_csv(args.out / f"pde_{args.equation}_error.csv", ["t", "sup_abs_error", "dUdz_at_c"], rows))
    return written, 0


def cmd_compare(args, params, echo):
    specs = [s for s in args.strategies.split(",") if s.strip()]
    if len(specs) < 2:
        raise UsageError("compare needs at least two strategies")
    config = _sim_config(args, params, default_steps=2000)
    rows = []
    for spec in specs:
        strategy = parse_strategy(spec, params, config.n_steps)
        est = sim.mc_objective(params, strategy, config, args.convention)
        rows.append((spec, est.mean, est.std_error))
    # stable sort keeps input order for exact ties
    ranked = sorted(rows, key=lambda r: -r[1])
    table = [(rank, *row) for rank, row in enumerate(ranked, 1)]
    for rank, spec, mean, se in table:
        echo(f"{rank:2d}  {spec:<20s} {mean: .6f} +- {se:.1e}")
    written = []
    if _want(args, "csv"):
        written.append(output.write_csv(args.out / "compare.csv", ["rank", "strategy", "mean", "std_error"], table))
    if _want(args, "json"):
        payload = {"n_paths": config.n_paths, "n_steps": config.n_steps, "seed": config.seed, "ranking": [
            {"rank": r, "strategy": s, "mean": m, "std_error": e} for r, s, m, e in table
        ]}
        written.append(output.write_json(args.out / "compare.json", payload))
    return written, 0


def cmd_accept(args, params, echo):
    results = acceptance.run(quick=args.quick, only=args.only, echo=echo, seed=args.seed)
    passed = all(r.passed for r in results)
    echo(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    written = []
    if _want(args, "json", ("json",)):
        payload = {"quick": args.quick, "seed": args.seed, "passed": passed, "criteria": [r.as_dict() for r in results]}
        written.append(output.write_json(args.out / "accept.json", payload))
    return written, 0 if passed else 1


def _params_dict(params):
    return {"sigma": params.sigma, "gamma": params.gamma, "kappa": params.kappa, "c": params.c, "s0": params.s0, "horizon": params.horizon}


COMMANDS = {
    "value": cmd_value,
    "strategy": cmd_strategy,
    "simulate": cmd_simulate,
    "ueps": cmd_ueps,
    "pde": cmd_pde,
    "converge": cmd_converge,
    "compare": cmd_compare,
    "accept": cmd_accept,
}


def main(argv=None, echo=print) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = resolve_params(args)
        if args.paths is not None and args.paths < 1 or args.steps is not None and args.steps < 1:
            raise UsageError("--paths and --steps must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        written, status = COMMANDS[args.command](args, params, echo)
    except (ValueError, OSError, pde.SolverError) as exc:
        print(f"targetzone {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        echo(f"wrote {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
