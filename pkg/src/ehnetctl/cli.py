"""Command-line entry point.

Subcommands:

- ``validate``: check a config file's system conditions and print the
  admissible (V, gamma) window.
- ``simulate``: run an ensemble of seeded simulations, write per-run trace
  CSVs and an ensemble summary JSON.
- ``sweep``: sweep gamma, V or e_max and write a combined CSV (optionally a
  self-contained SVG chart) suitable for plotting.
- ``tune-gap``: minimize the provable optimality gap over (V, gamma) and
  cross-check against the built-in grid search.

Exit codes: 0 success, 2 validation/config failure, 3 runtime invariant
violation, 4 solver failure.
"""

from __future__ import annotations

import argparse
import sys as _sys
from pathlib import Path

from . import analysis, traceio
from .config import ConfigError, SimConfig, describe_window, load_config
from .controller import SolverError
from .model import EPS, InvariantViolation, param_window
from .simulator import run_ensemble

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3
EXIT_SOLVER = 4


def _parse_gamma(raw: str | None):
    if raw is None or raw == "min":
        return None
    return float(raw)


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    rep = cfg.validate()
    print(rep)
    V = float(cfg.defaults.get("V", 30.0))
    print(describe_window(cfg, V))
    return EXIT_OK if rep.ok else EXIT_VALIDATION


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    repl = {}
    for name in ("eta", "xi", "e_max"):
        v = getattr(args, name, None)
        if v is not None:
            repl[name] = v
    return cfg.with_system(**repl) if repl else cfg


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rep = cfg.validate()
    if not rep.ok:
        print(rep, file=_sys.stderr)
        return EXIT_VALIDATION
    V = args.V if args.V is not None else float(cfg.defaults["V"])
    gamma = _parse_gamma(args.gamma)
    try:
        ctrl = analysis.make_controller(args.algorithm, cfg.net, cfg.sys, cfg.model,
                                        cfg.util, V, gamma)
    except ValueError as exc:
        win = param_window(cfg.sys)
        print(f"refusing parameters: {exc}", file=_sys.stderr)
        print(f"admissible window: V in (0, {win.V_max:g}], gamma in "
              f"[{win.gamma_min(V):g}, {win.gamma_max(V):g}] at V = {V:g}",
              file=_sys.stderr)
        return EXIT_VALIDATION

    horizon = args.horizon if args.horizon is not None else int(cfg.defaults["horizon"])
    runs = args.runs if args.runs is not None else int(cfg.defaults["runs"])
    seed = args.seed if args.seed is not None else int(cfg.defaults["seed"])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary, traces = run_ensemble(ctrl, horizon, runs, seed, keep_traces=True)
    for i, tr in enumerate(traces):
        traceio.write_trace(out / f"trace_run{i:03d}.csv", tr, cfg.net, cfg.sys.xi)
    traceio.write_summary(out / "summary.json", summary)
    print(f"{args.algorithm}: {runs} run(s) x {horizon} slots, base seed {seed}")
    print(f"mean utility = {summary.mean('utility'):.6g} "
          f"(std {summary.std('utility'):.3g})")
    print(f"energy utilization = {summary.mean('energy_utilization'):.4%}")
    print(f"wrote {runs} trace file(s) and summary.json under {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rep = cfg.validate()
    if not rep.ok:
        print(rep, file=_sys.stderr)
        return EXIT_VALIDATION
    V = args.V if args.V is not None else float(cfg.defaults["V"])
    horizon = args.horizon if args.horizon is not None else int(cfg.defaults["horizon"])
    runs = args.runs if args.runs is not None else int(cfg.defaults["runs"])
    seed = args.seed if args.seed is not None else int(cfg.defaults["seed"])
    if args.algorithms:
        algorithms = tuple(args.algorithms.split(","))
    else:
        algorithms = ("proposed", "esa", "greedy") if args.param == "e_max" else ("proposed",)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, skipped = [], []
    for raw in args.values:
        for alg in algorithms:
            try:
                point_cfg = cfg
                point_V, gamma = V, None
                if args.param == "gamma":
                    gamma = None if raw == "min" else float(raw)
                elif args.param == "V":
                    point_V = float(raw)
                else:
                    point_cfg = cfg.with_system(e_max=float(raw))
                    srep = point_cfg.validate()
                    if not srep.ok:
                        raise ValueError(f"system conditions fail at e_max = {raw}")
                ctrl = analysis.make_controller(alg, point_cfg.net, point_cfg.sys,
                                                point_cfg.model, point_cfg.util,
                                                point_V, gamma)
                summary = run_ensemble(ctrl, horizon, runs, seed)
            except ValueError as exc:
                skipped.append((raw, alg, str(exc)))
                print(f"skipping {args.param} = {raw} [{alg}]: {exc}", file=_sys.stderr)
                continue
            if args.param == "gamma" and raw == "min":
                value = param_window(point_cfg.sys).gamma_min(point_V)
            else:
                value = float(raw)
            rows.append({"param_value": value, "algorithm": alg,
                         "mean_utility": summary.mean("utility"),
                         "std_utility": summary.std("utility"),
                         "energy_utilization": summary.mean("energy_utilization")})
            tag = f"{args.param}{value:g}_{alg}"
            traceio.write_summary(out / f"summary_{tag}.json", summary)
    csv_path = out / f"sweep_{args.param}.csv"
    traceio.write_sweep_csv(csv_path, rows)
    print(f"wrote {csv_path} ({len(rows)} points, {len(skipped)} skipped)")
    if args.svg and rows:
        series: dict[str, tuple[list, list]] = {}
        for alg in algorithms:
            pts = [(r["param_value"], r["mean_utility"]) for r in rows
                   if r["algorithm"] == alg]
            if pts:
                series[alg] = ([p[0] for p in pts], [p[1] for p in pts])
        svg_path = out / f"sweep_{args.param}.svg"
        traceio.svg_line_chart(svg_path, series, title=f"utility vs {args.param}",
                               xlabel=args.param, ylabel="mean utility")
        print(f"wrote {svg_path}")
    return EXIT_OK


def cmd_tune_gap(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    win = param_window(cfg.sys)
    v_cap = args.V_cap
    if v_cap is None:
        if win.V_max == float("inf"):
            print("window unbounded: pass --V-cap explicitly", file=_sys.stderr)
            return EXIT_VALIDATION
        v_cap = win.V_max
    if v_cap > win.V_max + EPS:
        print(f"V_cap = {v_cap:g} exceeds V_max = {win.V_max:g}", file=_sys.stderr)
        return EXIT_VALIDATION
    N, d_max = cfg.net.n_nodes, cfg.net.d_max
    v_star, g_star, g_min = analysis.minimize_gap(cfg.sys, N, d_max, v_cap)
    gv, gg, gval = analysis.gap_grid_oracle(cfg.sys, N, d_max, v_cap, density=400)
    print(f"V* = {v_star:.10g}")
    print(f"gamma* = {g_star:.10g}")
    print(f"G_min = {g_min:.10g}")
    print(f"grid oracle (400x400): value {gval:.10g} at (V, gamma) = ({gv:.6g}, {gg:.6g})")
    print(f"solver - grid delta = {g_min - gval:.3e} "
          f"({(g_min - gval) / gval:.3e} relative)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehnetctl",
                                description="Energy-harvesting network control simulator")
    sub = p.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="validate a config file")
    pv.add_argument("config")
    pv.set_defaults(func=cmd_validate)

    def common(sp):
        sp.add_argument("config")
        sp.add_argument("--V", type=float, default=None)
        sp.add_argument("--horizon", type=int, default=None)
        sp.add_argument("--runs", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--eta", type=float, default=None, help="override storage efficiency")
        sp.add_argument("--xi", type=float, default=None, help="override (dis-)charging efficiency")
        sp.add_argument("--out-dir", default="out")

    ps = sub.add_parser("simulate", help="run a seeded simulation ensemble")
    common(ps)
    ps.add_argument("--algorithm", choices=("proposed", "esa", "greedy"), default="proposed")
    ps.add_argument("--gamma", default=None, help='battery price offset, or "min" (default)')
    ps.add_argument("--e-max", dest="e_max", type=float, default=None,
                    help="override per-slot harvest ceiling")
    ps.set_defaults(func=cmd_simulate)

    pw = sub.add_parser("sweep", help="sweep gamma, V or e_max and export CSV")
    common(pw)
    pw.add_argument("--param", choices=("gamma", "V", "e_max"), required=True)
    pw.add_argument("--values", nargs="+", required=True,
                    help='sweep values; gamma also accepts "min"')
    pw.add_argument("--algorithms", default=None,
                    help="comma list among proposed,esa,greedy")
    pw.add_argument("--svg", action="store_true", help="also emit an SVG line chart")
    pw.set_defaults(func=cmd_sweep)

    pt = sub.add_parser("tune-gap", help="minimize the provable optimality gap")
    pt.add_argument("config")
    pt.add_argument("--V-cap", dest="V_cap", type=float, default=None)
    pt.add_argument("--eta", type=float, default=None)
    pt.add_argument("--xi", type=float, default=None)
    pt.set_defaults(func=cmd_tune_gap)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        print(f"invariant violation at slot {exc.slot}: {exc}", file=_sys.stderr)
        for k, v in exc.dump.items():
            print(f"  {k} = {v}", file=_sys.stderr)
        return EXIT_INVARIANT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=_sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
