#!/usr/bin/env python3
"""Utility versus the battery price offset, one curve per storage efficiency.

Sweeps gamma from the window minimum upward at fixed V and writes a long-form
CSV (eta, gamma, mean_utility, std_utility, goodput_utility).
"""

import argparse
import csv
from pathlib import Path

from ehnetctl.analysis import make_controller
from ehnetctl.config import load_config, paper_config_path
from ehnetctl.model import param_window
from ehnetctl.simulator import run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(paper_config_path()))
    ap.add_argument("--V", type=float, default=30.0)
    ap.add_argument("--etas", type=float, nargs="+", default=[0.98, 0.97, 0.96])
    ap.add_argument("--gammas", type=float, nargs="+", default=[70, 80, 90, 100],
                    help="swept offsets; the window minimum is always prepended")
    ap.add_argument("--horizon", type=int, default=1200)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="results/gamma_sweep.csv")
    args = ap.parse_args()

    cfg0 = load_config(args.config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "gamma", "mean_utility", "std_utility", "goodput_utility"])
        for eta in args.etas:
            cfg = cfg0.with_system(eta=eta)
            gammas = [param_window(cfg.sys).gamma_min(args.V)] + list(args.gammas)
            for gamma in gammas:
                ctrl = make_controller("proposed", cfg.net, cfg.sys, cfg.model,
                                       cfg.util, args.V, gamma)
                s = run_ensemble(ctrl, args.horizon, args.runs, args.seed)
                w.writerow([eta, gamma, s.mean("utility"), s.std("utility"),
                            s.mean("goodput_utility")])
                print(f"eta={eta} gamma={gamma:.2f}: utility "
                      f"{s.mean('utility'):.4f} +- {s.std('utility'):.4f}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
