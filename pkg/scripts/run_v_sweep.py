#!/usr/bin/env python3
"""Utility versus the admission weight V, one curve per storage efficiency.

Each point uses the window-minimum battery price offset for its V.  Writes a
long-form CSV (eta, V, mean_utility, std_utility, goodput_utility).
"""

import argparse
import csv
from pathlib import Path

from ehnetctl.analysis import make_controller
from ehnetctl.config import load_config, paper_config_path
from ehnetctl.simulator import run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(paper_config_path()))
    ap.add_argument("--Vs", type=float, nargs="+", default=[5, 10, 20, 30, 40, 50])
    ap.add_argument("--etas", type=float, nargs="+", default=[0.98, 0.97, 0.96])
    ap.add_argument("--horizon", type=int, default=1200)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="results/v_sweep.csv")
    args = ap.parse_args()

    cfg0 = load_config(args.config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "V", "mean_utility", "std_utility", "goodput_utility"])
        for eta in args.etas:
            cfg = cfg0.with_system(eta=eta)
            for V in args.Vs:
                ctrl = make_controller("proposed", cfg.net, cfg.sys, cfg.model,
                                       cfg.util, V)
                s = run_ensemble(ctrl, args.horizon, args.runs, args.seed)
                w.writerow([eta, V, s.mean("utility"), s.std("utility"),
                            s.mean("goodput_utility")])
                print(f"eta={eta} V={V:g}: utility {s.mean('utility'):.4f} "
                      f"+- {s.std('utility'):.4f}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
