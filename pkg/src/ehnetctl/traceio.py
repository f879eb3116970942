"""File formats: per-run trace CSV, ensemble summary JSON, sweep CSV, SVG charts.

All files are UTF-8; CSV uses '.' as the decimal separator; JSON numbers are
doubles.  Floats are written with repr (shortest round-trip form), so
identical runs produce byte-identical files and summaries reload exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .model import NetworkSpec
from .simulator import EnsembleSummary, RunTrace

TRACE_COLUMNS = ["slot", "node", "flow", "Q", "E", "R", "P_total", "mu_total",
                 "e_harvested", "S_summary"]


def _fmt(x) -> str:
    return repr(float(x))


def write_trace(path: str | Path, trace: RunTrace, net: NetworkSpec, xi: float) -> None:
    """One row per (slot, node, flow) for data queues/admissions, plus one
    energy row per (slot, node) carrying battery, power, rate, harvest and
    the node's out-link channel states (ascending receiver id, ';'-joined)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t in range(trace.horizon):
            for n, node in enumerate(net.nodes):
                for c, flow in enumerate(net.flows):
                    w.writerow([t, node, flow, _fmt(trace.Q[t, n, c]), "",
                                _fmt(trace.R[t, n, c]), "", "", "", ""])
                links = net.out_links[n]
                p_tot = trace.P[t, list(links)].sum() if links else 0.0
                mu_tot = trace.mu_link[t, list(links)].sum() if links else 0.0
                s_sum = ";".join(_fmt(trace.S[t, l]) for l in links)
                w.writerow([t, node, "", "", _fmt(trace.E[t, n]), "",
                            _fmt(p_tot), _fmt(mu_tot),
                            _fmt(trace.harvest[t, n] / xi), s_sum])


def read_trace(path: str | Path) -> list[dict]:
    """Rows of a trace CSV as dicts (strings preserved; numerics parsed)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header: {r.fieldnames}")
        for row in r:
            parsed = dict(row)
            for k in ("slot", "node"):
                parsed[k] = int(row[k])
            parsed["flow"] = int(row["flow"]) if row["flow"] else None
            for k in ("Q", "E", "R", "P_total", "mu_total", "e_harvested"):
                parsed[k] = float(row[k]) if row[k] else None
            out.append(parsed)
    return out


def write_summary(path: str | Path, summary: EnsembleSummary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary(path: str | Path) -> EnsembleSummary:
    with open(path, encoding="utf-8") as fh:
        return EnsembleSummary.from_dict(json.load(fh))


SWEEP_COLUMNS = ["param_value", "algorithm", "mean_utility", "std_utility",
                 "energy_utilization"]


def write_sweep_csv(path: str | Path, rows: list[dict]) -> None:
    """rows: dicts with the SWEEP_COLUMNS keys (param_value may repeat per algorithm)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row["param_value"]), row["algorithm"],
                        _fmt(row["mean_utility"]), _fmt(row["std_utility"]),
                        _fmt(row["energy_utilization"])])


def svg_line_chart(path: str | Path, series: dict[str, tuple[list, list]],
                   title: str, xlabel: str, ylabel: str,
                   width: int = 640, height: int = 420) -> None:
    """Write a small self-contained SVG line chart (one polyline per series)."""
    ml, mr, mt, mb = 60, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return ml + pw * (x - x0) / (x1 - x0)

    def sy(y):
        return mt + ph * (1.0 - (y - y0) / (y1 - y0))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
              "#e377c2", "#7f7f7f"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for i in range(5):
        xv = x0 + i * (x1 - x0) / 4
        yv = y0 + i * (y1 - y0) / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - mb + 18}" text-anchor="middle">'
                     f'{xv:.3g}</text>')
        parts.append(f'<text x="{ml - 6}" y="{sy(yv):.1f}" text-anchor="end" '
                     f'dominant-baseline="middle">{yv:.3g}</text>')
        parts.append(f'<line x1="{ml}" y1="{sy(yv):.1f}" x2="{ml + pw}" y2="{sy(yv):.1f}" '
                     f'stroke="#ddd"/>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
                 f'{xlabel}</text>')
    parts.append(f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{ylabel}</text>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = colors[i % len(colors)]
        pts = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(float(x)):.2f}" cy="{sy(float(y)):.2f}" r="2.5" '
                         f'fill="{color}"/>')
        ly = mt + 16 + 18 * i
        parts.append(f'<line x1="{ml + pw + 8}" y1="{ly - 4}" x2="{ml + pw + 28}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw + 33}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")
