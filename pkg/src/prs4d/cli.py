"""Command-line front end: flat key=value configs, sweeps, CSV and SVG output."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields

import numpy as np

from . import constellation as const
from . import demapper as dm
from . import harness

_CONFIG_FIELDS = {f.name: f for f in fields(harness.ExperimentConfig)}


def _coerce(name: str, raw: str):
    """Parse a config value string into the field's type."""
    f = _CONFIG_FIELDS[name]
    raw = raw.strip()
    if f.type in ("bool", bool) or isinstance(f.default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if name == "launch_dbm":
        vals = [float(v) for v in raw.split(",")]
        return vals if len(vals) > 1 else vals[0]
    if isinstance(f.default, int) and not isinstance(f.default, bool):
        return int(raw)
    if isinstance(f.default, float):
        return float(raw)
    return raw


def parse_config(path: str | None, overrides: list[str] | None = None
                 ) -> harness.ExperimentConfig:
    """Build an ExperimentConfig from a flat key=value file plus overrides.

    Missing file (path None) means pure defaults. Unknown keys are
    rejected with the list of valid keys; field invariants are checked
    by the config dataclass itself.
    """
    kv = {}
    if path is not None:
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, val = (s.strip() for s in line.split("=", 1))
                kv[key] = val
    for ov in overrides or []:
        if "=" not in ov:
            raise ValueError(f"override {ov!r}: expected key=value")
        key, val = (s.strip() for s in ov.split("=", 1))
        kv[key] = val

    parsed = {}
    for key, val in kv.items():
        if key not in _CONFIG_FIELDS:
            valid = ", ".join(sorted(_CONFIG_FIELDS))
            raise ValueError(f"unknown config key {key!r}; valid keys: {valid}")
        parsed[key] = _coerce(key, val)
    return harness.ExperimentConfig(**parsed)


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def emit_plot(records, x_field: str, y_field: str, path: str,
              x_label: str | None = None, y_label: str | None = None) -> None:
    """Render one SVG polyline per (format, demapper) series.

    Hand-rolled SVG so identical inputs produce byte-identical files.
    """
    if not records:
        raise ValueError("no records to plot")
    series = {}
    for r in records:
        series.setdefault((r.format, r.demapper), []).append(r)
    for pts in series.values():
        if len(pts) < 2:
            raise ValueError("each series needs at least 2 records to plot")

    xs = np.array([getattr(r, x_field) for r in records], dtype=float)
    ys = np.array([getattr(r, y_field) for r in records], dtype=float)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    width, height = 640, 480
    ml, mr, mt, mb = 70, 20, 20, 50

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * (width - ml - mr)

    def sy(v):
        return height - mb - (v - y0) / (y1 - y0) * (height - mb - mt)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" '
        f'y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" '
        f'stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(
            f'<text x="{sx(xv):.2f}" y="{height - mb + 18}" font-size="11" '
            f'text-anchor="middle">{xv:.4g}</text>')
        out.append(
            f'<text x="{ml - 6}" y="{sy(yv) + 4:.2f}" font-size="11" '
            f'text-anchor="end">{yv:.4g}</text>')
    out.append(
        f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 12}" '
        f'font-size="13" text-anchor="middle">{x_label or x_field}</text>')
    out.append(
        f'<text x="16" y="{(mt + height - mb) / 2:.1f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 16 '
        f'{(mt + height - mb) / 2:.1f})">{y_label or y_field}</text>')

    for i, key in enumerate(sorted(series)):
        pts = sorted(series[key], key=lambda r: getattr(r, x_field))
        color = _PALETTE[i % len(_PALETTE)]
        path_pts = " ".join(
            f"{sx(getattr(r, x_field)):.2f},{sy(getattr(r, y_field)):.2f}"
            for r in pts)
        out.append(f'<polyline points="{path_pts}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<text x="{width - mr - 6}" y="{mt + 16 + 16 * i}" '
            f'font-size="12" text-anchor="end" fill="{color}">'
            f'{key[0]}/{key[1]}</text>')
    out.append("</svg>")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(out) + "\n")


def _add_common(p):
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides", help="override a config field")
    p.add_argument("--output", default="results.csv", help="output CSV path")
    p.add_argument("--plot", default=None, metavar="SVG",
                   help="also write an SVG line plot")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="prs4d",
        description="WDM fiber transmission simulator and 4D format evaluator",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a single transmission point")
    _add_common(p)

    p = sub.add_parser("sweep-power", help="GMI vs launch power")
    _add_common(p)
    p.add_argument("--powers", default="-4:6:1",
                   help="launch powers in dBm, lo:hi:step or comma list")

    p = sub.add_parser("sweep-distance", help="GMI vs span count")
    _add_common(p)
    p.add_argument("--spans", default="4,6,8,10,12,14",
                   help="comma list of span counts")

    p = sub.add_parser("sweep-channels", help="optimum-power rate vs channels")
    _add_common(p)
    p.add_argument("--channels", default="1,3,5", help="comma list of counts")
    p.add_argument("--powers", default="-2:4:0.5",
                   help="power grid used to locate the optimum")

    p = sub.add_parser("gmi-awgn", help="AWGN GMI reference curve")
    p.add_argument("--format", default="4d64prs",
                   choices=harness.VALID_FORMATS)
    p.add_argument("--snr", default="0:20:2", help="SNR grid in dB")
    p.add_argument("--method", default="quadrature",
                   choices=["quadrature", "monte_carlo"])
    p.add_argument("--output", default="-", help="CSV path or - for stdout")

    p = sub.add_parser("optimize-constellation",
                       help="grid-search the ring-switching geometry")
    p.add_argument("--snr", type=float, default=const.DEFAULT_PRS_SNR_DB)
    p.add_argument("--rho-range", default=None, help="lo,hi")
    p.add_argument("--theta-range", default=None, help="lo,hi")
    p.add_argument("--steps", type=int,
                   default=const.DEFAULT_PRS_GRID["steps"])

    p = sub.add_parser("export-constellation", help="write points + labels CSV")
    p.add_argument("--format", default="4d64prs",
                   choices=harness.VALID_FORMATS)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides", help="config overrides (prs_rho, ...)")
    p.add_argument("--output", default="constellation.csv")
    return ap


def _parse_grid(spec: str) -> list[float]:
    if ":" in spec:
        lo, hi, step = (float(v) for v in spec.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [lo + k * step for k in range(n)]
    return [float(v) for v in spec.split(",")]


def _run(args) -> int:
    if args.command in ("simulate", "sweep-power", "sweep-distance",
                        "sweep-channels"):
        cfg = parse_config(args.config, args.overrides)
        if args.command == "simulate":
            records = run_all_powers(cfg)
            xf = "launch_dbm"
        elif args.command == "sweep-power":
            records = harness.sweep_power(cfg, _parse_grid(args.powers))
            xf = "launch_dbm"
        elif args.command == "sweep-distance":
            spans = [int(v) for v in _parse_grid(args.spans)]
            records = harness.sweep_distance(cfg, spans)
            xf = "distance_km"
        else:
            counts = [int(v) for v in _parse_grid(args.channels)]
            records = harness.sweep_channels(cfg, counts,
                                             _parse_grid(args.powers))
            xf = "n_channels"
        harness.write_csv(records, args.output)
        if args.plot:
            yf = "ndr_gbps" if args.command == "sweep-channels" else "gmi_bit4d"
            emit_plot(records, xf, yf, args.plot)
        return 0

    if args.command == "gmi-awgn":
        c = const.build_format(args.format)
        lines = ["snr_db,format,gmi_bit4d"]
        for snr in _parse_grid(args.snr):
            gmi = dm.awgn_gmi_reference(c, snr, method=args.method)
            lines.append(f"{snr:.10g},{args.format},{gmi:.10g}")
        text = "\n".join(lines) + "\n"
        if args.output == "-":
            sys.stdout.write(text)
        else:
            with open(args.output, "w", newline="\n") as f:
                f.write(text)
        return 0

    if args.command == "optimize-constellation":
        grid = dict(const.DEFAULT_PRS_GRID)
        if args.rho_range:
            grid["rho_range"] = tuple(float(v) for v in args.rho_range.split(","))
        if args.theta_range:
            grid["theta_range"] = tuple(
                float(v) for v in args.theta_range.split(","))
        grid["steps"] = args.steps
        params, gmi = const.optimize_prs_params(args.snr, grid)
        print(f"rho={params.rho:.10g} theta={params.theta:.10g} "
              f"gmi={gmi:.10g}")
        return 0

    if args.command == "export-constellation":
        kv = dict(s.split("=", 1) for s in args.overrides)
        c = const.build_format(
            args.format,
            prs_rho=float(kv["prs_rho"]) if "prs_rho" in kv else None,
            prs_theta=float(kv["prs_theta"]) if "prs_theta" in kv else None,
            ring_ratio=float(kv.get("ring_ratio", 1.0 / 0.65)),
        )
        const.export_csv(c, args.output)
        return 0

    raise ValueError(f"unhandled command {args.command}")


def run_all_powers(cfg: harness.ExperimentConfig):
    powers = np.atleast_1d(np.asarray(cfg.launch_dbm, dtype=float))
    if powers.size == 1:
        return harness.run_point(cfg, float(powers[0]))
    return harness.sweep_power(cfg, [float(p) for p in powers])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
