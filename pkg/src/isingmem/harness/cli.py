"""Command-line entry point: ``isingmem <command> [options]``.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 fit did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from ..exceptions import ConfigError, FitError, IsingMemError
from .config import ExperimentConfig, load_config
from .diagnostics import error_bound, regime_check
from .experiment import (
    SWEEP_AXES,
    SWEEP_COLUMNS,
    compare_decoders,
    config_row,
    estimate_lifetime,
    sweep,
)
from .fitting import extrapolate_threshold, fit_threshold

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_NO_CONVERGENCE = 0, 1, 2, 3

log = logging.getLogger("isingmem")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", type=Path, default=d, help="YAML experiment config")
    p.add_argument("--seed", type=int, default=d, help="master seed (overrides config)")
    p.add_argument("--trials", type=int, default=d, help="trials per point (overrides config)")
    p.add_argument("--out", type=Path, default=d, help="directory for the output file")
    p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS if suppress else "csv")


def _values(text: str) -> list[str]:
    return [v for v in (s.strip() for s in text.split(",")) if v]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isingmem", description="Ising-chain memory lifetime experiments")
    _add_common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _add_common(p, suppress=True)
        return p

    add("simulate", "lifetime estimate for one config")
    p = add("sweep", "lifetime estimates along one parameter axis")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", type=_values, required=True,
                   help="comma-separated values; m accepts fractions like 3/7")
    p = add("fit", "fit the threshold temperature to a temperature sweep")
    p.add_argument("--input", type=Path, required=True, help="sweep CSV")
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--weighted", action="store_true", help="weight points by enhancement_stderr")
    p.add_argument("--max-nfev", type=int, default=500, help="cap on residual evaluations")
    p = add("extrapolate", "extrapolate threshold temperatures to 1/L -> 0")
    p.add_argument("--input", type=Path, required=True, help="CSV with columns L,T_th[,T_th_err]")
    add("regime-check", "check the separations of scale for a config")
    p = add("compare-decoders", "temperature sweeps for all fusion-probability variants")
    p.add_argument("--values", type=_values, required=True, help="comma-separated temperatures")
    p = add("bound", "union bound on uncorrectable errors")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--lambda", dest="unit_cell", type=int, required=True)
    p.add_argument("--ratio", type=float, required=True)
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.trials is not None:
        changes["n_trials"] = args.trials
    return cfg.replace(**changes) if changes else cfg


def _csv_text(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k, "")) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / name
    path.write_text(text if text.endswith("\n") else text + "\n")
    print(path)


def _emit_rows(args, stem: str, rows: list[dict]) -> None:
    for row in rows:
        if "error" in row:
            log.error("row %s: %s", row.get("axis_value"), row["error"])
    if args.format == "json":
        _emit(args, f"{stem}.json", json.dumps(_json_safe(rows), indent=2))
    else:
        _emit(args, f"{stem}.csv", _csv_text(rows, SWEEP_COLUMNS))


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_simulate(args):
    cfg = _config(args)
    est = estimate_lifetime(cfg)
    row = config_row(cfg, "")
    row.update(trials=est.trials, completed=est.completed, truncated=est.truncated,
               mean_lifetime=est.mean_lifetime, stderr=est.stderr,
               enhancement=est.enhancement, enhancement_stderr=est.enhancement_stderr)
    if args.format == "json":
        row.update(bare_rate=est.bare_rate, lower_bound_only=est.lower_bound_only)
        _emit(args, "simulate.json", json.dumps(_json_safe(row), indent=2))
    else:
        _emit(args, "simulate.csv", _csv_text([row], SWEEP_COLUMNS))


def cmd_sweep(args):
    rows = sweep(_config(args), args.axis, args.values)
    _emit_rows(args, f"sweep_{args.axis}", rows)


def cmd_compare(args):
    table = compare_decoders(_config(args), args.values)
    rows = [r for variant_rows in table.values() for r in variant_rows]
    _emit_rows(args, "compare_decoders", rows)


def cmd_fit(args):
    rows = [r for r in _read_csv(args.input) if r.get("enhancement")]
    T = [float(r["temperature"]) for r in rows]
    y = [float(r["enhancement"]) for r in rows]
    sigma = None
    if args.weighted:
        sigma = [float(r["enhancement_stderr"]) for r in rows]
    res = fit_threshold(T, y, sigma, n_bootstrap=args.bootstrap, max_nfev=args.max_nfev)
    _emit(args, "fit.json", res.to_json())


def cmd_extrapolate(args):
    rows = _read_csv(args.input)
    try:
        L = [float(r["L"]) for r in rows]
        T = [float(r["T_th"]) for r in rows]
        err = [float(r["T_th_err"]) for r in rows] if rows and rows[0].get("T_th_err") else None
    except KeyError as exc:
        raise ConfigError(f"{args.input} lacks column {exc}") from exc
    _emit(args, "extrapolate.json", extrapolate_threshold(L, T, err).to_json())


def cmd_regime(args):
    report = regime_check(_config(args))
    if args.format == "json":
        _emit(args, "regime_check.json", json.dumps(report.as_dict(), indent=2))
    else:
        rows = report.as_dict()["conditions"]
        _emit(args, "regime_check.csv",
              _csv_text(rows, ("name", "small", "large", "verdict", "note")))


def cmd_bound(args):
    p = error_bound(args.L, args.unit_cell, args.ratio)
    if args.format == "json":
        _emit(args, "bound.json", json.dumps({"L": args.L, "lambda": args.unit_cell,
                                              "ratio": args.ratio, "bound": p}))
    else:
        _emit(args, "bound.csv", f"L,lambda,ratio,bound\n{args.L},{args.unit_cell},"
                                 f"{args.ratio!r},{p!r}\n")


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "extrapolate": cmd_extrapolate,
    "regime-check": cmd_regime,
    "compare-decoders": cmd_compare,
    "bound": cmd_bound,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.trace:
            print("residual trace: " + " ".join(f"{r:.3g}" for r in exc.trace[-10:]),
                  file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ValueError, FileNotFoundError) as exc:
        # ConfigError and out-of-domain arguments both land here
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IsingMemError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
