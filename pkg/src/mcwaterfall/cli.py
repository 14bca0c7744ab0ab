"""Command-line front end: one JSON config in, JSON/CSV artifacts and figures out.

Subcommands: simulate, price, sensitivities, calibrate, timelapse, metrics.
Every command is deterministic given (config, seed): JSON is written with
sorted keys, CSVs with fixed column order, and figures render alongside the
delimited data (suppress with --no-plots).  Exit codes: 0 success, 1 user or
configuration error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import plots
from .assetpool import simulate_pool
from .calibration import calibrate
from .config import RunConfig, load_config
from .exceptions import ConfigurationError
from .metrics import tranche_metrics
from .pricing import forward_prices, price_distribution, price_tranches, sensitivities
from .sampling import RandomStream
from .waterfall import TRANCHE_NAMES

OUTDIR_ENV = "MCWATERFALL_OUTDIR"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def _report_payload(report) -> dict:
    payload = {}
    for name, t in report.tranches.items():
        payload[name] = {
            "price": t.price,
            "se": t.std_err,
            "gradients": t.gradients,
            "dv01": t.dv01,
            "bv01": t.bv01,
        }
    return payload


def cmd_simulate(cfg: RunConfig, outdir: Path, args) -> int:
    n_paths = args.paths if args.paths is not None else cfg.sim_paths
    paths = simulate_pool(cfg.pool, RandomStream(cfg.seed, "pool"), paths=n_paths)
    times = cfg.pool.times
    rows = []
    for p in range(paths.shape[0]):
        for j in range(paths.shape[1]):
            rows.append((p, j + 1, _fmt(times[j]), _fmt(paths[p, j])))
    _write_csv(outdir / "pool_paths.csv", ("path", "period", "time", "amount"), rows)
    base_rows = [(j + 1, _fmt(times[j]), _fmt(cfg.base.amounts[j])) for j in range(len(times))]
    _write_csv(outdir / "base_scenario.csv", ("period", "time", "amount"), base_rows)
    if not args.no_plots:
        plots.save_path_fan(times, paths, cfg.base.amounts, outdir / "pool_paths.png")
        plots.save_total_cashflow(times, cfg.base.amounts, paths, outdir / "total_cashflow.png")
    print(f"wrote pool_paths.csv ({paths.shape[0]} paths) and base_scenario.csv to {outdir}")
    return 0


def cmd_price(cfg: RunConfig, outdir: Path, args) -> int:
    report = price_tranches(cfg.deal, cfg.base, cfg.params, cfg.curve,
                            n_paths=cfg.n_paths, seed=cfg.seed, mode=cfg.mode,
                            index_fixings=cfg.index_rate, workers=args.workers)
    _write_json(outdir / "price_report.json", _report_payload(report))
    for name in TRANCHE_NAMES:
        sample = report.tranches[name].sample
        edges, counts = price_distribution(sample, bins=cfg.bins)
        rows = [(_fmt(edges[i]), _fmt(edges[i + 1]), int(counts[i])) for i in range(len(counts))]
        _write_csv(outdir / f"price_hist_{name}.csv", ("bin_lo", "bin_hi", "count"), rows)
        if not args.no_plots:
            plots.save_price_histogram(sample, name, outdir / f"price_hist_{name}.png",
                                       bins=cfg.bins)
    print(f"wrote price_report.json and histograms to {outdir}")
    return 0


def cmd_sensitivities(cfg: RunConfig, outdir: Path, args) -> int:
    report = sensitivities(cfg.deal, cfg.base, cfg.params, cfg.curve,
                           n_paths=cfg.n_paths, seed=cfg.seed,
                           index_fixings=cfg.index_rate, workers=args.workers)
    _write_json(outdir / "sensitivity_report.json", _report_payload(report))
    print(f"wrote sensitivity_report.json to {outdir}")
    return 0


def cmd_calibrate(cfg: RunConfig, outdir: Path, args) -> int:
    if cfg.calibration_targets is None:
        raise ConfigurationError("calibration: missing required field 'targets'")
    result = calibrate(cfg.deal, cfg.base, cfg.calibration_targets, cfg.de_settings,
                       cfg.curve, n_paths=cfg.calibration_paths, seed=cfg.seed,
                       index_fixings=cfg.index_rate)
    payload = {
        "params": result.params.as_dict(),
        "residuals": result.residuals,
        "max_error": result.max_error,
        "generations": result.generations,
        "converged": result.converged,
        "warning": result.warning,
    }
    _write_json(outdir / "calibration.json", payload)
    if not args.no_plots:
        plots.save_convergence(result.history, outdir / "calibration_convergence.png")
    print(f"wrote calibration.json to {outdir} (max error {result.max_error:.4f})")
    return 0


def cmd_timelapse(cfg: RunConfig, outdir: Path, args) -> int:
    dates = cfg.eval_dates if cfg.eval_dates is not None else list(cfg.deal.times)
    prof = forward_prices(cfg.deal, cfg.base, cfg.params, cfg.curve,
                          eval_dates=dates, n_paths=cfg.n_paths, seed=cfg.seed,
                          index_fixings=cfg.index_rate)
    rows = []
    for di, d in enumerate(prof["dates"]):
        for name in TRANCHE_NAMES:
            rows.append((_fmt(d), name, _fmt(prof["prices"][name][di])))
    _write_csv(outdir / "timelapse.csv", ("date", "tranche", "price"), rows)
    if not args.no_plots:
        plots.save_timelapse(prof["dates"], prof["prices"], outdir / "timelapse.png")
    print(f"wrote timelapse.csv to {outdir}")
    return 0


def cmd_metrics(cfg: RunConfig, outdir: Path, args) -> int:
    metrics = tranche_metrics(cfg.deal, cfg.base, cfg.curve,
                              observed_prices=cfg.observed_prices,
                              index_fixings=cfg.index_rate)
    payload = {name: asdict(m) for name, m in metrics.items()}
    _write_json(outdir / "metrics.json", payload)
    print(f"wrote metrics.json to {outdir}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "price": cmd_price,
    "sensitivities": cmd_sensitivities,
    "calibrate": cmd_calibrate,
    "timelapse": cmd_timelapse,
    "metrics": cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcwaterfall",
        description="Monte Carlo pricing of securitization waterfalls",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the deal configuration (JSON)")
        p.add_argument("--out", default=None,
                       help=f"output directory (default: ${OUTDIR_ENV} or cwd)")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--paths", type=int, default=None, help="override the path count")
        p.add_argument("--mode", choices=("exact", "smooth"), default=None,
                       help="override the pricing mode")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads (does not affect results)")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.paths is not None:
            cfg.n_paths = args.paths
        if args.mode is not None:
            cfg.mode = args.mode
        outdir = Path(args.out or os.environ.get(OUTDIR_ENV, "."))
        outdir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, outdir, args)
    except ConfigurationError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
