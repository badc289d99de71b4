"""Command-line entry points: generate, run, sweep, compare.

Exit codes: 0 success, 2 configuration or parse error, 3 runtime error
(numerical failure or insufficient data).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import config_checksum, config_from_dict, parse_config, parse_synthetic_spec
from .core import ConfigError, InputDomainError, InsufficientHistoryError, NumericalError
from .fileio import (
    RunManifest,
    parse_long_csv,
    parse_panel_csv,
    write_panel_csv,
    write_report_csv,
    write_series_csv,
    write_truth_csv,
)
from .simulate import (
    ReportRow,
    apply_sparsity,
    compare_allocations,
    generate_synthetic,
    overall_rmse,
    run_closed_loop,
    sparsity_sweep,
)

log = logging.getLogger("sparsesense")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the configured seed")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only log errors")
    common.add_argument("--strict-config", action="store_true", default=argparse.SUPPRESS, help="reject unknown config keys")

    parser = argparse.ArgumentParser(prog="sparsesense", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic panel and its ground truth")
    g.add_argument("--spec", required=True, type=Path)
    g.add_argument("--out", required=True, type=Path)

    def with_inputs(p):
        p.add_argument("--config", type=Path, help="TOML config (defaults when omitted)")
        p.add_argument("--panel", required=True, type=Path)
        p.add_argument("--long", action="store_true", help="panel is in long cycle,station,value format")
        p.add_argument("--out", required=True, type=Path)
        return p

    with_inputs(sub.add_parser("run", parents=[common], help="one closed-loop run"))

    s = with_inputs(sub.add_parser("sweep", parents=[common], help="RMSE versus sparsity"))
    s.add_argument("--sparsities", type=_floats, default=[0.0, 0.1, 0.3, 0.5, 0.7, 0.9])
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--predictors", type=_names, default=None, help="dsar,ar,persistence,mean (default: config)")

    c = with_inputs(sub.add_parser("compare", parents=[common], help="RMSE versus allocation strategy and budget"))
    c.add_argument("--strategies", type=_names, default=["ewiem", "random", "static", "coverage"])
    c.add_argument("--k", type=_ints, required=True)
    c.add_argument("--repeats", type=int, default=1)
    return parser


def _load(args):
    strict = getattr(args, "strict_config", False)
    cfg = parse_config(args.config, strict) if args.config else config_from_dict({})
    if hasattr(args, "seed"):
        cfg = replace(cfg, seed=args.seed)
    panel = parse_long_csv(args.panel) if args.long else parse_panel_csv(args.panel)
    args.out.mkdir(parents=True, exist_ok=True)
    return cfg, panel, RunManifest(config_checksum(cfg), cfg.seed)


def _write_series(result, out: Path, manifest: RunManifest) -> None:
    series_dir = out / "series"
    series_dir.mkdir(exist_ok=True)
    for (name, param, rep), reports in sorted(result.series.items()):
        manifest.add(write_series_csv(reports, series_dir / f"{name}_{param:g}_r{rep}.csv"))


def cmd_generate(args) -> None:
    spec = parse_synthetic_spec(args.spec, getattr(args, "strict_config", False))
    if hasattr(args, "seed"):
        spec = replace(spec, seed=args.seed)
    panel, truth = generate_synthetic(spec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel, args.out)
    truth_path = write_truth_csv(truth, spec.weight_kind, spec.seed, args.out.parent / "truth.csv")
    log.info("wrote %s (S=%d, T=%d) and %s", args.out, panel.S, panel.T, truth_path)


def cmd_run(args) -> None:
    cfg, panel, manifest = _load(args)
    panel = apply_sparsity(panel, cfg.sparsity, cfg.seed)
    reports = run_closed_loop(panel, cfg)
    k, _, _ = cfg.resolve(panel.S, panel.T)
    row = ReportRow(cfg.alloc.strategy, float(k), overall_rmse(reports, cfg.pooled), 0.0, 1)
    manifest.add(write_report_csv([row], args.out / "report.csv"))
    manifest.add(write_series_csv(reports, args.out / "series.csv"))
    manifest.write(args.out)
    log.info("%s k=%d: mean RMSE %.4f over %d cycles", cfg.alloc.strategy, k, row.mean_rmse, len(reports))


def cmd_sweep(args) -> None:
    cfg, panel, manifest = _load(args)
    result = sparsity_sweep(panel, args.sparsities, cfg, args.repeats, args.predictors)
    manifest.add(write_report_csv(result.rows, args.out / "report.csv"))
    _write_series(result, args.out, manifest)
    manifest.write(args.out)
    for r in result.rows:
        log.info("%-12s sparsity=%.2f  RMSE %.4f +- %.4f", r.strategy, r.param, r.mean_rmse, r.stddev)


def cmd_compare(args) -> None:
    cfg, panel, manifest = _load(args)
    result = compare_allocations(panel, args.strategies, args.k, cfg, args.repeats)
    manifest.add(write_report_csv(result.rows, args.out / "report.csv"))
    _write_series(result, args.out, manifest)
    manifest.write(args.out)
    for r in result.rows:
        log.info("%-10s k=%-3g RMSE %.4f +- %.4f", r.strategy, r.param, r.mean_rmse, r.stddev)


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(message)s",
        force=True,
    )
    try:
        COMMANDS[args.command](args)
    except (ConfigError, InputDomainError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (InsufficientHistoryError, NumericalError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
