"""Command line entry points: run, validate, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import figures
from .experiment import ConfigError, parse_config, run_experiment, write_csv

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnbench",
        description="Desk-scale workbench for GNN data management experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment grid from a config")
    p_run.add_argument("config", type=Path, help="experiment config file")
    p_run.add_argument(
        "--output", type=Path, default=None,
        help="override the [output] dir from the config",
    )

    p_val = sub.add_parser("validate", help="parse a config and echo settings")
    p_val.add_argument("config", type=Path)

    p_rep = sub.add_parser(
        "report", help="summarize a finished run and render figures"
    )
    p_rep.add_argument("run_dir", type=Path, help="output dir of a finished run")
    p_rep.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering"
    )
    return parser


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    if args.output is not None:
        config.output_dir = str(args.output)
    manifest = run_experiment(config, config_path=args.config)
    n_out = len(manifest["outputs"])
    n_err = len(manifest["errors"])
    print(f"wrote {n_out} outputs to {Path(manifest['manifest_path']).parent}")
    if n_err:
        for err in manifest["errors"]:
            print(f"error at {err}", file=sys.stderr)
        return 2
    return 0


def _cmd_validate(args) -> int:
    config = parse_config(args.config)
    json.dump(config.resolved(), sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _summary_rows(run_dir: Path):
    """Condense the run CSVs into one headline table."""
    rows = []
    pm = run_dir / "partition_metrics.csv"
    if pm.exists():
        for r in figures.read_csv_rows(pm):
            rows.append(
                ["partition", r["partition_spec"], "edge_cut", r["edge_cut"]]
            )
            rows.append(
                ["partition", r["partition_spec"], "clustering_variance",
                 r["clustering_variance"]]
            )
    tr = run_dir / "transfer.csv"
    if tr.exists():
        for r in figures.read_csv_rows(tr):
            label = f"{r['cache_policy']}@{r['cache_ratio']}"
            rows.append(
                ["cache", f"{r['partition_spec']}/{r['sampler_spec']}/{label}",
                 "hit_rate", r["hit_rate"]]
            )
    pp = run_dir / "pipeline.csv"
    if pp.exists():
        seen = set()
        for r in figures.read_csv_rows(pp):
            key = (r["partition_spec"], r["sampler_spec"], r["cache_policy"],
                   r["cache_ratio"])
            if key in seen or r["mode"] != "pipelined":
                continue
            seen.add(key)
            rows.append(
                ["pipeline", "/".join(key), "speedup", r["speedup"]]
            )
    return rows


def _cmd_report(args) -> int:
    run_dir: Path = args.run_dir
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {run_dir}")
    rows = _summary_rows(run_dir)
    summary_path = run_dir / "summary.csv"
    write_csv(summary_path, ["section", "subject", "metric", "value"], rows)
    print(f"wrote {summary_path}")
    if not args.no_figures:
        for path in figures.render_all(run_dir):
            print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
