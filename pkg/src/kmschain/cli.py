"""Command line harness: ``kmschain <experiment> [--config F] [--out DIR]``.

Each experiment writes into ``<out>/<experiment>/``:

* one CSV per data table, starting with a ``# config_sha256=...`` comment
  and a header row, floats printed with 17 significant digits;
* ``summary.json`` with every check and its pass/fail flag;
* ``report.txt``, the same content for humans.

The exit status is 0 when every check passes, 1 when any check fails and 2
when the configuration is invalid or a computation cannot be set up.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from threadpoolctl import threadpool_limits

from .config import ExperimentConfig, load_config
from .errors import KMSChainError
from .experiments import EXPERIMENTS, ExperimentResult, run_experiment

__all__ = ["main", "format_value", "write_result", "OUT_ENV", "DEFAULT_OUT"]

OUT_ENV = "KMSCHAIN_OUT"
DEFAULT_OUT = "kmschain-out"


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, complex):
        raise TypeError("split complex values into real and imaginary columns")
    if isinstance(v, float) or hasattr(v, "dtype"):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _json_number(v: float):
    return v if math.isfinite(v) else str(v)


def write_result(res: ExperimentResult, cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest
    for table in res.tables:
        with open(out_dir / f"{table.name}.csv", "w", newline="") as fh:
            fh.write(f"# config_sha256={digest}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([format_value(v) for v in row])
    summary = {
        "experiment": res.name,
        "passed": res.passed,
        "config_sha256": digest,
        "elapsed_seconds": round(res.elapsed, 3),
        "checks": [
            {
                "name": c.name,
                "value": _json_number(c.value),
                "relation": c.relation,
                "bound": _json_number(c.bound),
                "passed": c.passed,
            }
            for c in res.checks
        ],
        "tables": [f"{t.name}.csv" for t in res.tables],
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    (out_dir / "report.txt").write_text(report_text(res))


def report_text(res: ExperimentResult) -> str:
    lines = [f"{res.name}: {'PASS' if res.passed else 'FAIL'} ({res.elapsed:.1f} s)"]
    width = max((len(c.name) for c in res.checks), default=0)
    for c in res.checks:
        flag = "ok  " if c.passed else "FAIL"
        lines.append(f"  {flag} {c.name:<{width}}  {c.value:.6g} {c.relation} {c.bound:.6g}")
    return "\n".join(lines) + "\n"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmschain", description="Finite-volume anharmonic chain experiments.")
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS) + ["all"], nargs="?")
    parser.add_argument("--config", help="TOML file overriding the built-in defaults")
    parser.add_argument("--out", help=f"output root (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    parser.add_argument("--threads", type=int, help="BLAS thread cap")
    parser.add_argument("--max-dim", type=int, help="largest Hilbert space dimension to build")
    parser.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    return parser


def _resolve_out(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.max_dim is not None:
            cfg = cfg.replace(chain__max_dim=args.max_dim)
    except KMSChainError as exc:
        print(f"kmschain: {exc}", file=sys.stderr)
        return 2
    if args.dump_config:
        sys.stdout.write(cfg.to_toml())
        return 0
    if args.experiment is None:
        parser.error("an experiment name is required")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be positive")

    root = _resolve_out(args, cfg)
    names = list(EXPERIMENTS) if args.experiment == "all" else [args.experiment]
    results = []
    with threadpool_limits(limits=args.threads):
        for name in names:
            try:
                res = run_experiment(name, cfg)
            except KMSChainError as exc:
                print(f"kmschain {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
                return 2
            write_result(res, cfg, root / name)
            sys.stdout.write(report_text(res))
            sys.stdout.flush()
            results.append(res)

    root.mkdir(parents=True, exist_ok=True)
    (root / "config.toml").write_text(cfg.to_toml())
    if args.experiment == "all":
        overview = {
            "passed": all(r.passed for r in results),
            "config_sha256": cfg.digest,
            "experiments": {r.name: r.passed for r in results},
        }
        (root / "summary.json").write_text(json.dumps(overview, indent=2) + "\n")
        (root / "report.txt").write_text("".join(report_text(r) for r in results))
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
