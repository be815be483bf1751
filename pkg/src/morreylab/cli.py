"""Command line entry point.

Exit codes: 0 all checks passed, 1 a check failed (reports still written),
2 invalid configuration, 3 internal inconsistency such as a bracket violation.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from .checks import (SUBCOMMAND_CHECKS, ConfigError, ExperimentConfig, corpus_summary,
                     run_check)
from .predual_morrey import InconsistencyError
from .report import VerificationReport, dumps

log = logging.getLogger("morreylab")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INCONSISTENT = 0, 1, 2, 3

SUMMARY_FIELDS = ("index", "check_id", "passed", "left", "right", "constant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morreylab",
                                     description="Numerical checks for weighted Morrey spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("ap", "A_p and doubling checks"),
                       ("norm", "Morrey norm checks"),
                       ("predual", "predual bracket and pairing checks"),
                       ("operator", "operator checks"),
                       ("extrapolate", "extrapolation and Rubio de Francia checks"),
                       ("report", "every check in the config"),
                       ("corpus", "write the corpus summary")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="checks evaluated concurrently")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--refine", type=int, default=0, help="grid refinement levels")
    return parser


def _selected(cfg: ExperimentConfig, command: str) -> List[dict]:
    if command == "report":
        return list(cfg.checks)
    allowed = SUBCOMMAND_CHECKS[command]
    return [c for c in cfg.checks if c["type"] in allowed]


def run_checks(cfg: ExperimentConfig, specs: List[dict], threads: int = 1) -> List[VerificationReport]:
    """Evaluate checks; results keep the declared order for any thread count."""
    if threads <= 1:
        return [run_check(cfg, s) for s in specs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: run_check(cfg, s), specs))


def write_reports(reports: List[VerificationReport], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for i, rep in enumerate(reports):
        with open(os.path.join(out_dir, f"{i:02d}_{rep.check_id}.json"), "w") as fh:
            fh.write(rep.to_json())
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for i, rep in enumerate(reports):
            writer.writerow([i, rep.check_id, int(bool(rep.passed)),
                             format(rep.left, ".17g"), format(rep.right, ".17g"),
                             format(rep.constant, ".17g")])


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config).with_overrides(args.seed, args.refine)
    except (ConfigError, ValueError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    out_dir = args.out or cfg.output or "morreylab-out"

    if args.command == "corpus":
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "corpus.json"), "w") as fh:
            fh.write(dumps(corpus_summary(cfg)))
        return EXIT_OK

    specs = _selected(cfg, args.command)
    try:
        reports = run_checks(cfg, specs, args.threads)
    except InconsistencyError as exc:
        log.error("inconsistency: %s", exc)
        return EXIT_INCONSISTENT
    except (ConfigError, ValueError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    write_reports(reports, out_dir)
    for rep in reports:
        log.info("%-20s %s", rep.check_id, "pass" if rep.passed else "FAIL")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
