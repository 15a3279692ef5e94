# SPDX-License-Identifier: Apache-2.0
"""Command-line front end: `rgpssm run|wingrock|sysid|verify|config-help`.

Exit codes: 0 on success, 1 when a run fails, 2 when `verify` has a blocking failure or the
configuration is invalid.
"""

import argparse
import logging
import os
import sys
from typing import Any
from typing import Dict
from typing import List
from typing import Optional

from rgpssm.bench.runner import run_experiment
from rgpssm.bench.verify import run_verify
from rgpssm.utils.common import configure_logging
from rgpssm.utils.common import get_config
from rgpssm.utils.configuration import ExperimentConfig
from rgpssm.utils.errors import ConfigurationError
from rgpssm.utils.errors import RGPSSMError

logger = logging.getLogger(__name__)


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default: from the configuration)")
    parser.add_argument("--runs", type=int, default=None, help="Monte-Carlo repetitions over consecutive seeds")
    parser.add_argument("--out", default=None, help="Output directory for report.json, trace.csv and steps.jsonl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgpssm", description="Online Gaussian process state-space filter benchmarks.")
    parser.add_argument("--log-level", default=None, help="Logging level (default: LOGLEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the experiment described by a configuration file")
    run.add_argument("config", help="JSON, YAML or key = value configuration file")
    _add_run_options(run)

    wingrock = commands.add_parser("wingrock", help="Wing rock uncertainty learning")
    wingrock.add_argument("--config", default=None, help="Optional configuration file")
    wingrock.add_argument("--no-hypopt", action="store_true", help="Keep the initial hyperparameters fixed")
    _add_run_options(wingrock)

    sysid = commands.add_parser("sysid", help="System identification on a DAISY data file")
    sysid.add_argument("--data", required=True, help="DAISY data file")
    sysid.add_argument("--dataset-name", default="", help="Preset that fixes the column layout")
    sysid.add_argument("--config", default=None, help="Optional configuration file")
    _add_run_options(sysid)

    verify = commands.add_parser("verify", help="Run the acceptance suite")
    verify.add_argument("--benchmarks", action="store_true", help="Also run the wing rock and limit-cycle checks")
    verify.add_argument("--quick", action="store_true", help="Reduced instance counts")
    verify.add_argument("--daisy-dir", default=None, help="Directory holding the DAISY files")
    verify.add_argument("--seed", type=int, default=0, help="Seed of the random instances")
    verify.add_argument("--out", default=None, help="Write the results as JSON to this file")

    commands.add_parser("config-help", help="Document every configuration key")
    return parser


def _overrides(args: argparse.Namespace, task: Optional[str] = None) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if task:
        overrides["task"] = task
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.out is not None:
        overrides["outDir"] = args.out
    if getattr(args, "no_hypopt", False):
        overrides["filter"] = {"hyperopt": {"enabled": False}}
    if getattr(args, "data", None):
        overrides["dataPath"] = args.data
    if getattr(args, "dataset_name", None):
        overrides["datasetName"] = args.dataset_name
    return overrides


def _experiment(config: ExperimentConfig) -> int:
    report = run_experiment(config)
    print(report.summary.model_dump_json(indent=2))
    if len(report.runs) > 1:
        for metric, stats in report.aggregate.items():
            print(f"{metric}: {stats['mean']:.6g} +- {stats['std']:.6g}")
    return 0


def _verify(args: argparse.Namespace) -> int:
    report = run_verify(benchmarks=args.benchmarks, quick=args.quick, daisy_dir=args.daisy_dir, seed=args.seed)
    for r in report.results:
        value = "-" if r.value is None else f"{r.value:.3e}"
        flag = "" if r.blocking else " (non-blocking)"
        print(f"[{r.status.upper():4}] {r.number:2d} {r.name}: {value} {r.detail}{flag}")
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as stream:
            stream.write(report.model_dump_json(indent=2))
    if not report.passed:
        print(f"[verify] FAIL ({len(report.failed)} blocking)")
        return 2
    print("[verify] OK")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.command == "config-help":
            ExperimentConfig.print_help(sys.stdout.write)
            return 0
        if args.command == "verify":
            return _verify(args)
        if args.command == "run":
            return _experiment(get_config(args.config, _overrides(args)))
        task = "wingrock" if args.command == "wingrock" else "sysid"
        return _experiment(get_config(args.config, _overrides(args, task)))
    except ConfigurationError as e:
        logger.error("Invalid configuration: %s", e.message)
        return 2
    except RGPSSMError as e:
        logger.error("Run failed: %s", e.message)
        return 1


if __name__ == "__main__":
    sys.exit(main())
