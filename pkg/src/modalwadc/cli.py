"""Command line entry point: ``modalwadc {run,simulate,estimate,analyze,design,delay}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import reports
from .errors import ModalWadcError
from .pipeline import (Scenario, run_pipeline, stage_analyze, stage_delay, stage_design,
                       stage_estimate, stage_simulate)

EXIT_OK, EXIT_INFEASIBLE, EXIT_ERROR = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalwadc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, type=Path, help="scenario JSON")
        sp.add_argument("--out", type=Path, help="output directory (default: from the scenario)")
        sp.add_argument("--seed", type=int, help="override the simulation seed")
        return sp

    add("run", "all stages in order").add_argument(
        "--effort", action="store_true", help="minimize control effort instead of generator count")
    add("simulate", "simulate the grid and emulate PMU data")
    est = add("estimate", "identify the state matrix from PMU data")
    est.add_argument("--csv", type=Path, help="PMU CSV (default: OUT/pmu.csv)")
    ana = add("analyze", "modal report of a stored state matrix")
    ana.add_argument("--matrix", type=Path,
                     help="linear_model.json or estimated.json (default: both in OUT)")
    add("design", "select actuating generators and compute the gain").add_argument(
        "--effort", action="store_true", help="minimize control effort instead of generator count")
    add("delay", "damping of the designed loop versus feedback delay")
    return p


def _fail(out: Path | None, stage: str, exc: Exception) -> int:
    code = getattr(exc, "code", type(exc).__name__)
    payload = {"error": code, "stage": stage, "message": str(exc)}
    if out is not None and out.is_dir():
        reports.dump_json(payload, out / "error.json")
    print(json.dumps(payload), file=sys.stderr)
    return EXIT_ERROR


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = "config"
    out = None
    try:
        scn = Scenario.load(args.config)
        if args.seed is not None:
            scn.seed = args.seed
        out = Path(args.out or scn.outputs)
        out.mkdir(parents=True, exist_ok=True)
        stage = args.command
        if args.command == "run":
            passed = run_pipeline(scn, out, effort=args.effort or None)
            return EXIT_OK if passed else EXIT_INFEASIBLE
        if args.command == "simulate":
            stage_simulate(scn, out)
        elif args.command == "estimate":
            stage_estimate(scn, out, args.csv)
        elif args.command == "analyze":
            matrices = [args.matrix] if args.matrix else [out / "linear_model.json", out / "estimated.json"]
            for path in matrices:
                if args.matrix or path.exists():
                    stage_analyze(scn, path, out)
        elif args.command == "design":
            design = stage_design(scn, out, effort=args.effort or None)
            return EXIT_OK if design.passed else EXIT_INFEASIBLE
        elif args.command == "delay":
            stage_delay(scn, out)
    except (ModalWadcError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(out, stage, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
