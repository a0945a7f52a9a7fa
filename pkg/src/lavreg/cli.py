"""Command line: ``lavreg {run,suite,list,export-operator}``.

Exit status is 0 when every check of every scenario run passes, 1 when a
check fails and 2 on a usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .grid import make_uniform_grid
from .linops import export_operator
from .scenarios import Scenario, ScenarioError, build_operator, builtin_scenarios, run_scenario


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="runs", help="output directory (default: runs)")
    common.add_argument("--grid-n", type=int, default=None, help="override the grid size")
    common.add_argument("--seed", type=int, default=None, help="override the noise seed")

    p = argparse.ArgumentParser(prog="lavreg", description="Lavrentiev regularization experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one scenario JSON file")
    run.add_argument("scenario", help="path to a scenario JSON document, or a builtin scenario name")
    suite = sub.add_parser("suite", parents=[common], help="run every builtin scenario")
    suite.add_argument("--only", nargs="*", default=None, help="restrict to these scenario names")
    sub.add_parser("list", help="list builtin scenarios")
    exp = sub.add_parser("export-operator", parents=[common], help="write an operator as CSV plus JSON sidecar")
    exp.add_argument("spec", help="operator kind (volterra, cesaro, skew, identity, zero), "
                                  "multiplication:<multiplier>, or a JSON object")
    return p


def _load_scenario(arg: str) -> Scenario:
    path = Path(arg)
    if path.exists():
        return Scenario.from_dict(json.loads(path.read_text()))
    for s in builtin_scenarios():
        if s.name == arg:
            return s
    raise ScenarioError(f"{arg!r} is neither a file nor a builtin scenario")


def _operator_spec(text: str) -> dict:
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    if text.startswith("multiplication:"):
        return {"kind": "multiplication", "multiplier": text.split(":", 1)[1]}
    return {"kind": text}


def _report(result) -> None:
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} {result.name} -> {result.directory}")
    for c in result.checks:
        if not c["passed"]:
            print(f"    failed: {c['name']} (value={c['value']}, target={c['target']})")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for s in builtin_scenarios():
                print(f"{s.name:28s} {s.experiment}")
            return 0
        if args.command == "export-operator":
            spec = _operator_spec(args.spec)
            grid = None if spec.get("kind") == "skew" else make_uniform_grid(args.grid_n or 1000)
            A = build_operator(spec, grid)
            csv_path, json_path = export_operator(A, args.out)
            print(csv_path)
            print(json_path)
            return 0
        if args.command == "run":
            scenarios = [_load_scenario(args.scenario)]
        else:
            scenarios = builtin_scenarios()
            if args.only:
                scenarios = [s for s in scenarios if s.name in set(args.only)]
        ok = True
        for s in scenarios:
            result = run_scenario(s, args.out, args.grid_n, args.seed)
            _report(result)
            ok &= result.passed
        return 0 if ok else 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
