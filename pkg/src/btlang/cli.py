"""Command line entry point.

Exit codes: 0 success, 1 behavior failure, 2 tick budget exhausted,
3 configuration, program or usage error, 4 tree not in reactive selection form.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import classic
from .dsl import DslError
from .errors import ConfigError
from .scenario import EXIT_CONFIG, EXIT_NOT_IN_FORM, EXIT_SUCCESS, load_scenario, run_scenario


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario).with_overrides(
        max_ticks=args.max_ticks, seed=args.seed, poll=args.poll)
    result = run_scenario(scenario)
    if args.trace:
        result.trace.write(args.trace)
    print(result.summary.to_json())
    if result.summary.outcome["status"] == "failure":
        err = result.summary.outcome["error"]
        _err(f"behavior failed: {err['kind']} in {err['source']}: {err['message']}")
    elif result.summary.outcome["status"] == "budget-exhausted":
        _err(f"{result.summary.outcome['reason']} after {result.summary.total_ticks} ticks")
    return result.summary.exit_code


def cmd_translate(args) -> int:
    tree = classic.load_tree(args.bt)
    try:
        text = classic.to_rselect_source(tree)
    except (classic.NotInForm, classic.NotApplicable) as exc:
        _err(f"{args.bt}: {exc}")
        return EXIT_NOT_IN_FORM
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_SUCCESS


def cmd_check_form(args) -> int:
    tree = classic.load_tree(args.bt)
    print(f"tree: {classic.render(tree)}")
    try:
        in_form = classic.is_reactive_selection_form(tree)
        verdict = "in reactive selection form" if in_form else "NOT in reactive selection form"
    except classic.NotApplicable as exc:
        in_form = False
        verdict = f"not applicable: {exc}"
    print(f"verdict: {verdict}")
    hazards = classic.progress_hazards(tree)
    for h in hazards:
        print(f"hazard: {h}")
    if not hazards:
        print("hazards: none")
    return EXIT_SUCCESS if in_form else EXIT_NOT_IN_FORM


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btlang", description="Run behavior programs and "
                                "analyse classical behavior trees.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("--scenario", required=True, help="scenario YAML file")
    r.add_argument("--trace", help="write the JSONL trace here")
    r.add_argument("--max-ticks", type=int, help="override the tick budget")
    r.add_argument("--seed", type=int, help="override the seed")
    r.add_argument("--poll", type=int, help="override the test poll period (ticks)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("translate", help="translate a tree file into an rSelect program")
    t.add_argument("--bt", required=True, help="tree file (YAML or JSON)")
    t.add_argument("--out", help="write the program here instead of stdout")
    t.set_defaults(func=cmd_translate)

    c = sub.add_parser("check-form", help="check reactive selection form and lint a tree")
    c.add_argument("--bt", required=True, help="tree file (YAML or JSON)")
    c.set_defaults(func=cmd_check_form)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which would read as budget exhaustion
        return EXIT_SUCCESS if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.func(args)
    except DslError as exc:
        _err(str(exc))
    except ConfigError as exc:
        _err(f"configuration error: {exc}")
    except ValueError as exc:
        _err(f"configuration error: {exc}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
