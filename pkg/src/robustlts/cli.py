"""Command-line front end: parse models, run analyses, render reports.

Exit codes: 0 ok/satisfied, 1 property violated, 2 parse error,
3 precondition or selector failure, 4 timeout, 5 usage error,
6 oracle divergence.

JSON and DOT output are canonical: members and transitions are sorted and
the volatile wall-clock field is zeroed, so identical inputs produce
byte-identical bytes regardless of scheduling or --jobs (wall times are
reported in text output instead).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .bruteforce import CapExceeded, DEFAULT_CAP, Delta, bruteforce_delta
from .deviation import Deviation, PreconditionError, apply_deviation, full_deviation
from .generate import random_instance
from .lts import Lts, check_safety, parallel_compose
from .notation import ModelFile, ParseError, dot_export, parse_model, serialize
from .pipeline import (
    ALGORITHMS,
    BRUTEFORCE,
    SYNTHESIS_HEURISTIC,
    CompareVerdict,
    ComparisonResult,
    RobustnessReport,
    compare_controllers,
    compare_properties,
    compute_delta,
)
from .stats import AnalysisTimeout, Deadline, Stats

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_TIMEOUT = 4
EXIT_USAGE = 5
EXIT_DIVERGENCE = 6


class UsageError(Exception):
    pass


class SelectorError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to our exit code
        raise UsageError(message)


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="robustlts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model_required=True):
        p.add_argument("--model", required=model_required, help="model file path")
        p.add_argument("--timeout", type=float, default=300.0, help="seconds before giving up")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for staged runs")

    p_check = sub.add_parser("check", help="verify the closed loop against a property")
    common(p_check)
    p_check.add_argument("--controller")
    p_check.add_argument("--property", dest="prop")
    p_check.add_argument("--output", choices=("text", "json"), default="text")

    p_rob = sub.add_parser("robustness", help="compute the robustness envelope")
    common(p_rob)
    p_rob.add_argument("--controller")
    p_rob.add_argument("--property", dest="prop")
    p_rob.add_argument("--constraint", action="append", default=[])
    p_rob.add_argument("--algorithm", choices=ALGORITHMS, default=SYNTHESIS_HEURISTIC)
    p_rob.add_argument("--output", choices=("text", "json", "dot"), default="text")
    p_rob.add_argument("--out-dir", help="directory for DOT files")
    p_rob.add_argument("--cap", type=int, default=DEFAULT_CAP, help="brute-force size cap")

    p_cmp = sub.add_parser("compare", help="compare two controllers or two properties")
    common(p_cmp)
    p_cmp.add_argument("--controller", action="append", default=[])
    p_cmp.add_argument("--property", dest="prop", action="append", default=[])
    p_cmp.add_argument("--constraint", action="append", default=[])
    p_cmp.add_argument("--algorithm", choices=ALGORITHMS, default=SYNTHESIS_HEURISTIC)
    p_cmp.add_argument("--output", choices=("text", "json"), default="text")

    p_diff = sub.add_parser("oracle-diff", help="diff all three algorithms")
    common(p_diff, model_required=False)
    p_diff.add_argument("--controller")
    p_diff.add_argument("--property", dest="prop")
    p_diff.add_argument("--constraint", action="append", default=[])
    p_diff.add_argument("--seed", type=int, help="generate instances instead of a model")
    p_diff.add_argument("--count", type=int, default=25, help="generated instance count")
    p_diff.add_argument("--cap", type=int, default=DEFAULT_CAP, help="brute-force size cap")

    p_fmt = sub.add_parser("fmt", help="reserialize a model canonically")
    p_fmt.add_argument("--model", required=True)
    return parser


def _load_model(path: str) -> ModelFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read model: {exc}", 0, 0)
    return parse_model(text)


def _pick(table: dict[str, Lts], given: str | None, what: str) -> tuple[str, Lts]:
    if given is not None:
        if given not in table:
            raise SelectorError(f"no {what} named {given!r} in the model")
        return given, table[given]
    if len(table) == 1:
        return next(iter(table.items()))
    raise SelectorError(
        f"model declares {len(table)} {what} declarations; pick one with --{what}"
    )


def _pick_constraint(model: ModelFile, names: list[str]) -> tuple[list[str], Lts | None]:
    if not names:
        return [], None
    parts = []
    for name in names:
        if name not in model.constraints:
            raise SelectorError(f"no constraint named {name!r} in the model")
        parts.append(model.constraints[name])
    combined = parts[0]
    for extra in parts[1:]:
        combined = parallel_compose(combined, extra)
    return list(names), combined


def _deadline(args) -> Deadline:
    return Deadline(args.timeout)


def _triple_json(e: Lts, triple) -> dict[str, str]:
    src, action, dst = e.triple_names(triple)
    return {"from": src, "action": action, "to": dst}


def _delta_members_json(e: Lts, delta: Delta) -> list[dict]:
    return [
        {"transitions": [_triple_json(e, t) for t in d.triples]} for d in delta.deviations
    ]


def _stats_json(stats: Stats) -> dict:
    return {
        "meta_states": stats.meta_states,
        "winning_set": stats.winning_set,
        "subsets_examined": stats.subsets_examined,
        "wall_ms": 0,
    }


def _emit_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _format_triple(e: Lts, triple) -> str:
    src, action, dst = e.triple_names(triple)
    return f"{src} -{action}-> {dst}"


def cmd_check(args) -> int:
    model = _load_model(args.model)
    cname, controller = _pick(model.controllers, args.controller, "controller")
    pname, prop = _pick(model.properties, args.prop, "property")
    verdict = check_safety(parallel_compose(model.environment, controller), prop)
    if args.output == "json":
        _emit_json(
            {
                "model": args.model,
                "controller": cname,
                "property": pname,
                "satisfied": verdict.satisfied,
                "counterexample": None
                if verdict.counterexample is None
                else list(verdict.counterexample),
            }
        )
    else:
        if verdict.satisfied:
            print("satisfied")
        else:
            print("violated")
            print("counterexample: " + " ".join(verdict.counterexample))
    return EXIT_OK if verdict.satisfied else EXIT_VIOLATED


def _report_payload(
    args, model: ModelFile, report: RobustnessReport, selection: dict
) -> dict:
    e = model.environment
    payload = {
        "model": args.model,
        "algorithm": report.algorithm,
        "selection": selection,
        "stats": {
            "meta_states": report.delta.stats.meta_states,
            "winning_set": report.delta.stats.winning_set,
            "subsets_examined": report.delta.stats.subsets_examined,
            "wall_ms": 0,
        },
        "delta": _delta_members_json(e, report.delta),
    }
    if report.envelope_stage is not None:
        payload["stages"] = {
            "envelope": _stats_json(report.envelope_stage),
            "per_envelope": [_stats_json(s) for s in report.synthesis_stages],
        }
    return payload


def _print_report_text(args, model: ModelFile, report: RobustnessReport) -> None:
    e = model.environment
    delta = report.delta
    print(f"model: {args.model}")
    print(f"algorithm: {report.algorithm}")
    stats = delta.stats
    print(
        "stats: "
        f"meta_states={stats.meta_states} winning_set={stats.winning_set} "
        f"subsets_examined={stats.subsets_examined} "
        f"meta_controllers={stats.meta_controllers} wall_ms={stats.wall_ms}"
    )
    print(f"delta members: {len(delta.deviations)} (largest: {delta.max_size()})")
    for i, member in enumerate(delta.deviations):
        print(f"member {i} ({len(member)} transitions):")
        for triple in member.triples:
            print(f"  {_format_triple(e, triple)}")


def cmd_robustness(args) -> int:
    model = _load_model(args.model)
    cname, controller = _pick(model.controllers, args.controller, "controller")
    pname, prop = _pick(model.properties, args.prop, "property")
    con_names, p_env = _pick_constraint(model, args.constraint)
    report = compute_delta(
        model.environment,
        controller,
        prop,
        p_env,
        args.algorithm,
        deadline=_deadline(args),
        cap=args.cap,
        jobs=args.jobs,
    )
    selection = {"controller": cname, "property": pname, "constraints": con_names}
    if args.output == "json":
        _emit_json(_report_payload(args, model, report, selection))
    elif args.output == "dot":
        if not args.out_dir:
            raise UsageError("--output dot requires --out-dir")
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        e = model.environment
        for i, member in enumerate(report.delta.deviations):
            deviated = apply_deviation(e, member)
            text = dot_export(deviated, set(e.transitions), set(member.triple_set))
            target = out / f"delta-{i:03d}.dot"
            target.write_text(text, encoding="utf-8")
            print(target.as_posix())
    else:
        _print_report_text(args, model, report)
    return EXIT_OK


def cmd_compare(args) -> int:
    model = _load_model(args.model)
    controllers = args.controller
    props = args.prop
    if len(controllers) == 2 and len(props) <= 1:
        mode = "controllers"
    elif len(props) == 2 and len(controllers) <= 1:
        mode = "properties"
    else:
        raise UsageError(
            "compare needs exactly two --controller names or exactly two --property names"
        )
    con_names, p_env = _pick_constraint(model, args.constraint)
    deadline = _deadline(args)
    if mode == "controllers":
        pname, prop = _pick(model.properties, props[0] if props else None, "property")
        left_name, right_name = controllers
        if left_name not in model.controllers or right_name not in model.controllers:
            raise SelectorError("both --controller names must exist in the model")
        result = compare_controllers(
            model.environment,
            model.controllers[left_name],
            model.controllers[right_name],
            prop,
            p_env,
            args.algorithm,
            deadline=deadline,
            jobs=args.jobs,
        )
    else:
        cname, controller = _pick(
            model.controllers, controllers[0] if controllers else None, "controller"
        )
        left_name, right_name = props
        if left_name not in model.properties or right_name not in model.properties:
            raise SelectorError("both --property names must exist in the model")
        result = compare_properties(
            model.environment,
            controller,
            model.properties[left_name],
            model.properties[right_name],
            p_env,
            args.algorithm,
            deadline=deadline,
            jobs=args.jobs,
        )
    e = model.environment

    def witness_json(witness: Deviation | None):
        if witness is None:
            return None
        return [_triple_json(e, t) for t in witness.triples]

    if args.output == "json":
        _emit_json(
            {
                "model": args.model,
                "mode": mode,
                "left": left_name,
                "right": right_name,
                "verdict": result.verdict.value,
                "left_members": len(result.left.deviations),
                "right_members": len(result.right.deviations),
                "witness_left": witness_json(result.witness_left),
                "witness_right": witness_json(result.witness_right),
            }
        )
    else:
        print(f"comparing {mode}: {left_name} vs {right_name}")
        print(f"verdict: {result.verdict.value}")
        if result.witness_left is not None:
            print(f"covered only by {left_name}:")
            for t in result.witness_left.triples:
                print(f"  {_format_triple(e, t)}")
        if result.witness_right is not None:
            print(f"covered only by {right_name}:")
            for t in result.witness_right.triples:
                print(f"  {_format_triple(e, t)}")
    return EXIT_OK


def _oracle_bruteforce(e, c, p_saf, p_env, deadline, cap):
    return bruteforce_delta(e, c, p_saf, p_env, cap=cap, deadline=deadline).deviations


def _oracle_synthesis(e, c, p_saf, p_env, deadline, cap):
    return compute_delta(e, c, p_saf, p_env, "synthesis", deadline=deadline).delta.deviations


def _oracle_heuristic(e, c, p_saf, p_env, deadline, cap):
    return compute_delta(
        e, c, p_saf, p_env, "synthesis-heuristic", deadline=deadline
    ).delta.deviations


#: name -> callable(e, c, p_saf, p_env, deadline, cap) -> tuple[Deviation, ...]
#: kept as module state so harness tests can stub one algorithm out
ORACLE_ALGORITHMS = {
    "bruteforce": _oracle_bruteforce,
    "synthesis": _oracle_synthesis,
    "synthesis-heuristic": _oracle_heuristic,
}


def _diff_once(name: str, e, c, p_saf, p_env, deadline, cap) -> int:
    results = {}
    for alg, run in ORACLE_ALGORITHMS.items():
        results[alg] = [
            [_triple_json(e, t) for t in member.triples] for member in run(e, c, p_saf, p_env, deadline, cap)
        ]
    reference = results["bruteforce"]
    for alg in ("synthesis", "synthesis-heuristic"):
        if results[alg] != reference:
            print(f"divergence on {name}: bruteforce vs {alg}")
            ref_set = {json.dumps(m) for m in reference}
            alg_set = {json.dumps(m) for m in results[alg]}
            for member in sorted(ref_set ^ alg_set):
                print(f"  first divergent member: {member}")
                break
            return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_oracle_diff(args) -> int:
    deadline = _deadline(args)
    if args.seed is not None:
        rng = random.Random(args.seed)
        for i in range(args.count):
            inst = random_instance(rng, with_constraint=(i % 3 == 0))
            status = _diff_once(
                inst.name, inst.env, inst.controller, inst.prop, inst.constraint, deadline, args.cap
            )
            if status != EXIT_OK:
                return status
        print(f"{args.count} generated instances agree")
        return EXIT_OK
    if not args.model:
        raise UsageError("oracle-diff needs --model or --seed")
    model = _load_model(args.model)
    _, controller = _pick(model.controllers, args.controller, "controller")
    _, prop = _pick(model.properties, args.prop, "property")
    _, p_env = _pick_constraint(model, args.constraint)
    candidates = len(full_deviation(model.environment).triples)
    if candidates > args.cap:
        raise UsageError(
            f"model has {candidates} candidate transitions, beyond the cap of {args.cap}"
        )
    status = _diff_once(
        args.model, model.environment, controller, prop, p_env, deadline, args.cap
    )
    if status == EXIT_OK:
        print("all algorithms agree")
    return status


def cmd_fmt(args) -> int:
    model = _load_model(args.model)
    sys.stdout.write(serialize(model))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handlers = {
        "check": cmd_check,
        "robustness": cmd_robustness,
        "compare": cmd_compare,
        "oracle-diff": cmd_oracle_diff,
        "fmt": cmd_fmt,
    }
    try:
        return handlers[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SelectorError as exc:
        print(f"selector error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except PreconditionError as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        if exc.counterexample is not None:
            print("counterexample: " + " ".join(exc.counterexample), file=sys.stderr)
        return EXIT_PRECONDITION
    except AnalysisTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except CapExceeded as exc:
        print(f"refusing brute force: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
