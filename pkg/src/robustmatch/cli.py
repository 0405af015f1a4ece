"""Command-line front end.

Subcommands: solve, evaluate, enumerate, generate, compare, plus oracle
debugging helpers.  Reports are deterministic JSON: fixed key order and all
rationals rendered exactly as "numerator/denominator" (pass --decimal for
floats instead).  Wall-clock timing goes to stderr so reports stay
byte-identical across runs.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction

from . import oracle
from .errors import InternalError, ValidationError
from .model import (
    Instance,
    LeaveDistribution,
    Matching,
    PHI,
    is_stable,
    parse_instance,
    random_instance,
    serialize_instance,
)
from .objective import (
    ConventionPair,
    ObjectiveParams,
    expected_blocking_pairs,
    psi_breakdown,
)
from .lattice import build_rotation_digraph, propose_da
from .stable_opt import compute_baselines, min_sumsq_stable, solve_robust
from .relaxed_opt import solve_relaxed


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise _CliError(f"not a rational number: {text!r}") from exc


def _fmt(value: Fraction, decimal: bool):
    if decimal:
        return float(value)
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def _read_input(path: str) -> tuple[Instance, LeaveDistribution, Fraction | None]:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}") from exc
    return parse_instance(text)


def _pick_nu(flag: Fraction | None, default: Fraction | None) -> Fraction:
    nu = flag if flag is not None else default
    if nu is None:
        raise _CliError("no --nu given and the instance document carries none")
    if nu < 0 or nu > 1:
        raise _CliError("nu outside [0, 1]")
    return nu


def _conventions(args) -> ConventionPair:
    return ConventionPair(args.cost_convention, args.regret_convention)


def _matching_doc(instance: Instance, matching: Matching, decimal: bool) -> dict:
    return {
        "matching": [list(pair) for pair in matching.pairs(instance)],
        "singles": list(matching.singles()),
    }


def _breakdown_doc(breakdown, decimal: bool) -> dict:
    keys = sorted(breakdown, key=lambda k: (k != PHI, k))
    return {key: _fmt(breakdown[key], decimal) for key in keys}


def _emit(doc: dict, output: str | None):
    text = json.dumps(doc, indent=2) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)


def _solution_doc(instance, leave, nu, mode, conventions, solution, decimal) -> dict:
    total = sum(solution.psi_by_leaver.values(), Fraction(0))
    if total != solution.psi:
        raise InternalError("per-leaver breakdown does not sum to psi")
    doc = {
        "mode": mode,
        "nu": _fmt(nu, decimal),
        "cost_convention": conventions.cost_term,
        "regret_convention": conventions.regret_term,
        **_matching_doc(instance, solution.matching, decimal),
        "psi": _fmt(solution.psi, decimal),
        "psi_by_leaver": _breakdown_doc(solution.psi_by_leaver, decimal),
        "expected_blocking_pairs": _fmt(
            expected_blocking_pairs(instance, solution.matching, leave), decimal
        ),
    }
    if solution.closed_subset is None:
        doc["closed_subset"] = None
    else:
        doc["closed_subset"] = [
            {"index": rot.index, "pairs": [list(p) for p in rot.pairs]}
            for rot in solution.closed_subset
        ]
    return doc


def _cmd_solve(args) -> int:
    instance, leave, default_nu = _read_input(args.input)
    nu = _pick_nu(args.nu, default_nu)
    conventions = _conventions(args)
    started = time.perf_counter()
    if args.mode == "stable":
        solution = solve_robust(instance, nu, leave, conventions)
    else:
        solution = solve_relaxed(instance, nu, leave, conventions)
    elapsed = time.perf_counter() - started
    print(f"solved in {elapsed:.3f}s", file=sys.stderr)
    _emit(
        _solution_doc(instance, leave, nu, args.mode, conventions, solution, args.decimal),
        args.output,
    )
    return 0


def _read_matching(instance: Instance) -> Matching:
    try:
        doc = json.load(sys.stdin)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed matching document: {exc}") from exc
    if not isinstance(doc, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)
        for p in doc
    ):
        raise ValidationError("matching document must be an array of [id, id] pairs")
    return Matching.from_pairs(instance, [tuple(p) for p in doc])


def _cmd_evaluate(args) -> int:
    instance, leave, default_nu = _read_input(args.input)
    nu = _pick_nu(args.nu, default_nu)
    conventions = _conventions(args)
    matching = _read_matching(instance)
    params = ObjectiveParams(nu, leave, compute_baselines(instance, leave), conventions)
    breakdown = psi_breakdown(instance, matching, params)
    stable, blocking = is_stable(instance, matching)
    doc = {
        "nu": _fmt(nu, args.decimal),
        "cost_convention": conventions.cost_term,
        "regret_convention": conventions.regret_term,
        **_matching_doc(instance, matching, args.decimal),
        "psi": _fmt(sum(breakdown.values(), Fraction(0)), args.decimal),
        "psi_by_leaver": _breakdown_doc(breakdown, args.decimal),
        "expected_blocking_pairs": _fmt(
            expected_blocking_pairs(instance, matching, leave), args.decimal
        ),
        "stable": stable,
        "blocking_pairs": [[b.man, b.woman] for b in blocking],
    }
    _emit(doc, args.output)
    return 0


def _cmd_enumerate(args) -> int:
    instance, _, _ = _read_input(args.input)
    what = args.what
    doc: dict = {"what": what}
    if what == "all-matchings":
        matchings = oracle.enumerate_matchings(instance)
        doc["count"] = len(matchings)
        doc["matchings"] = [_matching_doc(instance, m, args.decimal) for m in matchings]
    else:
        digraph = build_rotation_digraph(instance)
        if what == "rotations":
            doc["count"] = len(digraph.rotations)
            doc["rotations"] = [
                {"index": rot.index, "pairs": [list(p) for p in rot.pairs]}
                for rot in digraph.rotations
            ]
        elif what == "edges":
            doc["rotation_count"] = len(digraph.rotations)
            doc["edges"] = [list(edge) for edge in sorted(digraph.edges)]
        else:  # stable
            entries = []
            for subset in digraph.closed_subsets():
                entry = _matching_doc(instance, digraph.matching_of(subset), args.decimal)
                entry["closed_subset"] = sorted(subset)
                entries.append(entry)
            doc["count"] = len(entries)
            doc["matchings"] = entries
    _emit(doc, args.output)
    return 0


def _cmd_generate(args) -> int:
    if args.n is None or args.seed is None:
        raise _CliError("generate needs --n and --seed")
    instance = random_instance(args.n, args.seed)
    text = serialize_instance(instance, LeaveDistribution(1, {}))
    if args.output is None:
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    return 0


def _cmd_compare(args) -> int:
    instance, leave, default_nu = _read_input(args.input)
    nu = _pick_nu(args.nu, default_nu)
    conventions = _conventions(args)
    baselines = compute_baselines(instance, leave)
    params = ObjectiveParams(nu, leave, baselines, conventions)

    mu_men, _ = propose_da(instance, "men")
    mu_women, _ = propose_da(instance, "women")
    robust = solve_robust(instance, nu, leave, conventions, baselines=baselines)
    relaxed = solve_relaxed(instance, nu, leave, conventions, baselines=baselines)
    policies = [
        ("men-optimal", mu_men),
        ("women-optimal", mu_women),
        ("min-sumsq", min_sumsq_stable(instance)),
        ("robust", robust.matching),
        ("relaxed", relaxed.matching),
    ]
    rows = []
    for name, matching in policies:
        breakdown = psi_breakdown(instance, matching, params)
        value = sum(breakdown.values(), Fraction(0))
        if name == "relaxed" and value > robust.psi:
            raise InternalError("relaxed optimum exceeds the stable optimum")
        if name != "relaxed" and value < robust.psi:
            raise InternalError(f"policy {name} beats the stable optimum")
        rows.append(
            {
                "policy": name,
                **_matching_doc(instance, matching, args.decimal),
                "psi": _fmt(value, args.decimal),
                "expected_blocking_pairs": _fmt(
                    expected_blocking_pairs(instance, matching, leave), args.decimal
                ),
                "stable": is_stable(instance, matching)[0],
            }
        )
    _emit({"nu": _fmt(nu, args.decimal), "rows": rows}, args.output)
    return 0


def _cmd_oracle(args) -> int:
    instance, leave, default_nu = _read_input(args.input)
    what = args.what
    doc: dict = {"what": what}
    if what == "matchings":
        matchings = oracle.enumerate_matchings(instance)
        doc["count"] = len(matchings)
        doc["matchings"] = [_matching_doc(instance, m, args.decimal) for m in matchings]
    elif what == "stable":
        matchings = oracle.enumerate_stable_matchings(instance)
        doc["count"] = len(matchings)
        doc["matchings"] = [_matching_doc(instance, m, args.decimal) for m in matchings]
    elif what == "poset":
        result = oracle.poset_oracle(instance)
        order = {rot: k for k, rot in enumerate(result.rotations)}
        doc["rotations"] = [
            {"index": k, "pairs": [list(p) for p in rot.pairs]}
            for k, rot in enumerate(result.rotations)
        ]
        doc["precedes"] = sorted([order[a], order[b]] for a, b in result.precedes)
    else:  # brute
        nu = _pick_nu(args.nu, default_nu)
        params = ObjectiveParams(
            nu, leave, compute_baselines(instance, leave), _conventions(args)
        )
        matching, value = oracle.brute_solve(instance, params, domain=args.domain)
        doc["domain"] = args.domain
        doc["nu"] = _fmt(nu, args.decimal)
        doc.update(_matching_doc(instance, matching, args.decimal))
        doc["psi"] = _fmt(value, args.decimal)
    _emit(doc, args.output)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="robustmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, nu=True):
        p.add_argument("--input", required=True, help="instance document path")
        if nu:
            p.add_argument("--nu", type=_rational, default=None)
            p.add_argument("--cost-convention", choices=["self", "retained"], default="self")
            p.add_argument(
                "--regret-convention", choices=["self", "retained"], default="retained"
            )
        p.add_argument("--output", default=None, help="write the report here")
        p.add_argument("--decimal", action="store_true", help="render rationals as floats")

    p_solve = sub.add_parser("solve", help="compute an optimal matching")
    common(p_solve)
    p_solve.add_argument("--mode", choices=["stable", "relaxed"], default="stable")

    p_eval = sub.add_parser("evaluate", help="psi of a matching read from stdin")
    common(p_eval)

    p_enum = sub.add_parser("enumerate", help="stable matchings, rotations, edges")
    common(p_enum, nu=False)
    p_enum.add_argument(
        "--what",
        choices=["stable", "rotations", "edges", "all-matchings"],
        default="stable",
    )

    p_gen = sub.add_parser("generate", help="write a random rank-cost instance")
    p_gen.add_argument("--n", type=int, default=None)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--output", default=None)

    p_cmp = sub.add_parser("compare", help="psi table across matching policies")
    common(p_cmp)

    p_orc = sub.add_parser("oracle", help="brute-force references (debugging)")
    common(p_orc)
    p_orc.add_argument(
        "--what", choices=["matchings", "stable", "poset", "brute"], default="stable"
    )
    p_orc.add_argument("--domain", choices=["stable", "all"], default="stable")
    return parser


_HANDLERS = {
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "enumerate": _cmd_enumerate,
    "generate": _cmd_generate,
    "compare": _cmd_compare,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _CliError("no subcommand given")
        return _HANDLERS[args.command](args)
    except (_CliError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InternalError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
