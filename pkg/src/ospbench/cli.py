"""Command-line entry point: scenario files in, deterministic JSON reports out.

Exit codes: 0 property holds / demo consistent, 1 violation found,
2 input error (malformed scenario, unknown mechanism, budget exceeded).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from . import facility as fac
from . import scheduling as sch
from .core import (CostModel, Domain, ModelError, ProblemKind, format_rational, outcome_cost,
                   to_rational)
from .exttree import loads_tree, validate_tree
from .mechanisms import compile_direct
from .verifier import (Property, check_osp, check_strategyproof,
                       check_voluntary_participation)

COMMANDS = ("validate", "verify", "run", "approx", "demo")
DEMOS = ("scheduling-lb", "frugality", "facility-lb")
DEFAULT_BUDGET = 10 ** 7

FACILITY_MECHANISMS = {
    "median": lambda inst, p: fac.median_mechanism(inst),
    "zero-payment-median": lambda inst, p: fac.median_mechanism(inst),
    "first-price-median": lambda inst, p: fac.first_price_median(inst),
    "interval": lambda inst, p: fac.interval_mechanism(inst),
    "oim": lambda inst, p: fac.oim(inst),
    "dictatorship": lambda inst, p: fac.dictatorship(inst, int(p.get("dictator", 0))),
}
SCHEDULING_MECHANISMS = {
    "optimal": lambda inst, p: sch.optimal_scheduler(inst),
    "first-price-optimal": lambda inst, p: sch.first_price_scheduler(inst),
    "archer-tardos": lambda inst, p: sch.archer_tardos_scheduler(inst),
}


class ScenarioError(ModelError):
    pass


# scenario resolution


def _split(text: str) -> list:
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_param(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep:
        raise ScenarioError(f"--param expects key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def load_scenario(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    return data


def merge_overrides(scenario: dict, args: argparse.Namespace) -> dict:
    merged = dict(scenario)
    if args.command != "exec":
        merged["command"] = args.command
    if getattr(args, "demo", None):
        merged["demo"] = args.demo
    for key in ("problem", "cost_model", "property", "tree", "output", "budget", "n", "a", "b"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if args.mechanism:
        merged["mechanism"] = {"name": args.mechanism,
                               "params": dict(merged.get("mechanism", {}).get("params", {}))
                               if isinstance(merged.get("mechanism"), dict) else {}}
    if args.grid:
        merged["grid"] = _split(args.grid)
    if args.jobs:
        merged["jobs"] = _split(args.jobs)
    if args.query_order:
        merged["query_order"] = [int(v) for v in _split(args.query_order)]
    if args.profile:
        merged["profile"] = _split(args.profile)
    if args.first_only:
        merged["first_only"] = True
    if args.param:
        params = dict(merged.get("params", {}))
        params.update(_parse_param(p) for p in args.param)
        merged["params"] = params
        if isinstance(merged.get("mechanism"), dict):
            merged["mechanism"]["params"] = {**merged["mechanism"].get("params", {}), **params}
    return merged


def _mechanism_entry(scenario: dict) -> tuple:
    entry = scenario.get("mechanism")
    if entry is None:
        raise ScenarioError("scenario names no mechanism")
    if isinstance(entry, str):
        return entry, {}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ScenarioError("mechanism must be a name or {name, params}")
    return entry["name"], dict(entry.get("params", {}))


def _domain(scenario: dict) -> Domain:
    if "domain" in scenario:
        return Domain.from_json(scenario["domain"])
    if "grid" not in scenario or "n" not in scenario:
        raise ScenarioError("scenario needs either domain or n + grid")
    return Domain.uniform(int(scenario["n"]), scenario["grid"])


def build_instance(scenario: dict):
    problem = ProblemKind(scenario.get("problem", "facility"))
    domain = _domain(scenario)
    n = domain.n
    if problem is ProblemKind.FACILITY:
        lo = min(vals[0] for vals in domain.per_agent)
        hi = max(vals[-1] for vals in domain.per_agent)
        a = to_rational(scenario.get("a", lo))
        b = to_rational(scenario.get("b", hi))
        return problem, fac.FacilityInstance(n, a, b, domain)
    jobs = scenario.get("jobs")
    if not jobs:
        raise ScenarioError("scheduling scenario needs jobs")
    budget = int(scenario.get("budget", DEFAULT_BUDGET))
    return problem, sch.SchedulingInstance(n, tuple(jobs), domain, budget)


def build_mechanism(scenario: dict, problem: ProblemKind, instance):
    name, params = _mechanism_entry(scenario)
    table = FACILITY_MECHANISMS if problem is ProblemKind.FACILITY else SCHEDULING_MECHANISMS
    if name not in table:
        raise ScenarioError(f"unknown {problem.value} mechanism {name!r}; "
                            f"known: {', '.join(sorted(table))}")
    mech = table[name](instance, params)
    order = scenario.get("query_order")
    if order is not None and name != "dictatorship":
        order = [int(v) for v in order]
        if sorted(order) != list(range(instance.n)):
            raise ScenarioError(f"query_order {order} is not a permutation of 0..{instance.n - 1}")
        mech = mech.with_order(order)
    return mech, name, params


def _check_budget(scenario: dict, evaluations: int):
    budget = int(scenario.get("budget", DEFAULT_BUDGET))
    if evaluations > budget:
        raise ScenarioError(f"about {evaluations} cost evaluations exceed the budget of {budget}")


def _resolved(scenario: dict) -> dict:
    """Scenario as echoed in the report (output path dropped: it does not affect results)."""
    return {k: v for k, v in sorted(scenario.items()) if k != "output"}


# commands


def cmd_validate(scenario: dict) -> tuple:
    if "tree" not in scenario:
        raise ScenarioError("validate needs a tree file")
    tree = _read_tree(scenario["tree"])
    report = validate_tree(tree)
    return (0 if report.ok else 1), {"validation": report.to_json(),
                                     "tree": {"nodes": len(tree.nodes), "edges": len(tree.edges)}}


def _read_tree(path):
    try:
        return loads_tree(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read tree {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"tree {path} is not valid JSON: {exc}") from exc


def cmd_verify(scenario: dict) -> tuple:
    prop = Property(scenario.get("property", "osp"))
    model = CostModel(scenario.get("cost_model", "quasilinear"))
    first_only = bool(scenario.get("first_only", False))
    body = {}
    if "tree" in scenario:
        if prop is not Property.OSP:
            raise ScenarioError("a tree file can only be checked for osp")
        tree = _read_tree(scenario["tree"])
        problem = ProblemKind(scenario.get("problem", "facility"))
        domain = tree.domain
        _check_budget(scenario, domain.n * domain.size * max(len(v) for v in domain.per_agent))
        verdict = check_osp(tree, model, problem, first_only=first_only)
    else:
        problem, instance = build_instance(scenario)
        mech, name, params = build_mechanism(scenario, problem, instance)
        dom = instance.grid if problem is ProblemKind.FACILITY else instance.domain
        width = max(len(v) for v in dom.per_agent)
        _check_budget(scenario, dom.n * dom.size * (width if prop is not Property.VP else 1))
        if prop is Property.OSP:
            verdict = check_osp(compile_direct(mech, dom), model, problem, first_only=first_only)
        elif prop is Property.SP:
            verdict = check_strategyproof(mech, model, dom, first_only=first_only)
        else:
            verdict = check_voluntary_participation(mech, model, dom, first_only=first_only)
        body["mechanism"] = {"name": name, "params": params,
                             "query_order": list(mech.query_order)}
    body["verdict"] = verdict.to_json()
    return (0 if verdict.holds else 1), body


def cmd_run(scenario: dict) -> tuple:
    problem, instance = build_instance(scenario)
    mech, name, params = build_mechanism(scenario, problem, instance)
    if "profile" not in scenario:
        raise ScenarioError("run needs a profile")
    profile = tuple(to_rational(v) for v in scenario["profile"])
    dom = instance.grid if problem is ProblemKind.FACILITY else instance.domain
    if len(profile) != dom.n:
        raise ScenarioError(f"profile has {len(profile)} entries, expected {dom.n}")
    outcome = mech(profile)
    model = CostModel(scenario.get("cost_model", "quasilinear"))
    costs = [format_rational(outcome_cost(model, problem, i, profile[i], profile[i], outcome))
             for i in range(dom.n)]
    body = {"mechanism": {"name": name, "params": params, "query_order": list(mech.query_order)},
            "profile": [format_rational(v) for v in profile],
            "outcome": outcome.to_json(), "truthful_costs": costs}
    if name == "oim":
        body["payment_trace"] = fac.oim_trace(instance, profile, mech.query_order)
    if problem is ProblemKind.SCHEDULING:
        body["makespan"] = format_rational(sch.makespan(outcome.solution, profile))
    else:
        body["social_cost"] = format_rational(fac.social_cost(outcome.solution.x, profile))
    return 0, body


def cmd_approx(scenario: dict) -> tuple:
    problem, instance = build_instance(scenario)
    if problem is not ProblemKind.FACILITY:
        raise ScenarioError("approx is implemented for facility location")
    mech, name, params = build_mechanism(scenario, problem, instance)
    _check_budget(scenario, instance.grid.size)
    result = fac.approximation_ratio(mech, instance)
    return 0, {"mechanism": {"name": name, "params": params}, "approximation": result.to_json()}


def _demo_params(scenario: dict) -> dict:
    return dict(scenario.get("params", {}))


def demo_scheduling_lb(scenario: dict) -> tuple:
    p = _demo_params(scenario)
    report = sch.lb_scenario_scheduling(p.get("a", "1"), p.get("b", "3"), p.get("k", "3/2"))
    return (0 if report.consistent else 1), report.to_json()


def demo_frugality(scenario: dict) -> tuple:
    p = _demo_params(scenario)
    n = int(p.get("n", 3))
    a, b, delta = (to_rational(p.get(k, d)) for k, d in (("a", 0), ("b", 10), ("delta", 1)))
    instance = fac.FacilityInstance.lattice(n, a, b, delta)
    profile = fac.frugality_profile(n, a, b, delta)
    trace = fac.oim_trace(instance, profile)
    charges = [to_rational(row["charge"]) for row in sorted(trace, key=lambda r: r["agent"])]
    full = sum(1 for c in charges if c == b - a)
    expected = math.ceil(n / 2) - 1
    values = {
        "profile": [format_rational(v) for v in profile],
        "charges": [format_rational(c) for c in charges],
        "agents_charged_full_width": full,
        "expected_full_width": expected,
        "payment_trace": trace,
    }
    params = {"n": n, "a": format_rational(a), "b": format_rational(b),
              "delta": format_rational(delta)}
    return (0 if full == expected else 1), {"demo": "frugality", "parameters": params,
                                            "values": values, "consistent": full == expected}


def demo_facility_lb(scenario: dict) -> tuple:
    """Median without money fails OSP on a fine grid; the dictatorship passes at ratio n-1."""
    p = _demo_params(scenario)
    n = int(p.get("n", 3))
    a, b, delta = (to_rational(p.get(k, d)) for k, d in (("a", 0), ("b", 2), ("delta", 1)))
    c = to_rational(p.get("c", a))
    i = int(p.get("i", 0))
    instance = fac.FacilityInstance.lattice(n, a, b, delta)
    _check_budget(scenario, n * instance.grid.size * len(instance.grid[0]))
    x, y = fac.lb_witness_profiles(c, delta, b, n, i)
    median_tree = compile_direct(fac.median_mechanism(instance), instance.grid)
    median_osp = check_osp(median_tree, CostModel.QUASILINEAR, ProblemKind.FACILITY, first_only=True)
    dict_mech = fac.dictatorship(instance, i)
    dict_osp = check_osp(compile_direct(dict_mech, instance.grid), CostModel.QUASILINEAR,
                         ProblemKind.FACILITY)
    ratio = fac.approximation_ratio(dict_mech, fac.FacilityInstance.uniform(n, [a, b]))
    opt_loc, opt_cost = fac.optimal_social_cost(y)
    fmt = format_rational
    values = {
        "profile_x": [fmt(v) for v in x],
        "profile_y": [fmt(v) for v in y],
        "optimum_y": {"location": fmt(opt_loc), "cost": fmt(opt_cost)},
        "median_quasilinear_osp": median_osp.to_json(),
        "dictatorship_quasilinear_osp": dict_osp.to_json(),
        "dictatorship_ratio_on_endpoints": ratio.to_json(),
    }
    consistent = (not median_osp.holds) and dict_osp.holds and ratio.ratio == n - 1
    params = {"n": n, "a": fmt(a), "b": fmt(b), "delta": fmt(delta), "c": fmt(c), "i": i}
    return (0 if consistent else 1), {"demo": "facility-lb", "parameters": params,
                                      "values": values, "consistent": consistent}


DEMO_HANDLERS = {"scheduling-lb": demo_scheduling_lb, "frugality": demo_frugality,
                 "facility-lb": demo_facility_lb}


def cmd_demo(scenario: dict) -> tuple:
    name = scenario.get("demo")
    if name not in DEMO_HANDLERS:
        raise ScenarioError(f"unknown demo {name!r}; known: {', '.join(DEMOS)}")
    return DEMO_HANDLERS[name](scenario)


HANDLERS = {"validate": cmd_validate, "verify": cmd_verify, "run": cmd_run,
            "approx": cmd_approx, "demo": cmd_demo}


def run_scenario(scenario: dict) -> tuple:
    """Execute one scenario; returns ``(exit code, report dict)``."""
    command = scenario.get("command")
    report = {"tool": "ospbench", "version": __version__, "command": command,
              "parameters": _resolved(scenario)}
    try:
        if command not in HANDLERS:
            raise ScenarioError(f"unknown command {command!r}; known: {', '.join(COMMANDS)}")
        code, body = HANDLERS[command](scenario)
    except (ModelError, ValueError, KeyError, TypeError) as exc:
        code, body = 2, {"error": str(exc) or type(exc).__name__}
    report.update(body)
    report["exit_code"] = code
    return code, report


def render(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ospbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", nargs="?", help="scenario JSON file")
        p.add_argument("--problem", choices=[k.value for k in ProblemKind])
        p.add_argument("--mechanism")
        p.add_argument("--param", action="append", metavar="KEY=VALUE",
                       help="mechanism or demo parameter (repeatable)")
        p.add_argument("--cost-model", dest="cost_model", choices=[m.value for m in CostModel])
        p.add_argument("--property", choices=["osp", "sp", "vp"])
        p.add_argument("--n", type=int)
        p.add_argument("--a")
        p.add_argument("--b")
        p.add_argument("--grid", help="comma-separated values shared by all agents")
        p.add_argument("--jobs", help="comma-separated job loads")
        p.add_argument("--query-order", dest="query_order", help="comma-separated agent indices")
        p.add_argument("--profile", help="comma-separated declared types")
        p.add_argument("--tree", help="tree JSON file")
        p.add_argument("--budget", type=int)
        p.add_argument("--first-only", dest="first_only", action="store_true")
        p.add_argument("-o", "--output", help="write the report here instead of stdout")

    for name in ("validate", "verify", "run", "approx", "exec"):
        common(sub.add_parser(name))
    demo = sub.add_parser("demo")
    demo.add_argument("demo", choices=DEMOS)
    common(demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = load_scenario(args.scenario) if args.scenario else {}
        scenario = merge_overrides(scenario, args)
    except (ModelError, ValueError) as exc:
        print(f"ospbench: {exc}", file=sys.stderr)
        return 2
    code, report = run_scenario(scenario)
    text = render(report)
    output = scenario.get("output")
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)
    if code == 2:
        print(f"ospbench: {report.get('error')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
