"""Exhaustive incentive checks: OSP on trees, SP and VP on direct mechanisms.

Every check enumerates its quantifiers in a fixed lexicographic order, so
the counterexample lists (and the reported statistics) are reproducible.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import (CostModel, Domain, ModelError, Outcome, ProblemKind, format_rational,
                   outcome_cost)
from .exttree import ExtensiveTree, TreeError, validate_tree


class Property(str, enum.Enum):
    OSP = "osp"
    SP = "sp"
    VP = "vp"
    MONOTONE = "monotone"


@dataclass(frozen=True)
class Counterexample:
    """A violated inequality.

    ``honest_cost`` is the cost of truthful play and ``deviating_cost`` the
    (smaller) cost reached by declaring ``deviation``.  For VP there is no
    deviation and ``deviating_cost`` is the bound 0.
    """

    agent: int
    true_type: object
    deviation: Optional[object]
    honest_context: tuple
    deviating_context: Optional[tuple]
    honest_cost: object
    deviating_cost: object
    node: Optional[int] = None

    def honest_profile(self) -> tuple:
        return _insert(self.honest_context, self.agent, self.true_type)

    def deviating_profile(self) -> Optional[tuple]:
        if self.deviation is None:
            return None
        return _insert(self.deviating_context, self.agent, self.deviation)

    def to_json(self) -> dict:
        fmt = _fmt_opt
        return {
            "agent": self.agent,
            "node": self.node,
            "true_type": fmt(self.true_type),
            "deviation": fmt(self.deviation),
            "honest_context": [format_rational(v) for v in self.honest_context],
            "deviating_context": (None if self.deviating_context is None
                                  else [format_rational(v) for v in self.deviating_context]),
            "honest_cost": fmt(self.honest_cost),
            "deviating_cost": fmt(self.deviating_cost),
        }


@dataclass
class Verdict:
    property: Property
    counterexamples: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return not self.counterexamples

    def __bool__(self) -> bool:
        return self.holds

    def to_json(self) -> dict:
        return {
            "property": Property(self.property).value,
            "result": "holds" if self.holds else "fails",
            "counterexamples": [c.to_json() for c in self.counterexamples],
            "stats": dict(self.stats),
        }


class InvalidTreeError(TreeError):
    def __init__(self, report):
        first = report.violations[0]
        super().__init__(f"tree failed validation ({len(report.violations)} violations; "
                         f"first: {first.message})", first.node)
        self.report = report


def _fmt_opt(q):
    return None if q is None else format_rational(q)


def _insert(context: tuple, agent: int, value) -> tuple:
    return context[:agent] + (value,) + context[agent:]


def _drop(profile: tuple, agent: int) -> tuple:
    return profile[:agent] + profile[agent + 1:]


# OSP


def outcome_table(tree: ExtensiveTree) -> dict:
    """profile -> leaf outcome, for every profile of the tree's domain."""
    table = {}
    for leaf in tree.leaves():
        outcome = tree.nodes[leaf].outcome
        for b in tree.incoming_label(leaf):
            table[b] = outcome
    return table


def _osp_tasks(tree: ExtensiveTree) -> list:
    tasks = []
    for agent in range(tree.domain.n):
        for nid in tree.bfs_order:
            node = tree.nodes[nid]
            if not node.is_leaf and agent in node.agents and len(node.children) > 1:
                tasks.append((agent, nid))
    return tasks


def _check_node(tree: ExtensiveTree, table: dict, model: CostModel, problem: ProblemKind,
                agent: int, nid: int, first_only: bool) -> tuple:
    """Counterexamples and pair count for one (agent, node)."""
    node = tree.nodes[nid]
    # value of the agent -> [(context, edge, outcome)] in context order
    groups = {}
    for eid in node.children:
        for b in tree.full_label(eid):
            groups.setdefault(b[agent], []).append((_drop(b, agent), eid, table[b]))
    for rows in groups.values():
        rows.sort(key=lambda row: row[0])

    found, pairs = [], 0
    values = tree.domain[agent]
    for t in values:
        honest = groups.get(t)
        if not honest:
            continue
        honest_costs = [outcome_cost(model, problem, agent, t, t, out) for _, _, out in honest]
        for b in values:
            if b == t or b not in groups:
                continue
            dev = groups[b]
            dev_costs = [outcome_cost(model, problem, agent, t, b, out) for _, _, out in dev]
            counts, mins = {}, {}
            for (_, eid, _), c in zip(dev, dev_costs):
                counts[eid] = counts.get(eid, 0) + 1
                if eid not in mins or c < mins[eid]:
                    mins[eid] = c
            edge_mins = sorted((c, e) for e, c in mins.items())
            total = len(dev)
            witness = None
            for (ctx, eid, _), hc in zip(honest, honest_costs):
                pairs += total - counts.get(eid, 0)
                if witness is not None:
                    continue
                best = next((c for c, e in edge_mins if e != eid), None)
                if best is None or hc <= best:
                    continue
                for (dctx, deid, _), dc in zip(dev, dev_costs):
                    if deid != eid and dc < hc:
                        witness = Counterexample(agent, t, b, ctx, dctx, hc, dc, nid)
                        break
            if witness is not None:
                found.append(witness)
                if first_only:
                    return found, pairs
    return found, pairs


_WORKER_STATE = {}


def _worker_init(tree, table, model, problem, first_only):
    _WORKER_STATE.update(tree=tree, table=table, model=model, problem=problem,
                         first_only=first_only)


def _worker_run(task):
    s = _WORKER_STATE
    return _check_node(s["tree"], s["table"], s["model"], s["problem"], task[0], task[1],
                       s["first_only"])


def check_osp(tree: ExtensiveTree, cost_model: CostModel, problem: ProblemKind,
              first_only: bool = False, workers: int = 1) -> Verdict:
    """Exhaustively check obvious strategyproofness.

    For each agent ``i`` and node ``u`` querying it, each true type ``t`` and
    deviation ``b != t``, every pair of contexts that keeps both profiles
    compatible with ``u`` but sends them down different edges is compared.
    At most one witness (the lexicographically first context pair) is kept
    per ``(i, u, t, b)``.
    """
    report = validate_tree(tree)
    if not report.ok:
        raise InvalidTreeError(report)
    model, problem = CostModel(cost_model), ProblemKind(problem)
    table = outcome_table(tree)
    tasks = _osp_tasks(tree)

    if workers > 1 and len(tasks) > 1 and not first_only:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(tree, table, model, problem, first_only)) as pool:
            results = list(pool.map(_worker_run, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = []
        for agent, nid in tasks:
            found, pairs = _check_node(tree, table, model, problem, agent, nid, first_only)
            results.append((found, pairs))
            if first_only and found:
                break

    counterexamples = [c for found, _ in results for c in found]
    stats = {"nodes_visited": len(results), "pairs_checked": sum(p for _, p in results)}
    if first_only:
        counterexamples = counterexamples[:1]
    return Verdict(Property.OSP, counterexamples, stats)


# SP and VP on direct mechanisms (or any callable profile -> Outcome)


def _resolve_problem(mechanism, problem) -> ProblemKind:
    if problem is None:
        problem = getattr(mechanism, "problem", None)
    if problem is None:
        raise ModelError("problem kind is required for this mechanism")
    return ProblemKind(problem)


def _outcomes(mechanism: Callable, domain: Domain) -> dict:
    return {b: mechanism(b) for b in domain.profiles()}


def check_strategyproof(mechanism: Callable[[tuple], Outcome], cost_model: CostModel,
                        domain: Domain, problem: Optional[ProblemKind] = None,
                        first_only: bool = False) -> Verdict:
    """Truthfulness is a dominant strategy given the full profile."""
    model, problem = CostModel(cost_model), _resolve_problem(mechanism, problem)
    outcomes = _outcomes(mechanism, domain)
    found, pairs = [], 0
    for agent in range(domain.n):
        others = Domain(_drop(domain.per_agent, agent)) if domain.n > 1 else None
        contexts = list(others.profiles()) if others else [()]
        for t in domain[agent]:
            for b in domain[agent]:
                if b == t:
                    continue
                for ctx in contexts:
                    pairs += 1
                    hc = outcome_cost(model, problem, agent, t, t, outcomes[_insert(ctx, agent, t)])
                    dc = outcome_cost(model, problem, agent, t, b, outcomes[_insert(ctx, agent, b)])
                    if hc > dc:
                        found.append(Counterexample(agent, t, b, ctx, ctx, hc, dc))
                        if first_only:
                            return Verdict(Property.SP, found, {"profiles": len(outcomes),
                                                                "pairs_checked": pairs})
    return Verdict(Property.SP, found, {"profiles": len(outcomes), "pairs_checked": pairs})


def check_voluntary_participation(mechanism: Callable[[tuple], Outcome], cost_model: CostModel,
                                  domain: Domain, problem: Optional[ProblemKind] = None,
                                  first_only: bool = False) -> Verdict:
    """A truthful agent's cost is never positive."""
    model, problem = CostModel(cost_model), _resolve_problem(mechanism, problem)
    outcomes = _outcomes(mechanism, domain)
    found, checked = [], 0
    for agent in range(domain.n):
        others = Domain(_drop(domain.per_agent, agent)) if domain.n > 1 else None
        contexts = list(others.profiles()) if others else [()]
        for t in domain[agent]:
            for ctx in contexts:
                checked += 1
                cost = outcome_cost(model, problem, agent, t, t, outcomes[_insert(ctx, agent, t)])
                if cost > 0:
                    found.append(Counterexample(agent, t, None, ctx, None, cost, 0))
                    if first_only:
                        return Verdict(Property.VP, found, {"profiles": len(outcomes),
                                                            "pairs_checked": checked})
    return Verdict(Property.VP, found, {"profiles": len(outcomes), "pairs_checked": checked})
