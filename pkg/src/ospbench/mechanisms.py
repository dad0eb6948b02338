"""Direct-revelation mechanisms and their compilation into query trees."""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .core import (Domain, ModelError, Outcome, ProblemKind, Solution, solution_cost,
                   to_rational)
from .exttree import Edge, ExtensiveTree, Node

SocialChoice = Callable[[tuple], Solution]
# (agent, full declared profile, declarations of the agents queried before it) -> payment
PaymentRule = Callable[[int, tuple, tuple], object]


def zero_payments(agent: int, profile: tuple, history: tuple) -> int:
    return 0


@dataclass(frozen=True)
class DirectMechanism:
    """Social choice function plus a history-aware payment rule.

    ``query_order`` lists the agents in the order they are asked for their
    type.  Agents missing from it are never queried, so neither the social
    choice nor the payments may depend on their declarations.
    """

    problem: ProblemKind
    n: int
    social_choice: SocialChoice
    payment_rule: PaymentRule = zero_payments
    query_order: Optional[tuple] = None
    name: str = "direct"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "problem", ProblemKind(self.problem))
        order = tuple(range(self.n)) if self.query_order is None else tuple(self.query_order)
        if len(set(order)) != len(order) or not all(0 <= i < self.n for i in order):
            raise ModelError(f"query order {order} is not a sequence of distinct agents "
                             f"among {self.n}")
        object.__setattr__(self, "query_order", order)

    def history(self, agent: int, profile: tuple) -> tuple:
        """Declarations of the agents queried before ``agent``, in query order."""
        order = self.query_order
        stop = order.index(agent) if agent in order else len(order)
        return tuple(profile[j] for j in order[:stop])

    def payments(self, profile: tuple) -> tuple:
        return tuple(to_rational(self.payment_rule(i, profile, self.history(i, profile)))
                     for i in range(self.n))

    def __call__(self, profile: Sequence) -> Outcome:
        profile = tuple(to_rational(v) for v in profile)
        if len(profile) != self.n:
            raise ModelError(f"profile has {len(profile)} entries, mechanism expects {self.n}")
        return Outcome(self.social_choice(profile), self.payments(profile))

    def with_order(self, order: Sequence[int]) -> "DirectMechanism":
        return DirectMechanism(self.problem, self.n, self.social_choice, self.payment_rule,
                               tuple(order), self.name, self.params)


def compile_direct(mech: DirectMechanism, domain: Domain) -> ExtensiveTree:
    """Build the singleton-query tree that asks agents one at a time.

    Node and edge ids are assigned breadth first.  Every leaf must carry a
    single outcome, which is checked over all profiles that reach it.
    """
    if domain.n != mech.n:
        raise ModelError(f"domain has {domain.n} agents, mechanism expects {mech.n}")
    order = mech.query_order
    nodes, edges = [], []
    next_node, next_edge = 1, 0
    # frontier entries: (node id, fixed declarations {agent: value})
    frontier = [(0, {})]
    for agent in order:
        grown = []
        for nid, fixed in frontier:
            children = []
            for v in domain[agent]:
                child = next_node
                next_node += 1
                edges.append(Edge(next_edge, nid, child, frozenset({(v,)})))
                children.append(next_edge)
                next_edge += 1
                grown.append((child, {**fixed, agent: v}))
            nodes.append(Node(nid, (agent,), tuple(children)))
        frontier = grown
    free = [i for i in range(mech.n) if i not in order]
    for nid, fixed in frontier:
        nodes.append(Node(nid, outcome=_leaf_outcome(mech, domain, fixed, free)))
    return ExtensiveTree(nodes, edges, 0, domain)


def _leaf_outcome(mech: DirectMechanism, domain: Domain, fixed: dict, free: list) -> Outcome:
    base = [fixed.get(i, domain[i][0]) for i in range(mech.n)]
    outcome = mech(tuple(base))
    if free:
        for values in itertools.product(*(domain[i] for i in free)):
            for i, v in zip(free, values):
                base[i] = v
            if mech(tuple(base)) != outcome:
                raise ModelError(f"mechanism {mech.name!r} depends on unqueried agents {free}")
    return outcome


def first_price(social_choice: SocialChoice, problem: ProblemKind, n: int,
                name: str = "first-price") -> DirectMechanism:
    """Pay every agent exactly its declared cost of the chosen solution."""
    problem = ProblemKind(problem)
    social_choice = functools.lru_cache(maxsize=None)(social_choice)

    def pay_declared_cost(agent, profile, history):
        return solution_cost(problem, profile[agent], social_choice(profile), agent)

    return DirectMechanism(problem, n, social_choice, pay_declared_cost, None, name)
