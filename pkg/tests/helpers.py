"""Builders shared by the test modules: random mechanisms, random trees, bad fixtures."""

import itertools
import random
from fractions import Fraction

from ospbench.core import (Domain, FacilityLocation, Outcome, ProblemKind, Schedule,
                           solution_cost)
from ospbench.exttree import Edge, ExtensiveTree, Node
from ospbench.mechanisms import first_price

FACILITY = ProblemKind.FACILITY
SCHEDULING = ProblemKind.SCHEDULING


def random_domain(rng, n, size, lo, hi):
    return Domain([sorted(rng.sample(range(lo, hi + 1), size)) for _ in range(n)])


def random_facility_choice(rng, domain, a=0, b=10):
    """Arbitrary (not necessarily sensible) location table over the domain."""
    table = {p: FacilityLocation(Fraction(rng.randint(2 * a, 2 * b), 2)) for p in domain.profiles()}
    return table.__getitem__


def random_schedule_choice(rng, domain, jobs):
    table = {}
    for p in domain.profiles():
        loads = [Fraction(0)] * domain.n
        for job in jobs:
            loads[rng.randrange(domain.n)] += job
        table[p] = Schedule(tuple(loads))
    return table.__getitem__


def random_first_price(rng, problem, n=3, size=3):
    """A first-price mechanism around a random social choice, with a random query order."""
    if problem is FACILITY:
        domain = random_domain(rng, n, size, 0, 10)
        choice = random_facility_choice(rng, domain)
    else:
        domain = random_domain(rng, n, size, 1, 6)
        jobs = [Fraction(rng.randint(1, 3)) for _ in range(rng.randint(1, 3))]
        choice = random_schedule_choice(rng, domain, jobs)
    order = list(range(n))
    rng.shuffle(order)
    return first_price(choice, problem, n).with_order(order), domain


def first_price_outcome(problem, profile, solution):
    pays = tuple(solution_cost(problem, profile[i], solution, i) for i in range(len(profile)))
    return Outcome(solution, pays)


def random_separating_tree(rng, domain, leaf_outcome, max_group=3):
    """A random valid tree whose nodes may query several agents at once.

    Every leaf is reached by exactly one profile; ``leaf_outcome(profile)``
    supplies its outcome.
    """
    nodes, edges = [], []
    counter = itertools.count()
    edge_ids = itertools.count()

    def build(label):
        nid = next(counter)
        if len(label) == 1:
            (profile,) = label
            nodes.append(Node(nid, outcome=leaf_outcome(profile)))
            return nid
        open_agents = [i for i in range(domain.n) if len({p[i] for p in label}) > 1]
        agents = tuple(sorted(rng.sample(open_agents, rng.randint(1, min(max_group, len(open_agents))))))
        projections = sorted({tuple(p[i] for i in agents) for p in label})
        rng.shuffle(projections)
        groups = rng.randint(2, len(projections))
        cuts = sorted(rng.sample(range(1, len(projections)), groups - 1))
        parts = [projections[i:j] for i, j in zip([0] + cuts, cuts + [len(projections)])]
        children = []
        pending = []
        for part in parts:
            eid = next(edge_ids)
            children.append(eid)
            keep = set(part)
            pending.append((eid, frozenset(part),
                            frozenset(p for p in label if tuple(p[i] for i in agents) in keep)))
        nodes.append(Node(nid, agents, tuple(children)))
        for eid, proj, sub in pending:
            child = build(sub)
            edges.append(Edge(eid, nid, child, proj))
        return nid

    root = build(frozenset(domain.profiles()))
    return ExtensiveTree(nodes, edges, root, domain)


def random_first_price_tree(rng, problem, n=3, size=3):
    """Random separating tree with first-price leaves (OSP under monitoring)."""
    if problem is FACILITY:
        domain = random_domain(rng, n, size, 0, 10)
        choice = random_facility_choice(rng, domain)
    else:
        domain = random_domain(rng, n, size, 1, 6)
        choice = random_schedule_choice(rng, domain, [Fraction(1), Fraction(2)])
    return random_separating_tree(rng, domain,
                                  lambda p: first_price_outcome(problem, p, choice(p))), domain


def random_subdomain(rng, domain):
    return Domain([sorted(rng.sample(list(vals), rng.randint(1, len(vals))))
                   for vals in domain.per_agent])


def _leaf(nid, x=0, n=1):
    return Node(nid, outcome=Outcome(FacilityLocation(Fraction(x)), (Fraction(0),) * n))


def overlapping_tree():
    """Root querying agent 0 with two children both labeled {0} (a third covers {1})."""
    domain = Domain([[0, 1]])
    nodes = [Node(0, (0,), (0, 1, 2)), _leaf(1), _leaf(2), _leaf(3)]
    edges = [Edge(0, 0, 1, frozenset({(0,)})), Edge(1, 0, 2, frozenset({(0,)})),
             Edge(2, 0, 3, frozenset({(1,)}))]
    return ExtensiveTree(nodes, edges, 0, domain)


def incomplete_tree():
    """Root querying agent 0 whose only child covers {0} of {0, 1}."""
    domain = Domain([[0, 1]])
    nodes = [Node(0, (0,), (0,)), _leaf(1)]
    edges = [Edge(0, 0, 1, frozenset({(0,)}))]
    return ExtensiveTree(nodes, edges, 0, domain)
