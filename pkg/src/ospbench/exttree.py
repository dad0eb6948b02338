"""Extensive-form mechanisms as rooted trees over a finite type domain.

Internal nodes query a set of agents ``S(u)``; each outgoing edge carries the
set of type tuples of those agents that take the edge's action.  Labels are
stored projected onto ``S(u)``, so an action can only reveal information about
the agents who take it.  The full label ``T(e)`` (a set of whole profiles) is
the projected label intersected with the parent's incoming label and is
materialized lazily.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

from .core import Domain, ModelError, Outcome, Profile, format_rational, to_rational


class TreeError(ModelError):
    """Structural problem with a tree, or a query it cannot answer."""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class Node:
    id: int
    agents: tuple = ()
    children: tuple = ()  # edge ids, in action order
    outcome: Optional[Outcome] = None

    @property
    def is_leaf(self) -> bool:
        return self.outcome is not None


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    label: frozenset  # tuples over the agents of S(src), in sorted agent order


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    node: Optional[int] = None
    edges: tuple = ()

    def to_json(self) -> dict:
        return {"kind": self.kind, "message": self.message, "node": self.node,
                "edges": list(self.edges)}


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_json() for v in self.violations]}


def _project(profile: Sequence, agents: tuple) -> tuple:
    return tuple(profile[i] for i in agents)


class ExtensiveTree:
    """Immutable extensive-form mechanism.

    ``nodes`` and ``edges`` are dicts keyed by id.  Construction only checks
    that references resolve; semantic checks live in :func:`validate_tree`.
    """

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge], root: int,
                 domain: Domain):
        self.nodes = {node.id: node for node in nodes}
        self.edges = {edge.id: edge for edge in edges}
        self.root = root
        self.domain = domain
        if root not in self.nodes:
            raise TreeError(f"root {root} is not a node")
        for edge in self.edges.values():
            if edge.src not in self.nodes or edge.dst not in self.nodes:
                raise TreeError(f"edge {edge.id} references a missing node", edge.src)
        for node in self.nodes.values():
            for eid in node.children:
                if eid not in self.edges:
                    raise TreeError(f"node {node.id} references missing edge {eid}", node.id)
                if self.edges[eid].src != node.id:
                    raise TreeError(f"edge {eid} listed under node {node.id} but leaves "
                                    f"node {self.edges[eid].src}", node.id)

    # Derived structure, computed once per tree.

    @cached_property
    def parent_edge(self) -> dict:
        """node id -> id of the edge entering it."""
        incoming = {}
        for node in self.nodes.values():
            for eid in node.children:
                incoming.setdefault(self.edges[eid].dst, []).append(eid)
        return {nid: eids[0] for nid, eids in incoming.items() if len(eids) == 1}

    @cached_property
    def bfs_order(self) -> list:
        """Reachable node ids, breadth first, children visited by ascending node id."""
        order, seen = [], {self.root}
        queue = deque([self.root])
        while queue:
            nid = queue.popleft()
            order.append(nid)
            kids = sorted(self.edges[e].dst for e in self.nodes[nid].children)
            for kid in kids:
                if kid not in seen:
                    seen.add(kid)
                    queue.append(kid)
        return order

    @cached_property
    def _labels(self) -> tuple:
        """(incoming full label per node, full label per edge), top down."""
        incoming = {self.root: frozenset(self.domain.profiles())}
        full = {}
        for nid in self.bfs_order:
            node = self.nodes[nid]
            here = incoming.get(nid, frozenset())
            for eid in node.children:
                edge = self.edges[eid]
                lab = frozenset(b for b in here if _project(b, node.agents) in edge.label)
                full[eid] = lab
                # a node reached twice is a structural error; keep the first label
                incoming.setdefault(edge.dst, lab)
        return incoming, full

    def incoming_label(self, node_id: int) -> frozenset:
        return self._labels[0].get(node_id, frozenset())

    def full_label(self, edge_id: int) -> frozenset:
        return self._labels[1][edge_id]

    def path_to(self, node_id: int) -> list:
        """Edge ids from the root down to ``node_id``."""
        path = []
        nid = node_id
        while nid != self.root:
            eid = self.parent_edge.get(nid)
            if eid is None:
                raise TreeError(f"node {node_id} is not reachable from the root", node_id)
            path.append(eid)
            nid = self.edges[eid].src
            if len(path) > len(self.nodes):
                raise TreeError("cycle detected", node_id)
        path.reverse()
        return path

    def leaves(self) -> list:
        return [nid for nid in self.bfs_order if self.nodes[nid].is_leaf]

    def __call__(self, profile: Sequence) -> Outcome:
        return outcome_of(self, profile)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExtensiveTree):
            return NotImplemented
        return (self.root == other.root and self.domain == other.domain
                and self.nodes == other.nodes and self.edges == other.edges)

    __hash__ = None

    def __repr__(self) -> str:
        return (f"ExtensiveTree(nodes={len(self.nodes)}, edges={len(self.edges)}, "
                f"root={self.root}, n={self.domain.n})")


def full_label(tree: ExtensiveTree, edge_id: int) -> frozenset:
    return tree.full_label(edge_id)


def validate_tree(tree: ExtensiveTree) -> ValidationReport:
    """Check the tree shape and the edge-label constraints; never raises."""
    report = ValidationReport()
    add = report.violations.append
    domain = tree.domain

    # shape: every non-root node has exactly one parent, everything reachable
    parents = {}
    for node in tree.nodes.values():
        for eid in node.children:
            parents.setdefault(tree.edges[eid].dst, []).append(eid)
    if tree.root in parents:
        add(Violation("shape", "root has an incoming edge", tree.root, tuple(parents[tree.root])))
    for nid, eids in sorted(parents.items()):
        if len(eids) > 1:
            add(Violation("shape", f"node {nid} has {len(eids)} incoming edges", nid, tuple(eids)))
    dangling = sorted(e.id for e in tree.edges.values() if e.id not in tree.nodes[e.src].children)
    for eid in dangling:
        add(Violation("shape", f"edge {eid} is not listed among its source's children",
                      tree.edges[eid].src, (eid,)))
    reachable = set(tree.bfs_order)
    for nid in sorted(set(tree.nodes) - reachable):
        add(Violation("shape", f"node {nid} is unreachable from the root", nid))
    if report.violations:
        return report

    for nid in tree.bfs_order:
        node = tree.nodes[nid]
        if node.is_leaf:
            if node.children:
                add(Violation("shape", "leaf has children", nid, node.children))
            if len(node.outcome.payments) != domain.n:
                add(Violation("outcome", f"leaf has {len(node.outcome.payments)} payments, "
                              f"expected {domain.n}", nid))
            continue
        if not node.children:
            add(Violation("shape", "internal node has no children", nid))
            continue
        if not node.agents:
            add(Violation("shape", "internal node queries no agent", nid))
            continue
        if list(node.agents) != sorted(set(node.agents)) or not all(
                0 <= i < domain.n for i in node.agents):
            add(Violation("shape", f"bad agent set {node.agents}", nid))
            continue
        allowed = [set(domain[i]) for i in node.agents]
        for eid in node.children:
            edge = tree.edges[eid]
            if not edge.label:
                add(Violation("label", f"edge {eid} has an empty label", nid, (eid,)))
            for tup in sorted(edge.label):
                if len(tup) != len(node.agents) or not all(
                        v in vals for v, vals in zip(tup, allowed)):
                    add(Violation("label", f"edge {eid} label tuple {tup} is outside the "
                                  f"domain of agents {node.agents}", nid, (eid,)))
                    break
            if not tree.full_label(eid):
                add(Violation("empty", f"edge {eid} admits no profile compatible with "
                              f"node {nid}", nid, (eid,)))
        kids = list(node.children)
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                if tree.edges[kids[a]].label & tree.edges[kids[b]].label:
                    add(Violation("disjoint", f"edges {kids[a]} and {kids[b]} overlap",
                                  nid, (kids[a], kids[b])))
        covered = frozenset().union(*(tree.full_label(e) for e in kids))
        missing = tree.incoming_label(nid) - covered
        if missing:
            example = min(missing)
            add(Violation("exhaustive", f"{len(missing)} compatible profiles leave node {nid} "
                          f"by no edge, e.g. {tuple(format_rational(v) for v in example)}",
                          nid, tuple(kids)))
    return report


def _require_valid(tree: ExtensiveTree):
    report = validate_tree(tree)
    if not report.ok:
        first = report.violations[0]
        raise TreeError(f"invalid tree: {first.message}", first.node)


def outcome_of(tree: ExtensiveTree, profile: Sequence) -> Outcome:
    """Run the mechanism on ``profile`` and return the leaf outcome."""
    profile = tuple(to_rational(v) for v in profile)
    if not tree.domain.contains(profile):
        raise TreeError(f"profile {profile} is not in the tree's domain")
    nid = tree.root
    for _ in range(len(tree.nodes) + 1):
        node = tree.nodes[nid]
        if node.is_leaf:
            return node.outcome
        key = _project(profile, node.agents)
        matches = [e for e in node.children if key in tree.edges[e].label]
        if len(matches) != 1:
            raise TreeError(f"{len(matches)} edges match the profile at node {nid}", nid)
        nid = tree.edges[matches[0]].dst
    raise TreeError("walk did not terminate", nid)


def compatible(tree: ExtensiveTree, node_id: int, profile: Sequence) -> bool:
    profile = tuple(profile)
    if not tree.domain.contains(profile):
        return False
    for eid in tree.path_to(node_id):
        edge = tree.edges[eid]
        if _project(profile, tree.nodes[edge.src].agents) not in edge.label:
            return False
    return True


def child_edge_for(tree: ExtensiveTree, node_id: int, profile: Sequence) -> Optional[int]:
    node = tree.nodes[node_id]
    key = _project(profile, node.agents)
    for eid in node.children:
        if key in tree.edges[eid].label:
            return eid
    return None


def diverge(tree: ExtensiveTree, node_id: int, b: Sequence, b2: Sequence) -> bool:
    node = tree.nodes[node_id]
    if node.is_leaf:
        return False
    if not (compatible(tree, node_id, b) and compatible(tree, node_id, b2)):
        return False
    e1, e2 = child_edge_for(tree, node_id, b), child_edge_for(tree, node_id, b2)
    return e1 is not None and e2 is not None and e1 != e2


def prune(tree: ExtensiveTree, restricted: Domain) -> ExtensiveTree:
    """Restrict the mechanism to a sub-domain, dropping branches no profile reaches."""
    if restricted.n != tree.domain.n:
        raise TreeError(f"restricted domain has {restricted.n} agents, tree has {tree.domain.n}")
    if not restricted.is_subdomain_of(tree.domain):
        raise TreeError("restricted domain is not contained in the tree's domain")
    allowed = [set(vals) for vals in restricted.per_agent]

    nodes, edges = [], []
    stack = [(tree.root, frozenset(restricted.profiles()))]
    while stack:
        nid, here = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            nodes.append(node)
            continue
        kept = []
        for eid in node.children:
            edge = tree.edges[eid]
            lab = frozenset(b for b in here if _project(b, node.agents) in edge.label)
            if not lab:
                continue
            label = frozenset(t for t in edge.label
                              if all(v in allowed[i] for v, i in zip(t, node.agents)))
            kept.append(eid)
            edges.append(Edge(eid, edge.src, edge.dst, label))
            stack.append((edge.dst, lab))
        nodes.append(Node(nid, node.agents, tuple(kept)))
    return ExtensiveTree(nodes, edges, tree.root, restricted)


def _live_children(tree: ExtensiveTree, node_id: int) -> list:
    return [e for e in tree.nodes[node_id].children if tree.full_label(e)]


def is_trivial(tree: ExtensiveTree) -> bool:
    return all(len(_live_children(tree, nid)) < 2
               for nid in tree.bfs_order if not tree.nodes[nid].is_leaf)


def divergent_agent(tree: ExtensiveTree) -> Optional[tuple]:
    """``(agent, node)`` at the first breadth-first node where profiles diverge.

    With several queried agents, the lowest index whose own type alone can
    switch the edge is reported; failing that, the lowest index on which the
    first diverging pair differs.
    """
    for nid in tree.bfs_order:
        node = tree.nodes[nid]
        if node.is_leaf:
            continue
        live = _live_children(tree, nid)
        if len(live) < 2:
            continue
        if len(node.agents) == 1:
            return node.agents[0], nid
        edge_of = {b: e for e in live for b in tree.full_label(e)}
        for agent in node.agents:
            for b, e in sorted(edge_of.items()):
                for v in tree.domain[agent]:
                    flipped = b[:agent] + (v,) + b[agent + 1:]
                    if edge_of.get(flipped, e) != e:
                        return agent, nid
        b = min(tree.full_label(live[0]))
        b2 = min(tree.full_label(live[1]))
        return next(i for i in node.agents if b[i] != b2[i]), nid
    return None


# JSON round trip


def tree_to_json(tree: ExtensiveTree) -> dict:
    nodes = []
    for nid in sorted(tree.nodes):
        node = tree.nodes[nid]
        if node.is_leaf:
            nodes.append({"id": nid, "outcome": node.outcome.to_json()})
        else:
            nodes.append({"id": nid, "agents": list(node.agents), "children": list(node.children)})
    edges = []
    for eid in sorted(tree.edges):
        edge = tree.edges[eid]
        edges.append({
            "id": eid, "from": edge.src, "to": edge.dst,
            "label": [[format_rational(v) for v in t] for t in sorted(edge.label)],
        })
    return {"root": tree.root, "domain": tree.domain.to_json(), "nodes": nodes, "edges": edges}


def tree_from_json(data: dict) -> ExtensiveTree:
    try:
        domain = Domain.from_json(data["domain"])
        nodes = []
        for item in data["nodes"]:
            if "outcome" in item:
                nodes.append(Node(int(item["id"]), outcome=Outcome.from_json(item["outcome"])))
            else:
                nodes.append(Node(int(item["id"]), tuple(int(a) for a in item["agents"]),
                                  tuple(int(e) for e in item.get("children", ()))))
        edges = [
            Edge(int(item["id"]), int(item["from"]), int(item["to"]),
                 frozenset(tuple(to_rational(v) for v in t) for t in item["label"]))
            for item in data["edges"]
        ]
        return ExtensiveTree(nodes, edges, int(data["root"]), domain)
    except (KeyError, TypeError) as exc:
        raise TreeError(f"malformed tree document: {exc}") from exc


def dumps_tree(tree: ExtensiveTree) -> str:
    return json.dumps(tree_to_json(tree), indent=2, sort_keys=True)


def loads_tree(text: str) -> ExtensiveTree:
    return tree_from_json(json.loads(text))
