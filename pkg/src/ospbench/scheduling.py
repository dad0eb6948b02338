"""Related-machine scheduling: exact makespan optimum, monotonicity, threshold payments."""

from __future__ import annotations

import bisect
import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .core import Domain, ModelError, ProblemKind, Schedule, format_rational, to_rational
from .mechanisms import DirectMechanism, first_price
from .verifier import Property, Verdict

SCHEDULING = ProblemKind.SCHEDULING
DEFAULT_BUDGET = 10 ** 7


class BudgetExceeded(ModelError):
    pass


@dataclass(frozen=True)
class SchedulingInstance:
    n: int
    jobs: tuple
    domain: Domain
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        jobs = tuple(to_rational(j) for j in self.jobs)
        if not jobs:
            raise ModelError("at least one job is required")
        if any(j <= 0 for j in jobs):
            raise ModelError(f"job loads must be positive: {jobs}")
        if self.domain.n != self.n:
            raise ModelError(f"domain has {self.domain.n} machines, instance has {self.n}")
        if any(v <= 0 for vals in self.domain.per_agent for v in vals):
            raise ModelError("processing times must be positive")
        object.__setattr__(self, "jobs", jobs)

    @property
    def total_load(self) -> Fraction:
        return sum(self.jobs, Fraction(0))

    def to_json(self) -> dict:
        return {"n": self.n, "jobs": [format_rational(j) for j in self.jobs],
                "domain": self.domain.to_json(), "budget": self.budget}


def makespan(solution: Schedule, types: Sequence) -> Fraction:
    if len(solution.loads) != len(types):
        raise ModelError(f"{len(solution.loads)} loads for {len(types)} machines")
    return max(t * load for t, load in zip(types, solution.loads))


def _loads(jobs: tuple, n: int, assignment: tuple) -> tuple:
    loads = [Fraction(0)] * n
    for job, machine in zip(jobs, assignment):
        loads[machine] += job
    return tuple(loads)


def optimal_assignment(instance: SchedulingInstance, types: Sequence) -> Schedule:
    """Minimum-makespan schedule by exhaustive search.

    Job-to-machine vectors are enumerated in lexicographic order and only a
    strictly better makespan replaces the incumbent, so ties resolve to the
    lexicographically smallest vector.
    """
    types = tuple(to_rational(t) for t in types)
    return Schedule(_optimal_loads(instance.jobs, instance.n, instance.budget, types))


@functools.lru_cache(maxsize=1 << 16)
def _optimal_loads(jobs: tuple, n: int, budget: int, types: tuple) -> tuple:
    if len(types) != n:
        raise ModelError(f"{len(types)} types for {n} machines")
    if len(jobs) * math.log(n) > math.log(budget):
        raise BudgetExceeded(f"{n}^{len(jobs)} assignments exceed the budget of {budget}; "
                             "use fewer jobs or machines")
    best, best_loads = None, None
    for assignment in itertools.product(range(n), repeat=len(jobs)):
        loads = _loads(jobs, n, assignment)
        span = max(t * load for t, load in zip(types, loads))
        if best is None or span < best:
            best, best_loads = span, loads
    return best_loads


def machine_allocation(instance: SchedulingInstance, machine: int) -> Callable:
    """``(own type, other types) -> load`` of ``machine`` under the optimal rule."""

    def alloc(own, others):
        types = tuple(others[:machine]) + (own,) + tuple(others[machine:])
        return optimal_assignment(instance, types).loads[machine]

    return alloc


@dataclass(frozen=True)
class MonotoneViolation:
    """The slower report ``t_high`` gets more load than the faster ``t_low``."""

    t_high: Fraction
    t_low: Fraction
    t_other: Fraction
    load_high: Fraction
    load_low: Fraction

    def to_json(self) -> dict:
        return {k: format_rational(getattr(self, k))
                for k in ("t_high", "t_low", "t_other", "load_high", "load_low")}


def check_monotone(allocation: Callable, grid: Sequence, other_grid: Optional[Sequence] = None) -> Verdict:
    """Load must not grow when a machine reports a larger processing time.

    ``allocation(t_own, t_other)`` for the two-machine setting; ``t_other``
    ranges over ``other_grid`` (defaults to ``grid``).
    """
    own = sorted(to_rational(v) for v in grid)
    others = own if other_grid is None else sorted(to_rational(v) for v in other_grid)
    found, pairs = [], 0
    for other in others:
        loads = [allocation(t, other) for t in own]
        for lo in range(len(own)):
            for hi in range(lo + 1, len(own)):
                pairs += 1
                if loads[hi] > loads[lo]:
                    found.append(MonotoneViolation(own[hi], own[lo], other,
                                                   to_rational(loads[hi]), to_rational(loads[lo])))
    return Verdict(Property.MONOTONE, found, {"pairs_checked": pairs})


@dataclass(frozen=True)
class StepAllocation:
    """Two unit jobs on two machines: both below ``t_prime``, one on
    ``[t_prime, t_double_prime]``, none above."""

    t_prime: Fraction
    t_double_prime: Fraction

    def __post_init__(self):
        tp, tpp = to_rational(self.t_prime), to_rational(self.t_double_prime)
        if tp > tpp:
            raise ModelError(f"need t' <= t'', got {tp} > {tpp}")
        object.__setattr__(self, "t_prime", tp)
        object.__setattr__(self, "t_double_prime", tpp)

    def load(self, t) -> int:
        t = to_rational(t)
        if t < self.t_prime:
            return 2
        return 1 if t <= self.t_double_prime else 0

    def as_step_function(self) -> "StepFunction":
        if self.t_prime == self.t_double_prime:
            return StepFunction((self.t_prime,), (2, 0), (1,))
        return StepFunction((self.t_prime, self.t_double_prime), (2, 1, 0), (1, 1))


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant load as a function of the machine's own type.

    ``segments[j]`` holds on the open interval between consecutive
    breakpoints (``segments[0]`` left of the first, ``segments[-1]`` right of
    the last); ``points[j]`` is the value exactly at ``breakpoints[j]``.
    """

    breakpoints: tuple
    segments: tuple
    points: tuple

    def __post_init__(self):
        bps = tuple(to_rational(v) for v in self.breakpoints)
        if any(x >= y for x, y in zip(bps, bps[1:])):
            raise ModelError("breakpoints must be strictly increasing")
        if len(self.segments) != len(bps) + 1 or len(self.points) != len(bps):
            raise ModelError("need len(segments) == len(breakpoints) + 1 == len(points) + 1")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "segments", tuple(to_rational(v) for v in self.segments))
        object.__setattr__(self, "points", tuple(to_rational(v) for v in self.points))

    def __call__(self, t) -> Fraction:
        t = to_rational(t)
        j = bisect.bisect_left(self.breakpoints, t)
        if j < len(self.breakpoints) and self.breakpoints[j] == t:
            return self.points[j]
        return self.segments[j]

    def tail_integral(self, t) -> Fraction:
        """Integral of the load from ``t`` to infinity, as a sum of rectangles."""
        if self.segments[-1] != 0:
            raise ModelError("allocation is not eventually 0; the integral diverges")
        t = to_rational(t)
        total = Fraction(0)
        edges = self.breakpoints
        for j, value in enumerate(self.segments[:-1]):
            right = edges[j]
            left = edges[j - 1] if j > 0 else None
            lo = t if left is None else max(t, left)
            if right > lo:
                total += value * (right - lo)
        return total

    @classmethod
    def from_grid(cls, grid: Sequence, loads: Sequence) -> "StepFunction":
        """Load ``loads[j]`` on ``(grid[j-1], grid[j]]`` and 0 above the top grid point."""
        grid = tuple(to_rational(v) for v in grid)
        loads = tuple(to_rational(v) for v in loads)
        return cls(grid, (loads[0],) + loads[1:] + (Fraction(0),), loads)


def at_payment_step(alloc: StepAllocation, t_i) -> Fraction:
    t_i = to_rational(t_i)
    if t_i < alloc.t_prime:
        return alloc.t_prime + alloc.t_double_prime
    if t_i <= alloc.t_double_prime:
        return alloc.t_double_prime
    return Fraction(0)


def at_payment_integral(alloc, t_i) -> Fraction:
    """Threshold payment ``t f(t) + integral_t^inf f``; ``alloc`` a StepFunction
    or StepAllocation."""
    if isinstance(alloc, StepAllocation):
        alloc = alloc.as_step_function()
    t_i = to_rational(t_i)
    return t_i * alloc(t_i) + alloc.tail_integral(t_i)


def archer_tardos_scheduler(instance: SchedulingInstance) -> DirectMechanism:
    """Optimal schedule with threshold payments computed on each machine's grid."""

    def choose(types):
        return optimal_assignment(instance, types)

    def pay(machine, types, history):
        grid = instance.domain[machine]
        loads = [optimal_assignment(instance, types[:machine] + (g,) + types[machine + 1:])
                 .loads[machine] for g in grid]
        return at_payment_integral(StepFunction.from_grid(grid, loads), types[machine])

    return DirectMechanism(SCHEDULING, instance.n, choose, pay, name="archer-tardos")


def optimal_scheduler(instance: SchedulingInstance) -> DirectMechanism:
    """Optimal schedule, no payments."""
    return DirectMechanism(SCHEDULING, instance.n, lambda types: optimal_assignment(instance, types),
                           name="optimal")


def first_price_scheduler(instance: SchedulingInstance) -> DirectMechanism:
    return first_price(lambda types: optimal_assignment(instance, types), SCHEDULING, instance.n,
                       name="first-price-optimal")


@dataclass(frozen=True)
class DemoReport:
    name: str
    parameters: dict
    values: dict
    consistent: bool

    def to_json(self) -> dict:
        return {"demo": self.name, "parameters": self.parameters, "values": self.values,
                "consistent": self.consistent}


def lb_scenario_scheduling(a, b, k) -> DemoReport:
    """Certify the cost inequalities behind the 2-approximation barrier.

    Two machines, two unit jobs, types restricted to ``{a, b}``.  A
    k-approximate monotone rule has thresholds ``t'`` and ``t''`` within the
    ranges reported here; the truthful agent's worst cost is at least
    ``a - 2ka`` while claiming ``b`` can cost as little as ``a - (2/k) b``.
    """
    a, b, k = to_rational(a), to_rational(b), to_rational(k)
    if not 1 <= k < 2:
        raise ModelError(f"need 1 <= k < 2, got k={k}")
    if not a > 0:
        raise ModelError(f"need a > 0, got a={a}")
    if not b > k * k * a:
        raise ModelError(f"need b > k^2 a = {format_rational(k * k * a)}, got b={b}")
    fmt = format_rational

    def ranges(other):
        return {"t_prime": [fmt(other / (2 * k)), fmt(k / 2 * other)],
                "t_double_prime": [fmt(2 / k * other), fmt(2 * k * other)]}

    truthful = a - 2 * k * a
    deviating = a - 2 / k * b
    margin = truthful - deviating
    if margin <= 0:
        raise ModelError("violation margin is not positive")
    values = {
        "threshold_ranges": {"other_a": ranges(a), "other_b": ranges(b)},
        "truthful_bound": fmt(truthful),
        "deviating_bound": fmt(deviating),
        "margin": fmt(margin),
    }
    return DemoReport("scheduling-lb", {"a": fmt(a), "b": fmt(b), "k": fmt(k)}, values,
                      margin > 0)
