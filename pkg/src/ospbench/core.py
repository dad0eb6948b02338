"""Exact scalars, type domains, solutions and the two agent cost models.

Every quantity in the package is a :class:`fractions.Fraction`; nothing is
ever rounded, so incentive verdicts never depend on a tolerance.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

Rational = Fraction
Profile = tuple  # tuple[Fraction, ...]


class ModelError(ValueError):
    """Raised when inputs violate a model contract (kind mismatch, bad domain, ...)."""


class ProblemKind(str, enum.Enum):
    FACILITY = "facility"
    SCHEDULING = "scheduling"


class CostModel(str, enum.Enum):
    QUASILINEAR = "quasilinear"
    MONITORING = "monitoring"


def to_rational(value) -> Fraction:
    """Coerce ints, Fractions and decimal/ratio strings to a Fraction.

    Floats are refused: a binary float is almost never the number the
    caller meant.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ModelError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"not a rational: {value!r}") from exc
    raise ModelError(f"not a rational: {value!r} ({type(value).__name__})")


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def as_profile(values: Sequence) -> Profile:
    return tuple(to_rational(v) for v in values)


@dataclass(frozen=True)
class Domain:
    """Finite product domain ``D_1 x ... x D_n``; each factor strictly increasing."""

    per_agent: tuple

    def __post_init__(self):
        if not self.per_agent:
            raise ModelError("domain needs at least one agent")
        cleaned = []
        for i, values in enumerate(self.per_agent):
            vals = tuple(to_rational(v) for v in values)
            if not vals:
                raise ModelError(f"domain of agent {i} is empty")
            if any(x >= y for x, y in zip(vals, vals[1:])):
                raise ModelError(f"domain of agent {i} is not strictly increasing")
            cleaned.append(vals)
        object.__setattr__(self, "per_agent", tuple(cleaned))

    @classmethod
    def uniform(cls, n: int, values: Sequence) -> "Domain":
        vals = sorted(set(to_rational(v) for v in values))
        return cls(tuple(tuple(vals) for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.per_agent)

    def __getitem__(self, i: int) -> tuple:
        return self.per_agent[i]

    @property
    def size(self) -> int:
        total = 1
        for vals in self.per_agent:
            total *= len(vals)
        return total

    def profiles(self) -> Iterator[Profile]:
        """All profiles in lexicographic order."""
        return itertools.product(*self.per_agent)

    def contains(self, profile: Sequence) -> bool:
        return len(profile) == self.n and all(
            v in set(vals) for v, vals in zip(profile, self.per_agent)
        )

    def is_subdomain_of(self, other: "Domain") -> bool:
        return self.n == other.n and all(
            set(mine) <= set(theirs)
            for mine, theirs in zip(self.per_agent, other.per_agent)
        )

    def to_json(self) -> list:
        return [[format_rational(v) for v in vals] for vals in self.per_agent]

    @classmethod
    def from_json(cls, data) -> "Domain":
        return cls(tuple(tuple(to_rational(v) for v in vals) for vals in data))


@dataclass(frozen=True)
class FacilityLocation:
    x: Fraction

    kind = ProblemKind.FACILITY

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "x": format_rational(self.x)}


@dataclass(frozen=True)
class Schedule:
    loads: tuple

    kind = ProblemKind.SCHEDULING

    def __post_init__(self):
        loads = tuple(to_rational(v) for v in self.loads)
        if any(v < 0 for v in loads):
            raise ModelError(f"negative load in schedule {loads}")
        object.__setattr__(self, "loads", loads)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "loads": [format_rational(v) for v in self.loads]}


Solution = Union[FacilityLocation, Schedule]


def solution_from_json(data: dict) -> Solution:
    kind = data.get("kind")
    if kind == ProblemKind.FACILITY.value:
        return FacilityLocation(to_rational(data["x"]))
    if kind == ProblemKind.SCHEDULING.value:
        return Schedule(tuple(to_rational(v) for v in data["loads"]))
    raise ModelError(f"unknown solution kind {kind!r}")


@dataclass(frozen=True)
class Outcome:
    """A solution together with payments from the mechanism to each agent."""

    solution: Solution
    payments: tuple

    def __post_init__(self):
        object.__setattr__(self, "payments", tuple(to_rational(p) for p in self.payments))

    def to_json(self) -> dict:
        return {
            "solution": self.solution.to_json(),
            "payments": [format_rational(p) for p in self.payments],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Outcome":
        return cls(solution_from_json(data["solution"]), tuple(data["payments"]))


def solution_cost(problem: ProblemKind, agent_type: Fraction, solution: Solution,
                  agent_index: int) -> Fraction:
    """Cost ``t(X)`` an agent of type ``agent_type`` incurs for ``solution``."""
    problem = ProblemKind(problem)
    if solution.kind is not problem:
        raise ModelError(
            f"solution kind mismatch: expected {problem.value}, got {solution.kind.value}"
        )
    if problem is ProblemKind.FACILITY:
        return abs(agent_type - solution.x)
    if not 0 <= agent_index < len(solution.loads):
        raise ModelError(f"agent index {agent_index} out of range for {len(solution.loads)} machines")
    return agent_type * solution.loads[agent_index]


def agent_cost(model: CostModel, true_type: Fraction, declared_type: Fraction,
               solution: Solution, payment: Fraction, problem: ProblemKind,
               agent_index: int) -> Fraction:
    """Realized cost of an agent, net of the payment it receives.

    Under monitoring the declared type is a floor on the incurred cost, so
    the agent pays ``max(t(X), b(X))`` instead of ``t(X)``.
    """
    true_cost = solution_cost(problem, true_type, solution, agent_index)
    if CostModel(model) is CostModel.MONITORING and declared_type != true_type:
        declared_cost = solution_cost(problem, declared_type, solution, agent_index)
        true_cost = max(true_cost, declared_cost)
    return true_cost - payment


def outcome_cost(model: CostModel, problem: ProblemKind, agent: int, true_type: Fraction,
                 declared_type: Fraction, outcome: Outcome) -> Fraction:
    return agent_cost(model, true_type, declared_type, outcome.solution,
                      outcome.payments[agent], problem, agent)
