"""Facility location on a line: median rule, money-charging mechanisms, bounds.

Agents' types are positions in ``[a, b]``; the cost of a location ``x`` is the
distance to it.  The mechanisms here all return :class:`DirectMechanism`
objects that can be compiled into query trees and fed to the verifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .core import (Domain, FacilityLocation, ModelError, Outcome, ProblemKind, format_rational,
                   to_rational)
from .mechanisms import DirectMechanism, first_price

FACILITY = ProblemKind.FACILITY


@dataclass(frozen=True)
class FacilityInstance:
    n: int
    a: Fraction
    b: Fraction
    grid: Domain

    def __post_init__(self):
        a, b = to_rational(self.a), to_rational(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a >= b:
            raise ModelError(f"interval [{a}, {b}] is empty or degenerate")
        if self.grid.n != self.n:
            raise ModelError(f"grid has {self.grid.n} agents, instance has {self.n}")
        for i, vals in enumerate(self.grid.per_agent):
            if vals[0] < a or vals[-1] > b:
                raise ModelError(f"grid values of agent {i} leave [{a}, {b}]")

    @classmethod
    def uniform(cls, n: int, values: Sequence, a=None, b=None) -> "FacilityInstance":
        """Same grid for every agent; the interval defaults to the grid's hull."""
        grid = Domain.uniform(n, values)
        return cls(n, grid[0][0] if a is None else a, grid[0][-1] if b is None else b, grid)

    @classmethod
    def lattice(cls, n: int, a, b, delta) -> "FacilityInstance":
        """Grid ``{a, a+delta, ..., b}``; ``delta`` must divide ``b - a``."""
        a, b, delta = to_rational(a), to_rational(b), to_rational(delta)
        steps = (b - a) / delta
        if delta <= 0 or steps.denominator != 1:
            raise ModelError(f"step {delta} does not divide [{a}, {b}]")
        return cls.uniform(n, [a + k * delta for k in range(int(steps) + 1)], a, b)

    def to_json(self) -> dict:
        return {"n": self.n, "a": format_rational(self.a), "b": format_rational(self.b),
                "grid": self.grid.to_json()}


def median_location(profile: Sequence) -> Fraction:
    """Leftmost median: the ceil(n/2)-th smallest declared position."""
    if not profile:
        raise ModelError("median of an empty profile")
    ordered = sorted(profile)
    return ordered[math.ceil(len(ordered) / 2) - 1]


def social_cost(x, profile: Sequence) -> Fraction:
    return sum((abs(v - x) for v in profile), Fraction(0))


def optimal_social_cost(profile: Sequence) -> tuple:
    x = median_location(profile)
    return x, social_cost(x, profile)


def median_choice(profile: tuple) -> FacilityLocation:
    return FacilityLocation(median_location(profile))


def median_mechanism(instance: FacilityInstance) -> DirectMechanism:
    """The optimal rule without money."""
    return DirectMechanism(FACILITY, instance.n, median_choice, name="median")


def first_price_median(instance: FacilityInstance) -> DirectMechanism:
    return first_price(median_choice, FACILITY, instance.n, name="first-price-median")


def interval_mechanism(instance: FacilityInstance, query_order=None) -> DirectMechanism:
    """Median location; each agent is charged ``b - a`` less its distance."""
    width = instance.b - instance.a

    def pay(agent, profile, history):
        return abs(profile[agent] - median_location(profile)) - width

    return DirectMechanism(FACILITY, instance.n, median_choice, pay, query_order, "interval")


@dataclass(frozen=True)
class OimBounds:
    ell: int
    r: int
    L: Optional[Fraction]
    R: Optional[Fraction]
    A: Optional[Fraction]
    B: Optional[Fraction]
    m: Fraction
    zero_payment: bool

    @property
    def crossed(self) -> bool:
        """True when the left bound lies right of the right bound."""
        return self.L is not None and self.R is not None and self.L > self.R

    def to_json(self) -> dict:
        fmt = lambda q: None if q is None else format_rational(q)
        return {"ell": self.ell, "r": self.r, "L": fmt(self.L), "R": fmt(self.R),
                "A": fmt(self.A), "B": fmt(self.B), "m": fmt(self.m),
                "zero_payment": self.zero_payment, "crossed": self.crossed}


def oim_lr(history: Sequence, n: int, instance: FacilityInstance) -> tuple:
    """``(ell, r, L, R)``: the extreme medians still reachable after ``history``.

    With ``s`` the sorted history indexed from 1, ``L = s[ell]`` and
    ``R = s[r]``; an index outside ``1..k`` means ``a`` for L and ``b`` for R.
    """
    k = len(history)
    if k >= n:
        raise ModelError(f"an agent cannot be preceded by k={k} of n={n} agents")
    s = sorted(to_rational(v) for v in history)
    half = math.ceil(n / 2)
    ell = half + k - n + 1
    r = half - 1
    L = s[ell - 1] if 1 <= ell <= k else instance.a
    R = s[r - 1] if 1 <= r <= k else instance.b
    return ell, r, L, R


def oim_bounds(history: Sequence, k: int, n: int, instance: FacilityInstance) -> OimBounds:
    """Payment bounds for an agent queried after ``k`` others with declarations ``history``.

    The zero-payment shortcut applies when the declarations at positions
    ``ell - 1`` and ``r + 1`` of the sorted history coincide.
    """
    if len(history) != k:
        raise ModelError(f"history has {len(history)} entries, expected k={k}")
    s = sorted(to_rational(v) for v in history)
    ell, r, L, R = oim_lr(s, n, instance)

    def at(j):
        return s[j - 1] if 1 <= j <= k else None

    if ell > 1 and r < k and at(ell - 1) == at(r + 1):
        return OimBounds(ell, r, None, None, None, None, Fraction(0), True)

    a, b = instance.a, instance.b
    mid = (a + b) / 2
    if L == R:
        A, B = L, R
    else:
        A = 2 * L - b if R > L > mid else a
        B = 2 * R - a if L < R < mid else b
    m = max(R - A, B - L)
    return OimBounds(ell, r, L, R, A, B, m, False)


def oim_payment(bounds: OimBounds, x_i: Fraction, location: Fraction) -> Fraction:
    if bounds.zero_payment:
        return Fraction(0)
    pay = abs(x_i - location) - bounds.m
    if x_i < bounds.A:
        pay -= bounds.A - x_i
    elif x_i > bounds.B:
        pay -= x_i - bounds.B
    return pay


def oim(instance: FacilityInstance, query_order=None) -> DirectMechanism:
    """Optimized interval mechanism: charges shrink with what earlier answers reveal."""

    def pay(agent, profile, history):
        bounds = oim_bounds(history, len(history), instance.n, instance)
        return oim_payment(bounds, profile[agent], median_location(profile))

    return DirectMechanism(FACILITY, instance.n, median_choice, pay, query_order, "oim")


def oim_trace(instance: FacilityInstance, profile: Sequence, query_order=None) -> list:
    """Per-agent bounds and payment, in query order."""
    mech = oim(instance, query_order)
    profile = tuple(to_rational(v) for v in profile)
    location = median_location(profile)
    rows = []
    for agent in mech.query_order:
        history = mech.history(agent, profile)
        bounds = oim_bounds(history, len(history), instance.n, instance)
        payment = oim_payment(bounds, profile[agent], location)
        rows.append({"agent": agent, "position": format_rational(profile[agent]),
                     "history": [format_rational(v) for v in history],
                     "bounds": bounds.to_json(), "payment": format_rational(payment),
                     "charge": format_rational(-payment)})
    return rows


def dictatorship(instance: FacilityInstance, dictator: int) -> DirectMechanism:
    """Put the facility where the dictator says; nobody else is asked."""
    if not 0 <= dictator < instance.n:
        raise ModelError(f"dictator {dictator} out of range for {instance.n} agents")

    def choose(profile):
        return FacilityLocation(profile[dictator])

    return DirectMechanism(FACILITY, instance.n, choose, query_order=(dictator,),
                           name="dictatorship", params={"dictator": dictator})


@dataclass(frozen=True)
class ApproximationResult:
    ratio: Optional[Fraction]  # None when unbounded
    witness: Optional[tuple]
    profiles: int

    @property
    def unbounded(self) -> bool:
        return self.ratio is None and self.witness is not None

    def to_json(self) -> dict:
        return {
            "ratio": "unbounded" if self.ratio is None else format_rational(self.ratio),
            "witness": None if self.witness is None else [format_rational(v) for v in self.witness],
            "profiles": self.profiles,
        }


def _location(result) -> Fraction:
    if isinstance(result, Outcome):
        result = result.solution
    if isinstance(result, FacilityLocation):
        return result.x
    return to_rational(result)


def approximation_ratio(mechanism, instance: FacilityInstance) -> ApproximationResult:
    """Worst ratio of mechanism social cost to the optimum over every grid profile.

    Ties go to the lexicographically smallest profile.  A profile whose
    optimum is 0 but whose mechanism cost is positive makes the ratio
    unbounded, with that profile as witness.
    """
    best, witness, count = None, None, 0
    for profile in instance.grid.profiles():
        count += 1
        got = social_cost(_location(mechanism(profile)), profile)
        _, opt = optimal_social_cost(profile)
        if opt == 0:
            if got > 0:
                return ApproximationResult(None, profile, count)
            continue
        ratio = got / opt
        if best is None or ratio > best:
            best, witness = ratio, profile
    return ApproximationResult(Fraction(1) if best is None else best, witness, count)


def cond_fl_interval(x, alpha, k, n: int) -> tuple:
    """Locations a k-approximate rule may pick when one agent sits at ``x``
    and the other ``n - 1`` at ``x - alpha``."""
    if n < 3:
        raise ModelError("the admissible interval needs n >= 3")
    x, alpha, k = to_rational(x), to_rational(alpha), to_rational(k)
    if alpha <= 0 or k < 1:
        raise ModelError("need alpha > 0 and k >= 1")
    lo = x - alpha * (1 + (k - 1) / n)
    hi = x - alpha * (1 - (k - 1) / (n - 2))
    return lo, hi


def cond_fl_profile(x, alpha, n: int, i: int = 0) -> tuple:
    x, alpha = to_rational(x), to_rational(alpha)
    return tuple(x if j == i else x - alpha for j in range(n))


def lb_witness_profiles(c, delta, b_hi, n: int, i: int) -> tuple:
    """The two profiles pitting agent ``i`` at ``c`` / ``c + delta`` against the rest."""
    c, delta, b_hi = to_rational(c), to_rational(delta), to_rational(b_hi)
    if c + delta > b_hi:
        raise ModelError("need c + delta <= b")
    if not 0 <= i < n:
        raise ModelError(f"agent {i} out of range")
    x = tuple(c + delta if k == i else c for k in range(n))
    y = tuple(c if k == i else b_hi for k in range(n))
    return x, y


def lb_grid_step_ok(delta, epsilon, n: int, a, b) -> bool:
    """Whether ``delta`` is fine enough for the (n-1-epsilon) lower-bound argument."""
    delta, epsilon = to_rational(delta), to_rational(epsilon)
    return n > 2 and delta <= epsilon / (n - 2) * (to_rational(b) - to_rational(a)) / 2


def frugality_profile(n: int, a, b, delta) -> tuple:
    """First ``(n+1)/2`` agents at ``b - delta``, the rest at ``a`` (odd ``n``)."""
    if n % 2 == 0:
        raise ModelError("the frugality instance needs an odd number of agents")
    a, b, delta = to_rational(a), to_rational(b), to_rational(delta)
    return tuple(b - delta if i < (n + 1) // 2 else a for i in range(n))
