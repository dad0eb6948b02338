from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ospbench.core import (CostModel, Domain, FacilityLocation, ModelError, Outcome, ProblemKind,
                           Schedule, agent_cost, format_rational, outcome_cost, solution_cost,
                           solution_from_json, to_rational)

F = ProblemKind.FACILITY
S = ProblemKind.SCHEDULING
rationals = st.fractions(min_value=-50, max_value=50, max_denominator=12)


def test_to_rational_accepts_exact_inputs():
    assert to_rational(3) == 3
    assert to_rational("5/2") == Fraction(5, 2)
    assert to_rational(Fraction(1, 3)) == Fraction(1, 3)


@pytest.mark.parametrize("bad", [0.5, True, None, "x"])
def test_to_rational_rejects_inexact(bad):
    with pytest.raises((ModelError, ValueError, TypeError)):
        to_rational(bad)


def test_format_rational():
    assert format_rational(Fraction(4, 2)) == "2"
    assert format_rational(Fraction(-3, 4)) == "-3/4"


def test_domain_validation_and_enumeration():
    d = Domain([[0, 1], [2, 5, 7]])
    assert d.n == 2 and d.size == 6
    assert list(d.profiles())[:3] == [(0, 2), (0, 5), (0, 7)]
    assert d.contains((1, 5)) and not d.contains((1, 6))
    assert Domain([[0], [5, 7]]).is_subdomain_of(d)
    assert Domain.from_json(d.to_json()) == d
    with pytest.raises(ModelError):
        Domain([[1, 0]])
    with pytest.raises(ModelError):
        Domain([[]])


def test_solution_cost_examples():
    assert solution_cost(F, 3, FacilityLocation(5), 0) == 2
    assert solution_cost(F, 5, FacilityLocation(5), 0) == 0
    assert solution_cost(S, 3, Schedule((0, 2)), 1) == 6


def test_solution_cost_kind_mismatch_names_kinds():
    with pytest.raises(ModelError, match="scheduling") as info:
        solution_cost(S, 3, FacilityLocation(5), 0)
    assert "facility" in str(info.value)


def test_agent_cost_examples():
    loc = FacilityLocation(5)
    assert agent_cost(CostModel.MONITORING, 2, 2, loc, -10, F, 0) == 13
    assert agent_cost(CostModel.MONITORING, 2, 9, loc, 0, F, 0) == 4
    assert agent_cost(CostModel.QUASILINEAR, 1, 1, Schedule((1, 1)), 4, S, 0) == -3


def test_outcome_json_round_trip():
    out = Outcome(Schedule((Fraction(3, 2), 0)), (Fraction(-1, 3), 2))
    assert Outcome.from_json(out.to_json()) == out
    assert solution_from_json(FacilityLocation(Fraction(7, 2)).to_json()) == FacilityLocation(Fraction(7, 2))


@given(t=rationals, b=rationals, x=rationals, p=rationals)
def test_monitoring_never_below_quasilinear(t, b, x, p):
    loc = FacilityLocation(x)
    mon = agent_cost(CostModel.MONITORING, t, b, loc, p, F, 0)
    ql = agent_cost(CostModel.QUASILINEAR, t, b, loc, p, F, 0)
    assert mon >= ql
    if t == b:
        assert mon == ql


@given(t=st.fractions(min_value=1, max_value=9, max_denominator=5),
       load=st.fractions(min_value=0, max_value=9, max_denominator=5))
def test_outcome_cost_truthful_first_price_is_zero(t, load):
    sol = Schedule((load, 0))
    out = Outcome(sol, (t * load, 0))
    assert outcome_cost(CostModel.MONITORING, S, 0, t, t, out) == 0
