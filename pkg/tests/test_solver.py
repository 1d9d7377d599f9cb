import random

import pytest
from hypothesis import given, settings, strategies as st

from hcmcheck.expr import AtomicConstraint, Clause, ConstraintSystem, Constant, Variable, VarDecl, ranged
from hcmcheck.interval import Interval
from hcmcheck.solver import (
    BudgetMisconfigured,
    DeltaSat,
    SolverConfig,
    SortViolation,
    UnboundedDomain,
    Unknown,
    Unsat,
    certify,
    solve,
    solve_enumerate,
)

from oracles import grid_sat, random_system

x, y = Variable("x"), Variable("y")


def system(*atoms, doms=(("x", 0, 1),)):
    return ConstraintSystem.build([ranged(n, lo, hi) for n, lo, hi in doms], [Clause.of(a) for a in atoms])


def test_trivial_sat_and_unsat():
    r = solve(system(AtomicConstraint(x, ">=", Constant("0.5"))))
    assert isinstance(r, DeltaSat) and r.certificate_point["x"] >= 0.49
    assert isinstance(solve(system(AtomicConstraint(x, ">", Constant("2")))), Unsat)


def test_x_squared_equals_two():
    s = system(AtomicConstraint(x * x, "=", Constant("2")), doms=(("x", 0, 2),))
    r = solve(s, SolverConfig(delta=0.001))
    assert isinstance(r, DeltaSat)
    assert abs(r.certificate_point["x"] ** 2 - 2) <= 0.001
    assert certify(s, r.certificate_point, 0.001)


def test_x_squared_negative_is_unsat():
    s = system(AtomicConstraint(x * x, "<", Constant("-1")), doms=(("x", -3, 3),))
    assert isinstance(solve(s), Unsat)


def test_disjunction():
    s = ConstraintSystem.build(
        [ranged("x", 0, 10)],
        [Clause.of(AtomicConstraint(x, "<", Constant("1")), AtomicConstraint(x, ">", Constant("9"))),
         Clause.of(AtomicConstraint(x, ">=", Constant("5")))],
    )
    r = solve(s)
    assert isinstance(r, DeltaSat) and r.certificate_point["x"] >= 9 - 0.01


def test_unbounded_domain_rejected():
    s = ConstraintSystem.build([VarDecl("x")], [Clause.of(AtomicConstraint(x, ">", Constant("0")))])
    with pytest.raises(UnboundedDomain):
        solve(s)


def test_budget_validation():
    with pytest.raises(BudgetMisconfigured):
        SolverConfig(delta=0)
    with pytest.raises(BudgetMisconfigured):
        SolverConfig(budget=0)
    assert SolverConfig(delta=0.01).precision == pytest.approx(0.001)


def test_tiny_budget_gives_unknown():
    s = system(AtomicConstraint(x * y - y * x + x * x * y, "=", Constant("0.123456")), doms=(("x", -1, 1), ("y", -1, 1)))
    r = solve(s, SolverConfig(delta=1e-9, precision=1e-12, budget=1))
    assert isinstance(r, (Unknown, DeltaSat))


def test_certify_checks_sorts_and_names():
    s = ConstraintSystem.build([ranged("n", 0, 3, sort="Int")])
    with pytest.raises(SortViolation):
        certify(s, {"n": 1.5}, 0.01)
    from hcmcheck.expr import UnboundVariable

    with pytest.raises(UnboundVariable):
        certify(s, {}, 0.01)


def test_determinism():
    rng = random.Random(11)
    for _ in range(20):
        s = random_system(rng)
        assert solve(s) == solve(s)


def test_delta_monotone():
    rng = random.Random(12)
    for _ in range(30):
        s = random_system(rng)
        if isinstance(solve(s, SolverConfig(delta=0.01)), DeltaSat):
            assert isinstance(solve(s, SolverConfig(delta=0.1)), DeltaSat)


def test_parallel_agrees_with_sequential():
    rng = random.Random(13)
    systems = [random_system(rng) for _ in range(6)]
    for s in systems:
        a = solve(s, SolverConfig())
        b = solve(s, SolverConfig(parallel=True, workers=2))
        assert a.status == b.status
        if isinstance(b, DeltaSat):
            assert certify(s, b.certificate_point, 0.01)


def test_unsat_grid_oracle():
    rng = random.Random(14)
    for _ in range(40):
        s = random_system(rng)
        r = solve(s)
        if isinstance(r, Unsat):
            assert grid_sat(s, 10**5) is None
        elif isinstance(r, DeltaSat):
            assert certify(s, r.certificate_point, 0.01)


def test_enumerate_separated_points():
    s = system(AtomicConstraint(x + y, "=", Constant("1")), doms=(("x", 0, 1), ("y", 0, 1)))
    rs = solve_enumerate(s, SolverConfig(), 3, 0.2)
    assert len(rs) == 3
    pts = [r.certificate_point for r in rs]
    for i in range(3):
        assert certify(s, pts[i], 0.01)
        for j in range(i):
            assert max(abs(pts[i][n] - pts[j][n]) for n in "xy") >= 0.2


def test_enumerate_unsat_returns_verdict():
    s = system(AtomicConstraint(x, ">", Constant("2")))
    assert [r.status for r in solve_enumerate(s, SolverConfig(), 3, 0.1)] == ["unsat"]


@settings(max_examples=60, deadline=None)
@given(st.integers(-5, 5), st.integers(1, 5), st.integers(-20, 20))
def test_linear_oracle(a, b, c):
    # a*x + b*y = c over [-3,3]^2 is satisfiable iff |c| <= 3(|a|+|b|)
    s = system(AtomicConstraint(Constant(str(a)) * x + Constant(str(b)) * y, "=", Constant(str(c))),
               doms=(("x", -3, 3), ("y", -3, 3)))
    r = solve(s, SolverConfig(delta=0.01))
    feasible = abs(c) <= 3 * (abs(a) + abs(b))
    if feasible:
        assert isinstance(r, DeltaSat)
    elif isinstance(r, DeltaSat):
        assert abs(c) - 3 * (abs(a) + abs(b)) <= 0.01
    if isinstance(r, DeltaSat):
        assert certify(s, r.certificate_point, 0.01)
