import math

import pytest
from hypothesis import given, strategies as st

from hcmcheck.dsl import load_model, load_scenario
from hcmcheck.expr import ConstraintSystem, VarDecl, ranged
from hcmcheck.interval import Interval
from hcmcheck.model import lower
from hcmcheck.smtlib import (
    ExternalResult,
    MalformedResult,
    UnsupportedSort,
    build_script,
    emit,
    find_external_solver,
    parse_external,
    print_external,
    run_external,
    tokens,
)
from hcmcheck.solver import SolverConfig, solve

from oracles import MODELS, SCENARIOS


def lowered(name):
    return lower(load_model(MODELS / f"{name}.hcm"), load_scenario(MODELS / f"{name}.scn"))


@pytest.mark.parametrize("name,script,_", SCENARIOS)
def test_golden_emission(name, script, _):
    assert tokens(emit(lowered(name))) == tokens(script)
    assert emit(lowered(name)) == script  # byte-equal as well


def test_division_assert():
    assert "(/ (* diet_in@t1 carbs_in@t1) ex@t1)" in emit(lowered("diabetes_exercise"))


def test_empty_system():
    text = emit(ConstraintSystem.build([ranged("x", 0, 1)]))
    assert text == "(set-logic QF_NRA)\n(declare-fun x () Real)\n(assert (and (<= 0 x) (<= x 1)))\n(check-sat)\n(exit)\n"
    s = build_script(ConstraintSystem.build([ranged("x", 0, 1)]))
    assert s.text.count("(check-sat)") == 1


def test_unsupported_sort():
    with pytest.raises(UnsupportedSort):
        v = VarDecl("b")
        object.__setattr__(v, "sort", "Bool")  # bypasses declaration checks on purpose
        emit(ConstraintSystem.build([v]))


@pytest.mark.parametrize("name,_,result", SCENARIOS)
def test_parse_listing_results(name, _, result):
    r = parse_external(result)
    assert r.status == "delta-sat"
    sys = lowered(name)
    assert set(r.ranges) == set(sys.names)
    assert print_external(r) == result


def test_listing_values_exact():
    r = parse_external(SCENARIOS[0][2])
    assert r.delta == 0.01
    assert r.ranges == {"bg@t": Interval(14, 14), "bg@t1": Interval(12, 12), "i@t1": Interval(2.5, 2.5), "err": Interval(0.5, 0.5)}
    r = parse_external(SCENARIOS[2][2])
    assert r.delta == 1 and len(r.ranges) == 7 and r.ranges["ex@t1"] == Interval(0.25, 0.5)


def test_parse_unsat_and_whitespace():
    assert parse_external("\n unsat  \n\n") == ExternalResult("unsat")
    r = parse_external("delta-sat with delta = 0.01   \n\n x : [1, 2]   \n")
    assert r.ranges == {"x": Interval(1, 2)}


@pytest.mark.parametrize("text,line", [("", 1), ("maybe", 1), ("unsat\nx : [1, 2]", 2),
                                       ("delta-sat with delta = 0.1\nx : [2, 1]", 2), ("delta-sat with delta = 0.1\nx = 3", 2)])
def test_malformed(text, line):
    with pytest.raises(MalformedResult) as ei:
        parse_external(text)
    assert ei.value.line == line


finite = st.floats(-1e9, 1e9, allow_nan=False)


@given(st.dictionaries(st.from_regex(r"[a-z][a-z0-9_]{0,5}(@t[0-9]?)?", fullmatch=True), st.tuples(finite, finite), min_size=1, max_size=5),
       st.floats(1e-6, 10))
def test_print_parse_round_trip(ranges, delta):
    r = ExternalResult("delta-sat", delta, {k: Interval(min(a, b), max(a, b)) for k, (a, b) in ranges.items()})
    assert parse_external(print_external(r)) == r


def test_cross_solver_agreement_when_available():
    exe = find_external_solver()
    if exe is None:
        pytest.skip("no external delta-solver configured")
    for name, _, _ in SCENARIOS:
        sys = lowered(name)
        assert run_external(sys, exe).status == solve(sys, SolverConfig(delta=load_scenario(MODELS / f"{name}.scn").delta)).status


def test_run_external_with_stub(tmp_path):
    stub = tmp_path / "fake-solver"
    stub.write_text("#!/bin/sh\nprintf 'delta-sat with delta = 0.01\\nx : [0, 1]\\n'\n")
    stub.chmod(0o755)
    r = run_external(ConstraintSystem.build([ranged("x", 0, 1)]), str(stub), 0.01)
    assert r.status == "delta-sat" and r.ranges == {"x": Interval(0, 1)}
