"""Independent oracles and generators shared by the test suite.

Nothing here calls the solver: grid oracles evaluate constraints with numpy,
exact evaluation uses Fractions, and rule-table oracles work in integer
milli-units so that no float comparison is involved.
"""

from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import numpy as np

from hcmcheck.expr import (
    Add,
    AtomicConstraint,
    Clause,
    ConstraintSystem,
    Constant,
    Div,
    Mul,
    Neg,
    Sub,
    Variable,
    ranged,
)
from hcmcheck.model import HealthModel, Rule

MODELS = Path(__file__).resolve().parents[1] / "src" / "hcmcheck" / "models"

# Frozen expected values, copied from the reference listings.
LISTING_1 = """(set-logic QF_NRA)
(declare-fun bg@t () Int)
(declare-fun bg@t1 () Int)
(declare-fun i@t1 () Real)
(declare-fun err () Real)
(assert (and (= bg@t1 12) (= bg@t 14)))
(assert (= err 0.5))
(assert (and (<= 1 i@t1) (<= i@t1 5)))
(assert (= bg@t1 (- bg@t (- i@t1 err))))
(check-sat)
(exit)
"""

LISTING_2 = """delta-sat with delta = 0.01
bg@t : [14, 14]
bg@t1 : [12, 12]
i@t1 : [2.5, 2.5]
err : [0.5, 0.5]
"""

LISTING_3 = """(set-logic QF_NRA)
(declare-fun bg@t () Int)
(declare-fun bg@t1 () Int)
(declare-fun i@t1 () Real)
(declare-fun diet_in@t1 () Real)
(declare-fun carbs_in@t1 () Real)
(declare-fun err () Real)
(assert (and (= bg@t1 12) (= bg@t 14)))
(assert (and (<= -0.5 err) (<= err 0.5)))
(assert (= err 0.5))
(assert (= carbs_in@t1 0.5))
(assert (and (<= 0 i@t1) (<= i@t1 3)))
(assert (and (<= 0 diet_in@t1) (<= diet_in@t1 3)))
(assert (and (<= 0 carbs_in@t1) (<= carbs_in@t1 3)))
(assert (= bg@t1 (- (+ bg@t (* diet_in@t1 carbs_in@t1)) (- i@t1 err))))
(check-sat)
(exit)
"""

LISTING_4 = """delta-sat with delta = 1
bg@t : [14, 14]
bg@t1 : [12, 12]
i@t1 : [2.5, 3]
diet_in@t1 : [0, 1]
carbs_in@t1 : [0.5, 0.5]
err : [0.5, 0.5]
"""

LISTING_5 = """(set-logic QF_NRA)
(declare-fun bg@t () Int)
(declare-fun bg@t1 () Int)
(declare-fun i@t1 () Real)
(declare-fun diet_in@t1 () Real)
(declare-fun carbs_in@t1 () Real)
(declare-fun ex@t1 () Real)
(declare-fun err () Real)
(assert (and (= bg@t1 12) (= bg@t 14)))
(assert (and (<= -0.5 err) (<= err 0.5)))
(assert (= err 0.5))
(assert (and (<= 0 ex@t1) (<= ex@t1 0.5)))
(assert (= carbs_in@t1 0.5))
(assert (and (<= 0 i@t1) (<= i@t1 3)))
(assert (and (<= 0 diet_in@t1) (<= diet_in@t1 3)))
(assert (and (<= 0 carbs_in@t1) (<= carbs_in@t1 3)))
(assert (= bg@t1 (- (+ bg@t (/ (* diet_in@t1 carbs_in@t1) ex@t1)) (- i@t1 err))))
(check-sat)
(exit)
"""

LISTING_6 = """delta-sat with delta = 1
bg@t : [14, 14]
bg@t1 : [12, 12]
i@t1 : [2.5, 2.75]
diet_in@t1 : [0, 0.25]
carbs_in@t1 : [0.5, 0.5]
ex@t1 : [0.25, 0.5]
err : [0.5, 0.5]
"""

SCENARIOS = (
    ("diabetes_medication", LISTING_1, LISTING_2),
    ("diabetes_diet", LISTING_3, LISTING_4),
    ("diabetes_exercise", LISTING_5, LISTING_6),
)


# -- exact and vectorised evaluation ------------------------------------------------

def exact_value(e, point) -> Fraction:
    """Exact rational value of ``e``; raises ZeroDivisionError on a zero divisor."""
    if isinstance(e, Constant):
        return Fraction(e.text)
    if isinstance(e, Variable):
        return Fraction(point[e.name])
    if isinstance(e, Neg):
        return -exact_value(e.arg, point)
    a, b = exact_value(e.left, point), exact_value(e.right, point)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    return a / b


def np_value(e, cols: dict):
    if isinstance(e, Constant):
        return float(e.text)
    if isinstance(e, Variable):
        return cols[e.name]
    if isinstance(e, Neg):
        return -np_value(e.arg, cols)
    a, b = np_value(e.left, cols), np_value(e.right, cols)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    with np.errstate(divide="ignore", invalid="ignore"):
        return a / b


def np_holds(a: AtomicConstraint, cols: dict):
    L, R = np_value(a.lhs, cols), np_value(a.rhs, cols)
    return {"=": np.equal, "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal}[a.rel](L, R)


def grid_points(sys: ConstraintSystem, total: int = 10**6) -> dict:
    """A tensor grid over the declared domains with at most ``total`` points."""
    d = len(sys.vars)
    per = max(2, int(round(total ** (1.0 / d))))
    while per ** d > total:
        per -= 1
    axes = []
    for v in sys.vars:
        lo, hi = v.domain.lo, v.domain.hi
        if v.sort == "Int":
            ax = np.arange(np.ceil(lo), np.floor(hi) + 1)
            if len(ax) > per:
                ax = np.unique(np.round(np.linspace(np.ceil(lo), np.floor(hi), per)))
        else:
            ax = np.linspace(lo, hi, per)
        axes.append(ax)
    mesh = np.meshgrid(*axes, indexing="ij")
    return {v.name: m.ravel() for v, m in zip(sys.vars, mesh)}


def grid_sat(sys: ConstraintSystem, total: int = 10**6):
    """Index of a grid point satisfying every clause exactly, or None."""
    cols = grid_points(sys, total)
    n = len(next(iter(cols.values())))
    ok = np.ones(n, dtype=bool)
    for c in sys.clauses:
        any_ = np.zeros(n, dtype=bool)
        for a in c.disjuncts:
            any_ |= np.asarray(np_holds(a, cols), dtype=bool)
        ok &= any_
        if not ok.any():
            return None
    idx = int(np.argmax(ok))
    return {k: float(v[idx]) for k, v in cols.items()}


# -- random systems --------------------------------------------------------------------

_COEFFS = ("-2", "-1", "-0.5", "0.5", "1", "2", "3")
_RELS = ("<=", "<", ">=", ">", "=")


def random_poly(rng: random.Random, names, max_degree: int = 3, max_terms: int = 3):
    terms = []
    for _ in range(rng.randint(1, max_terms)):
        deg = rng.randint(1, max_degree)
        t = Constant(rng.choice(_COEFFS))
        for _ in range(deg):
            t = Mul(t, Variable(rng.choice(names)))
        terms.append(t)
    e = terms[0]
    for t in terms[1:]:
        e = Add(e, t) if rng.random() < 0.6 else Sub(e, t)
    return e


def random_system(rng: random.Random) -> ConstraintSystem:
    """<= 4 variables, <= 5 atoms, polynomial degree <= 3, bounded boxes.

    Equalities only appear over Int variables with integer coefficients, where
    an exact grid hit is possible, so the grid oracle stays meaningful.
    """
    n = rng.randint(1, 4)
    vars_ = []
    for i in range(n):
        lo = rng.choice((-4, -3, -2, -1, 0))
        hi = lo + rng.choice((1, 2, 3, 4, 6))
        sort = "Int" if rng.random() < 0.25 else "Real"
        vars_.append(ranged(f"x{i}", str(lo), str(hi), sort=sort))
    names = [v.name for v in vars_]
    ints = [v.name for v in vars_ if v.sort == "Int"]
    clauses = []
    for _ in range(rng.randint(1, 5)):
        if ints and rng.random() < 0.2:
            lhs = Variable(rng.choice(ints))
            rhs = Add(Mul(Constant(str(rng.randint(-2, 2))), Variable(rng.choice(ints))), Constant(str(rng.randint(-3, 3))))
            atom = AtomicConstraint(lhs, "=", rhs)
        else:
            rel = rng.choice(_RELS[:4])
            atom = AtomicConstraint(random_poly(rng, names), rel, Constant(rng.choice(("-3", "-1", "0", "0.5", "1", "4", "10"))))
        clauses.append(Clause.of(atom))
    return ConstraintSystem.build(vars_, clauses)


def random_expr(rng: random.Random, names, depth: int = 3):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Variable(rng.choice(names))
        return Constant(rng.choice(("0.1", "-1.5", "2", "3.25", "0", "-0.3", "7")))
    k = rng.random()
    if k < 0.1:
        return Neg(random_expr(rng, names, depth - 1))
    cls = rng.choice((Add, Sub, Mul, Mul, Div))
    return cls(random_expr(rng, names, depth - 1), random_expr(rng, names, depth - 1))


# -- random 1-D rule tables --------------------------------------------------------------

def random_table(rng: random.Random):
    """A 1-D rule table over gl in [0, W] with endpoints on a 0.1 grid.

    Returns (model, rules) where rules are (lo, hi, lo_closed, hi_closed) in tenths.
    """
    W = rng.choice((5, 10, 20, 50, 100)) * 10  # tenths
    rules = []
    for _ in range(rng.randint(1, 4)):
        a, b = sorted(rng.sample(range(0, W + 1), 2))
        rules.append((a, b, rng.random() < 0.5, rng.random() < 0.5))
    if rng.random() < 0.3:  # encourage exact tilings
        cuts = sorted(rng.sample(range(1, W), rng.randint(1, 3)))
        pts = [0] + cuts + [W]
        rules = [(pts[i], pts[i + 1], True, i == len(pts) - 2) for i in range(len(pts) - 1)]
    gl = ranged("gl", "0", _tenths(W))
    model_rules = []
    for i, (a, b, lc, hc) in enumerate(rules):
        g = (AtomicConstraint(Constant(_tenths(a)), "<=" if lc else "<", Variable("gl")),
             AtomicConstraint(Variable("gl"), "<=" if hc else "<", Constant(_tenths(b))))
        model_rules.append(Rule(f"r{i}", g))
    return HealthModel("table", (gl,), (), (), tuple(model_rules)), rules, W


def _tenths(t: int) -> str:
    q, r = divmod(t, 10)
    return f"{q}.{r}" if r else str(q)


def table_oracle(rules, W: int):
    """(gap exists, overlap exists) on the 10^-3 grid, in integer milli-units."""
    n = W * 100 + 1
    xs = np.arange(n)
    count = np.zeros(n, dtype=int)
    for a, b, lc, hc in rules:
        lo, hi = a * 100, b * 100
        m = (xs >= lo) if lc else (xs > lo)
        m &= (xs <= hi) if hc else (xs < hi)
        count += m
    return bool((count == 0).any()), bool((count >= 2).any())
