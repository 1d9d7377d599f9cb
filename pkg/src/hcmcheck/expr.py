"""Expression and constraint IR shared by the model front-end, the solver and the SMT-LIB writer."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping, Union

from .interval import Interval

RELATIONS = ("=", "<=", "<", ">=", ">")
LEVELS = ("interface", "mechanical", "biological", "environmental", "none")
SORTS = ("Int", "Real")


class ExprError(Exception):
    pass


class UnboundVariable(ExprError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound variable {self.name!r}"


class DivisionByZero(ExprError, ZeroDivisionError):
    def __init__(self, location: str):
        super().__init__(location)
        self.location = location

    def __str__(self) -> str:
        return f"division by zero in {self.location}"


def normalize_decimal(text: Union[str, int, float, Decimal]) -> str:
    """Canonical shortest decimal text for a literal: ``"1.50"`` -> ``"1.5"``, ``"3.0"`` -> ``"3"``."""
    if isinstance(text, float):
        text = repr(text)
    try:
        d = Decimal(str(text))
    except InvalidOperation:
        raise ExprError(f"not a decimal literal: {text!r}") from None
    if not d.is_finite():
        raise ExprError(f"not a finite literal: {text!r}")
    out = format(d.normalize(), "f")
    if out == "-0":
        out = "0"
    return out


class Expr:
    """Base class for immutable expression nodes.

    Arithmetic operators build trees, so ``Variable("x") * 2 - 1`` works in tests
    and scripts.
    """

    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)


@dataclass(frozen=True, eq=True)
class Constant(Expr):
    text: str

    def __post_init__(self):
        object.__setattr__(self, "text", normalize_decimal(self.text))

    @property
    def value(self) -> float:
        return float(Decimal(self.text))

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True, eq=True)
class Variable(Expr):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ExprError("variable name must be nonempty")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    def __str__(self) -> str:
        return f"-({self.arg})"


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    left: Expr
    right: Expr
    symbol = "?"

    def __str__(self) -> str:
        return f"({self.left} {self.symbol} {self.right})"


@dataclass(frozen=True, eq=True)
class Add(_Binary):
    symbol = "+"


@dataclass(frozen=True, eq=True)
class Sub(_Binary):
    symbol = "-"


@dataclass(frozen=True, eq=True)
class Mul(_Binary):
    symbol = "*"


@dataclass(frozen=True, eq=True)
class Div(_Binary):
    symbol = "/"


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, Decimal)):
        return Constant(normalize_decimal(x))
    if isinstance(x, str):
        try:
            return Constant(x)
        except ExprError:
            return Variable(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def eval_expr(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate ``e`` in double precision at ``point``."""
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        try:
            return float(point[e.name])
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Neg):
        return -eval_expr(e.arg, point)
    a = eval_expr(e.left, point)
    b = eval_expr(e.right, point)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if isinstance(e, Div):
        if b == 0.0:
            raise DivisionByZero(str(e))
        return a / b
    raise TypeError(f"unknown node {type(e).__name__}")


def free_vars(e: Expr) -> frozenset:
    out: set[str] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Variable):
            out.add(n.name)
        elif isinstance(n, Neg):
            stack.append(n.arg)
        elif isinstance(n, _Binary):
            stack.append(n.left)
            stack.append(n.right)
    return frozenset(out)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (used for renaming during unrolling)."""
    if isinstance(e, Variable):
        return mapping.get(e.name, e)
    if isinstance(e, Constant):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))


def depth(e: Expr) -> int:
    if isinstance(e, (Constant, Variable)):
        return 1
    if isinstance(e, Neg):
        return 1 + depth(e.arg)
    return 1 + max(depth(e.left), depth(e.right))


@dataclass(frozen=True)
class AtomicConstraint:
    lhs: Expr
    rel: str
    rhs: Expr

    def __post_init__(self):
        if self.rel == "==":
            object.__setattr__(self, "rel", "=")
        if self.rel not in RELATIONS:
            raise ExprError(f"unknown relation {self.rel!r}")

    @property
    def strict(self) -> bool:
        return self.rel in ("<", ">")

    def canonical(self) -> tuple[Expr, str]:
        """``lhs - rhs rel 0``."""
        return Sub(self.lhs, self.rhs), self.rel

    def free_vars(self) -> frozenset:
        return free_vars(self.lhs) | free_vars(self.rhs)

    def substitute(self, mapping: Mapping[str, Expr]) -> "AtomicConstraint":
        return AtomicConstraint(substitute(self.lhs, mapping), self.rel, substitute(self.rhs, mapping))

    def holds(self, point: Mapping[str, float]) -> bool:
        """Exact (non-weakened) satisfaction in double precision, strictness respected."""
        a = eval_expr(self.lhs, point)
        b = eval_expr(self.rhs, point)
        return {
            "=": a == b,
            "<=": a <= b,
            "<": a < b,
            ">=": a >= b,
            ">": a > b,
        }[self.rel]

    def __str__(self) -> str:
        return f"{self.lhs} {self.rel} {self.rhs}"


_NEGATED = {"<=": (">",), "<": (">=",), ">=": ("<",), ">": ("<=",), "=": ("<", ">")}


def negate(atom: AtomicConstraint) -> tuple[AtomicConstraint, ...]:
    """Complement of an atom as a disjunction; ``=`` becomes ``<`` or ``>``."""
    return tuple(AtomicConstraint(atom.lhs, r, atom.rhs) for r in _NEGATED[atom.rel])


def residual(c: AtomicConstraint, point: Mapping[str, float]) -> float:
    """Violation magnitude of ``c`` at ``point``; 0 when the non-strict weakening holds."""
    d = eval_expr(c.lhs, point) - eval_expr(c.rhs, point)
    if c.rel == "=":
        return abs(d)
    if c.rel in ("<=", "<"):
        return max(0.0, d)
    return max(0.0, -d)


@dataclass(frozen=True)
class Clause:
    disjuncts: tuple

    def __post_init__(self):
        object.__setattr__(self, "disjuncts", tuple(self.disjuncts))
        if not self.disjuncts:
            raise ExprError("clause needs at least one disjunct")

    @classmethod
    def of(cls, *atoms: AtomicConstraint) -> "Clause":
        return cls(tuple(atoms))

    def free_vars(self) -> frozenset:
        out = frozenset()
        for a in self.disjuncts:
            out |= a.free_vars()
        return out

    def __len__(self) -> int:
        return len(self.disjuncts)


@dataclass(frozen=True)
class VarDecl:
    name: str
    sort: str = "Real"
    domain: Interval = Interval.entire()
    level: str = "none"
    trust: str = "untrusted"
    unit: str = ""
    values: tuple = ()
    bounds_text: tuple = ()

    def __post_init__(self):
        if not self.name:
            raise ExprError("variable name must be nonempty")
        if self.sort not in SORTS:
            raise ExprError(f"unknown sort {self.sort!r}")
        if self.level not in LEVELS:
            raise ExprError(f"unknown level {self.level!r}")
        if self.trust not in ("trusted", "untrusted"):
            raise ExprError(f"unknown trust {self.trust!r}")
        if self.domain.is_empty:
            raise ExprError(f"empty domain for {self.name}")
        if self.sort == "Int" and self.domain.integer_hull().is_empty:
            raise ExprError(f"Int domain of {self.name} contains no integer")

    def replace(self, **kw) -> "VarDecl":
        from dataclasses import replace

        return replace(self, **kw)


def ranged(name: str, lo, hi, **kw) -> VarDecl:
    """Declaration whose domain is the outward enclosure of the decimal bounds ``lo``, ``hi``."""
    lo_t, hi_t = normalize_decimal(lo), normalize_decimal(hi)
    return VarDecl(name, domain=Interval.from_decimal(lo_t, hi_t), bounds_text=(lo_t, hi_t), **kw)


def bound_atoms(v: VarDecl) -> tuple[AtomicConstraint, ...]:
    """``lo <= v`` and ``v <= hi`` for the finite ends of the declared domain."""
    if v.bounds_text:
        lo_t, hi_t = v.bounds_text
    else:
        lo_t = None if v.domain.lo == float("-inf") else normalize_decimal(v.domain.lo)
        hi_t = None if v.domain.hi == float("inf") else normalize_decimal(v.domain.hi)
    out = []
    if lo_t is not None:
        out.append(AtomicConstraint(Constant(lo_t), "<=", Variable(v.name)))
    if hi_t is not None:
        out.append(AtomicConstraint(Variable(v.name), "<=", Constant(hi_t)))
    return tuple(out)


@dataclass(frozen=True)
class ConstraintSystem:
    """Declared variables plus an ordered list of assertions.

    Each assertion is a conjunction of clauses; the grouping only matters for
    emission (one ``(assert ...)`` per group). The solver sees ``clauses``.
    """

    vars: tuple
    assertions: tuple = ()
    tags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "assertions", tuple(tuple(a) for a in self.assertions))
        names = [v.name for v in self.vars]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ExprError(f"duplicate variable declarations: {dup}")
        declared = set(names)
        for c in self.clauses:
            missing = c.free_vars() - declared
            if missing:
                raise ExprError(f"undeclared variables in clause: {sorted(missing)}")

    @classmethod
    def build(cls, vars: Iterable[VarDecl], clauses: Iterable[Clause] = (), bounds: bool = True) -> "ConstraintSystem":
        """System with one bound assertion per bounded variable followed by one assertion per clause."""
        vars = tuple(vars)
        groups = []
        if bounds:
            for v in vars:
                atoms = bound_atoms(v)
                if atoms:
                    groups.append(tuple(Clause.of(a) for a in atoms))
        groups.extend((c,) for c in clauses)
        return cls(vars, tuple(groups))

    @property
    def clauses(self) -> tuple:
        return tuple(c for group in self.assertions for c in group)

    @property
    def names(self) -> tuple:
        return tuple(v.name for v in self.vars)

    def var(self, name: str) -> VarDecl:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def with_clauses(self, *clauses: Clause) -> "ConstraintSystem":
        return ConstraintSystem(self.vars, self.assertions + tuple((c,) for c in clauses), self.tags)

    def with_vars(self, vars: Iterable[VarDecl]) -> "ConstraintSystem":
        return ConstraintSystem(tuple(vars), self.assertions, self.tags)
