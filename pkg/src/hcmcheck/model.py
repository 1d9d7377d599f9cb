"""Health-condition models, scenarios, guard compilation and lowering to constraint systems."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .expr import (
    Add,
    AtomicConstraint,
    Clause,
    ConstraintSystem,
    Constant,
    Expr,
    Sub,
    Variable,
    VarDecl,
    bound_atoms,
    normalize_decimal,
)
from .interval import Interval

MAX_HORIZON = 1000


class ModelError(Exception):
    """Base class for model and scenario diagnostics."""

    line: Optional[int] = None
    col: Optional[int] = None

    def location(self) -> str:
        if self.line is None:
            return ""
        return f"{self.line}:{self.col or 1}"


class ModelSyntaxError(ModelError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line, self.col, self.expected, self.found = line, col, expected, found
        msg = f"{line}:{col}: syntax error: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class DuplicateDeclaration(ModelError):
    def __init__(self, name: str, line: Optional[int] = None, col: Optional[int] = None):
        self.name, self.line, self.col = name, line, col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}duplicate declaration of {name!r}")


class UnknownIdentifier(ModelError):
    def __init__(self, name: str, line: Optional[int] = None, col: Optional[int] = None):
        self.name, self.line, self.col = name, line, col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}unknown identifier {name!r}")


class SemanticError(ModelError):
    def __init__(self, msg: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line, self.col = line, col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + msg)


class HorizonTooLarge(ModelError):
    pass


class InconsistentScenario(ModelError):
    pass


@dataclass(frozen=True)
class Dynamic:
    name: str
    atom: AtomicConstraint

    def __str__(self) -> str:
        return f"{self.name}: {self.atom}"


@dataclass(frozen=True)
class Rule:
    label: str
    guard: tuple

    def __post_init__(self):
        object.__setattr__(self, "guard", tuple(self.guard))


@dataclass(frozen=True)
class RuleTable:
    rules: tuple
    domain: tuple = ()  # declarations of the guard variables

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise SemanticError("rule table needs at least one rule")
        labels = [r.label for r in self.rules]
        if len(set(labels)) != len(labels):
            raise SemanticError("rule labels must be unique")


@dataclass(frozen=True)
class HealthModel:
    name: str
    params: tuple
    error_map: tuple = ()  # (name, bound text) pairs
    dynamics: tuple = ()
    rules: tuple = ()
    safety: tuple = ()
    synthetic: tuple = field(default=(), compare=False)

    def __post_init__(self):
        for a in ("params", "error_map", "dynamics", "rules", "safety"):
            object.__setattr__(self, a, tuple(getattr(self, a)))

    def decl(self, name: str) -> VarDecl:
        for v in self.params:
            if v.name == name:
                return v
        raise UnknownIdentifier(name)

    @property
    def names(self) -> tuple:
        return tuple(v.name for v in self.params)

    @property
    def levels(self) -> dict:
        return {v.name: v.level for v in self.params}

    @property
    def errors(self) -> dict:
        return {n: float(b) for n, b in self.error_map}

    def rule(self, label: str) -> Rule:
        for r in self.rules:
            if r.label == label:
                return r
        raise UnknownIdentifier(label)

    @property
    def rule_table(self) -> RuleTable:
        used = set()
        for r in self.rules:
            for a in r.guard:
                used |= a.free_vars()
        return RuleTable(self.rules, tuple(v for v in self.params if v.name in used))

    def timing(self) -> dict:
        """base name -> set of relative indices used in dynamics (0 for @t, 1 for @t+1)."""
        out: dict = {}
        for d in self.dynamics:
            for n in d.atom.free_vars():
                base, idx = split_index(n)
                if idx is not None:
                    out.setdefault(base, set()).add(idx)
        return out

    def static_in_dynamics(self) -> list:
        seen = []
        for d in self.dynamics:
            for n in sorted(d.atom.free_vars()):
                base, idx = split_index(n)
                if idx is None and base not in seen:
                    seen.append(base)
        return seen


_REL_INDEX = re.compile(r"^(?P<base>[A-Za-z_][A-Za-z0-9_]*)@t(?P<plus>\+1)?$")
_ABS_INDEX = re.compile(r"^(?P<base>[A-Za-z_][A-Za-z0-9_]*)@(?:t(?P<k>\d*)|(?P<n>\d+)|t\+(?P<p>\d+))$")


def split_index(name: str) -> tuple:
    """``bg@t`` -> (bg, 0); ``bg@t+1`` -> (bg, 1); ``err`` -> (err, None)."""
    m = _REL_INDEX.match(name)
    if m:
        return m.group("base"), 1 if m.group("plus") else 0
    return name, None


def step_name(base: str, k: int) -> str:
    """Absolute instance name: ``bg@t`` for step 0, ``bg@t1``, ``bg@t2``... after that."""
    return f"{base}@t" if k == 0 else f"{base}@t{k}"


def parse_step_name(name: str) -> tuple:
    """Accepts ``bg@t``, ``bg@t3``, ``bg@3`` and ``bg@t+2``; returns (base, k) or (name, None)."""
    m = _ABS_INDEX.match(name)
    if not m:
        return name, None
    if m.group("n") is not None:
        return m.group("base"), int(m.group("n"))
    if m.group("p") is not None:
        return m.group("base"), int(m.group("p"))
    k = m.group("k")
    return m.group("base"), int(k) if k else 0


def canonical_step_name(name: str) -> str:
    base, k = parse_step_name(name)
    return name if k is None else step_name(base, k)


@dataclass(frozen=True)
class Scenario:
    """Observed readings and solving options for one lowering.

    ``layout`` records the order of ``fix`` groups and ``bound`` requests as
    written, which fixes the order of emitted assertions.
    """

    fixed: dict = field(default_factory=dict)  # canonical name -> decimal text
    horizon: int = 1
    free: Optional[frozenset] = None
    reference: dict = field(default_factory=dict)
    layout: tuple = ()  # ("fix", (names...)) | ("bound", name)
    delta: Optional[float] = None
    precision: Optional[float] = None
    budget: Optional[int] = None

    def __post_init__(self):
        fixed = {canonical_step_name(k): normalize_decimal(v) for k, v in dict(self.fixed).items()}
        object.__setattr__(self, "fixed", fixed)
        object.__setattr__(self, "reference", {canonical_step_name(k): float(v) for k, v in dict(self.reference).items()})
        if self.free is not None:
            object.__setattr__(self, "free", frozenset(canonical_step_name(n) for n in self.free))
        if not self.layout and fixed:
            object.__setattr__(self, "layout", (("fix", tuple(fixed)),))
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise InconsistentScenario(f"horizon must be a nonnegative integer, got {self.horizon}")

    def __hash__(self):
        return hash((tuple(self.fixed.items()), self.horizon, self.free, self.layout))


def _shift(name: str, base_k: int, timed: Mapping) -> str:
    base, idx = split_index(name)
    if idx is None:
        return base
    return step_name(base, base_k + idx)


def instantiate(atom: AtomicConstraint, k: int, timed: Mapping) -> AtomicConstraint:
    """Rename relative indices of a dynamics atom to absolute step ``k`` / ``k+1``."""
    mapping = {n: Variable(_shift(n, k, timed)) for n in atom.free_vars()}
    return atom.substitute(mapping)


def at_step(atom: AtomicConstraint, k: int, timed: Mapping) -> AtomicConstraint:
    """Place a guard or safety atom at absolute step ``k``.

    Plain names of timed variables mean "at step k"; ``@t+1``/``@t`` mean k / k-1.
    """
    mapping = {}
    for n in atom.free_vars():
        base, idx = split_index(n)
        if idx is not None:
            mapping[n] = Variable(step_name(base, k - 1 + idx))
        elif base in timed:
            mapping[n] = Variable(step_name(base, k))
    return atom.substitute(mapping)


def step_range(indices: set, horizon: int) -> range:
    if 0 in indices and 1 in indices:
        return range(0, horizon + 1)
    if 1 in indices:
        return range(1, horizon + 1)
    return range(0, horizon)


def lowered_vars(m: HealthModel, horizon: int, extra_static: Iterable[str] = ()) -> list:
    """(instance name, base declaration) in declaration order."""
    timed = m.timing()
    static = set(m.static_in_dynamics()) | set(extra_static)
    out = []
    for v in m.params:
        if v.name in timed:
            for k in step_range(timed[v.name], horizon):
                out.append((step_name(v.name, k), v))
        elif v.name in static:
            out.append((v.name, v))
    return out


def lower(m: HealthModel, s: Scenario, extra_static: Iterable[str] = ()) -> ConstraintSystem:
    """Unroll ``m`` over ``s.horizon`` steps with the scenario's observations."""
    H = s.horizon
    if H > MAX_HORIZON:
        raise HorizonTooLarge(f"horizon {H} exceeds {MAX_HORIZON}")
    timed = m.timing()
    mentioned = set(s.fixed) | set(s.reference) | set(s.free or ())
    mentioned |= {n for kind, x in s.layout if kind == "bound" for n in [x]}
    extra = set(extra_static)
    for n in mentioned:
        base, k = parse_step_name(n)
        if k is None and base in m.names and base not in timed:
            extra.add(base)
    inst = lowered_vars(m, H, extra)
    names = [n for n, _ in inst]
    decl_of = dict(inst)
    for n in mentioned:
        if n not in decl_of:
            raise InconsistentScenario(f"scenario names {n!r}, which is not a variable of the unrolled model")

    for n, text in s.fixed.items():
        v = decl_of[n]
        val = float(text)
        if val not in v.domain:
            raise InconsistentScenario(f"fixed value {n} = {text} outside declared domain {v.domain}")
        if v.sort == "Int" and val != int(val):
            raise InconsistentScenario(f"fixed value {n} = {text} is not an integer")

    free = s.free if s.free is not None else frozenset(n for n in names if n not in s.fixed and decl_of[n].trust != "trusted")
    decls = []
    for n, v in inst:
        dom = v.domain
        if not dom.is_bounded and n in s.fixed:
            dom = Interval.from_decimal(s.fixed[n])
        decls.append(v.replace(name=n, domain=dom, trust="untrusted" if n in free else "trusted"))
    by_name = {d.name: d for d in decls}

    groups, tags, bounded = [], [], set()
    for kind, x in s.layout:
        if kind == "fix":
            groups.append(tuple(Clause.of(AtomicConstraint(Variable(n), "=", Constant(s.fixed[n]))) for n in x))
            tags.append("fix")
        else:
            atoms = bound_atoms(by_name[x])
            if not atoms:
                raise InconsistentScenario(f"bound requested for {x}, which has no declared range")
            groups.append(tuple(Clause.of(a) for a in atoms))
            tags.append("bound")
            bounded.add(x)
    for d in decls:
        if d.name not in s.fixed and d.name not in bounded:
            atoms = bound_atoms(d)
            if atoms:
                groups.append(tuple(Clause.of(a) for a in atoms))
                tags.append("bound")
    for k in range(H):
        for dyn in m.dynamics:
            groups.append((Clause.of(instantiate(dyn.atom, k, timed)),))
            tags.append(f"dynamics:{dyn.name}@{k + 1}")
    return ConstraintSystem(tuple(decls), tuple(groups), tuple(tags))


def _perturb(atom: AtomicConstraint, names: list, signs: tuple, bounds: Mapping) -> AtomicConstraint:
    mapping = {}
    for n, sgn in zip(names, signs):
        b = Constant(bounds[n])
        mapping[n] = Add(Variable(n), b) if sgn > 0 else Sub(Variable(n), b)
    return atom.substitute(mapping)


def compile_guards(rt, error_map: Iterable = ()) -> list:
    """Fold sensor error bounds into rule guards.

    An atom over a variable with error bound ``b`` holds only if it holds with the
    reading shifted by ``+b`` and by ``-b``; it is replaced by both shifted atoms
    (all sign combinations when several mapped variables occur). Atoms over
    unmapped variables, and bounds of 0, leave the atom unchanged.
    """
    rules = rt.rules if isinstance(rt, RuleTable) else tuple(rt)
    bounds = {}
    for n, b in error_map:
        if float(b) != 0.0:
            bounds[n] = normalize_decimal(b)
    out = []
    for r in rules:
        mapped_any = sorted({n for a in r.guard for n in a.free_vars() if n in bounds})
        if not mapped_any:
            out.append((r.label, list(r.guard)))
            continue
        atoms: list = []
        combos = list(itertools.product((1, -1), repeat=len(mapped_any)))
        for ci, signs in enumerate(combos):
            for a in r.guard:
                names = sorted(n for n in a.free_vars() if n in bounds)
                if not names:
                    if ci == 0:
                        atoms.append(a)
                    continue
                sub_signs = tuple(signs[mapped_any.index(n)] for n in names)
                p = _perturb(a, names, sub_signs, bounds)
                if p not in atoms:
                    atoms.append(p)
        out.append((r.label, atoms))
    return out
