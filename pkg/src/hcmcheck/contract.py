"""Boxes, natural interval extensions, HC4-revise contraction and bisection."""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Optional

from . import interval as iv
from .expr import Add, AtomicConstraint, Constant, Div, Expr, Mul, Neg, Sub, Variable
from .interval import EMPTY, Interval

# Intervals this narrow count as points when choosing a split variable.
POINT_WIDTH = 1e-12

Box = dict  # name -> Interval; treated as a value, always copied before modification


class EmptyBox(ValueError):
    pass


class NothingToSplit(ValueError):
    pass


def box_width(box: Mapping[str, Interval]) -> float:
    return max((v.width for v in box.values()), default=0.0)


def box_is_empty(box: Mapping[str, Interval]) -> bool:
    return any(v.is_empty for v in box.values())


def box_subset(a: Mapping[str, Interval], b: Mapping[str, Interval]) -> bool:
    return all(a[k].subset(b[k]) for k in a)


def box_hull(a: Optional[Mapping], b: Optional[Mapping]) -> Optional[Box]:
    if a is None:
        return None if b is None else dict(b)
    if b is None:
        return dict(a)
    return {k: a[k].hull(b[k]) for k in a}


def box_contains(box: Mapping[str, Interval], point: Mapping[str, float]) -> bool:
    return all(point[k] in v for k, v in box.items())


def format_box(box: Mapping[str, Interval]) -> str:
    return "\n".join(f"{k} : {v}" for k, v in box.items())


class Compiled:
    """Post-order flattening of an expression tree used by forward/backward sweeps.

    ``ops[i]`` is ``(kind, a, b)`` where ``a``/``b`` are child slots, or the
    variable name / constant interval for leaves.
    """

    __slots__ = ("ops", "root", "names")

    def __init__(self, e: Expr):
        self.ops: list = []
        self.root = self._walk(e)
        self.names = frozenset(op[1] for op in self.ops if op[0] == "var")

    def _walk(self, e: Expr) -> int:
        if isinstance(e, Constant):
            self.ops.append(("const", Interval.from_decimal(e.text), e.value))
        elif isinstance(e, Variable):
            self.ops.append(("var", e.name, None))
        elif isinstance(e, Neg):
            a = self._walk(e.arg)
            self.ops.append(("neg", a, None))
        else:
            a = self._walk(e.left)
            b = self._walk(e.right)
            kind = {Add: "add", Sub: "sub", Mul: "mul", Div: "div"}[type(e)]
            self.ops.append((kind, a, b))
        return len(self.ops) - 1

    def forward(self, box: Mapping[str, Interval], vals: list) -> bool:
        """Fill ``vals`` with node enclosures; False if some node is empty."""
        for i, (kind, a, b) in enumerate(self.ops):
            if kind == "var":
                v = box[a]
            elif kind == "const":
                v = a
            elif kind == "add":
                v = iv.add(vals[a], vals[b])
            elif kind == "sub":
                v = iv.sub(vals[a], vals[b])
            elif kind == "mul":
                v = iv.mul(vals[a], vals[b])
            elif kind == "div":
                v = iv.div(vals[a], vals[b])
            else:
                v = iv.neg(vals[a])
            if v.is_empty:
                return False
            vals[i] = v
        return True

    def eval_point(self, point: Mapping[str, float]) -> float:
        """Double-precision value at ``point``; raises ZeroDivisionError on division by zero."""
        vals = [0.0] * len(self.ops)
        for i, (kind, a, b) in enumerate(self.ops):
            if kind == "var":
                v = point[a]
            elif kind == "const":
                v = b
            elif kind == "add":
                v = vals[a] + vals[b]
            elif kind == "sub":
                v = vals[a] - vals[b]
            elif kind == "mul":
                v = vals[a] * vals[b]
            elif kind == "div":
                v = vals[a] / vals[b]
            else:
                v = -vals[a]
            vals[i] = v
        return vals[self.root]

    def backward(self, vals: list, out: dict) -> bool:
        """Project node enclosures down to the leaves; narrowed variables go into ``out``."""
        for i in range(len(self.ops) - 1, -1, -1):
            kind, a, b = self.ops[i]
            t = vals[i]
            if kind == "var":
                cur = out.get(a)
                nv = t if cur is None else cur.intersect(t)
                if nv.is_empty:
                    return False
                out[a] = nv
                continue
            if kind == "const":
                continue
            if kind == "neg":
                na = vals[a].intersect(iv.neg(t))
                if na.is_empty:
                    return False
                vals[a] = na
                continue
            x, y = vals[a], vals[b]
            if kind == "add":
                nx = x.intersect(iv.sub(t, y))
                if nx.is_empty:
                    return False
                ny = y.intersect(iv.sub(t, nx))
            elif kind == "sub":
                nx = x.intersect(iv.add(t, y))
                if nx.is_empty:
                    return False
                ny = y.intersect(iv.sub(nx, t))
            elif kind == "mul":
                nx = x if (0.0 in y and 0.0 in t) else x.intersect(iv.div(t, y))
                if nx.is_empty:
                    return False
                ny = y if (0.0 in nx and 0.0 in t) else y.intersect(iv.div(t, nx))
            else:  # div: t = x / y with y != 0
                nx = x.intersect(iv.mul(t, y))
                if nx.is_empty:
                    return False
                ny = y if (0.0 in nx and 0.0 in t) else y.intersect(iv.div(nx, t))
                if ny.lo == 0.0 and ny.hi == 0.0:
                    return False
            if ny.is_empty:
                return False
            vals[a], vals[b] = nx, ny
        return True


class CompiledAtom:
    """An atomic constraint ready for repeated HC4 revisions."""

    __slots__ = ("atom", "lhs", "rhs", "rel", "names")

    def __init__(self, atom: AtomicConstraint):
        self.atom = atom
        self.lhs = Compiled(atom.lhs)
        self.rhs = Compiled(atom.rhs)
        self.rel = atom.rel
        self.names = self.lhs.names | self.rhs.names

    def revise(self, box: Mapping[str, Interval]) -> Optional[dict]:
        """Narrowed intervals for this atom's variables, or None if infeasible."""
        lv = [None] * len(self.lhs.ops)
        rv = [None] * len(self.rhs.ops)
        if not self.lhs.forward(box, lv) or not self.rhs.forward(box, rv):
            return None
        L, R = lv[self.lhs.root], rv[self.rhs.root]
        if self.rel == "=":
            L = R = L.intersect(R)
        elif self.rel in ("<=", "<"):
            L = L.intersect(Interval(-math.inf, R.hi))
            R = R.intersect(Interval(L.lo, math.inf)) if not L.is_empty else EMPTY
        else:
            L = L.intersect(Interval(R.lo, math.inf))
            R = R.intersect(Interval(-math.inf, L.hi)) if not L.is_empty else EMPTY
        if L.is_empty or R.is_empty:
            return None
        lv[self.lhs.root] = L
        rv[self.rhs.root] = R
        out: dict = {}
        if not self.lhs.backward(lv, out) or not self.rhs.backward(rv, out):
            return None
        return out

    def residual(self, point: Mapping[str, float]) -> float:
        try:
            d = self.lhs.eval_point(point) - self.rhs.eval_point(point)
        except ZeroDivisionError:
            return math.inf
        if d != d:
            return math.inf
        if self.rel == "=":
            return abs(d)
        if self.rel in ("<=", "<"):
            return d if d > 0.0 else 0.0
        return -d if d < 0.0 else 0.0

    def enclosure(self, box: Mapping[str, Interval]) -> Interval:
        """Enclosure of ``lhs - rhs`` over ``box``."""
        lv = [None] * len(self.lhs.ops)
        rv = [None] * len(self.rhs.ops)
        if not self.lhs.forward(box, lv) or not self.rhs.forward(box, rv):
            return EMPTY
        return iv.sub(lv[self.lhs.root], rv[self.rhs.root])


def eval_extension(e: Expr, box: Mapping[str, Interval]) -> Interval:
    """Natural interval extension of ``e`` over ``box``."""
    if box_is_empty(box):
        raise EmptyBox("empty box")
    c = Compiled(e)
    vals = [None] * len(c.ops)
    if not c.forward(box, vals):
        return EMPTY
    return vals[c.root]


def hc4_revise(c, box: Mapping[str, Interval], ints: Iterable[str] = ()) -> Optional[Box]:
    """One forward-backward revision of ``c`` over ``box``.

    Returns a new box (a subset of ``box``) or None when no point of ``box``
    satisfies ``c``. ``ints`` names Int-sorted variables, whose bounds are
    rounded inward to integers.
    """
    ca = c if isinstance(c, CompiledAtom) else CompiledAtom(c)
    narrowed = ca.revise(box)
    if narrowed is None:
        return None
    out = dict(box)
    ints = set(ints)
    for k, v in narrowed.items():
        nv = out[k].intersect(v)
        if k in ints:
            nv = nv.integer_hull()
        if nv.is_empty:
            return None
        out[k] = nv
    return out


def choose_split(box: Mapping[str, Interval], ints: Iterable[str] = (), floor: float = POINT_WIDTH) -> Optional[str]:
    """Widest splittable variable, ties broken by name; None if nothing is splittable."""
    ints = set(ints)
    best, best_w = None, -1.0
    for name in sorted(box):
        v = box[name]
        w = v.width
        if name in ints:
            if not v.hi > v.lo:
                continue
        elif w <= floor or not (v.lo < v.mid < v.hi):
            continue
        if w > best_w:
            best, best_w = name, w
    return best


def bisect(box: Mapping[str, Interval], var: Optional[str] = None, ints: Iterable[str] = (), floor: float = POINT_WIDTH) -> tuple[Box, Box]:
    """Split ``box`` in two along ``var`` (default: widest variable, name tie-break).

    Int variables split at the integer midpoint into disjoint integer ranges.
    """
    ints = set(ints)
    if var is None:
        var = choose_split(box, ints, floor)
    if var is None:
        raise NothingToSplit("all widths below precision")
    v = box[var]
    if var in ints:
        if not v.hi > v.lo:
            raise NothingToSplit(var)
        if math.isinf(v.lo) or math.isinf(v.hi):
            m = float(math.floor(v.mid))
        else:
            m = float(math.floor((v.lo + v.hi) / 2))
        left, right = Interval(v.lo, m), Interval(m + 1.0, v.hi)
    else:
        if v.width <= floor:
            raise NothingToSplit(var)
        m = v.mid
        if m <= v.lo or m >= v.hi:
            raise NothingToSplit(var)
        left, right = Interval(v.lo, m), Interval(m, v.hi)
    a, b = dict(box), dict(box)
    a[var] = left
    b[var] = right
    return a, b
