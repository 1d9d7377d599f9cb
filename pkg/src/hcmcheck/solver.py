"""Branch-and-prune delta-decision procedure over interval boxes.

A node is a box plus, for every multi-disjunct clause, the disjuncts not yet
refuted on that box. Nodes are contracted to an HC4 fixpoint, a candidate point
is tried against the delta-weakened system, and uncertified nodes are bisected.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .contract import Box, CompiledAtom, bisect, box_width, choose_split
from .expr import AtomicConstraint, Clause, ConstraintSystem, Constant, Variable, normalize_decimal, residual
from .interval import Interval


class SolverError(Exception):
    pass


class UnboundedDomain(SolverError):
    def __init__(self, name: str):
        super().__init__(f"unbounded domain for {name}")
        self.name = name


class BudgetMisconfigured(SolverError):
    pass


class SortViolation(SolverError):
    def __init__(self, name: str, value):
        super().__init__(f"Int variable {name} bound to non-integer {value!r}")
        self.name = name


@dataclass(frozen=True)
class SolverConfig:
    delta: float = 0.01
    precision: Optional[float] = None
    budget: int = 1_000_000
    parallel: bool = False
    workers: Optional[int] = None

    def __post_init__(self):
        if not (self.delta > 0):
            raise BudgetMisconfigured(f"delta must be positive, got {self.delta}")
        if self.precision is None:
            object.__setattr__(self, "precision", self.delta / 10)
        if not (self.precision > 0):
            raise BudgetMisconfigured(f"precision must be positive, got {self.precision}")
        if int(self.budget) != self.budget or self.budget < 1:
            raise BudgetMisconfigured(f"budget must be a positive integer, got {self.budget}")


@dataclass(frozen=True)
class Unsat:
    status = "unsat"


@dataclass(frozen=True)
class DeltaSat:
    witness: dict
    certificate_point: dict
    delta: float
    status = "delta-sat"


@dataclass(frozen=True)
class Unknown:
    expanded: int
    frontier_size: int
    status = "unknown"


@dataclass
class CertifyReport:
    ok: bool
    delta: float
    # one entry per clause: (best residual, [(atom, residual), ...])
    clauses: list = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max((c[0] for c in self.clauses), default=0.0)

    def __bool__(self) -> bool:
        return self.ok


def atom_residual(a: AtomicConstraint, point) -> float:
    try:
        r = residual(a, point)
    except ZeroDivisionError:
        return math.inf
    return math.inf if r != r else r


def certify(sys: ConstraintSystem, point: Mapping[str, float], delta: float) -> CertifyReport:
    """Check that every clause has a disjunct with residual at most ``delta`` at ``point``."""
    for v in sys.vars:
        if v.name not in point:
            from .expr import UnboundVariable

            raise UnboundVariable(v.name)
        if v.sort == "Int" and float(point[v.name]) != math.floor(float(point[v.name])):
            raise SortViolation(v.name, point[v.name])
    rep = CertifyReport(ok=True, delta=delta)
    for c in sys.clauses:
        per = [(a, atom_residual(a, point)) for a in c.disjuncts]
        best = min(r for _, r in per)
        rep.clauses.append((best, per))
        if not best <= delta:
            rep.ok = False
    return rep


def initial_box(sys: ConstraintSystem) -> Box:
    box = {}
    for v in sys.vars:
        if not v.domain.is_bounded:
            raise UnboundedDomain(v.name)
        box[v.name] = v.domain.integer_hull() if v.sort == "Int" else v.domain
    return box


class _Search:
    """Single-use sequential branch-and-prune over one starting box."""

    MAX_SWEEPS = 64
    REFINE_STEPS = 100

    def __init__(self, sys: ConstraintSystem, cfg: SolverConfig):
        self.sys = sys
        self.cfg = cfg
        self.ints = frozenset(v.name for v in sys.vars if v.sort == "Int")
        self.units: list[CompiledAtom] = []
        self.multi: list[tuple] = []
        for c in sys.clauses:
            compiled = tuple(CompiledAtom(a) for a in c.disjuncts)
            if len(compiled) == 1:
                self.units.append(compiled[0])
            else:
                self.multi.append(compiled)
        self.expanded = 0

    # -- contraction --------------------------------------------------------
    def _apply(self, box: Box, narrowed: dict) -> bool:
        for k, v in narrowed.items():
            nv = box[k].intersect(v)
            if k in self.ints:
                nv = nv.integer_hull()
            if nv.is_empty:
                return False
            box[k] = nv
        return True

    def contract(self, box: Box, alive: list) -> Optional[Box]:
        box = dict(box)
        for _ in range(self.MAX_SWEEPS):
            before = dict(box)
            active = list(self.units)
            for ci, idx in enumerate(alive):
                if len(idx) == 1:
                    active.append(self.multi[ci][idx[0]])
            for ca in active:
                n = ca.revise(box)
                if n is None or not self._apply(box, n):
                    return None
            for ci, idx in enumerate(alive):
                if len(idx) < 2:
                    continue
                survivors, hull = [], None
                for j in idx:
                    n = self.multi[ci][j].revise(box)
                    if n is None:
                        continue
                    trial = dict(box)
                    if not self._apply(trial, n):
                        continue
                    survivors.append(j)
                    hull = trial if hull is None else {k: hull[k].hull(trial[k]) for k in hull}
                if not survivors:
                    return None
                alive[ci] = tuple(survivors)
                box = hull
            if not self._improved(before, box):
                break
        return box

    @staticmethod
    def _improved(before: Box, after: Box) -> bool:
        for k, old in before.items():
            ow, nw = old.width, after[k].width
            if ow > 0 and (ow - nw) > 0.01 * ow:
                return True
        return False

    # -- certification ------------------------------------------------------
    def _total(self, point) -> float:
        t = 0.0
        for ca in self.units:
            t += ca.residual(point)
        for group in self.multi:
            t += min(ca.residual(point) for ca in group)
        return t

    def _ok(self, point) -> bool:
        d = self.cfg.delta
        for ca in self.units:
            if not ca.residual(point) <= d:
                return False
        for group in self.multi:
            if not any(ca.residual(point) <= d for ca in group):
                return False
        return True

    def _midpoint(self, box: Box) -> dict:
        p = {}
        for k, v in box.items():
            m = v.mid
            if k in self.ints:
                m = float(math.floor(m + 0.5))
                m = min(max(m, v.lo), v.hi)
            p[k] = m
        return p

    def refine(self, box: Box, p: dict) -> Optional[dict]:
        """Coordinate descent on the summed residual, starting from ``p``."""
        p = dict(p)
        f = self._total(p)
        steps = {}
        for k, v in box.items():
            if v.width > 0:
                steps[k] = max(1.0, math.floor(v.width / 4)) if k in self.ints else v.width / 4
        if not steps:
            return None
        for _ in range(self.REFINE_STEPS):
            moved = False
            for k in sorted(steps):
                s = steps[k]
                v = box[k]
                for cand in (p[k] - s, p[k] + s):
                    cand = min(max(cand, v.lo), v.hi)
                    if cand == p[k]:
                        continue
                    old = p[k]
                    p[k] = cand
                    g = self._total(p)
                    if g < f:
                        f = g
                        moved = True
                        break
                    p[k] = old
            if self._ok(p):
                return p
            if not moved:
                done = True
                for k in steps:
                    if k in self.ints:
                        if steps[k] > 1.0:
                            steps[k] = max(1.0, math.floor(steps[k] / 2))
                            done = False
                    elif steps[k] > 1e-15 * max(1.0, abs(p[k])):
                        steps[k] /= 2
                        done = False
                if done:
                    break
        return p if self._ok(p) else None

    def certify_node(self, box: Box) -> Optional[dict]:
        p = self._midpoint(box)
        if self._ok(p):
            return p
        return self.refine(box, p)

    # -- search -------------------------------------------------------------
    def run(self, box: Box):
        stack = [(box, [tuple(range(len(g))) for g in self.multi])]
        inconclusive = 0
        while stack:
            if self.expanded >= self.cfg.budget:
                return Unknown(self.expanded, len(stack) + inconclusive)
            node, alive = stack.pop()
            self.expanded += 1
            alive = list(alive)
            node = self.contract(node, alive)
            if node is None:
                continue
            p = self.certify_node(node)
            if p is not None:
                return DeltaSat(node, p, self.cfg.delta)
            var = choose_split(node, self.ints, self.cfg.precision)
            if var is None:
                inconclusive += 1
                continue
            left, right = bisect(node, var, self.ints, self.cfg.precision)
            stack.append((right, tuple(alive)))
            stack.append((left, tuple(alive)))
        if inconclusive:
            return Unknown(self.expanded, inconclusive)
        return Unsat()


def _check(sys: ConstraintSystem, cfg: SolverConfig) -> Box:
    if not isinstance(cfg, SolverConfig):
        raise BudgetMisconfigured("cfg must be a SolverConfig")
    return initial_box(sys)


def _search_box(sys: ConstraintSystem, cfg: SolverConfig, box: Box):
    return _Search(sys, cfg).run(box)


def solve(sys: ConstraintSystem, cfg: SolverConfig = SolverConfig()):
    """Decide delta-satisfiability of ``sys`` over the product of its declared domains."""
    box = _check(sys, cfg)
    if any(v.is_empty for v in box.values()):
        return Unsat()
    if cfg.parallel:
        return _solve_parallel(sys, cfg, box)
    return _search_box(sys, cfg, box)


def _split_frontier(sys: ConstraintSystem, cfg: SolverConfig, box: Box, n: int):
    """Breadth-first pre-split of the root into at most ``n`` contracted boxes."""
    s = _Search(sys, cfg)
    alive = [tuple(range(len(g))) for g in s.multi]
    root = s.contract(box, alive)
    if root is None:
        return Unsat(), []
    p = s.certify_node(root)
    if p is not None:
        return DeltaSat(root, p, cfg.delta), []
    frontier = [root]
    while len(frontier) < n:
        nxt, grew = [], False
        for b in frontier:
            var = choose_split(b, s.ints, cfg.precision)
            if var is None:
                nxt.append(b)
                continue
            nxt.extend(bisect(b, var, s.ints, cfg.precision))
            grew = True
        frontier = nxt
        if not grew:
            break
    return None, frontier


def _solve_parallel(sys: ConstraintSystem, cfg: SolverConfig, box: Box):
    workers = cfg.workers or min(4, os.cpu_count() or 1)
    early, frontier = _split_frontier(sys, cfg, box, 2 * workers)
    if early is not None:
        return early
    seq_cfg = SolverConfig(cfg.delta, cfg.precision, cfg.budget, False)
    results: dict = {}
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = {ex.submit(_search_box, sys, seq_cfg, b): i for i, b in enumerate(frontier)}
        pending = set(futs)
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for f in done:
                results[futs[f]] = f.result()
            if any(isinstance(r, DeltaSat) for r in results.values()):
                for f in pending:
                    f.cancel()
                break
    sats = [results[i] for i in sorted(results) if isinstance(results[i], DeltaSat)]
    if sats:
        return sats[0]
    unknowns = [r for r in results.values() if isinstance(r, Unknown)]
    if unknowns:
        return Unknown(sum(u.expanded for u in unknowns), sum(u.frontier_size for u in unknowns))
    return Unsat()


def blocking_clause(point: Mapping[str, float], names, radius: float) -> Optional[Clause]:
    """Clause excluding the open ``radius``-ball (max-norm) around ``point`` over ``names``."""
    atoms = []
    for n in names:
        v = float(point[n])
        atoms.append(AtomicConstraint(Variable(n), "<=", Constant(normalize_decimal(v - radius))))
        atoms.append(AtomicConstraint(Variable(n), ">=", Constant(normalize_decimal(v + radius))))
    return Clause(tuple(atoms)) if atoms else None


def solve_enumerate(sys: ConstraintSystem, cfg: SolverConfig, k: int, separation: float) -> list:
    """Up to ``k`` delta-sat verdicts whose certificates are pairwise ``separation`` apart
    in at least one untrusted variable.

    If the first solve is not delta-sat its verdict is returned alone.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not separation > 0:
        raise ValueError("separation must be positive")
    untrusted = [v.name for v in sys.vars if v.trust == "untrusted"]
    out = []
    cur = sys
    for _ in range(k):
        r = solve(cur, cfg)
        if not isinstance(r, DeltaSat):
            if not out:
                out.append(r)
            break
        out.append(r)
        # widened by delta so the delta-weakened blocking atoms still keep the distance
        block = blocking_clause(r.certificate_point, untrusted, separation + cfg.delta)
        if block is None:
            break
        cur = cur.with_clauses(block)
    return out
