"""Validation battery over a HealthModel: spoofable readings, unsafe states,
bounded reachability, rule coverage, rule overlap and trace consistency.

Every analysis turns a question into a constraint system and hands it to the
delta-solver. A DeltaSat verdict becomes a :class:`Finding` carrying the
solver's witness box and certificate point.

Inequalities added by an analysis (negated guards, negated safety atoms) are
checked once more after a DeltaSat: if the certificate satisfies them exactly,
or the system stays satisfiable when they are tightened by ``2*delta``, the
finding is hard. Otherwise the hit only exists inside the delta-weakening, as
happens when two half-open bands touch, and it is reported as a warning.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .expr import Add, AtomicConstraint, Clause, ConstraintSystem, Constant, Sub, Variable, negate, normalize_decimal
from .dsl import format_atom
from .interval import Interval
from .model import HealthModel, Scenario, at_step, compile_guards, lower, parse_step_name, split_index
from .solver import DeltaSat, SolverConfig, Unsat, atom_residual, blocking_clause, solve, solve_enumerate

KINDS = ("spoof", "unsafe", "unreachable", "gap", "overlap", "trace-violation")
ANALYSES = ("spoof", "unsafe", "reachable", "exhaustive", "overlap")

# Offered with every spoof finding; the toolkit does not try to tell them apart.
POSSIBLE_CAUSES = (
    "a sensor or medical device reporting wrong values because of a software or hardware fault",
    "values altered by an adversary",
    "a genuine but unusual patient condition caused by a factor the model does not include",
)


class NoSafetyRegion(ValueError):
    pass


class UnknownLabel(KeyError):
    def __init__(self, label: str):
        super().__init__(label)
        self.label = label

    def __str__(self) -> str:
        return f"no rule labelled {self.label!r}"


class MissingVariable(KeyError):
    def __init__(self, step: int, name: str):
        super().__init__(name)
        self.step = step
        self.name = name

    def __str__(self) -> str:
        return f"trace step {self.step} does not bind {self.name!r}"


def fmt_num(x: float) -> str:
    """Shortest text that reads back as ``x`` (integers without a trailing ``.0``)."""
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return repr(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


@dataclass
class Finding:
    kind: str
    involved: tuple = ()
    narrative: str = ""
    witness: Optional[dict] = None  # name -> Interval
    certificate: Optional[dict] = None  # name -> float
    delta: Optional[float] = None
    residual: Optional[float] = None
    step: Optional[int] = None  # trace violations: index of the later step

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown finding kind {self.kind!r}")
        self.involved = tuple(self.involved)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "involved": list(self.involved),
            "narrative": self.narrative,
            "witness": None if self.witness is None else {k: [v.lo, v.hi] for k, v in self.witness.items()},
            "certificate": None if self.certificate is None else dict(self.certificate),
            "delta": self.delta,
        }
        if self.residual is not None:
            d["residual"] = self.residual
        if self.step is not None:
            d["step"] = self.step
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Finding":
        w = d.get("witness")
        return cls(
            kind=d["kind"],
            involved=tuple(d.get("involved", ())),
            narrative=d.get("narrative", ""),
            witness=None if w is None else {k: Interval(float(v[0]), float(v[1])) for k, v in w.items()},
            certificate=None if d.get("certificate") is None else {k: float(v) for k, v in d["certificate"].items()},
            delta=d.get("delta"),
            residual=d.get("residual"),
            step=d.get("step"),
        )

    def to_text(self) -> str:
        head = f"[{self.kind}]"
        if self.involved:
            head += " " + ", ".join(self.involved)
        lines = [head, "  " + self.narrative.replace("\n", "\n  ")]
        if self.certificate:
            lines.append("  certificate: " + ", ".join(f"{k} = {fmt_num(v)}" for k, v in self.certificate.items()))
        if self.witness:
            lines.append("  witness box:")
            lines += [f"    {k} : [{fmt_num(v.lo)}, {fmt_num(v.hi)}]" for k, v in self.witness.items()]
        return "\n".join(lines)


@dataclass
class ValidationReport:
    model: str
    config: dict = field(default_factory=dict)
    findings: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    @property
    def clean(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "config": dict(self.config),
            "verdicts": dict(self.verdicts),
            "findings": [f.to_dict() for f in self.findings],
            "warnings": [f.to_dict() for f in self.warnings],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ValidationReport":
        return cls(
            model=d["model"],
            config=dict(d.get("config", {})),
            findings=[Finding.from_dict(f) for f in d.get("findings", [])],
            warnings=[Finding.from_dict(f) for f in d.get("warnings", [])],
            verdicts=dict(d.get("verdicts", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ValidationReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        cfg = ", ".join(f"{k}={v}" for k, v in self.config.items())
        out = [f"model {self.model}", f"config: {cfg}", "verdicts:"]
        out += [f"  {k}: {v}" for k, v in self.verdicts.items()]
        out.append(f"{len(self.findings)} finding(s), {len(self.warnings)} warning(s)")
        for f in self.findings:
            out.append(f.to_text())
        for w in self.warnings:
            out.append("warning " + w.to_text())
        return "\n".join(out) + "\n"


# -- shared machinery ----------------------------------------------------------

def _tighten(a: AtomicConstraint, margin: str) -> AtomicConstraint:
    if a.rel in ("<", "<="):
        return AtomicConstraint(a.lhs, "<=", Sub(a.rhs, Constant(margin)))
    if a.rel in (">", ">="):
        return AtomicConstraint(a.lhs, ">=", Add(a.rhs, Constant(margin)))
    return a


def _holds_exactly(extras: Sequence[Clause], point: Mapping[str, float]) -> bool:
    try:
        return all(any(a.holds(point) for a in c.disjuncts) for c in extras)
    except ZeroDivisionError:
        return False


@dataclass
class _Outcome:
    verdict: object
    hard: bool = False
    system: Optional[ConstraintSystem] = None

    @property
    def label(self) -> str:
        if isinstance(self.verdict, DeltaSat):
            return "delta-sat" if self.hard else "boundary"
        return self.verdict.status


def _feasible_in_domain(a: AtomicConstraint, base: ConstraintSystem) -> bool:
    """False only for a ``var REL const`` atom that no point of the var's declared range satisfies."""
    if isinstance(a.lhs, Variable) and isinstance(a.rhs, Constant):
        name, rel, c = a.lhs.name, a.rel, Fraction(a.rhs.text)
    elif isinstance(a.rhs, Variable) and isinstance(a.lhs, Constant):
        name, rel, c = a.rhs.name, _FLIP[a.rel], Fraction(a.lhs.text)
    else:
        return True
    try:
        v = base.var(name)
    except KeyError:
        return True
    if not v.bounds_text:
        return True
    lo, hi = Fraction(v.bounds_text[0]), Fraction(v.bounds_text[1])
    return {
        "<": lo < c,
        "<=": lo <= c,
        ">": hi > c,
        ">=": hi >= c,
        "=": lo <= c <= hi,
    }[rel]


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}


def _decide(base: ConstraintSystem, extras: Sequence[Clause], cfg: SolverConfig) -> _Outcome:
    """Solve ``base`` plus ``extras`` and classify a DeltaSat as hard or boundary-only.

    Disjuncts that cannot hold anywhere in their variable's declared range are
    dropped first, so a closed domain edge is not mistaken for a rule boundary.
    """
    pruned = []
    for c in extras:
        keep = tuple(a for a in c.disjuncts if _feasible_in_domain(a, base))
        if not keep:
            return _Outcome(Unsat(), False, None)
        pruned.append(Clause(keep))
    extras = pruned
    sys = base.with_clauses(*extras)
    r = solve(sys, cfg)
    if not isinstance(r, DeltaSat):
        return _Outcome(r, False, sys)
    if _holds_exactly(extras, r.certificate_point):
        return _Outcome(r, True, sys)
    margin = normalize_decimal(2 * cfg.delta)
    tight = base.with_clauses(*(Clause(tuple(_tighten(a, margin) for a in c.disjuncts)) for c in extras))
    r2 = solve(tight, cfg)
    if isinstance(r2, DeltaSat):
        return _Outcome(r2, True, tight)
    return _Outcome(r, False, sys)


def _finding(kind: str, r: DeltaSat, involved, narrative: str) -> Finding:
    return Finding(kind, tuple(involved), narrative, dict(r.witness), dict(r.certificate_point), r.delta)


def _assign(point: Mapping[str, float], names: Iterable[str]) -> str:
    return ", ".join(f"{n} = {fmt_num(point[n])}" for n in names)


def _guard_table(m: HealthModel) -> list:
    return compile_guards(m.rules, m.error_map)


def _domain_system(m: HealthModel) -> ConstraintSystem:
    return ConstraintSystem.build(m.rule_table.domain, (), bounds=True)


def _guard_text(atoms) -> str:
    return " and ".join(format_atom(a) for a in atoms)


# -- spoof -----------------------------------------------------------------------

def find_spoof(m: HealthModel, s: Scenario, cfg: SolverConfig = SolverConfig(), k: int = 1,
               separation: Optional[float] = None, reference: Optional[Mapping[str, float]] = None) -> list:
    """Readings of untrusted variables that the model accepts alongside the trusted ones.

    With a reference assignment (the readings known to be real), a max-norm ball
    of radius ``separation`` around it is excluded so only other values count.
    """
    sep = 10 * cfg.delta if separation is None else separation
    ref = dict(s.reference if reference is None else reference)
    sys = lower(m, s)
    if ref:
        block = blocking_clause(ref, list(ref), sep + cfg.delta)
        sys = sys.with_clauses(block)
    verdicts = solve_enumerate(sys, cfg, k, sep)
    untrusted = [v.name for v in sys.vars if v.trust == "untrusted"]
    trusted = [v.name for v in sys.vars if v.trust == "trusted"]
    dyn = ", ".join(d.name for d in m.dynamics) or "the model"
    out = []
    for r in verdicts:
        if not isinstance(r, DeltaSat):
            continue
        p = r.certificate_point
        text = (f"The model ({dyn}) accepts {_assign(p, untrusted) or 'the readings'}"
                f" together with the trusted values {_assign(p, trusted) or '(none)'}")
        if ref:
            text += f", although these differ from the reference readings {_assign(ref, ref)} by at least {fmt_num(sep)}"
        text += ".\nPossible causes:\n" + "\n".join(f"- {c}" for c in POSSIBLE_CAUSES)
        out.append(_finding("spoof", r, untrusted, text))
    return out


def _spoof_verdict(m, s, cfg, k, separation):
    findings = find_spoof(m, s, cfg, k, separation)
    if findings:
        return findings, "delta-sat"
    sep = 10 * cfg.delta if separation is None else separation
    sys = lower(m, s)
    if s.reference:
        sys = sys.with_clauses(blocking_clause(s.reference, list(s.reference), sep + cfg.delta))
    return findings, solve(sys, cfg).status


# -- unsafe ----------------------------------------------------------------------

def check_unsafe(m: HealthModel, cfg: SolverConfig = SolverConfig(), scenario: Optional[Scenario] = None,
                 warnings: Optional[list] = None) -> list:
    """States the model accepts that fall outside the declared safe region."""
    return _unsafe(m, cfg, scenario, warnings)[0]


def _unsafe(m, cfg, scenario, warnings):
    if not m.safety:
        raise NoSafetyRegion(f"model {m.name} declares no safe region")
    s = scenario if scenario is not None else Scenario(horizon=1)
    timed = m.timing()
    H = max(s.horizon, 1) if m.dynamics else s.horizon
    if H != s.horizon:
        s = Scenario(s.fixed, H, s.free, s.reference, s.layout, s.delta, s.precision, s.budget)
    placed = [at_step(a, H, timed) for a in m.safety]
    static = {n for a in placed for n in a.free_vars() if parse_step_name(n)[1] is None}
    base = lower(m, s, extra_static=static)
    neg = Clause(tuple(b for a in placed for b in negate(a)))
    o = _decide(base, [neg], cfg)
    if not isinstance(o.verdict, DeltaSat):
        return [], o.label
    p = o.verdict.certificate_point
    names = sorted({n for a in placed for n in a.free_vars()})
    text = (f"The model accepts {_assign(p, [v.name for v in base.vars])}, which leaves the safe region "
            f"({_guard_text(placed)}) at {_assign(p, names)}.")
    f = _finding("unsafe", o.verdict, ("safe",), text)
    if o.hard:
        return [f], o.label
    if warnings is not None:
        f.narrative = "Only at the delta boundary: " + f.narrative
        warnings.append(f)
    return [], o.label


# -- reachability ------------------------------------------------------------------

@dataclass
class Reachability:
    label: str
    horizon: int
    reachable: bool
    step: Optional[int] = None
    verdict: Optional[DeltaSat] = None
    finding: Optional[Finding] = None
    statuses: tuple = ()  # per-step solver status, 1..h


def _init_scenario(scenario: Optional[Scenario], h: int) -> Scenario:
    if scenario is None:
        return Scenario(horizon=h)
    keep = {n: v for n, v in scenario.fixed.items() if parse_step_name(n)[1] in (None, 0)}
    layout = []
    for kind, x in scenario.layout:
        if kind == "fix":
            names = tuple(n for n in x if n in keep)
            if names:
                layout.append(("fix", names))
    return Scenario(keep, h, None, {}, tuple(layout))


def check_reachable(m: HealthModel, label: str, H: int, cfg: SolverConfig = SolverConfig(),
                    scenario: Optional[Scenario] = None) -> Reachability:
    """Search h = 1..H for an unrolled trace that ends inside the guard of ``label``.

    Initial conditions are the scenario's step-0 and static fixes. Inputs get a
    fresh variable per step, bounded by their declared ranges.
    """
    table = dict(_guard_table(m))
    if label not in table:
        raise UnknownLabel(label)
    if int(H) != H or H < 1:
        raise ValueError(f"horizon must be a positive integer, got {H}")
    timed = m.timing()
    statuses = []
    for h in range(1, H + 1):
        s = _init_scenario(scenario, h)
        placed = [at_step(a, h, timed) for a in table[label]]
        static = {n for a in placed for n in a.free_vars() if parse_step_name(n)[1] is None}
        base = lower(m, s, extra_static=static)
        o = _decide(base, [Clause.of(a) for a in placed], cfg)
        statuses.append(o.label)
        if isinstance(o.verdict, DeltaSat) and o.hard:
            return Reachability(label, H, True, h, o.verdict, None, tuple(statuses))
    unknown = "unknown" in statuses
    text = (f"No trace of at most {H} step(s) under the declared dynamics and input ranges ends in rule "
            f"{label} ({_guard_text(table[label])}). Unreachability is checked up to this horizon only.")
    if unknown:
        text += " Some steps were inconclusive within the search budget."
    f = Finding("unreachable", (label,), text, None, None, cfg.delta)
    return Reachability(label, H, False, None, None, f, tuple(statuses))


# -- rule tables -------------------------------------------------------------------

def check_exhaustive(m: HealthModel, cfg: SolverConfig = SolverConfig(), warnings: Optional[list] = None) -> list:
    """Points of the guard variables' declared domain matched by no rule."""
    return _exhaustive(m, cfg, warnings)[0]


def _exhaustive(m, cfg, warnings):
    table = _guard_table(m)
    if not table:
        raise ValueError("model has no rules")
    base = _domain_system(m)
    extras = [Clause(tuple(b for a in atoms for b in negate(a))) for _, atoms in table]
    o = _decide(base, extras, cfg)
    if not isinstance(o.verdict, DeltaSat):
        return [], o.label
    p = o.verdict.certificate_point
    labels = [lab for lab, _ in table]
    text = f"No rule ({', '.join(labels)}) matches {_assign(p, base.names)}."
    f = _finding("gap", o.verdict, labels, text)
    if o.hard:
        return [f], o.label
    if warnings is not None:
        f.narrative = "Only at the delta boundary: " + f.narrative
        warnings.append(f)
    return [], o.label


def check_overlap(m: HealthModel, cfg: SolverConfig = SolverConfig(), warnings: Optional[list] = None) -> list:
    """Pairs of rules whose guards are satisfied by a common point."""
    return _overlap(m, cfg, warnings)[0]


def _overlap(m, cfg, warnings):
    table = _guard_table(m)
    base = _domain_system(m)
    findings, verdicts = [], {}
    for i in range(len(table)):
        for j in range(i + 1, len(table)):
            (la, ga), (lb, gb) = table[i], table[j]
            o = _decide(base, [Clause.of(a) for a in list(ga) + list(gb)], cfg)
            verdicts[f"{la}|{lb}"] = o.label
            if not isinstance(o.verdict, DeltaSat):
                continue
            p = o.verdict.certificate_point
            text = f"Rules {la} and {lb} both match {_assign(p, base.names)}."
            f = _finding("overlap", o.verdict, (la, lb), text)
            if o.hard:
                findings.append(f)
            elif warnings is not None:
                f.narrative = "Only at the delta boundary (the bands touch): " + f.narrative
                warnings.append(f)
    return findings, verdicts


# -- traces --------------------------------------------------------------------------

def check_trace(m: HealthModel, trace: Sequence[Mapping[str, float]], delta: float = 0.01) -> list:
    """Check each consecutive pair of readings against the dynamics equations."""
    out = []
    for k in range(len(trace) - 1):
        cur, nxt = trace[k], trace[k + 1]
        for dyn in m.dynamics:
            point = {}
            for n in sorted(dyn.atom.free_vars()):
                base, idx = split_index(n)
                if idx == 0:
                    src = [(k, cur)]
                elif idx == 1:
                    src = [(k + 1, nxt)]
                else:
                    src = [(k + 1, nxt), (k, cur)]
                for _, step in src:
                    if base in step:
                        point[n] = float(step[base])
                        break
                else:
                    raise MissingVariable(src[0][0], base)
            r = atom_residual(dyn.atom, point)
            if r > delta:
                text = (f"Step {k} -> {k + 1} violates equation {dyn.name} ({format_atom(dyn.atom)}) "
                        f"with residual {fmt_num(r)} at {_assign(point, sorted(point))}.")
                out.append(Finding("trace-violation", (dyn.name,), text, None, point, delta, r, k + 1))
    return out


# -- the whole battery -------------------------------------------------------------------

def applicable(m: HealthModel, scenario: Optional[Scenario]) -> list:
    out = []
    if scenario is not None and m.dynamics:
        out.append("spoof")
    if m.safety:
        out.append("unsafe")
    if m.rules and m.dynamics and _timed_rules(m):
        out.append("reachable")
    if m.rules:
        out.append("exhaustive")
    if len(m.rules) >= 2:
        out.append("overlap")
    return out


def _timed_rules(m: HealthModel) -> list:
    timed = m.timing()
    return [r.label for r in m.rules if any(split_index(n)[0] in timed for a in r.guard for n in a.free_vars())]


_ORDER = {k: i for i, k in enumerate(KINDS)}


def run_analyses(m: HealthModel, scenario: Optional[Scenario] = None, cfg: SolverConfig = SolverConfig(),
                 only: Optional[Iterable[str]] = None, horizon: Optional[int] = None, k: int = 1,
                 separation: Optional[float] = None) -> ValidationReport:
    """Run the selected analyses (default: every applicable one) and merge the results."""
    todo = applicable(m, scenario)
    if only is not None:
        only = list(only)
        for a in only:
            if a not in ANALYSES:
                raise ValueError(f"unknown analysis {a!r}; choose from {', '.join(ANALYSES)}")
        todo = [a for a in todo if a in only]
    H = horizon if horizon is not None else (scenario.horizon if scenario is not None else 1)
    H = max(int(H), 1)
    rep = ValidationReport(m.name, {"delta": cfg.delta, "precision": cfg.precision, "horizon": H, "budget": cfg.budget})
    findings, warnings = [], []
    if "spoof" in todo:
        f, v = _spoof_verdict(m, scenario, cfg, k, separation)
        findings += f
        rep.verdicts["spoof"] = v
    if "unsafe" in todo:
        s = scenario if scenario is not None else Scenario(horizon=H)
        f, v = _unsafe(m, cfg, s, warnings)
        findings += f
        rep.verdicts["unsafe"] = v
    if "reachable" in todo:
        for lab in sorted(_timed_rules(m)):
            r = check_reachable(m, lab, H, cfg, scenario)
            rep.verdicts[f"reachable:{lab}"] = f"reachable at step {r.step}" if r.reachable else "unreachable"
            if r.finding is not None:
                findings.append(r.finding)
    if "exhaustive" in todo:
        f, v = _exhaustive(m, cfg, warnings)
        findings += f
        rep.verdicts["exhaustive"] = v
    if "overlap" in todo:
        f, vs = _overlap(m, cfg, warnings)
        findings += f
        for key in sorted(vs):
            rep.verdicts[f"overlap:{key}"] = vs[key]
    key = lambda f: (_ORDER[f.kind], f.involved)
    rep.findings = sorted(findings, key=key)
    rep.warnings = sorted(warnings, key=key)
    return rep

