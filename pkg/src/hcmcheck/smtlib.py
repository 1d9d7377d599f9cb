"""SMT-LIB 2 (QF_NRA) emission and parsing of external delta-solver results."""

from __future__ import annotations

import math
import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Optional

from .expr import Add, AtomicConstraint, Clause, ConstraintSystem, Constant, Div, Expr, Mul, Neg, Sub, Variable
from .interval import Interval

ENV_SOLVER = "HCMCHECK_DREAL"


class UnsupportedSort(ValueError):
    pass


class MalformedResult(ValueError):
    def __init__(self, line: int, text: str = ""):
        super().__init__(f"malformed solver result at line {line}: {text!r}")
        self.line = line


_OP = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def smt_expr(e: Expr) -> str:
    if isinstance(e, Constant):
        return e.text
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Neg):
        return f"(- {smt_expr(e.arg)})"
    return f"({_OP[type(e)]} {smt_expr(e.left)} {smt_expr(e.right)})"


def smt_atom(a: AtomicConstraint) -> str:
    return f"({a.rel} {smt_expr(a.lhs)} {smt_expr(a.rhs)})"


def smt_clause(c: Clause) -> str:
    if len(c.disjuncts) == 1:
        return smt_atom(c.disjuncts[0])
    return "(or " + " ".join(smt_atom(a) for a in c.disjuncts) + ")"


@dataclass
class SmtScript:
    logic: str = "QF_NRA"
    declarations: list = field(default_factory=list)
    assertions: list = field(default_factory=list)

    @property
    def text(self) -> str:
        lines = [f"(set-logic {self.logic})"]
        lines += self.declarations
        lines += self.assertions
        lines += ["(check-sat)", "(exit)"]
        return "\n".join(lines) + "\n"


def build_script(sys: ConstraintSystem) -> SmtScript:
    script = SmtScript()
    for v in sys.vars:
        if v.sort not in ("Int", "Real"):
            raise UnsupportedSort(v.sort)
        script.declarations.append(f"(declare-fun {v.name} () {v.sort})")
    for group in sys.assertions:
        if not group:
            continue
        if len(group) == 1:
            body = smt_clause(group[0])
        else:
            body = "(and " + " ".join(smt_clause(c) for c in group) + ")"
        script.assertions.append(f"(assert {body})")
    return script


def emit(sys: ConstraintSystem) -> str:
    """Render ``sys`` as an SMT-LIB script; identical systems give identical bytes."""
    return build_script(sys).text


def tokens(text: str) -> list:
    """Whitespace-insensitive token list, for comparing scripts."""
    return re.findall(r"\(|\)|[^\s()]+", text)


@dataclass(frozen=True)
class ExternalResult:
    status: str  # "delta-sat" | "unsat"
    delta: Optional[float] = None
    ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("delta-sat", "unsat"):
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == "delta-sat") != bool(self.ranges):
            raise ValueError("ranges must be present exactly for delta-sat results")

    def __hash__(self):
        return hash((self.status, self.delta, tuple(self.ranges.items())))


_HEAD = re.compile(r"^delta-sat\s+with\s+delta\s*=\s*(\S+)$")
_RANGE = re.compile(r"^(\S+)\s*:\s*[\[(]\s*([^,\s]+)\s*,\s*([^\]\s]+)\s*[\])]$")


def _num(s: str) -> float:
    s = s.strip()
    if s in ("inf", "+inf", "INFTY", "+INFTY"):
        return math.inf
    if s in ("-inf", "-INFTY"):
        return -math.inf
    return float(s)


def parse_external(text: str) -> ExternalResult:
    """Parse the text a delta-solver prints: a status line, then ``name : [lo, hi]`` lines."""
    status, delta, ranges = None, None, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if status is None:
            if line == "unsat":
                status = "unsat"
                continue
            if line in ("sat", "delta-sat"):
                status = "delta-sat"
                continue
            m = _HEAD.match(line)
            if not m:
                raise MalformedResult(lineno, line)
            try:
                delta = float(m.group(1))
            except ValueError:
                raise MalformedResult(lineno, line) from None
            status = "delta-sat"
            continue
        if status == "unsat":
            raise MalformedResult(lineno, line)
        m = _RANGE.match(line)
        if not m:
            raise MalformedResult(lineno, line)
        try:
            lo, hi = _num(m.group(2)), _num(m.group(3))
        except ValueError:
            raise MalformedResult(lineno, line) from None
        if lo > hi:
            raise MalformedResult(lineno, line)
        ranges[m.group(1)] = Interval(lo, hi)
    if status is None:
        raise MalformedResult(1, "")
    if status == "delta-sat" and not ranges:
        raise MalformedResult(len(text.splitlines()) or 1, "delta-sat without ranges")
    return ExternalResult(status, delta, ranges)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def print_external(r: ExternalResult) -> str:
    if r.status == "unsat":
        return "unsat\n"
    lines = [f"delta-sat with delta = {_fmt(r.delta) if r.delta is not None else '0'}"]
    lines += [f"{k} : [{_fmt(v.lo)}, {_fmt(v.hi)}]" for k, v in r.ranges.items()]
    return "\n".join(lines) + "\n"


def find_external_solver(path: Optional[str] = None) -> Optional[str]:
    cand = path or os.environ.get(ENV_SOLVER) or shutil.which("dreal")
    if cand and (os.path.exists(cand) or shutil.which(cand)):
        return cand
    return None


def run_external(sys: ConstraintSystem, command: str, delta: Optional[float] = None, timeout: float = 60.0) -> ExternalResult:
    """Run an external solver on the emitted script (script path on argv, result on stdout)."""
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "query.smt2")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(emit(sys))
        argv = [command, "--model"]
        if delta is not None:
            argv += ["--precision", repr(delta)]
        argv.append(path)
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, check=False)
    return parse_external(proc.stdout)
