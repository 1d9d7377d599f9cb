"""Text formats: ``.hcm`` models, ``.scn`` scenarios and trace files.

Model files are line oriented::

    format 1
    model diabetes_medication
    var bg : Int in [0, 40] level interface unit mmol/L
    var i : Real in [1, 5] level environmental
    var err : Real +- 0.5 level mechanical
    dynamics glucose: bg@t+1 = bg@t - (i@t+1 - err)
    rule high: 10 <= bg < 13.33
    safe 4 <= bg <= 10

``#`` starts a comment. Parsing never raises anything but :class:`ModelError`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Optional

from .expr import (
    LEVELS,
    Add,
    AtomicConstraint,
    Constant,
    Div,
    Expr,
    ExprError,
    Mul,
    Neg,
    Sub,
    Variable,
    VarDecl,
    normalize_decimal,
)
from .interval import Interval
from .model import (
    DuplicateDeclaration,
    Dynamic,
    HealthModel,
    ModelError,
    ModelSyntaxError,
    Rule,
    Scenario,
    SemanticError,
    UnknownIdentifier,
    canonical_step_name,
    split_index,
)

FORMAT_VERSION = "1"

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>\d+(?:\.\d+)?|\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:@t(?:\+1)?)?)
  | (?P<op><=|>=|==|\+-|[<>=+\-*/()\[\]{},:])
    """,
    re.VERBOSE,
)

_UNIT = re.compile(r"\sunit\s+(\S.*)$")

_RELOPS = ("<=", ">=", "==", "<", ">", "=")


@dataclass
class Tok:
    kind: str
    text: str
    col: int


def _tokenize(line: str, lineno: int) -> list:
    out, pos = [], 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if not m:
            raise ModelSyntaxError(lineno, pos + 1, "a token", line[pos])
        kind = m.lastgroup
        if kind != "ws":
            out.append(Tok(kind, m.group(), pos + 1))
        pos = m.end()
    return out


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


class _Line:
    """Cursor over one line's tokens."""

    def __init__(self, toks: list, lineno: int, raw: str, refs: list, enum_refs: list):
        self.toks, self.i, self.lineno, self.raw = toks, 0, lineno, raw
        self.refs, self.enum_refs = refs, enum_refs

    def peek(self, off: int = 0) -> Optional[Tok]:
        j = self.i + off
        return self.toks[j] if j < len(self.toks) else None

    def col(self) -> int:
        t = self.peek()
        return t.col if t else len(self.raw.rstrip()) + 1

    def fail(self, expected: str):
        t = self.peek()
        raise ModelSyntaxError(self.lineno, self.col(), expected, t.text if t else "end of line")

    def next(self) -> Tok:
        t = self.peek()
        if t is None:
            self.fail("more input")
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t is not None and t.text == text and t.kind != "num":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        t = self.peek()
        if t is None or t.text != text:
            self.fail(repr(text))
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Tok:
        t = self.peek()
        if t is None or t.kind != "ident":
            self.fail(what)
        self.i += 1
        return t

    def number(self) -> str:
        neg = self.accept("-")
        t = self.peek()
        if t is None or t.kind != "num":
            self.fail("number")
        self.i += 1
        return normalize_decimal(("-" if neg else "") + t.text)

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def end(self):
        if not self.done():
            self.fail("end of line")

    # -- expressions --------------------------------------------------------
    def expr(self) -> Expr:
        e = self.term()
        while True:
            t = self.peek()
            if t is None or t.kind != "op" or t.text not in ("+", "-", "+-"):
                return e
            self.i += 1
            if t.text == "+-":
                e = Add(e, self._negated_unary(t))
            elif t.text == "+":
                e = Add(e, self.term())
            else:
                e = Sub(e, self.term())

    def _negated_unary(self, t: Tok) -> Expr:
        # "a +-b" lexes as "+-"; read as "a + -b"
        t2 = self.peek()
        if t2 is not None and t2.kind == "num":
            self.i += 1
            rest = self._term_tail(Constant("-" + t2.text))
            return rest
        return self._term_tail(Neg(self.unary()))

    def term(self) -> Expr:
        return self._term_tail(self.unary())

    def _term_tail(self, e: Expr) -> Expr:
        while True:
            t = self.peek()
            if t is None or t.kind != "op" or t.text not in ("*", "/"):
                return e
            self.i += 1
            rhs = self.unary()
            e = Mul(e, rhs) if t.text == "*" else Div(e, rhs)

    def unary(self) -> Expr:
        t = self.peek()
        if t is not None and t.kind == "op" and t.text == "-":
            self.i += 1
            t2 = self.peek()
            if t2 is not None and t2.kind == "num":
                self.i += 1
                return Constant("-" + t2.text)
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.peek()
        if t is None:
            self.fail("expression")
        if t.kind == "num":
            self.i += 1
            return Constant(t.text)
        if t.kind == "ident" and t.text not in ("and", "is"):
            self.i += 1
            v = Variable(t.text)
            self.refs.append((t.text, self.lineno, t.col))
            return v
        if t.text == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expression")

    def relop(self) -> Optional[str]:
        t = self.peek()
        if t is not None and t.kind == "op" and t.text in _RELOPS:
            self.i += 1
            return "=" if t.text == "==" else t.text
        return None

    def chain(self, enums: dict) -> list:
        """``e1 rel e2 [rel e3 ...]`` or ``name is Value``."""
        t0, t1 = self.peek(), self.peek(1)
        if t0 is not None and t1 is not None and t0.kind == "ident" and t1.text == "is":
            self.i += 2
            val = self.ident("enumeration value")
            self.enum_refs.append((t0.text, val.text, self.lineno, val.col))
            self.refs.append((t0.text, self.lineno, t0.col))
            return [AtomicConstraint(Variable(t0.text), "=", _EnumValue(t0.text, val.text))]
        left = self.expr()
        rel = self.relop()
        if rel is None:
            self.fail("relation (<=, <, =, >=, >)")
        atoms = []
        while rel is not None:
            right = self.expr()
            atoms.append(AtomicConstraint(left, rel, right))
            left = right
            rel = self.relop()
        return atoms

    def guard(self, enums: dict) -> list:
        atoms = self.chain(enums)
        while self.accept("and"):
            atoms.extend(self.chain(enums))
        return atoms


class _EnumValue(Constant):
    """Placeholder constant resolved to the value's index after all declarations are read."""

    def __init__(self, var: str, value: str):
        object.__setattr__(self, "text", "0")
        object.__setattr__(self, "enum_var", var)
        object.__setattr__(self, "enum_value", value)


def _parse_domain(ln: _Line, sort: str):
    if ln.accept("in"):
        ln.expect("[")
        lo = ln.number()
        ln.expect(",")
        hi = ln.number()
        ln.expect("]")
        if Decimal(lo) > Decimal(hi):
            raise SemanticError(f"empty range [{lo}, {hi}]", ln.lineno, ln.col())
        return (lo, hi), None
    if ln.accept("+-"):
        b = ln.number()
        if Decimal(b) < 0:
            raise SemanticError("error bound must be >= 0", ln.lineno, ln.col())
        return (normalize_decimal("-" + b) if b != "0" else "0", b), b
    return None, None


def parse_model(text: str) -> HealthModel:
    """Parse a ``.hcm`` model; raises :class:`ModelError` with a line/column on bad input."""
    try:
        return _parse_model(text)
    except ModelError:
        raise
    except RecursionError:
        raise ModelSyntaxError(1, 1, "a shallower expression") from None
    except Exception as e:  # parsing is total: never leak a non-model exception
        raise ModelSyntaxError(1, 1, "well-formed model", str(e)) from None


def _parse_model(text: str) -> HealthModel:
    if not isinstance(text, str):
        raise ModelSyntaxError(1, 1, "text")
    _refs: list = []
    _enum_refs: list = []
    lines = text.split("\n")
    name = None
    seen_format = False
    params: list = []
    decl_lines: dict = {}
    errors: list = []
    level_sets: list = []
    dynamics: list = []
    rules: list = []
    safety: list = []
    enums: dict = {}
    synthetic: list = []

    for lineno, raw in enumerate(lines, start=1):
        if "# synthetic" in raw:
            synthetic.append(lineno)
        body = _strip_comment(raw)
        unit_text = ""
        um = _UNIT.search(body)
        if um and body.lstrip().startswith("var"):
            unit_text = um.group(1).strip()
            body = body[: um.start()]
        toks = _tokenize(body, lineno)
        if not toks:
            continue
        ln = _Line(toks, lineno, body, _refs, _enum_refs)
        kw = ln.ident("keyword")
        if not seen_format:
            if kw.text != "format":
                raise ModelSyntaxError(lineno, kw.col, "'format 1' header", kw.text)
            v = ln.number()
            if v != FORMAT_VERSION:
                raise ModelSyntaxError(lineno, kw.col, f"format {FORMAT_VERSION}", v)
            ln.end()
            seen_format = True
            continue
        k = kw.text
        if k == "model":
            if name is not None:
                raise DuplicateDeclaration("model", lineno, kw.col)
            name = ln.ident("model name").text
            ln.end()
        elif k == "var":
            nt = ln.ident("variable name")
            if "@" in nt.text:
                raise ModelSyntaxError(lineno, nt.col, "plain variable name", nt.text)
            if nt.text in decl_lines:
                raise DuplicateDeclaration(nt.text, lineno, nt.col)
            ln.expect(":")
            st = ln.ident("sort (Int, Real or Enum)")
            values = ()
            if st.text == "Enum":
                ln.expect("{")
                vals = [ln.ident("enumeration value").text]
                while ln.accept(","):
                    vals.append(ln.ident("enumeration value").text)
                ln.expect("}")
                if len(set(vals)) != len(vals):
                    raise DuplicateDeclaration(f"{nt.text} value", lineno, st.col)
                values = tuple(vals)
                sort = "Int"
                bounds, err = ("0", str(len(vals) - 1)), None
            elif st.text in ("Int", "Real"):
                sort = st.text
                bounds, err = _parse_domain(ln, sort)
            else:
                raise ModelSyntaxError(lineno, st.col, "sort (Int, Real or Enum)", st.text)
            level, trust, unit = "none", "untrusted", unit_text
            while not ln.done():
                t = ln.ident("'level', 'trusted', 'untrusted' or 'unit'")
                if t.text == "level":
                    lv = ln.ident("level name")
                    if lv.text not in LEVELS:
                        raise ModelSyntaxError(lineno, lv.col, "one of " + ", ".join(LEVELS), lv.text)
                    level = lv.text
                elif t.text in ("trusted", "untrusted"):
                    trust = t.text
                else:
                    raise ModelSyntaxError(lineno, t.col, "'level', 'trusted', 'untrusted' or 'unit'", t.text)
            if bounds is None:
                dom, btext = Interval.entire(), ()
            else:
                dom, btext = Interval.from_decimal(*bounds), bounds
            try:
                decl = VarDecl(nt.text, sort, dom, level, trust, unit, values, btext)
            except ExprError as e:
                raise SemanticError(str(e), lineno, nt.col) from None
            params.append(decl)
            decl_lines[nt.text] = (lineno, nt.col)
            if values:
                enums[nt.text] = values
            if err is not None:
                errors.append((nt.text, err, lineno, nt.col))
        elif k == "error":
            nt = ln.ident("variable name")
            ln.expect("+-")
            b = ln.number()
            if Decimal(b) < 0:
                raise SemanticError("error bound must be >= 0", lineno, nt.col)
            ln.end()
            errors.append((nt.text, b, lineno, nt.col))
        elif k == "level":
            lv = ln.ident("level name")
            if lv.text not in LEVELS:
                raise ModelSyntaxError(lineno, lv.col, "one of " + ", ".join(LEVELS), lv.text)
            ln.expect(":")
            names = [ln.ident("variable name")]
            while ln.accept(","):
                names.append(ln.ident("variable name"))
            ln.end()
            level_sets.append((lv.text, names, lineno))
        elif k == "dynamics":
            label = f"eq{len(dynamics) + 1}"
            t0, t1 = ln.peek(), ln.peek(1)
            if t0 is not None and t1 is not None and t0.kind == "ident" and t1.text == ":":
                label = t0.text
                ln.i += 2
            if any(d[0].name == label for d in dynamics):
                raise DuplicateDeclaration(label, lineno, t0.col if t0 else 1)
            lhs = ln.expr()
            if not (ln.accept("=") or ln.accept("==")):
                ln.fail("'='")
            rhs = ln.expr()
            ln.end()
            dynamics.append((Dynamic(label, AtomicConstraint(lhs, "=", rhs)), lineno))
        elif k == "rule":
            lab = ln.ident("rule label")
            ln.expect(":")
            if any(r.label == lab.text for r, _ in rules):
                raise DuplicateDeclaration(lab.text, lineno, lab.col)
            atoms = ln.guard(enums)
            ln.end()
            rules.append((Rule(lab.text, atoms), lineno))
        elif k == "safe":
            atoms = ln.guard(enums)
            ln.end()
            safety.extend(atoms)
        else:
            raise ModelSyntaxError(lineno, kw.col, "a statement (model, var, error, level, dynamics, rule, safe)", k)

    if not seen_format:
        raise ModelSyntaxError(1, 1, "'format 1' header", "end of file")
    if name is None:
        raise ModelSyntaxError(len(lines), 1, "'model NAME' statement", "end of file")

    declared = {v.name for v in params}
    for ref, lineno, col in _refs:
        base, _ = split_index(ref)
        if base not in declared:
            raise UnknownIdentifier(ref, lineno, col)

    # enum values -> integer constants
    def resolve(a: AtomicConstraint) -> AtomicConstraint:
        if isinstance(a.rhs, _EnumValue):
            vals = enums[a.rhs.enum_var]
            return AtomicConstraint(a.lhs, "=", Constant(str(vals.index(a.rhs.enum_value))))
        return a

    for var, val, lineno, col in _enum_refs:
        if var not in enums:
            raise SemanticError(f"{var!r} is not an enumeration", lineno, col)
        if val not in enums[var]:
            raise UnknownIdentifier(val, lineno, col)
    rules_out = [Rule(r.label, [resolve(a) for a in r.guard]) for r, _ in rules]
    safety = [resolve(a) for a in safety]

    err_seen = set()
    err_out = []
    for n, b, lineno, col in errors:
        if n not in declared:
            raise UnknownIdentifier(n, lineno, col)
        if n in err_seen:
            raise DuplicateDeclaration(f"error {n}", lineno, col)
        err_seen.add(n)
        err_out.append((n, b))

    by_name = {v.name: v for v in params}
    for lv, names, lineno in level_sets:
        for t in names:
            if t.text not in by_name:
                raise UnknownIdentifier(t.text, lineno, t.col)
            by_name[t.text] = by_name[t.text].replace(level=lv)
    params = [by_name[v.name] for v in params]

    # a variable is either indexed everywhere in dynamics or nowhere
    indexed, plain = set(), set()
    for d, lineno in dynamics:
        for n in d.atom.free_vars():
            base, idx = split_index(n)
            (plain if idx is None else indexed).add(base)
    for n in sorted(indexed & plain):
        raise SemanticError(f"{n!r} is used both with and without a time index in dynamics")
    for r, lineno in rules:
        for a in r.guard:
            for n in a.free_vars():
                if "@" in n:
                    raise SemanticError(f"rule guards use plain names, found {n!r}", lineno)

    return HealthModel(
        name=name,
        params=tuple(params),
        error_map=tuple(err_out),
        dynamics=tuple(d for d, _ in dynamics),
        rules=tuple(rules_out),
        safety=tuple(safety),
        synthetic=tuple(synthetic),
    )


# -- printing ----------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2}
_SYM = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def format_expr(e: Expr) -> str:
    if isinstance(e, Constant):
        return e.text
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Neg):
        inner = format_expr(e.arg)
        if isinstance(e.arg, Variable) or isinstance(e.arg, Neg):
            return "-" + inner
        return f"-({inner})"
    p = _PREC[type(e)]
    left = format_expr(e.left)
    if type(e.left) in _PREC and _PREC[type(e.left)] < p:
        left = f"({left})"
    right = format_expr(e.right)
    if type(e.right) in _PREC and _PREC[type(e.right)] <= p:
        right = f"({right})"
    return f"{left} {_SYM[type(e)]} {right}"


def format_atom(a: AtomicConstraint, enums: Optional[dict] = None) -> str:
    enums = enums or {}
    if (
        a.rel == "="
        and isinstance(a.lhs, Variable)
        and a.lhs.name in enums
        and isinstance(a.rhs, Constant)
        and a.rhs.text.isdigit()
        and int(a.rhs.text) < len(enums[a.lhs.name])
    ):
        return f"{a.lhs.name} is {enums[a.lhs.name][int(a.rhs.text)]}"
    return f"{format_expr(a.lhs)} {a.rel} {format_expr(a.rhs)}"


def print_model(m: HealthModel) -> str:
    errs = dict(m.error_map)
    enums = {v.name: v.values for v in m.params if v.values}
    out = [f"format {FORMAT_VERSION}", f"model {m.name}"]
    for v in m.params:
        if v.values:
            s = f"var {v.name} : Enum {{{', '.join(v.values)}}}"
        else:
            s = f"var {v.name} : {v.sort}"
            if v.bounds_text:
                s += f" in [{v.bounds_text[0]}, {v.bounds_text[1]}]"
        if v.level != "none":
            s += f" level {v.level}"
        if v.trust != "untrusted":
            s += f" {v.trust}"
        if v.unit:
            s += f" unit {v.unit}"
        out.append(s)
    for n, b in m.error_map:
        out.append(f"error {n} +- {b}")
    for d in m.dynamics:
        out.append(f"dynamics {d.name}: {format_expr(d.atom.lhs)} = {format_expr(d.atom.rhs)}")
    for r in m.rules:
        out.append(f"rule {r.label}: " + " and ".join(format_atom(a, enums) for a in r.guard))
    for a in m.safety:
        out.append("safe " + format_atom(a, enums))
    return "\n".join(out) + "\n"


# -- scenarios ---------------------------------------------------------------

def _kv_lines(text: str, what: str):
    seen_format = False
    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = _strip_comment(raw).strip()
        if not body:
            continue
        if not seen_format:
            if body.split() != ["format", FORMAT_VERSION]:
                raise ModelSyntaxError(lineno, 1, f"'format {FORMAT_VERSION}' header", body)
            seen_format = True
            continue
        if "=" not in body:
            raise ModelSyntaxError(lineno, 1, "key = value", body)
        key, _, value = body.partition("=")
        yield lineno, key.strip(), value.strip()
    if not seen_format:
        raise ModelSyntaxError(1, 1, f"'format {FORMAT_VERSION}' header", "end of file")


def _pairs(value: str, lineno: int) -> list:
    out = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, val = item.rpartition(":")
        if not sep or not name.strip():
            raise ModelSyntaxError(lineno, 1, "name:value", item)
        try:
            out.append((canonical_step_name(name.strip()), normalize_decimal(val.strip())))
        except ExprError:
            raise ModelSyntaxError(lineno, 1, "decimal value", val.strip()) from None
    if not out:
        raise ModelSyntaxError(lineno, 1, "name:value", value)
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse a ``.scn`` file: ``format 1`` then ``key = value`` lines.

    Keys: ``fix`` (``name:value, ...``; one emitted assertion per line),
    ``bound`` (assert the declared range of a variable at that position),
    ``free``, ``reference``, ``horizon``, ``delta``, ``precision``, ``budget``.
    """
    try:
        fixed, layout, reference = {}, [], {}
        free = None
        opts: dict = {}
        for lineno, key, value in _kv_lines(text, "scenario"):
            if key == "fix":
                pairs = _pairs(value, lineno)
                for n, v in pairs:
                    if n in fixed:
                        raise DuplicateDeclaration(n, lineno, 1)
                    fixed[n] = v
                layout.append(("fix", tuple(n for n, _ in pairs)))
            elif key == "bound":
                for n in value.split(","):
                    if n.strip():
                        layout.append(("bound", canonical_step_name(n.strip())))
            elif key == "free":
                free = set(free or ()) | {canonical_step_name(n.strip()) for n in value.split(",") if n.strip()}
            elif key == "reference":
                reference.update({n: float(v) for n, v in _pairs(value, lineno)})
            elif key in ("horizon", "budget"):
                if not value.isdigit():
                    raise ModelSyntaxError(lineno, 1, "nonnegative integer", value)
                opts[key] = int(value)
            elif key in ("delta", "precision"):
                try:
                    x = float(Decimal(value))
                except (InvalidOperation, ValueError):
                    raise ModelSyntaxError(lineno, 1, "number", value) from None
                if not x > 0:
                    raise ModelSyntaxError(lineno, 1, "positive number", value)
                opts[key] = x
            else:
                raise ModelSyntaxError(lineno, 1, "scenario key", key)
        return Scenario(
            fixed=fixed,
            horizon=opts.get("horizon", 1),
            free=frozenset(free) if free is not None else None,
            reference=reference,
            layout=tuple(layout),
            delta=opts.get("delta"),
            precision=opts.get("precision"),
            budget=opts.get("budget"),
        )
    except ModelError:
        raise
    except Exception as e:
        raise ModelSyntaxError(1, 1, "well-formed scenario", str(e)) from None


def print_scenario(s: Scenario) -> str:
    out = [f"format {FORMAT_VERSION}", f"horizon = {s.horizon}"]
    for key in ("delta", "precision", "budget"):
        v = getattr(s, key)
        if v is not None:
            out.append(f"{key} = {normalize_decimal(v) if key != 'budget' else v}")
    for kind, x in s.layout:
        if kind == "fix":
            out.append("fix = " + ", ".join(f"{n}:{s.fixed[n]}" for n in x))
        else:
            out.append(f"bound = {x}")
    if s.free is not None:
        out.append("free = " + ", ".join(sorted(s.free)))
    if s.reference:
        out.append("reference = " + ", ".join(f"{n}:{normalize_decimal(v)}" for n, v in s.reference.items()))
    return "\n".join(out) + "\n"


# -- traces ------------------------------------------------------------------

def parse_trace(text: str) -> list:
    """One step per line: ``name=value`` pairs separated by commas. Blank lines and ``#`` comments are skipped."""
    steps = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = _strip_comment(raw).strip()
        if not body:
            continue
        step = {}
        for item in body.split(","):
            item = item.strip()
            if not item:
                continue
            name, sep, val = item.partition("=")
            if not sep or not name.strip():
                raise ModelSyntaxError(lineno, 1, "name=value", item)
            try:
                step[name.strip()] = float(Decimal(val.strip()))
            except (InvalidOperation, ValueError):
                raise ModelSyntaxError(lineno, 1, "number", val.strip()) from None
        steps.append(step)
    return steps


def load_model(path) -> HealthModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
