"""Command-line front door: ``hcmcheck check|analyze|emit|monitor|solve``.

Exit codes: 0 clean, 1 internal error, 2 input error, 3 findings.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional

from . import analyses
from .dsl import load_model, load_scenario, parse_trace
from .model import ModelError, Scenario, lower
from .smtlib import ExternalResult, MalformedResult, emit, find_external_solver, print_external, run_external
from .solver import DeltaSat, SolverConfig, SolverError, solve

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_FINDINGS = 0, 1, 2, 3
DEFAULT_DELTA = 0.01


class InputError(Exception):
    pass


@dataclass
class CliConfig:
    subcommand: str
    model: str
    scenario: Optional[str] = None
    delta: Optional[float] = None
    precision: Optional[float] = None
    horizon: Optional[int] = None
    budget: Optional[int] = None
    format: str = "text"
    output: Optional[str] = None
    external_solver: Optional[str] = None
    parallel: bool = False

    def solver_config(self, scenario: Optional[Scenario]) -> SolverConfig:
        delta = self.delta if self.delta is not None else (scenario.delta if scenario and scenario.delta else DEFAULT_DELTA)
        prec = self.precision if self.precision is not None else (scenario.precision if scenario else None)
        budget = self.budget if self.budget is not None else (scenario.budget if scenario and scenario.budget else 1_000_000)
        return SolverConfig(delta=delta, precision=prec, budget=budget, parallel=self.parallel)


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _only(text: str) -> list:
    items = [x.strip() for x in text.split(",") if x.strip()]
    for x in items:
        if x not in analyses.ANALYSES:
            raise argparse.ArgumentTypeError(f"unknown analysis {x!r}; choose from {', '.join(analyses.ANALYSES)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hcmcheck", description="Validate multi-level health-condition models.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    c = sub.add_parser("check", help="parse and validate a model file")
    c.add_argument("model")

    def solver_flags(q, scenario_required=False):
        q.add_argument("model")
        q.add_argument("--scenario", required=scenario_required)
        q.add_argument("--delta", type=_positive(float))
        q.add_argument("--precision", type=_positive(float))
        q.add_argument("--budget", type=_positive(int))
        q.add_argument("--parallel", type=_bool, nargs="?", const=True, default=False)
        q.add_argument("--output", "-o")

    a = sub.add_parser("analyze", help="run the validation analyses")
    solver_flags(a)
    a.add_argument("--horizon", type=_positive(int))
    a.add_argument("--only", type=_only, help="comma-separated subset of: " + ", ".join(analyses.ANALYSES))
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.add_argument("--k", type=_positive(int), default=1, help="number of distinct spoof witnesses")
    a.add_argument("--separation", type=_positive(float), help="spoof separation (default 10*delta)")
    a.add_argument("--external-solver", dest="external_solver")

    e = sub.add_parser("emit", help="write the lowered scenario as an SMT-LIB script")
    e.add_argument("model")
    e.add_argument("--scenario", required=True)
    e.add_argument("--output", "-o")

    m = sub.add_parser("monitor", help="check a recorded trace against the dynamics")
    m.add_argument("model")
    m.add_argument("trace")
    m.add_argument("--delta", type=_positive(float), default=DEFAULT_DELTA)

    s = sub.add_parser("solve", help="decide the lowered scenario with the built-in solver")
    solver_flags(s, scenario_required=True)
    s.add_argument("--external-solver", dest="external_solver")
    return p


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from None


def _model(path: str):
    _read(path)
    try:
        return load_model(path)
    except ModelError as e:
        raise InputError(f"{path}:{e}") from None


def _scenario(path: Optional[str]) -> Optional[Scenario]:
    if path is None:
        return None
    _read(path)
    try:
        return load_scenario(path)
    except ModelError as e:
        raise InputError(f"{path}:{e}") from None


def _write(text: str, output: Optional[str], out) -> None:
    if output:
        try:
            with open(output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as e:
            raise InputError(f"{output}: {e.strerror or e}") from None
    else:
        out.write(text)


def cmd_check(ns, out) -> int:
    m = _model(ns.model)
    out.write(f"{ns.model}: ok, model {m.name} with {len(m.params)} variable(s), "
              f"{len(m.dynamics)} dynamics equation(s), {len(m.rules)} rule(s)\n")
    return EXIT_OK


def _external(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    found = find_external_solver(path)
    if found is None:
        raise InputError(f"external solver not found: {path}")
    return found


def cmd_analyze(ns, out) -> int:
    cfg_cli = CliConfig("analyze", ns.model, ns.scenario, ns.delta, ns.precision, ns.horizon, ns.budget,
                        ns.format, ns.output, ns.external_solver, ns.parallel)
    m = _model(ns.model)
    s = _scenario(ns.scenario)
    ext = _external(ns.external_solver)
    cfg = cfg_cli.solver_config(s)
    rep = analyses.run_analyses(m, s, cfg, only=ns.only, horizon=ns.horizon, k=ns.k, separation=ns.separation)
    if ext is not None and s is not None:
        r = run_external(lower(m, s), ext, cfg.delta)
        rep.verdicts["external"] = r.status
    text = rep.to_json() if ns.format == "json" else rep.to_text()
    _write(text, ns.output, out)
    return EXIT_FINDINGS if rep.findings else EXIT_OK


def cmd_emit(ns, out) -> int:
    m = _model(ns.model)
    s = _scenario(ns.scenario)
    _write(emit(lower(m, s)), ns.output, out)
    return EXIT_OK


def cmd_monitor(ns, out) -> int:
    m = _model(ns.model)
    text = _read(ns.trace)
    try:
        trace = parse_trace(text)
    except ModelError as e:
        raise InputError(f"{ns.trace}:{e}") from None
    try:
        found = analyses.check_trace(m, trace, ns.delta)
    except analyses.MissingVariable as e:
        raise InputError(f"{ns.trace}: {e}") from None
    out.write(f"{len(trace)} steps, {len(found)} violation(s)\n")
    for f in found:
        out.write(f"step {f.step}: equation {f.involved[0]} residual {analyses.fmt_num(f.residual)}\n")
    return EXIT_FINDINGS if found else EXIT_OK


def cmd_solve(ns, out) -> int:
    cfg_cli = CliConfig("solve", ns.model, ns.scenario, ns.delta, ns.precision, None, ns.budget,
                        "text", ns.output, ns.external_solver, ns.parallel)
    m = _model(ns.model)
    s = _scenario(ns.scenario)
    cfg = cfg_cli.solver_config(s)
    sys_ = lower(m, s)
    r = solve(sys_, cfg)
    if isinstance(r, DeltaSat):
        text = print_external(ExternalResult("delta-sat", cfg.delta, r.witness))
        text += "certificate: " + ", ".join(f"{k} = {analyses.fmt_num(v)}" for k, v in r.certificate_point.items()) + "\n"
    elif r.status == "unsat":
        text = "unsat\n"
    else:
        text = f"unknown (budget exhausted after {r.expanded} boxes, {r.frontier_size} open)\n"
    ext = _external(ns.external_solver)
    if ext is not None:
        e = run_external(sys_, ext, cfg.delta)
        text += f"external: {e.status}\n"
    _write(text, ns.output, out)
    return EXIT_OK


COMMANDS = {"check": cmd_check, "analyze": cmd_analyze, "emit": cmd_emit, "monitor": cmd_monitor, "solve": cmd_solve}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return COMMANDS[ns.subcommand](ns, out)
    except InputError as e:
        err.write(f"error: {e}\n")
        return EXIT_INPUT
    except (ModelError, SolverError, MalformedResult, analyses.NoSafetyRegion, analyses.UnknownLabel, ValueError) as e:
        err.write(f"error: {e}\n")
        return EXIT_INPUT
    except Exception as e:  # anything else is a bug
        err.write(f"internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
