"""Reproduce the three diabetes scenarios and the rejected medication input.

For each scenario, prints the emitted SMT-LIB script, the solver verdict and
witness, and the certificate point. Run from the repo root:

    python3 scripts/reproduce_scenarios.py [--delta D]
"""

import argparse
import time

from hcmcheck import load_model, load_scenario, lower, emit, solve, SolverConfig
from hcmcheck.analyses import fmt_num
from hcmcheck.smtlib import ExternalResult, print_external
from hcmcheck.solver import DeltaSat
from importlib.resources import files

MODELS = files("hcmcheck") / "models"
RUNS = (
    ("diabetes_medication", "diabetes_medication"),
    ("diabetes_medication", "diabetes_medication_rejected"),
    ("diabetes_diet", "diabetes_diet"),
    ("diabetes_exercise", "diabetes_exercise"),
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, help="override the scenario delta")
    ap.add_argument("--quiet", action="store_true", help="skip printing the scripts")
    args = ap.parse_args()
    for model, scn in RUNS:
        m = load_model(MODELS / f"{model}.hcm")
        s = load_scenario(MODELS / f"{scn}.scn")
        delta = args.delta or s.delta or 0.01
        sys_ = lower(m, s)
        print(f"== {scn} (delta = {fmt_num(delta)})")
        if not args.quiet:
            print(emit(sys_), end="")
        t = time.perf_counter()
        r = solve(sys_, SolverConfig(delta=delta))
        ms = (time.perf_counter() - t) * 1000
        if isinstance(r, DeltaSat):
            print(print_external(ExternalResult("delta-sat", delta, r.witness)), end="")
            print("certificate:", ", ".join(f"{k} = {fmt_num(v)}" for k, v in r.certificate_point.items()))
        else:
            print(r.status)
        print(f"({ms:.1f} ms)\n")


if __name__ == "__main__":
    main()
