"""Check the delta-sat contract on random polynomial systems.

Every delta-sat answer must come with a certificate point that satisfies the
delta-weakened system; every unsat answer must leave no satisfying point on a
dense grid.

    python3 scripts/delta_contract_sweep.py --systems 200 --seed 20261015
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import grid_sat, random_system  # noqa: E402

from hcmcheck import SolverConfig  # noqa: E402
from hcmcheck.solver import DeltaSat, Unsat, certify, solve  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--systems", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20261015)
    ap.add_argument("--delta", type=float, default=0.01)
    ap.add_argument("--grid", type=int, default=10**6)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    cfg = SolverConfig(delta=args.delta, budget=200_000)
    counts = {"delta-sat": 0, "unsat": 0, "unknown": 0}
    bad = 0
    t = time.perf_counter()
    for k in range(args.systems):
        sys_ = random_system(rng)
        r = solve(sys_, cfg)
        counts[r.status] += 1
        if isinstance(r, DeltaSat) and not certify(sys_, r.certificate_point, cfg.delta):
            bad += 1
            print(f"system {k}: certificate rejected")
        if isinstance(r, Unsat) and grid_sat(sys_, args.grid) is not None:
            bad += 1
            print(f"system {k}: unsat but a grid point satisfies it")
    print(f"{args.systems} systems, {counts}, {bad} violation(s), {time.perf_counter() - t:.2f} s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
