"""Compare gap and overlap detection against a dense grid oracle.

Generates random 1-D rule tables, runs check_exhaustive and check_overlap, and
counts agreements with an integer-grid oracle at step 1e-3.

    python3 scripts/rule_table_sweep.py --tables 500 --seed 7
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import random_table, table_oracle  # noqa: E402

from hcmcheck import SolverConfig  # noqa: E402
from hcmcheck.analyses import check_exhaustive, check_overlap  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tables", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--delta", type=float, default=0.01)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    cfg = SolverConfig(delta=args.delta)
    stats = {"agree": 0, "boundary": 0, "disagree": 0}
    t = time.perf_counter()
    for k in range(args.tables):
        m, rules, W = random_table(rng)
        gap, overlap = table_oracle(rules, W)
        for check, expect in ((check_exhaustive, gap), (check_overlap, overlap)):
            warns = []
            got = bool(check(m, cfg, warns))
            if got == expect:
                stats["agree"] += 1
            elif warns:
                stats["boundary"] += 1
            else:
                stats["disagree"] += 1
                print(f"table {k}: {check.__name__} gave {got}, oracle {expect}, rules {rules}")
    print(f"{args.tables} tables, {stats}, {time.perf_counter() - t:.2f} s")
    return 1 if stats["disagree"] else 0


if __name__ == "__main__":
    sys.exit(main())
