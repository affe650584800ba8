"""Worst incorrect-string margin of random query batches, per batch size."""

import argparse

import numpy as np

from hamforge.instances import INVALID, NO, YES
from hamforge.query_oracle import random_query, verify_query_gap


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--batches", type=int, default=200)
    p.add_argument("--max-m", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'m':>2} {'batches':>8} {'worst_margin':>14} {'held':>6}")
    for m in range(1, args.max_m + 1):
        margins, held = [], 0
        for _ in range(args.batches):
            qs = [random_query(rng, str(s)) for s in rng.choice([YES, NO, INVALID], size=m)]
            r = verify_query_gap(qs)
            margins.append(r.worst_margin)
            held += r.holds
        print(f"{m:>2} {args.batches:>8} {min(margins):>14.6f} {held:>6}")


if __name__ == "__main__":
    main()
