"""Low-energy window of every toy parallel-query computation versus the machine output."""

import argparse

from hamforge.cook_levin import build_hardness_instance, scan_hardness_instance, toy_parallel_computations
from hamforge.query_oracle import run_parallel_oracle_machine


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    print(f"{'#':>2} {'m':>2} {'dim':>6} {'scale':>6} {'lambda':>10} {'z_min':>7} {'z_max':>7} {'verdict':>8} {'machine':>8}")
    for k, comp in enumerate(toy_parallel_computations(args.seed)):
        hi = build_hardness_instance(comp)
        scan = scan_hardness_instance(hi.instance, hi.quantum_sites)
        out = run_parallel_oracle_machine(comp).output
        print(
            f"{k:>2} {comp.m:>2} {hi.instance.H.dim:>6} {hi.scale:>6.0f} {scan.lam:>10.5f} "
            f"{scan.window_min:>7.3f} {scan.window_max:>7.3f} {scan.verdict:>8} {out:>8}"
        )


if __name__ == "__main__":
    main()
