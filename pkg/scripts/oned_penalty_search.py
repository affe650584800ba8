"""Penalty doubling trail for the 1D toy instances."""

from hamforge.onedim import search_penalties, toy_suite


def main():
    for inst in toy_suite():
        found = search_penalties(inst)
        sep = found.report.separation
        print(f"{inst.name} expected={inst.expected} configs={inst.n_configs} a={sep.a:.4f} b={sep.b:.4f}")
        for d, null_ok, eig_dist, window_dist in found.trail:
            print(f"  penalty={d:>8.0f} null={'ok' if null_ok else 'no':>3} eig_trace={eig_dist:.3e} window_trace={window_dist:.3e}")
        print(f"  window <A> in [{sep.window_min:.5f}, {sep.window_max:.5f}]")


if __name__ == "__main__":
    main()
