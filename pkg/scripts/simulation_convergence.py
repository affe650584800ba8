"""Residuals of repetition-code simulations as the penalty strength grows."""

import argparse

import numpy as np

from hamforge.operator_core import Hamiltonian, LocalTerm, RegisterLayout
from hamforge.sim_reduce import build_code_simulation, perturbative_estimate, verify_simulation
from hamforge.trials import random_hermitian


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--qubits", type=int, default=2)
    p.add_argument("--leakage", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    n = args.qubits
    terms = [LocalTerm((i, i + 1), random_hermitian(rng, 4, 0.25)) for i in range(n - 1)]
    terms += [LocalTerm((i,), random_hermitian(rng, 2, 0.25)) for i in range(n)]
    H = Hamiltonian(RegisterLayout.qubits(n), tuple(terms))
    print(f"{'strength':>9} {'eta':>10} {'epsilon':>10} {'estimate':>10} {'shift':>10} {'code':>6}")
    for strength in np.geomspace(10, 1e4, 7):
        w = build_code_simulation(H, float(strength), args.leakage)
        r = verify_simulation(w)
        est = perturbative_estimate(w, float(strength), args.leakage)
        print(f"{strength:>9.1f} {r.eta_residual:>10.3e} {r.eps_residual:>10.3e} {est:>10.3e} {r.eigenvalue_shift:>10.3e} {r.code:>6}")


if __name__ == "__main__":
    main()
