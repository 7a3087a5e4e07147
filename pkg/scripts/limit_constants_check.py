"""Compare rescaled Monte Carlo variances with the analytic limit constants.

Brownian regime: Var(T^{-1/2} S_T(1)) against the Breuer-Major sigma^2.
fBm regime (q = 3, P = x^3): Var(T^{-H0} S_T(1)) against K1^2, computed with
and without the Beta factor carried by each contracted pair.

    python scripts/limit_constants_check.py --replications 1000
"""

import argparse

from hermitelab.constants import breuer_major_sigma, limit_constants
from hermitelab.functionals import ScanSettings, scan_scaling
from hermitelab.hermite import Polynomial
from hermitelab.process import HurstSpec, Kernel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replications", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    k = Kernel.exponential(1.0)

    spec, P = HurstSpec(1, 0.55), Polynomial([0, 0, 1])
    r = scan_scaling(spec, k, P, [2.0 ** j for j in range(8, 14)], args.replications, args.seed,
                     ScanSettings(dt=0.5))
    sigma2 = breuer_major_sigma(P, k, spec.H).value
    print("Brownian regime, q=1 H=0.55 P=x^2")
    for T, v in zip(r.T_grid, r.var_hat):
        print(f"  T={T:8g}  Var/T={v / T:.4f}")
    print(f"  Breuer-Major sigma^2 = {sigma2:.4f}")

    spec, P = HurstSpec(3, 0.8), Polynomial([0, 0, 0, 1])
    r = scan_scaling(spec, k, P, [2.0 ** j for j in range(10, 16)], args.replications, args.seed,
                     ScanSettings(dt=1.0, internal_per_step=2))
    plain = limit_constants(P, k, spec).K1
    beta = limit_constants(P, k, spec, include_beta=True).K1
    print("fBm regime, q=3 H=0.8 P=x^3")
    for T, v in zip(r.T_grid, r.var_hat):
        print(f"  T={T:8g}  Var/T^(2 H0)={v * T ** (-2 * spec.H0):.4g}")
    print(f"  K1^2 without Beta factors = {plain ** 2:.4g}, with Beta factors = {beta ** 2:.4g}")


if __name__ == "__main__":
    main()
