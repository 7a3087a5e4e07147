"""Stationary covariance of the fractional OU process: variance and power-law tail.

    python scripts/fou_covariance_table.py
"""

from scipy import special

from hermitelab.constants import fou_covariance


def main():
    print(f"{'H':>5} {'rho(0)':>10} {'Gamma(2H)':>10} {'H Gamma(2H)':>12}   rho(s) s^(2-2H) for s = 10, 20, 40, 80")
    for H in (0.55, 0.6, 0.7, 0.8, 0.9):
        rho0 = fou_covariance(H, 1.0, 0.0).value
        tail = [fou_covariance(H, 1.0, s).value * s ** (2 - 2 * H) for s in (10, 20, 40, 80)]
        g = special.gamma(2 * H)
        print(f"{H:5.2f} {rho0:10.6f} {g:10.6f} {H * g:12.6f}   " + " ".join(f"{x:.5f}" for x in tail)
              + f"   (limit H(2H-1) = {H * (2 * H - 1):.5f})")


if __name__ == "__main__":
    main()
