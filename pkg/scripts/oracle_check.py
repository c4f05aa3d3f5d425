"""Compare the analytic spectral covariance with a Monte Carlo ensemble.

Prints the z-score of every independent matrix entry at one operating point.
"""

import argparse

import numpy as np

from tricolor.opo import OpoParams, spectral_covariance
from tricolor.quadratures import BASIS
from tricolor.sde import monte_carlo_covariance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=1.34)
    ap.add_argument("--delta0", type=float, default=0.2)
    ap.add_argument("--delta", type=float, default=0.26)
    ap.add_argument("--excess", type=float, default=15.0)
    ap.add_argument("--freq", type=float, default=27e6, help="analysis frequency in Hz")
    ap.add_argument("--n-traj", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = OpoParams(sigma=args.sigma, delta0=args.delta0, delta=args.delta, excess_pump_phase_noise=args.excess)
    ref = spectral_covariance(p, args.freq).matrix
    mc = monte_carlo_covariance(p, args.freq, n_traj=args.n_traj, seed=args.seed)
    z = mc.zscores(ref)
    for (i, j), zi in zip(zip(*np.triu_indices(6)), z):
        print(f"{BASIS[i]:>2},{BASIS[j]:<2}  model={ref[i, j]:+9.4f}  mc={mc.mean[i, j]:+9.4f}  z={zi:+5.2f}")
    print(f"max |z| = {np.max(np.abs(z)):.2f} over {len(z)} entries, {args.n_traj} trajectories")


if __name__ == "__main__":
    main()
