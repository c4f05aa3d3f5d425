"""Sum/difference noise of the twin beams versus analysis-cavity detuning.

Writes a CSV table (delta, sum_noise, diff_noise, w_p, w_q) for the fitted
operating point. Plot the columns against delta with any external tool.
"""

import argparse

import numpy as np

from tricolor import tables
from tricolor.analysis_cavity import CavityParams, scan_curve
from tricolor.opo import OpoParams, spectral_covariance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=1.34)
    ap.add_argument("--delta-range", type=float, default=3.0)
    ap.add_argument("--n-points", type=int, default=121)
    ap.add_argument("-o", "--output", default="detuning_scan.csv")
    args = ap.parse_args()

    params = OpoParams(sigma=args.sigma, delta0=0.2, delta=0.26, excess_pump_phase_noise=15.0)
    cavity = CavityParams()
    cov = spectral_covariance(params, cavity.analysis_freq)
    grid = np.linspace(-args.delta_range, args.delta_range, args.n_points)
    table = scan_curve(cov, grid, cavity)
    tables.write_scan(args.output, table)
    i0 = int(np.argmin(np.abs(grid)))
    print(f"wrote {args.output}: diff channel at delta={grid[i0]:+.2f} is {table.diff_noise[i0]:.3f}")


if __name__ == "__main__":
    main()
