"""Nystrom spectrum of the killed Green operator for a few grid sizes and gamma values.

    python3 scripts/spectrum_demo.py --gammas 1.5 2 4 --sizes 200 400 800
"""
import argparse
import time

from qsdlab.model_measure import entrance_diagnostics, polynomial_sigma
from qsdlab.spectral_solver import ground_state_residual, hs_bound, solve, uniform_decay_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--gammas", type=float, nargs="+", default=[1.5, 2.0, 4.0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 400, 800])
    args = ap.parse_args()

    for g in args.gammas:
        p = polynomial_sigma(args.alpha, g)
        d = entrance_diagnostics(p)
        print(f"\ngamma={g:g}: I={d.entrance_integral:.6f} delta={d.delta:.6f} "
              f"lambda0 >= {d.lambda0_lower:.6f}  HS bound {hs_bound(p):.6f}")
        print(f"{'n':>6} {'L':>10} {'lambda0':>11} {'lambda1':>11} {'gap':>10} {'hs':>9} "
              f"{'resid':>9} {'rate30':>9} {'secs':>6}")
        for n in args.sizes:
            t0 = time.perf_counter()
            dec = solve(p, n)
            rate = uniform_decay_rate(dec, 30.0 / dec.lambda0)
            print(f"{n:6d} {dec.grid.L:10.4g} {dec.lambda0:11.7f} {dec.eigenvalues[1]:11.7f} {dec.gap:10.6f} "
                  f"{dec.hs_norm:9.6f} {ground_state_residual(dec):9.2e} {rate:9.6f} {time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
