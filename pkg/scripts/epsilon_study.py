"""Monte Carlo decay rate against the killing radius eps, next to the spectral lambda0.

Prints one row per eps level and the intercept of the fit linear in eps^(alpha-1).

    python3 scripts/epsilon_study.py --paths 50000 --threads 4
"""
import argparse
import time

import numpy as np

from qsdlab.experiments import sim_config, spectral_pipeline
from qsdlab.config import default_config
from qsdlab.path_simulator import extrapolate_eps, fit_decay_rate, run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--gamma", type=float, default=2.0)
    ap.add_argument("--paths", type=int, default=50_000)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 10 ** -2.5, 1e-3, 10 ** -3.5])
    ap.add_argument("--window", type=float, nargs=2, default=[1.0, 3.5])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    cfg = default_config(args.alpha, args.gamma).with_overrides(sim__n_paths=args.paths, sim__seed=args.seed)
    profile, dec = spectral_pipeline(cfg)
    print(f"spectral lambda0 = {dec.lambda0:.6f}")
    print(f"{'eps':>10} {'lambda_hat':>11} {'std_err':>9} {'rel_err':>8} {'substeps':>9} {'secs':>6}")
    rates = []
    for eps in args.eps:
        t0 = time.perf_counter()
        stats = run_ensemble(profile, sim_config(cfg, eps=eps), threads=args.threads)
        lam, se = fit_decay_rate(stats, tuple(args.window))
        rates.append(lam)
        print(f"{eps:10.3g} {lam:11.5f} {se:9.5f} {lam / dec.lambda0 - 1:8.4f} "
              f"{stats.substeps.mean():9.0f} {time.perf_counter() - t0:6.1f}")
    for k in range(2, len(rates) + 1):
        lam = extrapolate_eps(args.eps[:k], rates[:k], args.alpha)
        print(f"extrapolated from the first {k} levels: {lam:.5f} (rel err {lam / dec.lambda0 - 1:+.4f})")
    print("slope sign check:", np.all(np.diff(rates) < 0))


if __name__ == "__main__":
    main()
