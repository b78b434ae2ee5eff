"""Ratio G_{[-1,1]^c}(x, y) / h(y) as x grows, against the stated constant K_alpha.

The ratio settles at (alpha-1) omega_alpha / 2 with an O(x^(alpha-2)) correction.

    python3 scripts/exterior_limit_study.py --alpha 1.5
"""
import argparse

from qsdlab.stable_kernels import exterior_limit_constant, green_exterior_unit, h_function, k_alpha_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--ys", type=float, nargs="+", default=[1.5, 2.0, 3.0, 5.0])
    args = ap.parse_args()
    a = args.alpha
    K, lim = k_alpha_constant(a), exterior_limit_constant(a)
    print(f"K_alpha = {K:.9f}   limit from the kernel = {lim:.9f}   ratio = {lim / K:.6f}")
    print(f"{'x':>8} " + " ".join(f"{'y=' + format(y, 'g'):>12}" for y in args.ys))
    for e in range(2, 9):
        x = 10.0 ** e
        r = [green_exterior_unit(a, x, y) / h_function(a, y) for y in args.ys]
        print(f"{x:8.0e} " + " ".join(f"{v / lim - 1:12.3e}" for v in r))


if __name__ == "__main__":
    main()
