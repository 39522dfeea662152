"""Synthetic flat harness: numerator/denominator against their leading terms over a dyadic epsilon sweep."""
import argparse

import numpy as np

from spinlab.euclidean import model_constants
from spinlab.testspinor import evaluate_test_functional, synthetic_params


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--nu-pair", type=float, default=-1.0)
    ap.add_argument("--levels", type=int, default=5)
    a = ap.parse_args()
    n, mc = a.n, model_constants(a.n)
    print("eps,num_ratio,den_ratio,nu_coefficient_ratio")
    for eps in 0.1 * 2.0 ** -np.arange(a.levels):
        r0 = evaluate_test_functional(synthetic_params(n, eps, 0.0), 1)
        r1 = evaluate_test_functional(synthetic_params(n, eps, a.nu_pair), 1)
        s = eps ** (n - 1)
        coef = (r1.denominator - r0.denominator) / s ** 2 / (-a.nu_pair * n * mc.C0)
        print(f"{eps:.5g},{r0.numerator / s / (n * n * mc.I ** (1 + 1 / n)):.6f},"
              f"{r0.denominator / s / (n * mc.I):.6f},{coef:.6f}")


if __name__ == "__main__":
    main()
