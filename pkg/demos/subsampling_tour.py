"""
Every selector on one synthetic data set, scored by the slope determinant.

    python3 demos/subsampling_tour.py --n 100000 --d 10 --k 1000
"""

import argparse

from optsub.distributions import EllipticalModel, RngStream, sample_covariates
from optsub.estimation import slope_covariance
from optsub.linalg import CovSpec
from optsub.subsamplers import select_known


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    cov = CovSpec.compound_symmetry(args.d, args.rho)
    X = sample_covariates(EllipticalModel.normal(cov), args.n, RngStream(args.seed)).values
    print(f"{'method':>9} {'rows':>8} {'det^(1/d)':>11} {'ms':>8}")
    for method in ("full", "dopt", "dopt-s", "iboss", "leverage", "unif"):
        res = select_known(method, X, args.k, cov, RngStream(args.seed, 1))
        det = slope_covariance(X[res.indices]).standardized_det
        print(f"{method:>9} {res.k_achieved:>8} {det:>11.4e} {1000 * res.elapsed:>8.1f}")


if __name__ == "__main__":
    main()
