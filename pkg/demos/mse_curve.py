"""
Simulated slope MSE against its large-sample approximation as n grows.

    python3 demos/mse_curve.py --d 5 --V 50
"""

import argparse

from optsub.estimation import MseScenario, mse_approximation, simulate_mse


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--V", type=int, default=50)
    p.add_argument("--n-list", default="1e3,1e4,1e5")
    p.add_argument("--with-responses", action="store_true", help="fit on simulated responses instead of tr(C)")
    args = p.parse_args()

    print(f"{'n':>9} {'simulated':>11} {'approx':>11} {'ratio':>7}")
    for n in (int(float(v)) for v in args.n_list.split(",")):
        sc = MseScenario(d=args.d, n=n, k=args.k, V=args.V, response_free=not args.with_responses)
        sim = simulate_mse(sc).mse_per_coord
        approx = mse_approximation(sc)
        print(f"{n:>9} {sim:>11.4e} {approx:>11.4e} {sim / approx:>7.3f}")


if __name__ == "__main__":
    main()
