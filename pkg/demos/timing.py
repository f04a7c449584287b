"""
Selection time against n for D-OPT, D-OPT-s and IBOSS.

    python3 demos/timing.py --n-list 1e5,2e5,4e5 --d 50
"""

import argparse

from optsub.harness import BenchConfig, bench_complexity


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    p.add_argument("--n-list", default="5e4,1e5,2e5")
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    cfg = BenchConfig(n_list=[int(float(v)) for v in args.n_list.split(",")], d=args.d, repeats=args.repeats)
    res = bench_complexity(cfg)
    for method, n, ms in res.rows():
        print(f"{method:>7} {n:>9} {ms:>9.1f} ms")
    for method, slope in res.slopes.items():
        print(f"{method:>7} log-log slope {slope:.2f}")


if __name__ == "__main__":
    main()
