"""
Replicated determinant experiment at desk scale.

Defaults run in well under a minute; ``--n-list 1e4,1e6 --V 200`` matches
the acceptance setting and takes tens of minutes on one core.

    python3 demos/table_desk.py --out /tmp/desk
"""

import argparse

from optsub.harness import ExperimentConfig, run_experiment, summarize, write_outputs


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    p.add_argument("--n-list", default="1e3,1e4,1e5")
    p.add_argument("--V", type=int, default=10)
    p.add_argument("--family", default="normal")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--out", default=None)
    args = p.parse_args()

    n_list = [int(float(v)) for v in args.n_list.split(",")]
    cfg = ExperimentConfig(family=args.family, rho=args.rho, n_list=n_list, V=args.V)
    res = run_experiment(cfg)
    print(f"{'method':>7} {'n':>9} {'mean det':>11} {'det of mean':>12} {'median ms':>10}")
    for row in summarize(res.records):
        print(f"{row.method:>7} {row.n:>9} {row.mean_det:>11.4e} {res.det_of_mean(row.method, row.n):>12.4e} {row.median_ms:>10.1f}")
    if args.out:
        write_outputs(res, args.out)
        print(f"records, summary and figure data written to {args.out}")


if __name__ == "__main__":
    main()
