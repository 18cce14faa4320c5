"""Bias of the Bradley-Terry estimate when users have random engagement slack.

For each mean slack and true utility share w, compares the Monte Carlo mean of the
estimate with the asymptotic value w + B (1 - 2w).
"""
import argparse

import numpy as np
import pandas as pd

from _common import setup
from choicetime.cet import EpsilonDist, engagement_bias


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, nargs="+", default=[0.1, 0.5, 2.0])
    ap.add_argument("--family", default="exponential")
    ap.add_argument("--N", type=int, default=100_000)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/engagement_bias")
    args = ap.parse_args()
    out = setup(args.out)
    rng = np.random.default_rng(args.seed)
    rows = []
    for eps in args.epsilon:
        dist = EpsilonDist(args.family, eps)
        for w in np.linspace(0, 1, 11):
            r = engagement_bias(float(w), dist, args.N, args.reps, rng)
            rows.append(dict(epsilon=eps, w=float(w), B=r.B, asymptotic=r.asymptotic_estimate,
                             monte_carlo=r.finite_N_estimate, mc_std_error=r.mc_std_error))
    df = pd.DataFrame(rows)
    df.to_csv(out / "bias.csv", index=False)
    print(df.to_string(index=False))


if __name__ == "__main__":
    main()
