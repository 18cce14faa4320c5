"""Reference-model curves: response-time densities, series truncation and (p, mu) sweeps.

Writes density and sweep CSVs for the Poisson counter, drift diffusion and CET models,
plus a truncation table showing where the diffusion sine series goes negative.
"""
import argparse
import logging
import warnings

import numpy as np
import pandas as pd

from _common import setup
from choicetime.distributions import HypoExpParams
from choicetime.refmodels import (
    DiffusionParams,
    PoissonCounterParams,
    SeriesTruncationWarning,
    SweepConfig,
    ddm_marginal_time_pdf,
    density_table,
    sweep_mu_vs_p,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/reference_models")
    args = ap.parse_args()
    out = setup(args.out)

    t = np.linspace(0.01, 10.0, 1000)
    pd.DataFrame({
        "t": t,
        "poisson_counter": density_table("poisson_counter", t, PoissonCounterParams(3.0, 1.0, 3, 3)),
        "diffusion": density_table("diffusion", t, DiffusionParams(2.0, 4.0, 1.0, 1.0, 1000)),
        "cet": density_table("cet", t, HypoExpParams(1.0, 1.0)),
    }).to_csv(out / "densities.csv", index=False)

    ts = np.linspace(1e-3, 0.2, 400)
    trunc = {"t": ts}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeriesTruncationWarning)
        for n in (9, 10, 11, 20, 1000):
            trunc[f"n{n}"] = ddm_marginal_time_pdf(ts, DiffusionParams(2.0, 4.0, 1.0, 1.0, n))
    df = pd.DataFrame(trunc)
    df.to_csv(out / "truncation.csv", index=False)
    for col in df.columns[1:]:
        logging.info("series with %s terms: min density on (0, 0.2] = %.4g", col[1:], df[col].min())

    for model in ("poisson_counter", "diffusion", "cet"):
        rows = sweep_mu_vs_p(SweepConfig(model))
        pd.DataFrame([r.__dict__ for r in rows]).to_csv(out / f"sweep_{model}.csv", index=False)
    logging.info("wrote %s", out)


if __name__ == "__main__":
    main()
