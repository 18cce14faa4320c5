"""Posterior draws container, summaries, convergence diagnostic and DIC."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, atomic_write
from .model import ModelKind, ModelState, log_likelihood


@dataclass
class PosteriorSamples:
    """Retained draws, arrays shaped ``(chains, draws, ...)``.

    ``means``/``variances``: ``(C, S, P)`` over ``kind.user_params``;
    ``users``: ``(C, S, P, U)``; ``w``: ``(C, S, I)``.
    """

    kind: ModelKind
    user_ids: list[str]
    item_labels: list[str]
    poll_slices: list[tuple[int, int]]
    means: np.ndarray
    variances: np.ndarray
    users: np.ndarray
    w: np.ndarray
    acceptance: list[dict[str, float]] = field(default_factory=list)
    iteration_index: np.ndarray | None = None

    @classmethod
    def from_chains(cls, data: Dataset, kind: ModelKind, config, chains) -> "PosteriorSamples":
        stack = lambda key: np.stack([c[0][key] for c in chains])  # noqa: E731
        return cls(
            kind=kind,
            user_ids=list(data.user_ids),
            item_labels=data.item_labels(),
            poll_slices=[(int(o), int(m)) for o, m in zip(data.offsets, data.n_items)],
            means=stack("means"),
            variances=stack("variances"),
            users=stack("users"),
            w=stack("w"),
            acceptance=[c[1] for c in chains],
            iteration_index=np.arange(config.burn_in, config.iterations, config.thin),
        )

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.kind.user_params

    @property
    def n_chains(self) -> int:
        return self.means.shape[0]

    @property
    def n_draws(self) -> int:
        return self.means.shape[1]

    def state(self, chain: int, draw: int) -> ModelState:
        names = self.param_names
        return ModelState(
            kind=self.kind,
            means={n: float(self.means[chain, draw, k]) for k, n in enumerate(names)},
            variances={n: float(self.variances[chain, draw, k]) for k, n in enumerate(names)},
            users={n: self.users[chain, draw, k].copy() for k, n in enumerate(names)},
            w=self.w[chain, draw].copy(),
        )

    def states(self):
        for c in range(self.n_chains):
            for s in range(self.n_draws):
                yield self.state(c, s)

    def mean_state(self) -> ModelState:
        """Componentwise posterior mean; each poll's last utility recomputed from the simplex."""
        names = self.param_names
        w = self.w.mean(axis=(0, 1))
        for o, m in self.poll_slices:
            w[o + m - 1] = 1.0 - w[o : o + m - 1].sum()
        return ModelState(
            kind=self.kind,
            means={n: float(self.means[..., k].mean()) for k, n in enumerate(names)},
            variances={n: float(self.variances[..., k].mean()) for k, n in enumerate(names)},
            users={n: self.users[:, :, k].mean(axis=(0, 1)) for k, n in enumerate(names)},
            w=w,
        )

    def flat(self) -> dict[str, np.ndarray]:
        """Every scalar parameter as a ``(chains, draws)`` array, keyed by label."""
        out: dict[str, np.ndarray] = {}
        for k, n in enumerate(self.param_names):
            out[n] = self.means[..., k]
        for k, n in enumerate(self.param_names):
            out[f"sigma2_{n}"] = self.variances[..., k]
        for k, n in enumerate(self.param_names):
            for u, uid in enumerate(self.user_ids):
                out[f"{n}_u[{uid}]"] = self.users[:, :, k, u]
        for i, lab in enumerate(self.item_labels):
            out[f"w[{lab}]"] = self.w[:, :, i]
        return out

    def global_labels(self) -> list[str]:
        return list(self.param_names) + [f"sigma2_{n}" for n in self.param_names]

    def user_means(self, name: str) -> dict[str, float]:
        k = self.param_names.index(name)
        m = self.users[:, :, k].mean(axis=(0, 1))
        return dict(zip(self.user_ids, m.tolist()))


def split_rhat(chains: np.ndarray) -> float:
    """Split-chain potential scale reduction for a ``(chains, draws)`` array.

    Each chain is halved; returns 1.0 for constant draws and ``inf`` when every
    half-chain is constant but they disagree.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    n = x.shape[1] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate([x[:, :n], x[:, x.shape[1] - n :]], axis=0)
    means = halves.mean(axis=1)
    W = halves.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else float("inf")
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def summarize(samples: PosteriorSamples, labels: list[str] | None = None) -> dict[str, dict[str, float]]:
    """Posterior mean, median, 90% equal-tailed interval and split R-hat per parameter."""
    flat = samples.flat()
    out = {}
    for label in labels or flat:
        x = flat[label]
        v = x.ravel()
        ci5, med, ci95 = np.percentile(v, [5, 50, 95])
        out[label] = {
            "mean": float(v.mean()),
            "median": float(med),
            "ci5": float(ci5),
            "ci95": float(ci95),
            "rhat": split_rhat(x),
        }
    return out


def deviance(state: ModelState, data: Dataset) -> float:
    return -2.0 * log_likelihood(state, data)


def compute_dic(samples: PosteriorSamples, data: Dataset, kind: ModelKind | str | None = None) -> dict[str, float]:
    """Deviance information criterion, ``Dbar + pD`` with ``pD = Dbar - D(posterior mean)``."""
    if kind is not None:
        kind = ModelKind.parse(kind) if isinstance(kind, str) else ModelKind(kind)
        if kind is not samples.kind:
            raise ValueError(f"samples are for {samples.kind.value}, not {kind.value}")
    devs = np.array([deviance(s, data) for s in samples.states()])
    if devs.size == 0:
        raise ValueError("no samples")
    d_bar = float(devs.mean())
    d_hat = deviance(samples.mean_state(), data)
    p_d = d_bar - d_hat
    return {"dic": d_bar + p_d, "d_bar": d_bar, "d_hat": d_hat, "p_d": p_d}


# --------------------------------------------------------------------- export

def samples_long_rows(samples: PosteriorSamples):
    """Yield (chain, iteration, parameter_name, value) rows."""
    iters = samples.iteration_index if samples.iteration_index is not None else np.arange(samples.n_draws)
    flat = samples.flat()
    for c in range(samples.n_chains):
        for s in range(samples.n_draws):
            for label, arr in flat.items():
                yield c, int(iters[s]), label, float(arr[c, s])


def write_samples_csv(samples: PosteriorSamples, path) -> None:
    import pandas as pd

    iters = samples.iteration_index if samples.iteration_index is not None else np.arange(samples.n_draws)
    flat = samples.flat()
    labels = list(flat)
    values = np.stack([flat[k] for k in labels], axis=-1)  # (C, S, L)
    C, S, L = values.shape
    df = pd.DataFrame(
        {
            "chain": np.repeat(np.arange(C), S * L),
            "iteration": np.tile(np.repeat(iters, L), C),
            "parameter_name": np.tile(labels, C * S),
            "value": values.ravel(),
        }
    )
    atomic_write(path, df.to_csv(index=False, float_format="%.10g"))


def read_samples_csv(path):
    import pandas as pd

    df = pd.read_csv(path)
    expected = ["chain", "iteration", "parameter_name", "value"]
    if list(df.columns) != expected:
        raise ValueError(f"{path}: expected columns {expected}, got {list(df.columns)}")
    return df


def write_trace_csv(samples: PosteriorSamples, path) -> None:
    """Wide trace table of the global parameters: chain, iteration, one column each."""
    import pandas as pd

    iters = samples.iteration_index if samples.iteration_index is not None else np.arange(samples.n_draws)
    flat = samples.flat()
    frames = []
    for c in range(samples.n_chains):
        d = {"chain": c, "iteration": iters}
        d.update({lab: flat[lab][c] for lab in samples.global_labels()})
        frames.append(pd.DataFrame(d))
    atomic_write(path, pd.concat(frames).to_csv(index=False, float_format="%.10g"))


def write_summary_json(summary: dict, path) -> None:
    atomic_write(path, json.dumps(summary, indent=2, sort_keys=False, allow_nan=True))
