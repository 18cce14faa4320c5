"""Synthetic experiments: parameter recovery, model comparison, engagement
segmentation and conditional response-time symmetry.

Each experiment is driven by a dataclass config and returns a plain result object,
so the same code backs ``scripts/`` and the acceptance suite.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import cluster_users, conditional_rt_test, feature_matrix, resolve_feature_set
from .data import Dataset
from .inference import ModelKind, SamplerConfig, compute_dic, run_sampler, summarize
from .simulation import (
    AMT_MEANS,
    AMT_SDS,
    STUDENT_MEANS,
    STUDENT_SDS,
    PollSpec,
    PopulationSpec,
    SimulationSpec,
    simulate,
)

MODEL_ORDER = ("choice", "choice_engagement", "choice_engagement_time")


def _dataset(trials) -> Dataset:
    return Dataset.from_observations(t.observation for t in trials)


# ------------------------------------------------------------------ recovery

@dataclass
class RecoveryConfig:
    """One population of ``n_users`` answering every pair of ``n_polls`` x ``n_items``."""

    n_users: int = 50
    n_polls: int = 6
    n_items: int = 5
    trials_per_pair: int = 5
    means: dict = field(default_factory=lambda: dict(STUDENT_MEANS))
    sds: dict = field(default_factory=lambda: dict(STUDENT_SDS))
    seed: int = 1
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(seed=3))

    def simulation_spec(self) -> SimulationSpec:
        return SimulationSpec(
            polls=[PollSpec(f"poll{s}", self.n_items) for s in range(self.n_polls)],
            populations=[PopulationSpec("students", self.n_users, dict(self.means), dict(self.sds))],
            trials_per_pair=self.trials_per_pair,
            seed=self.seed,
        )


@dataclass
class RecoveryResult:
    config: RecoveryConfig
    data: Dataset
    truth: object
    samples: object
    summary: dict
    coverage: dict[str, bool]
    utility_rmse: float
    rhat_max: dict[str, float]
    worst_rhat: dict[str, list[str]]
    seconds: float

    @property
    def coverage_fraction(self) -> float:
        return sum(self.coverage.values()) / len(self.coverage)

    @property
    def max_rhat(self) -> float:
        return max(self.rhat_max.values())

    def report(self) -> dict:
        return {
            "coverage": self.coverage,
            "coverage_fraction": self.coverage_fraction,
            "utility_rmse": self.utility_rmse,
            "rhat_max": self.rhat_max,
            "worst_rhat": self.worst_rhat,
            "seconds": self.seconds,
            "globals": {k: self.summary[k] for k in self.samples.global_labels()},
        }


def true_globals(pop: PopulationSpec) -> dict[str, float]:
    out = {k: float(v) for k, v in pop.means.items()}
    out.update({f"sigma2_{k}": float(v) ** 2 for k, v in pop.sds.items()})
    return out


def run_recovery(cfg: RecoveryConfig = RecoveryConfig(), kind: str = "cet") -> RecoveryResult:
    trials, truth = simulate(cfg.simulation_spec())
    data = _dataset(trials)
    t0 = time.perf_counter()
    samples = run_sampler(data, kind, cfg.sampler)
    seconds = time.perf_counter() - t0
    summary = summarize(samples)
    target = true_globals(truth.populations[0])
    coverage = {
        k: bool(summary[k]["ci5"] <= target[k] <= summary[k]["ci95"]) for k in samples.global_labels()
    }
    w_true = np.concatenate([u.w for u in truth.utilities])
    w_hat = samples.w.mean(axis=(0, 1))
    rmse = float(np.sqrt(np.mean((w_true - w_hat) ** 2)))
    groups = {
        "global": samples.global_labels(),
        "utilities": [k for k in summary if k.startswith("w[")],
        "users": [k for k in summary if "_u[" in k],
    }
    rhat_max, worst = {}, {}
    for g, keys in groups.items():
        r = {k: summary[k]["rhat"] for k in keys if np.isfinite(summary[k]["rhat"])}
        rhat_max[g] = max(r.values())
        worst[g] = sorted(r, key=r.get, reverse=True)[:5]
    return RecoveryResult(cfg, data, truth, samples, summary, coverage, rmse, rhat_max, worst, seconds)


# -------------------------------------------------------------- comparison

def compare_models(data: Dataset, sampler: SamplerConfig, models=MODEL_ORDER, fitted=None) -> dict[str, dict]:
    """DIC per model; ``fitted`` may supply already-computed samples keyed by model name."""
    fitted = dict(fitted or {})
    out = {}
    for m in models:
        kind = ModelKind.parse(m)
        samples = fitted.get(kind.value) or run_sampler(data, kind, sampler)
        out[kind.value] = compute_dic(samples, data)
    return out


# ------------------------------------------------------------ segmentation

@dataclass
class SegmentationConfig:
    """Students-like vs crowd-worker-like populations; engagement spread set by ``engagement_cv``.

    ``engagement_cv`` is the within-population coefficient of variation used for
    ``epsilon`` and ``gamma``; ``None`` keeps the population standard deviations.
    """

    n_per_population: int = 40
    n_polls: int = 6
    n_items: int = 5
    trials_per_pair: int = 20
    engagement_cv: float | None = 0.1
    seed: int = 7
    restarts: int = 32
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(seed=11))
    feature_sets: tuple = ("epsilon,gamma", "epsilon", "gamma")

    def populations(self) -> list[PopulationSpec]:
        pops = []
        for name, means, sds in (("students", STUDENT_MEANS, STUDENT_SDS), ("amt", AMT_MEANS, AMT_SDS)):
            sds = dict(sds)
            if self.engagement_cv is not None:
                for k in ("epsilon", "gamma"):
                    sds[k] = self.engagement_cv * means[k]
            pops.append(PopulationSpec(name, self.n_per_population, dict(means), sds))
        return pops

    def simulation_spec(self) -> SimulationSpec:
        return SimulationSpec(
            polls=[PollSpec(f"poll{s}", self.n_items) for s in range(self.n_polls)],
            populations=self.populations(),
            trials_per_pair=self.trials_per_pair,
            seed=self.seed,
        )


@dataclass
class SegmentationResult:
    jaccard: dict[str, float]
    oracle_jaccard: dict[str, float]
    seconds: float

    def report(self) -> dict:
        return asdict(self)


def run_segmentation(cfg: SegmentationConfig = SegmentationConfig()) -> SegmentationResult:
    """Fit one CET model to both populations, then cluster posterior-mean user parameters.

    ``oracle_jaccard`` clusters the true user parameters, the ceiling for the fit.
    """
    trials, truth = simulate(cfg.simulation_spec())
    data = _dataset(trials)
    t0 = time.perf_counter()
    samples = run_sampler(data, "cet", cfg.sampler)
    seconds = time.perf_counter() - t0
    labels = truth.labels
    fitted, oracle = {}, {}
    for fs in cfg.feature_sets:
        feats = feature_matrix(samples, fs)
        fitted[fs] = cluster_users(feats, 2, labels, restarts=cfg.restarts, rng=cfg.seed).avg_jaccard
        names = [n for n in resolve_feature_set(fs) if n in samples.param_names]
        true_feats = {u: np.array([getattr(truth.users[u], n) for n in names]) for u in truth.users}
        oracle[fs] = cluster_users(true_feats, 2, labels, restarts=cfg.restarts, rng=cfg.seed).avg_jaccard
    return SegmentationResult(fitted, oracle, seconds)


# --------------------------------------------------- conditional RT symmetry

@dataclass
class SymmetryConfig:
    """Repeated CET experiments, each tested with Bonferroni-corrected rank-sum tests."""

    n_experiments: int = 200
    n_users: int = 50
    n_polls: int = 6
    n_items: int = 5
    alpha: float = 0.05
    vote_filter: int = 1
    seed: int = 0


@dataclass
class SymmetryResult:
    rejections: list[int]
    pairs_tested: list[int]

    @property
    def clean_fraction(self) -> float:
        return float(np.mean([r == 0 for r in self.rejections]))

    def report(self) -> dict:
        return {
            "clean_fraction": self.clean_fraction,
            "mean_pairs_tested": float(np.mean(self.pairs_tested)),
            "rejections": self.rejections,
        }


def run_symmetry(cfg: SymmetryConfig = SymmetryConfig()) -> SymmetryResult:
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_experiments)
    rejections, tested = [], []
    for ss in seeds:
        spec = SimulationSpec(
            polls=[PollSpec(f"poll{s}", cfg.n_items) for s in range(cfg.n_polls)],
            populations=[PopulationSpec("students", cfg.n_users)],
            seed=int(ss.generate_state(1)[0]),
        )
        trials, _ = simulate(spec)
        results = conditional_rt_test(trials, alpha=cfg.alpha, vote_filter=cfg.vote_filter)
        rejections.append(sum(r.reject for r in results))
        tested.append(len(results))
    return SymmetryResult(rejections, tested)
