"""Reference choice/response-time models: Poisson counter race and drift diffusion.

Both are forward models only. They provide closed-form choice probabilities and
mean response times that double as oracles, plus simple simulators to check them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numba
import numpy as np

from .distributions import ErlangParams, ParameterDomainError, erlang_pdf, erlang_sf, reg_inc_beta

Choice = Literal["a", "b"]

DEFAULT_SERIES_TERMS = 1000
ADAPTIVE_TERM_TOL = 1e-14


class SeriesTruncationWarning(RuntimeWarning):
    """The truncated hitting-time series went negative (too few terms for small t)."""


@dataclass(frozen=True)
class ChoiceTimeOutcome:
    choice: Choice
    response_time: float

    def __post_init__(self):
        if self.choice not in ("a", "b"):
            raise ValueError(f"choice must be 'a' or 'b', got {self.choice!r}")
        if not self.response_time > 0:
            raise ValueError("response_time must be positive")


@dataclass
class ChoiceTimeSample:
    """Columnar batch of simulated outcomes. ``chose_a[k]`` is True when item a won."""

    chose_a: np.ndarray
    times: np.ndarray

    def __len__(self):
        return len(self.times)

    def __iter__(self) -> Iterator[ChoiceTimeOutcome]:
        for c, t in zip(self.chose_a, self.times):
            yield ChoiceTimeOutcome("a" if c else "b", float(t))

    def summary(self) -> "ModelSummary":
        a = self.chose_a.astype(bool)
        p = a.mean()
        mu_a = self.times[a].mean() if a.any() else math.nan
        mu_b = self.times[~a].mean() if (~a).any() else math.nan
        return ModelSummary(p=float(p), mu=float(self.times.mean()), mu_a=float(mu_a), mu_b=float(mu_b))


@dataclass(frozen=True)
class ModelSummary:
    p: float
    mu: float
    mu_a: float
    mu_b: float


@dataclass(frozen=True)
class PoissonCounterParams:
    alpha: float
    beta: float
    Ka: int
    Kb: int

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterDomainError("Poisson counter rates must be positive")
        for k in (self.Ka, self.Kb):
            if int(k) != k or k < 1:
                raise ParameterDomainError("Poisson counter thresholds must be positive integers")


@dataclass(frozen=True)
class DiffusionParams:
    z: float
    K: float
    d: float
    sigma2: float = 1.0
    series_terms: int | None = DEFAULT_SERIES_TERMS  # None: adaptive truncation

    def __post_init__(self):
        if not (0 < self.z < self.K):
            raise ParameterDomainError(f"need 0 < z < K, got z={self.z}, K={self.K}")
        if not self.sigma2 > 0:
            raise ParameterDomainError("sigma2 must be positive")
        if self.series_terms is not None and self.series_terms < 1:
            raise ParameterDomainError("series_terms must be >= 1")

    def mirrored(self) -> "DiffusionParams":
        """Swap the roles of the two thresholds: z -> K - z, d -> -d."""
        return DiffusionParams(self.K - self.z, self.K, -self.d, self.sigma2, self.series_terms)


# ------------------------------------------------------------ Poisson counter

def pc_likelihood(outcome: ChoiceTimeOutcome, params: PoissonCounterParams) -> float:
    return float(pc_joint_pdf(outcome.choice, outcome.response_time, params))


def pc_joint_pdf(choice: Choice, t, params: PoissonCounterParams):
    """Joint density of winning with ``choice`` at time ``t``."""
    ea = ErlangParams(params.Ka, params.alpha)
    eb = ErlangParams(params.Kb, params.beta)
    if choice == "a":
        return erlang_pdf(t, ea) * erlang_sf(t, eb)
    if choice == "b":
        return erlang_pdf(t, eb) * erlang_sf(t, ea)
    raise ValueError(f"choice must be 'a' or 'b', got {choice!r}")


def pc_marginal_time_pdf(t, params: PoissonCounterParams):
    return pc_joint_pdf("a", t, params) + pc_joint_pdf("b", t, params)


def pc_summary(params: PoissonCounterParams) -> ModelSummary:
    a, b, Ka, Kb = params.alpha, params.beta, params.Ka, params.Kb
    qa = a / (a + b)
    qb = b / (a + b)
    p = reg_inc_beta(qa, Ka, Kb)
    int_a = Ka / a * reg_inc_beta(qa, Ka + 1, Kb)  # E[T; choice a]
    int_b = Kb / b * reg_inc_beta(qb, Kb + 1, Ka)
    mu_a = int_a / p if p > 0 else math.nan
    mu_b = int_b / (1.0 - p) if p < 1 else math.nan
    return ModelSummary(p=p, mu=int_a + int_b, mu_a=mu_a, mu_b=mu_b)


def pc_simulate(params: PoissonCounterParams, n: int, rng: np.random.Generator) -> ChoiceTimeSample:
    """Race two Poisson processes; each threshold time is a sum of exponential gaps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ta = rng.exponential(1.0 / params.alpha, size=(n, params.Ka)).sum(axis=1)
    tb = rng.exponential(1.0 / params.beta, size=(n, params.Kb)).sum(axis=1)
    return ChoiceTimeSample(chose_a=ta < tb, times=np.minimum(ta, tb))


# ------------------------------------------------------------ drift diffusion

def _adaptive_terms(t_min: float, K: float, sigma2: float, tol: float = ADAPTIVE_TERM_TOL, cap: int = 1_000_000) -> int:
    c = math.pi ** 2 * sigma2 / (2.0 * K ** 2)
    n = max(1, int(math.ceil(math.sqrt(1.0 / (2.0 * c * t_min)))))  # past the peak of n e^{-c n^2 t}
    while n < cap and n * math.exp(-c * n * n * t_min) >= tol:
        n *= 2
    return min(n, cap)


def _hit_zero_density(t: np.ndarray, z, K, d, sigma2, n_terms: int) -> np.ndarray:
    n = np.arange(1, n_terms + 1, dtype=float)
    front = math.pi * sigma2 / K ** 2 * np.exp(-d * z / sigma2 - d * d * t / (2.0 * sigma2))
    rates = math.pi ** 2 * sigma2 / (2.0 * K ** 2) * n ** 2
    weights = n * np.sin(math.pi * z * n / K)
    out = np.empty_like(t)
    # chunk over t so the (t, n) matrix stays small
    step = max(1, 2_000_000 // n_terms)
    for s in range(0, t.size, step):
        ts = t[s : s + step]
        out[s : s + step] = np.exp(-np.outer(ts, rates)) @ weights
    return front * out


def ddm_hitting_pdf(t, z: float, K: float, d: float, sigma2: float = 1.0, series_terms: int | None = DEFAULT_SERIES_TERMS):
    """Density of first reaching 0 (before K) for Brownian motion started at ``z``.

    The process has drift ``d`` and variance ``sigma2`` per unit time. The eigenfunction
    series is truncated at ``series_terms`` terms, or adaptively when that is ``None``.
    Truncation can make the value negative at small t; a
    :class:`SeriesTruncationWarning` is issued then and the raw value is returned.
    """
    if not (0 < z < K):
        raise ParameterDomainError(f"need 0 < z < K, got z={z}, K={K}")
    if not sigma2 > 0:
        raise ParameterDomainError("sigma2 must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ParameterDomainError("hitting-time density needs t > 0")
    n_terms = series_terms if series_terms is not None else _adaptive_terms(float(t_arr.min()), K, sigma2)
    out = _hit_zero_density(t_arr.ravel(), z, K, d, sigma2, n_terms).reshape(t_arr.shape)
    if np.any(out < 0):
        warnings.warn(
            f"truncated series with {n_terms} terms is negative at {int((out < 0).sum())} point(s)",
            SeriesTruncationWarning,
            stacklevel=2,
        )
    return float(out[0]) if np.ndim(t) == 0 else out


def ddm_joint_pdf(choice: Choice, t, params: DiffusionParams):
    """Joint density: choice ``b`` hits 0, choice ``a`` hits K (mirrored problem)."""
    if choice == "b":
        return ddm_hitting_pdf(t, params.z, params.K, params.d, params.sigma2, params.series_terms)
    if choice == "a":
        m = params.mirrored()
        return ddm_hitting_pdf(t, m.z, m.K, m.d, m.sigma2, m.series_terms)
    raise ValueError(f"choice must be 'a' or 'b', got {choice!r}")


def ddm_likelihood(outcome: ChoiceTimeOutcome, params: DiffusionParams) -> float:
    return float(ddm_joint_pdf(outcome.choice, outcome.response_time, params))


def ddm_marginal_time_pdf(t, params: DiffusionParams):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SeriesTruncationWarning)
        total = ddm_joint_pdf("a", t, params) + ddm_joint_pdf("b", t, params)
    if np.any(np.asarray(total) < 0) or caught:
        warnings.warn("truncated diffusion density went negative", SeriesTruncationWarning, stacklevel=2)
    return total


def _prob_hit_upper(z, K, d, sigma2) -> float:
    if d == 0:
        return z / K
    if d > 0:
        return math.expm1(-2 * d * z / sigma2) / math.expm1(-2 * d * K / sigma2)
    s = -d
    return math.exp(2 * s * (z - K) / sigma2) * (-math.expm1(-2 * s * z / sigma2)) / (-math.expm1(-2 * s * K / sigma2))


def _conditional_time_integral(z, K, d, sigma2, n_terms: int) -> float:
    """E[T; absorbed at 0] = integral of t times the hit-0 density.

    Term-by-term integration of the sine series gives the constant 4 K^2 / (pi^3 sigma2);
    half of that would break p mu_a + (1 - p) mu_b = mu by exactly a factor of two.
    """
    n = np.arange(1, n_terms + 1, dtype=float)
    c = d * K / (math.pi * sigma2)
    series = np.sum(n * np.sin(math.pi * z * n / K) / (n ** 2 + c ** 2) ** 2)
    return 4.0 * K ** 2 * math.exp(-d * z / sigma2) / (math.pi ** 3 * sigma2) * float(series)


def ddm_summary(params: DiffusionParams) -> ModelSummary:
    """Choice probability and mean times for the diffusion model.

    ``p`` and ``mu`` are exact; ``mu_a`` and ``mu_b`` come from the sine series of the
    time-weighted hitting densities, truncated at ``series_terms`` (1000 if adaptive).
    At ``d == 0`` the analytic limits ``p = z/K`` and ``mu = z (K - z) / sigma2`` are used.
    """
    z, K, d, s2 = params.z, params.K, params.d, params.sigma2
    n_terms = params.series_terms or DEFAULT_SERIES_TERMS
    p = _prob_hit_upper(z, K, d, s2)
    mu = z * (K - z) / s2 if d == 0 else (p * K - z) / d
    int_b = _conditional_time_integral(z, K, d, s2, n_terms)
    int_a = _conditional_time_integral(K - z, K, -d, s2, n_terms)
    mu_a = int_a / p if p > 0 else math.nan
    mu_b = int_b / (1.0 - p) if p < 1 else math.nan
    return ModelSummary(p=p, mu=mu, mu_a=mu_a, mu_b=mu_b)


@numba.njit(cache=True)
def _euler_paths(n, z, K, d, sd_step, dt, seed, max_steps):
    np.random.seed(seed)
    chose_a = np.zeros(n, dtype=np.bool_)
    times = np.empty(n)
    for i in range(n):
        x = z
        k = 0
        while k < max_steps:
            x += d * dt + sd_step * np.random.normal()
            k += 1
            if x <= 0.0:
                break
            if x >= K:
                chose_a[i] = True
                break
        times[i] = k * dt
    return chose_a, times


def ddm_simulate(params: DiffusionParams, n: int, rng: np.random.Generator, step: float = 1e-4,
                 max_time: float = 1e4) -> ChoiceTimeSample:
    """Euler-Maruyama paths from ``z`` until the first threshold crossing.

    Crossings are detected on the time grid, so times carry an upward bias of
    order ``sqrt(step)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    seed = int(rng.integers(0, 2**31 - 1))
    chose_a, times = _euler_paths(
        n, params.z, params.K, params.d, math.sqrt(params.sigma2 * step), step, seed, int(max_time / step)
    )
    return ChoiceTimeSample(chose_a=chose_a, times=times)


# ------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRow:
    param_value: float
    p: float
    mu: float
    mu_a: float
    mu_b: float


SWEEP_COLUMNS = ("param_value", "p", "mu", "mu_a", "mu_b")


@dataclass
class SweepConfig:
    """Parameter sweep for the (p, mu) relationship.

    ``poisson_counter`` sweeps alpha with beta = 1 - alpha; ``diffusion`` sweeps the
    drift; ``cet`` sweeps the normalized utility x of the first item (w = x, 1 - x).
    """

    model: Literal["poisson_counter", "diffusion", "cet"]
    values: Sequence[float] = ()
    K: int = 3                          # Poisson counter thresholds (Ka = Kb)
    z: float = 2.0
    K_ddm: float = 4.0
    sigma2: float = 1.0
    series_terms: int = DEFAULT_SERIES_TERMS
    cet_params: dict = field(default_factory=lambda: dict(A=1.0, tau=2.0, epsilon=0.1, rho=0.4, gamma=1.0))

    def grid(self) -> np.ndarray:
        if len(self.values):
            return np.asarray(self.values, dtype=float)
        if self.model == "poisson_counter":
            return np.linspace(0.01, 0.99, 99)
        if self.model == "diffusion":
            return np.linspace(-10, 10, 201)
        return np.linspace(0.0, 1.0, 101)


def sweep_mu_vs_p(config: SweepConfig) -> list[SweepRow]:
    from .cet import UserParams, cet_mean_response_time

    rows = []
    for v in config.grid():
        if config.model == "poisson_counter":
            s = pc_summary(PoissonCounterParams(float(v), 1.0 - float(v), config.K, config.K))
        elif config.model == "diffusion":
            s = ddm_summary(DiffusionParams(config.z, config.K_ddm, float(v), config.sigma2, config.series_terms))
        elif config.model == "cet":
            pred = cet_mean_response_time(float(v), 1.0 - float(v), UserParams(**config.cet_params))
            # times are independent of the choice, so both conditional means equal mu
            s = ModelSummary(p=pred.p, mu=pred.mu, mu_a=pred.mu, mu_b=pred.mu)
        else:
            raise ValueError(f"unknown model {config.model!r}")
        rows.append(SweepRow(float(v), s.p, s.mu, s.mu_a, s.mu_b))
    return rows


def density_table(model: str, ts: np.ndarray, params, clamp: bool = True) -> np.ndarray:
    """Marginal response-time density on a grid, for plotting.

    Negative truncated-series values are clamped to zero here when ``clamp``; the
    likelihood functions never clamp.
    """
    from .distributions import HypoExpParams, hypoexp_pdf

    ts = np.asarray(ts, dtype=float)
    if model == "poisson_counter":
        vals = pc_marginal_time_pdf(ts, params)
    elif model == "diffusion":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeriesTruncationWarning)
            vals = ddm_marginal_time_pdf(ts, params)
    elif model == "cet":
        vals = hypoexp_pdf(ts, params if isinstance(params, HypoExpParams) else HypoExpParams(*params))
    else:
        raise ValueError(f"unknown model {model!r}")
    vals = np.asarray(vals, dtype=float)
    return np.maximum(vals, 0.0) if clamp else vals
