"""The choice engagement time (CET) model.

Choice between items i and j by user u is Bernoulli with a Bradley-Terry
probability flattened toward 1/2 by the user's engagement slack epsilon. The
response time is a latency stage plus a decision stage, both exponential; the
decision mean shrinks as the utility gap grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Literal, Mapping, Sequence

import numpy as np


class DegeneratePairError(ValueError):
    """Both items in the offer set have zero utility."""


class UnboundedMeanError(ValueError):
    """The mean decision time is infinite (equal items with epsilon + rho == 0)."""


@dataclass(frozen=True)
class UserParams:
    A: float
    tau: float
    rho: float
    epsilon: float
    gamma: float

    def __post_init__(self):
        if not (self.A > 0 and self.tau > 0):
            raise ValueError("A and tau must be strictly positive")
        if min(self.rho, self.epsilon, self.gamma) < 0:
            raise ValueError("rho, epsilon and gamma must be nonnegative")

    def as_dict(self) -> dict:
        return dict(A=self.A, tau=self.tau, rho=self.rho, epsilon=self.epsilon, gamma=self.gamma)


@dataclass(frozen=True)
class ItemUtilities:
    poll_id: str
    w: np.ndarray
    items: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if np.any(w < 0):
            raise ValueError("utilities must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"utilities of poll {self.poll_id} must sum to one, got {w.sum()}")
        if not self.items:
            object.__setattr__(self, "items", tuple(f"item{k}" for k in range(len(w))))
        if len(self.items) != len(w):
            raise ValueError("item names and utilities differ in length")


@dataclass(frozen=True)
class PairPrediction:
    p: float
    delta: float
    mu: float


def utility_gap_power(w_i, w_j, gamma):
    """``((w_i - w_j) / (w_i + w_j)) ** (2 gamma)`` with ``0 ** 0`` taken as 0."""
    w_i, w_j, gamma = np.asarray(w_i, float), np.asarray(w_j, float), np.asarray(gamma, float)
    gap = np.abs(w_i - w_j) / (w_i + w_j)
    with np.errstate(divide="ignore"):
        out = np.power(gap, 2.0 * gamma)
    return np.where(gap == 0.0, 0.0, out)


def choice_prob(w_i, w_j, epsilon):
    """Vectorized CET choice probability of item i; no validation."""
    return (w_i / (w_i + w_j) + epsilon) / (1.0 + 2.0 * epsilon)


def decision_mean(w_i, w_j, A, rho, epsilon, gamma):
    """Vectorized mean decision time ``A / (gap^(2 gamma) + epsilon + rho)``."""
    return A / (utility_gap_power(w_i, w_j, gamma) + epsilon + rho)


def cet_choice_prob(w_i: float, w_j: float, epsilon_u: float) -> float:
    if w_i + w_j <= 0:
        raise DegeneratePairError("w_i + w_j must be positive")
    if epsilon_u < 0:
        raise ValueError("epsilon_u must be nonnegative")
    if math.isinf(epsilon_u):
        return 0.5
    return float(choice_prob(w_i, w_j, epsilon_u))


def cet_mean_response_time(w_i: float, w_j: float, params: UserParams) -> PairPrediction:
    if w_i + w_j <= 0:
        raise DegeneratePairError("w_i + w_j must be positive")
    g = float(utility_gap_power(w_i, w_j, params.gamma))
    denom = g + params.epsilon + params.rho
    if denom == 0:
        raise UnboundedMeanError("equal utilities with epsilon + rho == 0 give an infinite decision time")
    delta = params.A / denom
    return PairPrediction(p=cet_choice_prob(w_i, w_j, params.epsilon), delta=delta, mu=params.tau + delta)


def cet_no_purchase_prob(
    w_i: float, w_0: float, epsilon_u: float, mode: Literal["favor_items", "favor_no_purchase"] = "favor_items"
) -> float:
    """Probability of taking item i over the no-purchase option with utility ``w_0``.

    ``favor_items`` adds the slack to the item only, so low engagement pushes toward
    accepting; ``favor_no_purchase`` adds it to the no-purchase option instead.
    """
    if w_i + w_0 <= 0:
        raise DegeneratePairError("w_i + w_0 must be positive")
    x = w_i / (w_i + w_0)
    if mode == "favor_items":
        return (x + epsilon_u) / (1.0 + epsilon_u)
    if mode == "favor_no_purchase":
        return x / (1.0 + epsilon_u)
    raise ValueError(f"unknown mode {mode!r}")


# ----------------------------------------------------------------- simulation

@dataclass(frozen=True)
class Observation:
    poll_id: str
    user_id: str
    item_i: str
    item_j: str
    chosen: Literal["i", "j"]
    response_time: float
    trial_k: int = 1

    def __post_init__(self):
        if self.item_i == self.item_j:
            raise ValueError("item_i and item_j must differ")
        if self.chosen not in ("i", "j"):
            raise ValueError(f"chosen must be 'i' or 'j', got {self.chosen!r}")
        if not self.response_time > 0:
            raise ValueError("response_time must be positive")
        if self.trial_k < 1:
            raise ValueError("trial_k must be >= 1")

    @property
    def key(self):
        a, b = sorted((self.item_i, self.item_j))
        return (self.poll_id, self.user_id, a, b, self.trial_k)


@dataclass(frozen=True)
class SimulatedTrial:
    observation: Observation
    latent_latency: float
    latent_decision: float


@dataclass
class TrialPlan:
    """Which (poll, user, pair) comparisons to generate and how often.

    By default every user compares each unordered pair of each poll once. Pair
    orientation (which item is shown as ``item_i``) is randomized when ``shuffle_sides``.
    """

    trials_per_pair: int = 1
    counts: Mapping[tuple[str, str, int, int], int] | None = None
    shuffle_sides: bool = True


def cet_simulate(
    utilities: Sequence[ItemUtilities],
    users: Mapping[str, UserParams],
    design: TrialPlan | None,
    rng: np.random.Generator,
) -> list[SimulatedTrial]:
    """Generate choices and response times from the CET model.

    Each user gets an independent child stream spawned from ``rng`` in user order, so
    the output is ordered by (user, poll, pair, trial) and reproducible from the seed.
    """
    design = design or TrialPlan()
    out: list[SimulatedTrial] = []
    streams = rng.spawn(len(users))
    for (user_id, up), urng in zip(users.items(), streams):
        for util in utilities:
            w = util.w
            for i, j in combinations(range(len(w)), 2):
                n = design.trials_per_pair
                if design.counts is not None:
                    n = design.counts.get((util.poll_id, user_id, i, j), 0)
                for k in range(1, n + 1):
                    a, b = (j, i) if design.shuffle_sides and urng.random() < 0.5 else (i, j)
                    pred = cet_mean_response_time(w[a], w[b], up)
                    chose_first = urng.random() < pred.p
                    latency = urng.exponential(up.tau)
                    decision = urng.exponential(pred.delta)
                    obs = Observation(
                        poll_id=util.poll_id,
                        user_id=user_id,
                        item_i=util.items[a],
                        item_j=util.items[b],
                        chosen="i" if chose_first else "j",
                        response_time=latency + decision,
                        trial_k=k,
                    )
                    out.append(SimulatedTrial(obs, latency, decision))
    return out


# -------------------------------------------------------- Bradley-Terry bias

def bt_posterior_mean(N1: int, N: int) -> float:
    """Posterior mean of w under a uniform prior after ``N1`` wins in ``N`` comparisons."""
    if N < 0 or N1 < 0 or N1 > N:
        raise ValueError(f"need 0 <= N1 <= N, got N1={N1}, N={N}")
    return (N1 + 1.0) / (N + 2.0)


@dataclass(frozen=True)
class EpsilonDist:
    """Population law of the engagement slack.

    ``deterministic``: always ``mean``. ``exponential``: mean ``mean``.
    ``truncated_normal``: Normal(``mean``, ``sd``^2) conditioned on being >= 0.
    """

    family: Literal["deterministic", "exponential", "truncated_normal"]
    mean: float
    sd: float = 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "deterministic":
            return np.full(size, float(self.mean))
        if self.family == "exponential":
            return rng.exponential(self.mean, size=size)
        if self.family == "truncated_normal":
            from scipy.stats import truncnorm

            lo = (0.0 - self.mean) / self.sd
            return truncnorm.rvs(lo, np.inf, loc=self.mean, scale=self.sd, size=size, random_state=rng)
        raise ValueError(f"unknown family {self.family!r}")

    def bias_factor(self, rng: np.random.Generator | None = None, n_samples: int = 1_000_000) -> float:
        """``E[eps / (1 + 2 eps)]``; exact for the deterministic family, plug-in mean otherwise."""
        if self.family == "deterministic":
            return self.mean / (1.0 + 2.0 * self.mean)
        rng = rng if rng is not None else np.random.default_rng(0)
        e = self.sample(rng, n_samples)
        return float(np.mean(e / (1.0 + 2.0 * e)))


@dataclass(frozen=True)
class BiasReport:
    w: float
    B: float
    asymptotic_estimate: float
    finite_N_estimate: float
    N: int
    N1: int
    reps: int = 1
    mc_std_error: float = field(default=math.nan)

    @property
    def asymptotic_bias(self) -> float:
        return self.asymptotic_estimate - self.w


def engagement_bias(
    w: float, epsilon_dist: EpsilonDist, N: int, reps: int, rng: np.random.Generator,
    b_samples: int = 1_000_000,
) -> BiasReport:
    """Monte Carlo mean of the Bradley-Terry estimate when choices follow the CET model.

    Each replication draws ``N`` users' slacks, one choice each, and forms
    ``(N1 + 1) / (N + 2)``. ``N1`` in the report is from the last replication.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    if N < 1 or reps < 1:
        raise ValueError("N and reps must be positive")
    B = epsilon_dist.bias_factor(rng, b_samples)
    estimates = np.empty(reps)
    N1 = 0
    for r in range(reps):
        eps = epsilon_dist.sample(rng, N)
        p = (w + eps) / (1.0 + 2.0 * eps)
        N1 = int(np.count_nonzero(rng.random(N) < p))
        estimates[r] = bt_posterior_mean(N1, N)
    se = float(estimates.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    return BiasReport(
        w=w,
        B=B,
        asymptotic_estimate=w + B * (1.0 - 2.0 * w),
        finite_N_estimate=float(estimates.mean()),
        N=N,
        N1=N1,
        reps=reps,
        mc_std_error=se,
    )
