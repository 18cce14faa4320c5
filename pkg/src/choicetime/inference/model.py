"""Model variants, sampler state, and the choice + time log-likelihood."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..cet import ItemUtilities, UserParams, choice_prob, decision_mean
from ..data import Dataset


class ModelKind(str, enum.Enum):
    """``choice``: Bradley-Terry choices, item-independent decision mean ``mu_u``.
    ``choice_engagement``: engagement-flattened choices, still ``mu_u``.
    ``choice_engagement_time``: engagement choices and the utility-dependent decision mean.
    """

    CHOICE = "choice"
    CHOICE_ENGAGEMENT = "choice_engagement"
    CHOICE_ENGAGEMENT_TIME = "choice_engagement_time"

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        aliases = {"ce": cls.CHOICE_ENGAGEMENT, "cet": cls.CHOICE_ENGAGEMENT_TIME}
        if name in aliases:
            return aliases[name]
        return cls(name)

    @property
    def short(self) -> str:
        return {"choice": "choice", "choice_engagement": "ce", "choice_engagement_time": "cet"}[self.value]

    @property
    def user_params(self) -> tuple[str, ...]:
        """User-level parameter blocks in sweep order."""
        if self is ModelKind.CHOICE_ENGAGEMENT_TIME:
            return ("A", "tau", "rho", "epsilon", "gamma")
        if self is ModelKind.CHOICE_ENGAGEMENT:
            return ("tau", "mu", "epsilon")
        return ("tau", "mu")

    @property
    def has_engagement(self) -> bool:
        return self is not ModelKind.CHOICE


@dataclass
class ModelState:
    """One point in parameter space.

    ``users[name]`` holds that parameter for every user (dataset user order);
    ``w`` is the flat utility vector over all polls' items (dataset item order).
    """

    kind: ModelKind
    means: dict[str, float]
    variances: dict[str, float]
    users: dict[str, np.ndarray]
    w: np.ndarray

    def copy(self) -> "ModelState":
        return ModelState(
            kind=self.kind,
            means=dict(self.means),
            variances=dict(self.variances),
            users={k: v.copy() for k, v in self.users.items()},
            w=self.w.copy(),
        )

    def user_value(self, name: str, u: int) -> float:
        return float(self.users[name][u])

    def user_params(self, u: int) -> UserParams:
        """CET parameters of user ``u`` (only for the full model)."""
        return UserParams(**{k: float(self.users[k][u]) for k in ("A", "tau", "rho", "epsilon", "gamma")})

    def utilities(self, data: Dataset) -> list[ItemUtilities]:
        out = []
        for s, p in enumerate(data.poll_ids):
            o, m = data.offsets[s], data.n_items[s]
            out.append(ItemUtilities(p, self.w[o : o + m].copy(), tuple(data.items[p])))
        return out

    def violations(self, data: Dataset) -> list[str]:
        """Human-readable list of broken simplex/positivity invariants (empty when valid)."""
        bad = []
        for s, p in enumerate(data.poll_ids):
            o, m = data.offsets[s], data.n_items[s]
            ws = self.w[o : o + m]
            if abs(ws.sum() - 1.0) > 1e-9:
                bad.append(f"poll {p}: utilities sum to {ws.sum()}")
            if np.any(ws <= 0) or np.any(ws[:-1] >= 1):
                bad.append(f"poll {p}: utility outside (0, 1)")
        for name, vals in self.users.items():
            if name in NONNEGATIVE_PARAMS:
                if np.any(vals < 0):
                    bad.append(f"user parameter {name} negative")
            elif np.any(vals <= 0):
                bad.append(f"user parameter {name} not positive")
        for name, v in self.variances.items():
            if not v > 0:
                bad.append(f"variance of {name} not positive")
        return bad

    def is_valid(self, data: Dataset) -> bool:
        return not self.violations(data)


# slack and shape parameters may sit at zero; A, tau and mu are exponential means
NONNEGATIVE_PARAMS = frozenset({"epsilon", "rho", "gamma"})


def uniform_utilities(data: Dataset) -> np.ndarray:
    return np.concatenate([np.full(m, 1.0 / m) for m in data.n_items])


def hypoexp_logpdf_fast(t, a, b):
    """Unchecked, vectorized log density of Exp(mean a) + Exp(mean b); see distributions."""
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    diff = hi - lo
    equal = diff < 1e-8 * hi
    with np.errstate(divide="ignore", invalid="ignore"):
        neq = -t / hi + np.log(-np.expm1(-t * diff / (hi * lo))) - np.log(diff)
        eq = np.log(t) - t / a - 2.0 * np.log(a)
    return np.where(equal, eq, neq)


def trial_choice_prob(state: ModelState, data: Dataset, w=None, epsilon=None):
    w = state.w if w is None else w
    wi, wj = w[data.gi], w[data.gj]
    if state.kind is ModelKind.CHOICE:
        return wi / (wi + wj)
    eps = (state.users["epsilon"] if epsilon is None else epsilon)[data.user]
    return choice_prob(wi, wj, eps)


def trial_decision_mean(state: ModelState, data: Dataset, w=None, overrides: dict | None = None):
    users = state.users if not overrides else {**state.users, **overrides}
    if state.kind is not ModelKind.CHOICE_ENGAGEMENT_TIME:
        return users["mu"][data.user]
    w = state.w if w is None else w
    u = data.user
    return decision_mean(w[data.gi], w[data.gj], users["A"][u], users["rho"][u], users["epsilon"][u], users["gamma"][u])


def choice_loglik_terms(p, chose_i):
    with np.errstate(divide="ignore"):
        return np.where(chose_i > 0.5, np.log(p), np.log1p(-p))


def trial_loglik(state: ModelState, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial (choice, time) log-likelihood terms."""
    c = choice_loglik_terms(trial_choice_prob(state, data), data.chose_i)
    tau = state.users["tau"][data.user]
    t = hypoexp_logpdf_fast(data.t, tau, trial_decision_mean(state, data))
    return c, t


def log_likelihood(state: ModelState, data: Dataset, kind: ModelKind | None = None) -> float:
    """Bernoulli choice log-mass plus hypoexponential time log-density over all trials.

    Returns ``-inf`` for states outside the parameter domain.
    """
    if kind is not None and ModelKind(kind) is not state.kind:
        raise ValueError(f"state is for {state.kind.value}, not {ModelKind(kind).value}")
    if not state.is_valid(data):
        return -np.inf
    c, t = trial_loglik(state, data)
    total = float(c.sum() + t.sum())
    return total if np.isfinite(total) or total == -np.inf else -np.inf
