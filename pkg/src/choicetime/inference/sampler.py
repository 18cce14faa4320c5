"""Metropolis-within-Gibbs sampler for the hierarchical CET model and its benchmarks.

Sweep per iteration:

1. global means, conjugate normal draws given the user values;
2. global variances, conjugate inverse-gamma draws given the new means;
3. user parameters, random-walk Metropolis per parameter block;
4. free item utilities, random-walk Metropolis, ascending item index.

User parameters of different users are conditionally independent given the
globals and utilities, so a block update proposes for all users at once and
accepts each user separately. The same holds for utilities across polls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from .model import (
    ModelKind,
    ModelState,
    choice_loglik_terms,
    hypoexp_logpdf_fast,
    trial_choice_prob,
    trial_decision_mean,
    trial_loglik,
    uniform_utilities,
)

INIT_ANCHORS = {"A": 1.0, "tau": 1.0, "rho": 0.5, "epsilon": 0.25, "gamma": 1.0, "mu": 1.0}


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperprior:
    """Normal(``mean_prior_mean``, ``mean_prior_var``) on global means, IG(shape, scale) on variances."""

    mean_prior_mean: float = 0.0
    mean_prior_var: float = 100.0 ** 2
    ig_shape: float = 1.0
    ig_scale: float = 1.0


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 3
    iterations: int = 5000
    burn_in: int = 500
    thin: int = 1
    proposal_sd: float = 0.02
    seed: int = 0
    hyper: Hyperprior = field(default_factory=Hyperprior)
    init_anchors: dict = field(default_factory=lambda: dict(INIT_ANCHORS))
    init_sd: float = 0.25

    def __post_init__(self):
        if self.chains < 1 or self.iterations < 1 or self.thin < 1:
            raise ValueError("chains, iterations and thin must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if not self.proposal_sd > 0:
            raise ValueError("proposal_sd must be positive")

    @property
    def kept_per_chain(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


# ------------------------------------------------------------ conjugate steps

def global_mean_posterior(kappa_values, sigma2_kappa: float, hyper: Hyperprior = Hyperprior()) -> tuple[float, float]:
    """Mean and variance of the normal full conditional of a global mean.

    With a zero-mean prior this is ``kbar / (1 + s2 / (M s0))`` and ``s2 / (M + s2 / s0)``.
    """
    x = np.asarray(kappa_values, dtype=float)
    M = x.size
    if M < 1:
        raise ValueError("need at least one user value")
    s0 = hyper.mean_prior_var
    prec = M / sigma2_kappa + 1.0 / s0
    var = 1.0 / prec
    mean = var * (x.sum() / sigma2_kappa + hyper.mean_prior_mean / s0)
    return float(mean), float(var)


def gibbs_update_global_mean(kappa_values, sigma2_kappa: float, hyper: Hyperprior, rng: np.random.Generator) -> float:
    mean, var = global_mean_posterior(kappa_values, sigma2_kappa, hyper)
    return float(mean + math.sqrt(var) * rng.standard_normal())


def global_variance_posterior(kappa_values, kappa_mean: float, hyper: Hyperprior = Hyperprior()) -> tuple[float, float]:
    """Shape and scale of the inverse-gamma full conditional of a global variance."""
    x = np.asarray(kappa_values, dtype=float)
    if x.size < 1:
        raise ValueError("need at least one user value")
    return hyper.ig_shape + x.size / 2.0, hyper.ig_scale + 0.5 * float(np.sum((x - kappa_mean) ** 2))


def gibbs_update_global_variance(kappa_values, kappa_mean: float, hyper: Hyperprior, rng: np.random.Generator) -> float:
    shape, scale = global_variance_posterior(kappa_values, kappa_mean, hyper)
    return float(1.0 / rng.gamma(shape, 1.0 / scale))


# ---------------------------------------------------------------- MH kernels

class _TrialCache:
    """Current per-trial log-likelihood terms, updated in place on acceptance."""

    def __init__(self, state: ModelState, data: Dataset):
        self.choice, self.time = trial_loglik(state, data)


def _time_terms(state: ModelState, data: Dataset, overrides: dict | None = None, w=None):
    tau = (overrides or {}).get("tau", state.users["tau"])[data.user]
    return hypoexp_logpdf_fast(data.t, tau, trial_decision_mean(state, data, w=w, overrides=overrides))


def _normal_log_ratio(prop, cur, mean, var):
    return -((prop - mean) ** 2 - (cur - mean) ** 2) / (2.0 * var)


def user_block_log_ratio(state: ModelState, data: Dataset, name: str, proposal: np.ndarray,
                         cache: _TrialCache | None = None) -> np.ndarray:
    """Log acceptance ratio per user for replacing ``users[name]`` by ``proposal``.

    Entries for nonpositive proposals are ``-inf``. Only the likelihood factors that
    depend on the parameter enter: time for all blocks, plus choice for epsilon.
    """
    cache = cache or _TrialCache(state, data)
    cur = state.users[name]
    valid = proposal > 0
    safe = np.where(valid, proposal, cur)
    new_time = _time_terms(state, data, overrides={name: safe})
    diff = new_time - cache.time
    if name == "epsilon":
        new_choice = choice_loglik_terms(trial_choice_prob(state, data, epsilon=safe), data.chose_i)
        diff = diff + (new_choice - cache.choice)
    with np.errstate(invalid="ignore"):
        lik = np.bincount(data.user, weights=diff, minlength=data.n_users)
    prior = _normal_log_ratio(safe, cur, state.means[name], state.variances[name])
    ratio = np.where(valid, lik + prior, -np.inf)
    return np.where(np.isnan(ratio), -np.inf, ratio)


def _apply_user_block(state, data, name, proposal, accept, cache):
    state.users[name] = np.where(accept, proposal, state.users[name])
    trial_acc = accept[data.user]
    new_time = _time_terms(state, data)
    cache.time = np.where(trial_acc, new_time, cache.time)
    if name == "epsilon":
        new_choice = choice_loglik_terms(trial_choice_prob(state, data), data.chose_i)
        cache.choice = np.where(trial_acc, new_choice, cache.choice)


def mh_user_block(state: ModelState, data: Dataset, name: str, config: SamplerConfig,
                  rng: np.random.Generator, cache: _TrialCache | None = None, proposal=None) -> np.ndarray:
    """Random-walk update of one parameter for every user; returns per-user accept flags."""
    cache = cache or _TrialCache(state, data)
    cur = state.users[name]
    if proposal is None:
        proposal = cur + config.proposal_sd * rng.standard_normal(cur.shape)
    log_u = np.log(rng.random(cur.shape))
    accept = log_u < user_block_log_ratio(state, data, name, proposal, cache)
    _apply_user_block(state, data, name, proposal, accept, cache)
    return accept


def mh_update_user_param(state: ModelState, user_id, param_name: str, data: Dataset, config: SamplerConfig,
                         rng: np.random.Generator, proposal: float | None = None) -> tuple[ModelState, bool]:
    """Single-user random-walk step for a timing parameter (time likelihood only).

    ``user_id`` is a dataset user id or index. Returns a new state and the accept flag.
    """
    if param_name == "epsilon":
        raise ValueError("use mh_update_user_epsilon for epsilon")
    return _single_user_step(state, user_id, param_name, data, config, rng, proposal)


def mh_update_user_epsilon(state: ModelState, user_id, data: Dataset, config: SamplerConfig,
                           rng: np.random.Generator, proposal: float | None = None) -> tuple[ModelState, bool]:
    """Single-user random-walk step for epsilon (choice and time likelihood)."""
    return _single_user_step(state, user_id, "epsilon", data, config, rng, proposal)


def _single_user_step(state, user_id, name, data, config, rng, proposal):
    if name not in state.kind.user_params:
        raise ValueError(f"{name} is not a user parameter of {state.kind.value}")
    u = data.user_ids.index(user_id) if isinstance(user_id, str) else int(user_id)
    new = state.copy()
    cur = new.users[name][u]
    if proposal is None:
        proposal = cur + config.proposal_sd * rng.standard_normal()
    full = new.users[name].copy()
    full[u] = proposal
    ratio = user_block_log_ratio(new, data, name, full)[u]
    accepted = bool(math.log(rng.random()) < ratio)
    if accepted:
        new.users[name][u] = proposal
    return new, accepted


def _poll_slots(data: Dataset, k: int):
    """Global indices of free slot ``k`` and of the last item, for polls with > k free slots."""
    polls = np.flatnonzero(data.n_items - 1 > k)
    return polls, data.offsets[polls] + k, data.offsets[polls] + data.n_items[polls] - 1


def utility_log_ratio(state: ModelState, data: Dataset, k: int, proposal: np.ndarray,
                      cache: _TrialCache | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Log acceptance ratio per eligible poll for moving free utility slot ``k``.

    ``proposal`` holds one value per eligible poll (see ``_poll_slots``). A proposal is
    rejected when it leaves (0, 1) or pushes the implied last utility to <= 0.
    """
    cache = cache or _TrialCache(state, data)
    polls, slot, last = _poll_slots(data, k)
    w_new = state.w.copy()
    implied_last = state.w[last] - (proposal - state.w[slot])
    valid = (proposal > 0) & (proposal < 1) & (implied_last > 0)
    w_new[slot] = np.where(valid, proposal, state.w[slot])
    w_new[last] = np.where(valid, implied_last, state.w[last])
    diff = choice_loglik_terms(trial_choice_prob(state, data, w=w_new), data.chose_i) - cache.choice
    if state.kind is ModelKind.CHOICE_ENGAGEMENT_TIME:
        diff = diff + (_time_terms(state, data, w=w_new) - cache.time)
    with np.errstate(invalid="ignore"):
        per_poll = np.bincount(data.poll, weights=diff, minlength=data.n_polls)[polls]
    ratio = np.where(valid, per_poll, -np.inf)
    return np.where(np.isnan(ratio), -np.inf, ratio), w_new


def mh_utility_slot(state: ModelState, data: Dataset, k: int, config: SamplerConfig, rng: np.random.Generator,
                    cache: _TrialCache | None = None, proposal=None) -> np.ndarray:
    cache = cache or _TrialCache(state, data)
    polls, slot, last = _poll_slots(data, k)
    if proposal is None:
        proposal = state.w[slot] + config.proposal_sd * rng.standard_normal(slot.size)
    log_u = np.log(rng.random(slot.size))
    ratio, w_new = utility_log_ratio(state, data, k, proposal, cache)
    accept = log_u < ratio
    state.w[slot] = np.where(accept, w_new[slot], state.w[slot])
    state.w[last] = np.where(accept, w_new[last], state.w[last])
    trial_acc = np.zeros(data.n_polls, dtype=bool)
    trial_acc[polls] = accept
    trial_acc = trial_acc[data.poll]
    c, t = trial_loglik(state, data)
    cache.choice = np.where(trial_acc, c, cache.choice)
    cache.time = np.where(trial_acc, t, cache.time)
    return accept


def mh_update_item_utility(state: ModelState, poll_id, item_index: int, data: Dataset, config: SamplerConfig,
                           rng: np.random.Generator, proposal: float | None = None) -> tuple[ModelState, bool]:
    """Random-walk step for free utility ``item_index`` of one poll (last item is implied)."""
    s = data.poll_ids.index(poll_id) if isinstance(poll_id, str) else int(poll_id)
    if not 0 <= item_index < data.n_items[s] - 1:
        raise ValueError("item_index must be a free coordinate (not the last item)")
    new = state.copy()
    polls, slot, _ = _poll_slots(data, item_index)
    pos = int(np.flatnonzero(polls == s)[0])
    cur = new.w[slot[pos]]
    if proposal is None:
        proposal = cur + config.proposal_sd * rng.standard_normal()
    prop_all = new.w[slot].copy()
    prop_all[pos] = proposal
    ratio, w_new = utility_log_ratio(new, data, item_index, prop_all)
    accepted = bool(math.log(rng.random()) < ratio[pos])
    if accepted:
        new.w[slot[pos]] = w_new[slot[pos]]
        last = data.offsets[s] + data.n_items[s] - 1
        new.w[last] = w_new[last]
    return new, accepted


# ------------------------------------------------------------------- driver

def initial_state(data: Dataset, kind: ModelKind, config: SamplerConfig, rng: np.random.Generator) -> ModelState:
    """Uniform utilities; user values from Normal(anchor, init_sd^2) redrawn until positive."""
    users = {}
    for name in kind.user_params:
        vals = config.init_anchors[name] + config.init_sd * rng.standard_normal(data.n_users)
        while np.any(vals <= 0):
            bad = vals <= 0
            vals[bad] = config.init_anchors[name] + config.init_sd * rng.standard_normal(int(bad.sum()))
        users[name] = vals
    return ModelState(
        kind=kind,
        means={n: float(config.init_anchors[n]) for n in kind.user_params},
        variances={n: 1.0 for n in kind.user_params},
        users=users,
        w=uniform_utilities(data),
    )


def sweep(state: ModelState, data: Dataset, config: SamplerConfig, rng: np.random.Generator,
          cache: _TrialCache, accepts: dict[str, float]) -> None:
    """One full Metropolis-within-Gibbs iteration, in place."""
    hyper = config.hyper
    names = state.kind.user_params
    for n in names:
        state.means[n] = gibbs_update_global_mean(state.users[n], state.variances[n], hyper, rng)
    for n in names:
        state.variances[n] = gibbs_update_global_variance(state.users[n], state.means[n], hyper, rng)
    for n in names:
        accepts[n] += float(mh_user_block(state, data, n, config, rng, cache).mean())
    for k in range(int(data.n_items.max()) - 1):
        acc = mh_utility_slot(state, data, k, config, rng, cache)
        accepts["w"] += float(acc.mean()) / max(1, int(data.n_items.max()) - 1)


def run_chain(data: Dataset, kind: ModelKind, config: SamplerConfig, rng: np.random.Generator,
              init: ModelState | None = None) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    state = init.copy() if init is not None else initial_state(data, kind, config, rng)
    cache = _TrialCache(state, data)
    names = kind.user_params
    n_keep = config.kept_per_chain
    draws = {
        "means": np.empty((n_keep, len(names))),
        "variances": np.empty((n_keep, len(names))),
        "users": np.empty((n_keep, len(names), data.n_users)),
        "w": np.empty((n_keep, data.total_items)),
    }
    accepts = {n: 0.0 for n in names} | {"w": 0.0}
    j = 0
    for it in range(config.iterations):
        sweep(state, data, config, rng, cache, accepts)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws["means"][j] = [state.means[n] for n in names]
            draws["variances"][j] = [state.variances[n] for n in names]
            draws["users"][j] = [state.users[n] for n in names]
            draws["w"][j] = state.w
            j += 1
    return draws, {k: v / config.iterations for k, v in accepts.items()}


def chain_rngs(config: SamplerConfig) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(config.chains)]


def run_sampler(data: Dataset, kind: ModelKind | str, config: SamplerConfig = SamplerConfig()):
    """Run ``config.chains`` independent chains; deterministic given ``config.seed``."""
    from .summary import PosteriorSamples

    kind = ModelKind.parse(kind) if isinstance(kind, str) else kind
    if data is None or len(data) == 0:
        raise EmptyDatasetError("dataset is empty")
    chains = [run_chain(data, kind, config, rng) for rng in chain_rngs(config)]
    return PosteriorSamples.from_chains(data, kind, config, chains)
