from .model import ModelKind, ModelState, log_likelihood, trial_loglik
from .sampler import (
    EmptyDatasetError,
    Hyperprior,
    SamplerConfig,
    gibbs_update_global_mean,
    gibbs_update_global_variance,
    global_mean_posterior,
    global_variance_posterior,
    initial_state,
    mh_update_item_utility,
    mh_update_user_epsilon,
    mh_update_user_param,
    run_sampler,
)
from .summary import PosteriorSamples, compute_dic, split_rhat, summarize

__all__ = [
    "EmptyDatasetError",
    "Hyperprior",
    "ModelKind",
    "ModelState",
    "PosteriorSamples",
    "SamplerConfig",
    "compute_dic",
    "gibbs_update_global_mean",
    "gibbs_update_global_variance",
    "global_mean_posterior",
    "global_variance_posterior",
    "initial_state",
    "log_likelihood",
    "mh_update_item_utility",
    "mh_update_user_epsilon",
    "mh_update_user_param",
    "run_sampler",
    "split_rhat",
    "summarize",
    "trial_loglik",
]
