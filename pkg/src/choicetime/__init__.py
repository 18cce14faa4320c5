"""Choice and response-time models: the choice-engagement-time (CET) model, its
reference race/diffusion models, hierarchical Bayesian fitting and analysis tools."""
from .cet import ItemUtilities, Observation, UserParams, cet_choice_prob, cet_mean_response_time, cet_simulate
from .data import Dataset, load_dataset, save_dataset
from .distributions import ParameterDomainError

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ItemUtilities",
    "Observation",
    "ParameterDomainError",
    "UserParams",
    "cet_choice_prob",
    "cet_mean_response_time",
    "cet_simulate",
    "load_dataset",
    "save_dataset",
]
