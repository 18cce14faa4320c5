"""Synthetic populations and datasets drawn from the CET model, with ground truth."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .cet import ItemUtilities, SimulatedTrial, TrialPlan, UserParams, cet_simulate

PARAM_NAMES = ("A", "tau", "rho", "epsilon", "gamma")

# population means and standard deviations fitted to the two subject pools
STUDENT_MEANS = dict(A=1.37, tau=0.85, rho=0.41, epsilon=0.20, gamma=1.04)
STUDENT_SDS = dict(A=0.40, tau=0.37, rho=0.35, epsilon=0.28, gamma=0.47)
AMT_MEANS = dict(A=1.18, tau=0.98, rho=0.51, epsilon=0.27, gamma=0.70)
AMT_SDS = dict(A=0.34, tau=0.30, rho=0.25, epsilon=0.22, gamma=0.37)


@dataclass
class PopulationSpec:
    """User parameters drawn from independent normals, redrawn until positive."""

    name: str = "population"
    n_users: int = 50
    means: dict = field(default_factory=lambda: dict(STUDENT_MEANS))
    sds: dict = field(default_factory=lambda: dict(STUDENT_SDS))

    def draw(self, rng: np.random.Generator) -> list[UserParams]:
        cols = {}
        for name in PARAM_NAMES:
            m, s = float(self.means[name]), float(self.sds[name])
            vals = m + s * rng.standard_normal(self.n_users)
            for _ in range(10_000):
                bad = vals <= 0
                if not bad.any():
                    break
                vals[bad] = m + s * rng.standard_normal(int(bad.sum()))
            else:
                raise ValueError(f"cannot draw positive values of {name} from N({m}, {s}^2)")
            cols[name] = vals
        return [UserParams(**{k: float(cols[k][u]) for k in PARAM_NAMES}) for u in range(self.n_users)]


@dataclass
class PollSpec:
    poll_id: str
    n_items: int = 5
    utilities: list[float] | None = None


@dataclass
class SimulationSpec:
    """Everything needed to generate a synthetic experiment.

    Polls without explicit utilities get a Dirichlet(``utility_concentration``) draw.
    """

    polls: list[PollSpec] = field(default_factory=lambda: [PollSpec(f"poll{s}") for s in range(6)])
    populations: list[PopulationSpec] = field(default_factory=lambda: [PopulationSpec()])
    trials_per_pair: int = 1
    utility_concentration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.polls = [p if isinstance(p, PollSpec) else PollSpec(**p) for p in self.polls]
        self.populations = [p if isinstance(p, PopulationSpec) else PopulationSpec(**p) for p in self.populations]
        if not self.polls:
            raise ValueError("need at least one poll")
        for p in self.polls:
            if p.n_items < 2:
                raise ValueError(f"poll {p.poll_id} needs at least two items")
            if p.utilities is not None and len(p.utilities) != p.n_items:
                raise ValueError(f"poll {p.poll_id}: {len(p.utilities)} utilities for {p.n_items} items")
        if sum(p.n_users for p in self.populations) < 1:
            raise ValueError("need at least one user")
        if self.trials_per_pair < 1:
            raise ValueError("trials_per_pair must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationSpec":
        return cls(**d)


@dataclass
class GroundTruth:
    utilities: list[ItemUtilities]
    users: dict[str, UserParams]
    labels: dict[str, str]
    populations: list[PopulationSpec]

    def to_dict(self) -> dict:
        return {
            "utilities": {u.poll_id: dict(zip(u.items, u.w.tolist())) for u in self.utilities},
            "users": {uid: p.as_dict() for uid, p in self.users.items()},
            "labels": dict(self.labels),
            "global": {
                p.name: {"means": dict(p.means), "variances": {k: float(v) ** 2 for k, v in p.sds.items()}}
                for p in self.populations
            },
        }


def simulate(spec: SimulationSpec) -> tuple[list[SimulatedTrial], GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    util_rng, user_rng, trial_rng = rng.spawn(3)
    utilities = []
    for p in spec.polls:
        w = (
            np.asarray(p.utilities, float)
            if p.utilities is not None
            else util_rng.dirichlet(np.full(p.n_items, spec.utility_concentration))
        )
        utilities.append(ItemUtilities(p.poll_id, w / w.sum(), tuple(f"item{k}" for k in range(p.n_items))))
    users: dict[str, UserParams] = {}
    labels: dict[str, str] = {}
    width = len(str(sum(p.n_users for p in spec.populations)))
    for pop in spec.populations:
        for params in pop.draw(user_rng):
            uid = f"u{len(users):0{width}d}"
            users[uid] = params
            labels[uid] = pop.name
    trials = cet_simulate(utilities, users, TrialPlan(trials_per_pair=spec.trials_per_pair), trial_rng)
    return trials, GroundTruth(utilities, users, labels, spec.populations)
