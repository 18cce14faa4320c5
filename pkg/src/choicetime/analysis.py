"""Descriptive statistics, rank-sum tests, utility entropy and engagement clustering."""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .cet import ItemUtilities, Observation
from .data import Dataset


class DegenerateCorrelationError(ValueError):
    """Correlation is undefined (fewer than two pairs)."""


class DegenerateClusteringError(ValueError):
    """Fewer distinct feature vectors than clusters."""


# ---------------------------------------------------------------- pair tables

@dataclass(frozen=True)
class PairSummary:
    poll_id: str
    item_i: str
    item_j: str
    n_trials: int
    frac_i_chosen: float
    choice_fraction: float
    mean_rt: float
    mean_rt_given_i: float
    mean_rt_given_j: float

    def as_dict(self) -> dict:
        return asdict(self)


def _observations(data) -> list[Observation]:
    if isinstance(data, Dataset):
        return data.observations
    return [getattr(o, "observation", o) for o in data]


def _group_pairs(data) -> dict[tuple[str, str, str], tuple[list[float], list[float]]]:
    """(poll, a, b) with a < b  ->  (times when a chosen, times when b chosen)."""
    groups: dict = defaultdict(lambda: ([], []))
    for o in _observations(data):
        a, b = sorted((o.item_i, o.item_j))
        winner = o.item_i if o.chosen == "i" else o.item_j
        groups[(o.poll_id, a, b)][0 if winner == a else 1].append(o.response_time)
    return dict(sorted(groups.items()))


def pair_summaries(data) -> list[PairSummary]:
    """One row per (poll, unordered pair); ``item_i`` is the lexicographically smaller item."""
    groups = _group_pairs(data)
    if not groups:
        raise ValueError("empty dataset")
    out = []
    for (poll, a, b), (ta, tb) in groups.items():
        n = len(ta) + len(tb)
        frac = len(ta) / n
        out.append(
            PairSummary(
                poll_id=poll,
                item_i=a,
                item_j=b,
                n_trials=n,
                frac_i_chosen=frac,
                choice_fraction=min(frac, 1.0 - frac),
                mean_rt=float(np.mean(ta + tb)),
                mean_rt_given_i=float(np.mean(ta)) if ta else float("nan"),
                mean_rt_given_j=float(np.mean(tb)) if tb else float("nan"),
            )
        )
    return out


@dataclass(frozen=True)
class PopulationStats:
    mean_choice_fraction: float
    mean_rt: float
    pearson_r: float
    pearson_p: float
    n_pairs: int
    degenerate: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def population_stats(data) -> PopulationStats:
    """Averages over pairs, and the pair-level correlation of choice fraction with mean RT.

    A constant column leaves the correlation undefined; that is reported with
    ``degenerate=True`` and NaN statistics rather than raised.
    """
    rows = data if data and isinstance(data, list) and isinstance(data[0], PairSummary) else pair_summaries(data)
    if len(rows) < 2:
        raise DegenerateCorrelationError(f"correlation needs at least 2 pairs, got {len(rows)}")
    cf = np.array([r.choice_fraction for r in rows])
    rt = np.array([r.mean_rt for r in rows])
    if np.ptp(cf) == 0 or np.ptp(rt) == 0:
        r, p, degenerate = float("nan"), float("nan"), True
    else:
        res = stats.pearsonr(cf, rt)
        r, p, degenerate = float(res.statistic), float(res.pvalue), False
    return PopulationStats(float(cf.mean()), float(rt.mean()), r, p, len(rows), degenerate)


# ---------------------------------------------------------------- rank sum

@dataclass(frozen=True)
class MannWhitney:
    u_statistic: float
    p_value: float
    z: float = float("nan")


def _rank_sum_exact(x: np.ndarray, y: np.ndarray, u_obs: float) -> float:
    """Two-sided permutation p-value of U by full enumeration (midranks for ties)."""
    pooled = np.concatenate([x, y])
    ranks = stats.rankdata(pooled)
    n1, n = len(x), len(pooled)
    mu = n1 * (n - n1) / 2.0
    dev_obs = abs(u_obs - mu)
    hits = total = 0
    for idx in itertools.combinations(range(n), n1):
        u = ranks[list(idx)].sum() - n1 * (n1 + 1) / 2.0
        total += 1
        hits += abs(u - mu) >= dev_obs - 1e-9
    return hits / total


def mann_whitney(x: Sequence[float], y: Sequence[float], method: str = "normal") -> MannWhitney:
    """Two-tailed Wilcoxon-Mann-Whitney rank-sum test.

    ``method="normal"`` uses the normal approximation with tie and continuity
    corrections; ``"exact"`` enumerates all splits (small samples only).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    ranks = stats.rankdata(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    if method == "exact":
        if n1 + n2 > 20:
            raise ValueError("exact enumeration is limited to n1 + n2 <= 20")
        return MannWhitney(u, _rank_sum_exact(x, y, u))
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    n = n1 + n2
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    mu = n1 * n2 / 2.0
    if var <= 0:
        return MannWhitney(u, 1.0, 0.0)
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    p = float(min(1.0, 2.0 * stats.norm.sf(z)))
    return MannWhitney(u, p, z)


@dataclass(frozen=True)
class TestResult:
    poll_id: str
    item_i: str
    item_j: str
    n_i: int
    n_j: int
    u_statistic: float
    p_value: float
    bonferroni_threshold: float
    reject: bool

    __test__ = False  # not a pytest class

    def as_dict(self) -> dict:
        return asdict(self)


def conditional_rt_test(data, alpha: float = 0.05, vote_filter: int = 1, method: str = "normal") -> list[TestResult]:
    """Per pair, compare response times conditioned on which item won.

    A pair is eligible when each item has at least ``vote_filter`` votes; the
    Bonferroni threshold is ``alpha / m`` with ``m`` the number of eligible pairs.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if vote_filter < 1:
        raise ValueError("vote_filter must be >= 1")
    eligible = [(k, v) for k, v in _group_pairs(data).items() if min(len(v[0]), len(v[1])) >= vote_filter]
    m = len(eligible)
    out = []
    for (poll, a, b), (ta, tb) in eligible:
        res = mann_whitney(ta, tb, method=method)
        thr = alpha / m
        out.append(TestResult(poll, a, b, len(ta), len(tb), res.u_statistic, res.p_value, thr, res.p_value < thr))
    return out


# ---------------------------------------------------------------- entropy

def utility_entropy(w) -> float:
    """Shannon entropy of a utility vector, with ``0 log 0 = 0``."""
    v = np.asarray(w.w if isinstance(w, ItemUtilities) else w, dtype=float)
    if np.any(v < 0) or not math.isclose(v.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("utilities must be a probability vector")
    nz = v[v > 0]
    return float(max(0.0, -np.sum(nz * np.log(nz))))


# ---------------------------------------------------------------- clustering

def jaccard(a: Iterable, b: Iterable) -> Fraction:
    a, b = set(a), set(b)
    union = a | b
    return Fraction(len(a & b), len(union)) if union else Fraction(1)


def average_jaccard(labels: Mapping, clusters: Mapping) -> float:
    """Best-pairing mean Jaccard index between two 2-way partitions of the same users."""
    users = set(labels)
    if users != set(clusters):
        raise ValueError("labels and clusters must cover the same users")

    def groups(m):
        g = defaultdict(set)
        for u, v in m.items():
            g[v].add(u)
        return [g[k] for k in sorted(g, key=str)]

    L, K = groups(labels), groups(clusters)
    if len(L) > 2 or len(K) > 2:
        raise ValueError("J1 is defined for two-way partitions")
    L += [set()] * (2 - len(L))
    K += [set()] * (2 - len(K))
    best = max(jaccard(L[0], K[0]) + jaccard(L[1], K[1]), jaccard(L[0], K[1]) + jaccard(L[1], K[0]))
    return float(best / 2)


@dataclass
class ClusterResult:
    assignments: dict[str, int]
    centroids: np.ndarray
    inertia: float
    avg_jaccard: float | None = None
    feature_names: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "assignments": dict(self.assignments),
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "avg_jaccard": self.avg_jaccard,
            "feature_names": list(self.feature_names),
        }


def standardize(X: np.ndarray) -> np.ndarray:
    """Column-wise z-scores; constant columns map to 0."""
    X = np.asarray(X, float)
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def cluster_users(
    features: Mapping[str, Sequence[float]],
    k: int = 2,
    labels: Mapping[str, object] | None = None,
    restarts: int = 32,
    rng: np.random.Generator | int | None = 0,
    standardize_features: bool = True,
    feature_names: Sequence[str] = (),
) -> ClusterResult:
    """k-means (k-means++ seeding, best of ``restarts``) on per-user feature vectors.

    Cluster indices are 1-based and ordered by first appearance in sorted user order,
    so the output does not depend on arbitrary label numbering.
    """
    from sklearn.cluster import KMeans

    uids = sorted(features)
    if len(uids) < 2:
        raise DegenerateClusteringError("need at least 2 users")
    X = np.array([np.atleast_1d(np.asarray(features[u], float)) for u in uids])
    if X.ndim != 2:
        raise ValueError("feature vectors must share one dimension")
    if standardize_features:
        X = standardize(X)
    if len(np.unique(X, axis=0)) < k:
        raise DegenerateClusteringError(f"fewer than {k} distinct feature vectors")
    seed = rng if isinstance(rng, (int, np.integer)) or rng is None else int(rng.integers(2**31 - 1))
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed).fit(X)
    order = list(dict.fromkeys(km.labels_.tolist()))
    remap = {old: new + 1 for new, old in enumerate(order)}
    assignments = {u: remap[int(c)] for u, c in zip(uids, km.labels_)}
    centroids = km.cluster_centers_[order]
    result = ClusterResult(assignments, centroids, float(km.inertia_), feature_names=tuple(feature_names))
    if labels is not None:
        result.avg_jaccard = average_jaccard({u: labels[u] for u in uids}, assignments)
    return result


FEATURE_SETS: dict[str, tuple[str, ...]] = {
    "A": ("A",),
    "tau": ("tau",),
    "rho": ("rho",),
    "epsilon": ("epsilon",),
    "gamma": ("gamma",),
    "epsilon,gamma": ("epsilon", "gamma"),
    "all": ("A", "tau", "rho", "epsilon", "gamma"),
}


def resolve_feature_set(feature_set) -> tuple[str, ...]:
    if isinstance(feature_set, str):
        key = feature_set.replace(" ", "").strip("()")
        if key in FEATURE_SETS:
            return FEATURE_SETS[key]
        return tuple(key.split(","))
    return tuple(feature_set)


def feature_matrix(samples, feature_set="epsilon,gamma", standardized: bool = True) -> dict[str, np.ndarray]:
    """Per-user posterior means of the chosen parameters, z-scored per feature."""
    names = resolve_feature_set(feature_set)
    if feature_set == "all":
        names = tuple(n for n in names if n in samples.param_names)
    missing = [n for n in names if n not in samples.param_names]
    if missing:
        raise ValueError(f"{samples.kind.value} has no user parameter(s) {missing}")
    cols = []
    for n in names:
        k = samples.param_names.index(n)
        cols.append(samples.users[:, :, k].mean(axis=(0, 1)))
    X = np.column_stack(cols)
    if standardized:
        X = standardize(X)
    return {uid: X[u] for u, uid in enumerate(samples.user_ids)}


# ---------------------------------------------------------------- quartile tables

@dataclass(frozen=True)
class QuartileRow:
    group: str
    parameter: str
    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def quartile_table(values: Mapping[str, Mapping[str, Sequence[float]]]) -> list[QuartileRow]:
    """Box-plot statistics; ``values[group][parameter]`` is a sample."""
    rows = []
    for g, params in values.items():
        for p, v in params.items():
            v = np.asarray(v, float)
            q = np.percentile(v, [0, 25, 50, 75, 100])
            rows.append(QuartileRow(g, p, int(v.size), *map(float, q)))
    return rows


def user_parameter_quartiles(samples, groups: Mapping[str, str] | None = None) -> list[QuartileRow]:
    """Quartiles of per-user posterior means, split by an optional user -> group map."""
    groups = groups or {u: "all" for u in samples.user_ids}
    vals: dict = defaultdict(dict)
    for n in samples.param_names:
        means = samples.user_means(n)
        for g in sorted(set(groups.values())):
            vals[g][n] = [means[u] for u in samples.user_ids if groups.get(u) == g]
    return quartile_table(vals)


def entropy_table(utilities: Iterable[ItemUtilities]) -> list[dict]:
    return [
        {"poll_id": w.poll_id, "n_items": len(w.w), "entropy": utility_entropy(w), "max_entropy": math.log(len(w.w))}
        for w in utilities
    ]
