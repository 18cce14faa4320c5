"""Command-line pipeline: simulate -> fit -> compare -> analyze -> cluster, plus reference-model tables.

Exit codes: 0 success, 2 input validation error, 3 numerical failure,
4 convergence warning (split R-hat above the threshold on some parameter).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, RunConfig, load_config
from .data import DatasetError, atomic_write, load_dataset, save_dataset
from .distributions import ParameterDomainError

log = logging.getLogger("choicetime")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CONVERGENCE = 0, 2, 3, 4
RHAT_THRESHOLD = 1.1


class NumericalFailure(RuntimeError):
    pass


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _write_csv(path: Path, header, rows) -> None:
    atomic_write(path, _csv_text(header, rows))


def _write_json(path: Path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _sampler_config(args, base=None):
    from .inference import SamplerConfig

    cfg = base or SamplerConfig()
    overrides = {
        k: v
        for k, v in dict(
            chains=args.chains, iterations=args.iters, burn_in=args.burnin, seed=args.seed, thin=args.thin
        ).items()
        if v is not None
    }
    return replace(cfg, **overrides)


def _load_run_config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else RunConfig()


# ------------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    from .simulation import PollSpec, simulate

    cfg = _load_run_config(args)
    spec = cfg.simulation
    if args.users is not None:
        if len(spec.populations) != 1:
            raise ConfigError("--users applies to single-population specs only")
        spec = replace(spec, populations=[replace(spec.populations[0], n_users=args.users)])
    if args.polls is not None or args.items is not None:
        n_polls = args.polls if args.polls is not None else len(spec.polls)
        n_items = args.items if args.items is not None else spec.polls[0].n_items
        spec = replace(spec, polls=[PollSpec(f"poll{s}", n_items) for s in range(n_polls)])
    if args.trials_per_pair is not None:
        spec = replace(spec, trials_per_pair=args.trials_per_pair)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if sum(p.n_users for p in spec.populations) < 1:
        raise ConfigError("need at least one user")
    spec.__post_init__()
    trials, truth = simulate(spec)
    out = Path(args.out)
    save_dataset(out / "observations.csv", trials, include_latent=args.latent)
    _write_json(out / "truth.json", {"spec": spec.to_dict(), **truth.to_dict()})
    log.info("wrote %d trials to %s", len(trials), out)
    return EXIT_OK


def _fit(data, kind, config):
    from .inference import run_sampler

    with np.errstate(invalid="ignore", over="ignore"):
        samples = run_sampler(data, kind, config)
    if not np.all(np.isfinite(samples.means)):
        raise NumericalFailure("non-finite draws in the global means")
    return samples


def cmd_fit(args) -> int:
    from .inference import summarize
    from .inference.summary import write_samples_csv, write_summary_json, write_trace_csv

    cfg = _load_run_config(args)
    data = load_dataset(args.dataset, milliseconds=args.milliseconds)
    model = args.model or cfg.model
    sampler = _sampler_config(args, cfg.sampler)
    samples = _fit(data, model, sampler)
    summary = summarize(samples)
    out = Path(args.out)
    write_samples_csv(samples, out / "samples.csv")
    write_trace_csv(samples, out / "trace.csv")
    max_rhat = max((v["rhat"] for v in summary.values() if np.isfinite(v["rhat"])), default=float("nan"))
    report = {
        "model": samples.kind.value,
        "sampler": asdict(sampler),
        "n_trials": len(data),
        "n_users": data.n_users,
        "acceptance": samples.acceptance,
        "max_rhat": max_rhat,
        "parameters": summary,
    }
    write_summary_json(report, out / "summary.json")
    if max_rhat > RHAT_THRESHOLD:
        log.warning("max split R-hat %.3f exceeds %.2f", max_rhat, RHAT_THRESHOLD)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_compare(args) -> int:
    from .inference import ModelKind, compute_dic

    cfg = _load_run_config(args)
    data = load_dataset(args.dataset, milliseconds=args.milliseconds)
    sampler = _sampler_config(args, cfg.sampler)
    rows = []
    for m in args.models:
        kind = ModelKind.parse(m)
        dic = compute_dic(_fit(data, kind, sampler), data)
        if not np.isfinite(dic["dic"]):
            raise NumericalFailure(f"DIC for {kind.value} is not finite")
        rows.append({"model": kind.value, **dic})
    rows.sort(key=lambda r: r["dic"])
    out = Path(args.out)
    _write_json(out / "dic.json", rows)
    _write_csv(out / "dic.csv", ["model", "dic", "d_bar", "d_hat", "p_d"],
               [[r["model"], r["dic"], r["d_bar"], r["d_hat"], r["p_d"]] for r in rows])
    return EXIT_OK


def _user_table(data):
    """Per-user mean RT and mean choice fraction (fraction choosing the less popular item)."""
    pairs = {(p.poll_id, p.item_i, p.item_j): p for p in analysis.pair_summaries(data)}
    rts, minority = {}, {}
    for o in data.observations:
        a, b = sorted((o.item_i, o.item_j))
        ps = pairs[(o.poll_id, a, b)]
        winner = o.item_i if o.chosen == "i" else o.item_j
        less_popular = a if ps.frac_i_chosen < 0.5 else b if ps.frac_i_chosen > 0.5 else None
        rts.setdefault(o.user_id, []).append(o.response_time)
        minority.setdefault(o.user_id, []).append(0.5 if less_popular is None else float(winner == less_popular))
    return {u: (float(np.mean(rts[u])), float(np.mean(minority[u]))) for u in sorted(rts)}


def cmd_analyze(args) -> int:
    data = load_dataset(args.dataset, milliseconds=args.milliseconds)
    labels = _load_labels(args.labels) if args.labels else {u: "all" for u in data.user_ids}
    missing = set(data.user_ids) - set(labels)
    if missing:
        raise DatasetError(f"labels missing for users {sorted(missing)[:5]}")
    out = Path(args.out)
    groups = sorted(set(labels[u] for u in data.user_ids))
    report = {"alpha": args.alpha, "populations": {}}
    pair_rows, bubble_rows, test_rows = [], [], []
    per_user = _user_table(data)
    for g in groups:
        sub = data if len(groups) == 1 else data.subset_users([u for u in data.user_ids if labels[u] == g])
        pairs = analysis.pair_summaries(sub)
        for p in pairs:
            pair_rows.append([g, p.poll_id, p.item_i, p.item_j, p.n_trials, p.frac_i_chosen, p.choice_fraction,
                              p.mean_rt, p.mean_rt_given_i, p.mean_rt_given_j])
            bubble_rows.append([g, f"{p.poll_id}:{p.item_i}|{p.item_j}", p.frac_i_chosen, p.mean_rt])
        try:
            pop = analysis.population_stats(pairs).as_dict()
        except analysis.DegenerateCorrelationError as exc:
            pop = {"error": str(exc)}
        tests = analysis.conditional_rt_test(sub, alpha=args.alpha, vote_filter=args.vote_filter)
        for t in tests:
            test_rows.append([g, t.poll_id, t.item_i, t.item_j, t.n_i, t.n_j, t.u_statistic, t.p_value,
                              t.bonferroni_threshold, int(t.reject)])
        pop["m_eligible_pairs"] = len(tests)
        pop["n_rejections"] = int(sum(t.reject for t in tests))
        report["populations"][g] = pop
    quart = analysis.quartile_table(
        {
            g: {
                "mean_rt": [per_user[u][0] for u in per_user if labels[u] == g],
                "choice_fraction": [per_user[u][1] for u in per_user if labels[u] == g],
            }
            for g in groups
        }
    )
    _write_csv(out / "pairs.csv", ["population", "poll_id", "item_i", "item_j", "n_trials", "frac_i_chosen",
                                   "choice_fraction", "mean_rt", "mean_rt_given_i", "mean_rt_given_j"], pair_rows)
    _write_csv(out / "bubble.csv", ["population", "pair", "frac", "mean_rt"], bubble_rows)
    _write_csv(out / "rank_sum.csv", ["population", "poll_id", "item_i", "item_j", "n_i", "n_j", "u_statistic",
                                      "p_value", "bonferroni_threshold", "reject"], test_rows)
    _write_csv(out / "quartiles.csv", ["population", "statistic", "n", "min", "q1", "median", "q3", "max"],
               [[q.group, q.parameter, q.n, q.minimum, q.q1, q.median, q.q3, q.maximum] for q in quart])
    _write_json(out / "report.json", report)
    return EXIT_OK


_USER_PARAM = re.compile(r"^(?P<name>\w+)_u\[(?P<uid>.+)\]$")


def user_means_from_samples_csv(path) -> dict[str, dict[str, float]]:
    """``{parameter: {user_id: posterior mean}}`` from a long-format samples file."""
    from .inference.summary import read_samples_csv

    df = read_samples_csv(path)
    means = df.groupby("parameter_name", sort=False)["value"].mean()
    out: dict[str, dict[str, float]] = {}
    for label, v in means.items():
        m = _USER_PARAM.match(str(label))
        if m:
            out.setdefault(m["name"], {})[m["uid"]] = float(v)
    if not out:
        raise DatasetError(f"{path}: no per-user parameters found")
    return out


def _load_labels(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    if path.suffix == ".json":
        raw = json.loads(path.read_text())
        return {str(k): str(v) for k, v in raw.get("labels", raw).items()}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"user_id", "label"} <= set(reader.fieldnames):
            raise DatasetError(f"{path}:1: expected columns user_id,label")
        return {r["user_id"]: r["label"] for r in reader}


def cmd_cluster(args) -> int:
    means = user_means_from_samples_csv(args.samples)
    users = sorted(next(iter(means.values())))
    labels = None
    if args.labels:
        labels = _load_labels(args.labels)
        if set(labels) != set(users):
            raise DatasetError("users in labels and samples differ")
    feature_sets = args.features or ["A", "tau", "rho", "epsilon", "gamma", "epsilon,gamma", "all"]
    out = Path(args.out)
    rows, report = [], {}
    for fs in feature_sets:
        names = analysis.resolve_feature_set(fs)
        if fs == "all":
            names = tuple(n for n in names if n in means)
        missing = [n for n in names if n not in means]
        if missing:
            raise DatasetError(f"samples have no user parameter(s) {missing}")
        X = analysis.standardize(np.column_stack([[means[n][u] for u in users] for n in names]))
        res = analysis.cluster_users(dict(zip(users, X)), labels=labels, restarts=args.restarts,
                                     rng=args.seed if args.seed is not None else 0, feature_names=names)
        key = ",".join(names) if fs != "all" else "all"
        report[key] = {"avg_jaccard": res.avg_jaccard, "inertia": res.inertia, "centroids": res.centroids}
        rows += [[key, u, res.assignments[u]] for u in users]
    _write_csv(out / "assignments.csv", ["feature_set", "user_id", "cluster"], rows)
    _write_json(out / "jaccard.json", report)
    return EXIT_OK


def _parse_params(pairs) -> dict:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise ConfigError(f"parameter {p!r} must look like name=value")
        k, v = p.split("=", 1)
        out[k.strip()] = float(v)
    return out


def cmd_refmodels(args) -> int:
    from . import refmodels as rm
    from .distributions import HypoExpParams

    params = _parse_params(args.param)
    out = Path(args.out)
    if args.mode == "sweep":
        kw = {k: (int(v) if k in ("K", "series_terms") else v) for k, v in params.items()}
        values = np.linspace(args.lo, args.hi, args.num) if args.lo is not None else ()
        rows = rm.sweep_mu_vs_p(rm.SweepConfig(args.model, values, **kw))
        _write_csv(out / f"sweep_{args.model}.csv", rm.SWEEP_COLUMNS,
                   [[r.param_value, r.p, r.mu, r.mu_a, r.mu_b] for r in rows])
        return EXIT_OK
    ts = np.linspace(args.lo if args.lo is not None else 0.0, args.hi if args.hi is not None else 10.0, args.num)
    if args.model == "poisson_counter":
        p = rm.PoissonCounterParams(params.get("alpha", 3.0), params.get("beta", 1.0),
                                    int(params.get("Ka", 3)), int(params.get("Kb", 3)))
        cols = {"a": rm.pc_joint_pdf("a", ts, p), "b": rm.pc_joint_pdf("b", ts, p)}
    elif args.model == "diffusion":
        terms = int(params.get("series_terms", rm.DEFAULT_SERIES_TERMS))
        p = rm.DiffusionParams(params.get("z", 2.0), params.get("K", 4.0), params.get("d", 1.0),
                               params.get("sigma2", 1.0), terms)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", rm.SeriesTruncationWarning)
            cols = {"a": rm.ddm_joint_pdf("a", ts, p), "b": rm.ddm_joint_pdf("b", ts, p)}
    else:
        p = HypoExpParams(params.get("tau", 1.0), params.get("delta", 1.0))
        cols = {}
    total = rm.density_table(args.model, ts, p, clamp=not args.no_clamp)
    header = ["t", "density"] + [f"density_{k}" for k in cols]
    rows = [[float(t), float(total[i])] + [float(c[i]) for c in cols.values()] for i, t in enumerate(ts)]
    _write_csv(out / f"density_{args.model}.csv", header, rows)
    return EXIT_OK


def cmd_bias(args) -> int:
    from .cet import EpsilonDist, engagement_bias

    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    rows = []
    for eps in args.epsilon:
        dist = EpsilonDist(args.family, eps, args.sd)
        for w in np.linspace(0.0, 1.0, args.num):
            r = engagement_bias(float(w), dist, args.N, args.reps, rng, b_samples=args.b_samples)
            rows.append([eps, r.w, r.B, r.asymptotic_estimate, r.finite_N_estimate, r.mc_std_error])
    _write_csv(Path(args.out) / "bias.csv",
               ["epsilon_mean", "w", "B", "asymptotic_estimate", "finite_N_estimate", "mc_std_error"], rows)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_sampler_flags(p):
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int, help="iterations per chain (default 5000)")
    p.add_argument("--burnin", type=int, help="discarded iterations (default 500)")
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--milliseconds", action="store_true", help="response_time column is in milliseconds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choicetime", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset and its ground truth")
    p.add_argument("--config")
    p.add_argument("--users", type=int)
    p.add_argument("--polls", type=int)
    p.add_argument("--items", type=int)
    p.add_argument("--trials-per-pair", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--latent", action="store_true", help="also write latent latency/decision columns")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="posterior sampling for one model")
    p.add_argument("dataset")
    p.add_argument("--model", choices=["choice", "ce", "cet"])
    _add_sampler_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="DIC table across models")
    p.add_argument("dataset")
    p.add_argument("--models", nargs="+", default=["choice", "ce", "cet"], choices=["choice", "ce", "cet"])
    _add_sampler_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze", help="descriptive statistics and rank-sum tests")
    p.add_argument("dataset")
    p.add_argument("--labels", help="CSV user_id,label or a truth JSON with a labels map")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--vote-filter", type=int, default=1)
    p.add_argument("--milliseconds", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("cluster", help="k-means on posterior-mean user parameters")
    p.add_argument("samples", help="samples.csv written by fit")
    p.add_argument("--features", action="append",
                   help="feature set, e.g. gamma or epsilon,gamma or all; repeatable (default: all sets)")
    p.add_argument("--labels")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("refmodels", help="density grids and (p, mu) sweeps of the reference models")
    p.add_argument("--model", choices=["poisson_counter", "diffusion", "cet"], required=True)
    p.add_argument("--mode", choices=["density", "sweep"], default="density")
    p.add_argument("--param", action="append", help="name=value, repeatable")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--num", type=int, default=201)
    p.add_argument("--no-clamp", action="store_true", help="keep negative truncated-series values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refmodels)

    p = sub.add_parser("bias", help="Bradley-Terry estimate under engagement slack")
    p.add_argument("--epsilon", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3])
    p.add_argument("--family", choices=["deterministic", "exponential", "truncated_normal"],
                   default="deterministic")
    p.add_argument("--sd", type=float, default=0.0)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--num", type=int, default=21)
    p.add_argument("--b-samples", type=int, default=200_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bias)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DatasetError, ConfigError, ParameterDomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
