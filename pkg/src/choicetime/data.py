"""Observation CSV schema, validation and the columnar dataset used by the sampler."""
from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cet import Observation, SimulatedTrial

OBSERVATION_COLUMNS = ("poll_id", "user_id", "item_i", "item_j", "chosen", "response_time", "trial_k")
LATENT_COLUMNS = ("latent_latency", "latent_decision")


class DatasetError(ValueError):
    """Schema or invariant violation in an observation file."""


@dataclass
class Dataset:
    """Trials in columnar form.

    Items are indexed globally: poll ``s`` owns the slice
    ``offsets[s]:offsets[s] + n_items[s]`` of the utility vector, items in sorted name order.
    ``chose_i`` is 1.0 when ``item_i`` was chosen.
    """

    observations: list[Observation]
    poll_ids: list[str]
    user_ids: list[str]
    items: dict[str, list[str]]
    user: np.ndarray
    poll: np.ndarray
    gi: np.ndarray
    gj: np.ndarray
    chose_i: np.ndarray
    t: np.ndarray
    offsets: np.ndarray = field(repr=False)
    n_items: np.ndarray = field(repr=False)

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "Dataset":
        obs = list(observations)
        if not obs:
            raise DatasetError("dataset is empty")
        seen = set()
        for o in obs:
            if o.key in seen:
                raise DatasetError(f"duplicate trial key {o.key}")
            seen.add(o.key)
        poll_ids = sorted({o.poll_id for o in obs})
        user_ids = sorted({o.user_id for o in obs})
        items: dict[str, set] = {p: set() for p in poll_ids}
        for o in obs:
            items[o.poll_id].update((o.item_i, o.item_j))
        items_sorted = {p: sorted(v) for p, v in items.items()}
        n_items = np.array([len(items_sorted[p]) for p in poll_ids])
        offsets = np.concatenate([[0], np.cumsum(n_items)[:-1]])
        pidx = {p: k for k, p in enumerate(poll_ids)}
        uidx = {u: k for k, u in enumerate(user_ids)}
        gidx = {(p, it): offsets[pidx[p]] + k for p in poll_ids for k, it in enumerate(items_sorted[p])}
        return cls(
            observations=obs,
            poll_ids=poll_ids,
            user_ids=user_ids,
            items=items_sorted,
            user=np.array([uidx[o.user_id] for o in obs]),
            poll=np.array([pidx[o.poll_id] for o in obs]),
            gi=np.array([gidx[(o.poll_id, o.item_i)] for o in obs]),
            gj=np.array([gidx[(o.poll_id, o.item_j)] for o in obs]),
            chose_i=np.array([1.0 if o.chosen == "i" else 0.0 for o in obs]),
            t=np.array([o.response_time for o in obs], dtype=float),
            offsets=offsets,
            n_items=n_items,
        )

    def __len__(self):
        return len(self.observations)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_polls(self) -> int:
        return len(self.poll_ids)

    @property
    def total_items(self) -> int:
        return int(self.n_items.sum())

    def item_labels(self) -> list[str]:
        return [f"{p}/{it}" for p in self.poll_ids for it in self.items[p]]

    def subset_users(self, keep: Sequence[str]) -> "Dataset":
        keep = set(keep)
        return Dataset.from_observations(o for o in self.observations if o.user_id in keep)


def _atomic_write_text(path: Path, write_fn) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write(path, text: str) -> None:
    _atomic_write_text(Path(path), lambda fh: fh.write(text))


def save_dataset(path, rows: Sequence[Observation | SimulatedTrial], include_latent: bool = False) -> None:
    """Write observations (or simulated trials) as CSV; seconds as decimals."""

    def write(fh):
        w = csv.writer(fh)
        cols = OBSERVATION_COLUMNS + (LATENT_COLUMNS if include_latent else ())
        w.writerow(cols)
        for r in rows:
            o = r.observation if isinstance(r, SimulatedTrial) else r
            row = [o.poll_id, o.user_id, o.item_i, o.item_j, o.chosen, repr(float(o.response_time)), o.trial_k]
            if include_latent:
                if not isinstance(r, SimulatedTrial):
                    raise ValueError("latent columns need simulated trials")
                row += [repr(r.latent_latency), repr(r.latent_decision)]
            w.writerow(row)

    _atomic_write_text(Path(path), write)


def load_observations(path, milliseconds: bool = False) -> list[Observation]:
    """Parse and validate an observation CSV. Errors carry ``file:line`` context."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    out: list[Observation] = []
    seen: dict[tuple, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}:1: empty file, header required") from None
        header = [h.strip() for h in header]
        if tuple(header[: len(OBSERVATION_COLUMNS)]) != OBSERVATION_COLUMNS or any(
            h not in LATENT_COLUMNS for h in header[len(OBSERVATION_COLUMNS):]
        ):
            raise DatasetError(f"{path}:1: header {header} does not match {list(OBSERVATION_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rec = dict(zip(header, (c.strip() for c in row)))
            try:
                rt = float(rec["response_time"])
                k = int(rec["trial_k"])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if milliseconds:
                rt /= 1000.0
            try:
                o = Observation(rec["poll_id"], rec["user_id"], rec["item_i"], rec["item_j"], rec["chosen"], rt, k)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if o.key in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate trial {o.key} (first at line {seen[o.key]})")
            seen[o.key] = lineno
            out.append(o)
    if not out:
        raise DatasetError(f"{path}: no observations")
    return out


def load_dataset(path, milliseconds: bool = False) -> Dataset:
    return Dataset.from_observations(load_observations(path, milliseconds=milliseconds))
