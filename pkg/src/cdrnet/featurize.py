"""Weekly 8-channel activity tensors built from per-user CDR groups.

Each active (user, week) becomes an (8, 24, 7) array of raw counts over
hour-of-day x weekday cells, Monday first. Channel order:

    0 out_unique_contacts   4 in_unique_contacts
    1 out_calls             5 in_calls
    2 out_texts             6 in_texts
    3 out_call_duration_s   7 in_call_duration_s

Unique contacts are counted per (direction, hour, day) cell over calls
and texts together. An event is binned entirely at its start timestamp.
Weeks are Monday-anchored local time. Normalization is log1p followed by
per-channel z-scoring with training-set statistics: counts and durations
are heavy-tailed, raw values would be poorly scaled for convolution.

Datasets round-trip through a "CDRTENSOR/1" container (see container.py)
holding the raw tensors plus an optional NormStats sidecar.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

import numpy as np

from .container import read_container, write_container
from .ingest import CdrRecord, Direction, Kind

N_CHANNELS, N_HOURS, N_DAYS = 8, 24, 7
N_CELLS = N_HOURS * N_DAYS

CHANNELS = (
    "out_unique_contacts",
    "out_calls",
    "out_texts",
    "out_call_duration_s",
    "in_unique_contacts",
    "in_calls",
    "in_texts",
    "in_call_duration_s",
)

_CH_UNIQUE, _CH_CALLS, _CH_TEXTS, _CH_DURATION = 0, 1, 2, 3
_DIR_BASE = {Direction.OUTGOING: 0, Direction.INCOMING: 4}

TENSOR_MAGIC = "CDRTENSOR/1"
STD_FLOOR = 1e-6


@dataclass(frozen=True, slots=True, order=True)
class WeekId:
    """A Monday-anchored calendar week."""

    start_date: date

    def __post_init__(self):
        if self.start_date.weekday() != 0:
            raise ValueError(f"week start {self.start_date} is not a Monday")

    def contains(self, ts: datetime) -> bool:
        return 0 <= (ts.date() - self.start_date).days < N_DAYS


def week_of(ts: datetime) -> WeekId:
    """The Monday-anchored week containing ts."""
    return WeekId(ts.date() - timedelta(days=ts.weekday()))


def build_week_tensor(records: list[CdrRecord], week: WeekId) -> np.ndarray:
    """Raw (8, 24, 7) counts for one user-week.

    calls/texts count events, duration sums call seconds, unique contacts
    is the number of distinct correspondents with any event in the cell.
    Raises ValueError for a record outside the week.
    """
    t = np.zeros((N_CHANNELS, N_HOURS, N_DAYS))
    contacts: dict[tuple[int, int, int], set[str]] = {}
    start = week.start_date
    for rec in records:
        day = (rec.timestamp.date() - start).days
        if not 0 <= day < N_DAYS:
            raise ValueError(f"record at {rec.timestamp} outside week of {start}")
        hour = rec.timestamp.hour
        base = _DIR_BASE[rec.direction]
        if rec.kind is Kind.CALL:
            t[base + _CH_CALLS, hour, day] += 1
            t[base + _CH_DURATION, hour, day] += rec.duration_s
        else:
            t[base + _CH_TEXTS, hour, day] += 1
        contacts.setdefault((base, hour, day), set()).add(rec.correspondent_id)
    for (base, hour, day), ids in contacts.items():
        t[base + _CH_UNIQUE, hour, day] = len(ids)
    return t


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean/std of log1p cell values over a training set."""

    mean: np.ndarray  # (8,)
    std: np.ndarray   # (8,), floored at STD_FLOOR


def fit_normalizer(tensors) -> NormStats:
    """Fit per-channel log1p statistics; accepts an (N,8,24,7) array or a list."""
    arr = np.asarray(tensors, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[0] == 0:
        raise ValueError("fit_normalizer needs a non-empty list of week tensors")
    logs = np.log1p(arr)
    mean = logs.mean(axis=(0, 2, 3))
    std = np.maximum(logs.std(axis=(0, 2, 3)), STD_FLOOR)
    return NormStats(mean, std)


def apply_normalizer(tensor, stats: NormStats) -> np.ndarray:
    """(log1p(cell) - mean_c) / std_c; works on (8,24,7) or batched (N,8,24,7)."""
    t = np.log1p(np.asarray(tensor, dtype=np.float64))
    return (t - stats.mean[:, None, None]) / stats.std[:, None, None]


@dataclass(frozen=True)
class AgeBuckets:
    """Right-open age intervals from strictly increasing year edges."""

    edges: tuple[int, ...]

    def __post_init__(self):
        edges = tuple(int(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if not edges:
            raise ValueError("at least one bucket edge required")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"bucket edges must be strictly increasing: {edges}")
        if edges[0] <= 0:
            raise ValueError("bucket edges must be positive years")

    @property
    def num_classes(self) -> int:
        return len(self.edges) + 1

    def class_labels(self) -> tuple[str, ...]:
        bounds = (0,) + self.edges
        labels = [f"[{lo},{hi})" for lo, hi in zip(bounds, self.edges)]
        labels.append(f"[{self.edges[-1]},inf)")
        return tuple(labels)


DEFAULT_AGE_EDGES = (28, 38, 48)


def bucketize_age(age_years: int, buckets: AgeBuckets) -> int:
    """Index i with age in [edge_{i-1}, edge_i); first bucket starts at 0, last is open."""
    return bisect_right(buckets.edges, age_years)


@dataclass
class TensorDataset:
    """Parallel (user_id, week, raw tensor) rows plus an optional NormStats sidecar."""

    user_ids: list[str]
    weeks: list[WeekId]
    tensors: np.ndarray  # (N, 8, 24, 7) raw values
    norm_stats: NormStats | None = None

    def __len__(self) -> int:
        return len(self.user_ids)

    def by_user(self) -> dict[str, np.ndarray]:
        """Stacked week tensors per user, users in sorted order."""
        index: dict[str, list[int]] = {}
        for i, uid in enumerate(self.user_ids):
            index.setdefault(uid, []).append(i)
        return {uid: self.tensors[rows] for uid, rows in sorted(index.items())}


def featurize_users(
    groups: dict[str, list[CdrRecord]], include_empty_weeks: bool = False
) -> TensorDataset:
    """One raw tensor per active (user, week), users and weeks in sorted order.

    By default a week with zero activity produces no tensor. With
    include_empty_weeks, zero tensors fill the gaps inside each user's
    [first, last] active-week span.
    """
    user_ids: list[str] = []
    weeks: list[WeekId] = []
    rows: list[np.ndarray] = []
    for uid in sorted(groups):
        by_week: dict[WeekId, list[CdrRecord]] = {}
        for rec in groups[uid]:
            by_week.setdefault(week_of(rec.timestamp), []).append(rec)
        if not by_week:
            continue
        active = sorted(by_week)
        if include_empty_weeks:
            span = []
            monday = active[0].start_date
            while monday <= active[-1].start_date:
                span.append(WeekId(monday))
                monday += timedelta(days=N_DAYS)
            week_list = span
        else:
            week_list = active
        for wk in week_list:
            user_ids.append(uid)
            weeks.append(wk)
            rows.append(build_week_tensor(by_week.get(wk, []), wk))
    tensors = np.stack(rows) if rows else np.zeros((0, N_CHANNELS, N_HOURS, N_DAYS))
    return TensorDataset(user_ids, weeks, tensors)


def save_tensor_dataset(path, ds: TensorDataset) -> None:
    header = {
        "count": len(ds),
        "users": ds.user_ids,
        "weeks": [wk.start_date.isoformat() for wk in ds.weeks],
        "has_norm": ds.norm_stats is not None,
    }
    arrays = {"tensors": ds.tensors}
    if ds.norm_stats is not None:
        arrays["norm.mean"] = ds.norm_stats.mean
        arrays["norm.std"] = ds.norm_stats.std
    write_container(path, TENSOR_MAGIC, header, arrays)


def load_tensor_dataset(path) -> TensorDataset:
    header, arrays = read_container(path, TENSOR_MAGIC)
    weeks = [WeekId(date.fromisoformat(s)) for s in header["weeks"]]
    stats = None
    if header.get("has_norm"):
        stats = NormStats(arrays["norm.mean"], arrays["norm.std"])
    return TensorDataset(list(header["users"]), weeks, arrays["tensors"], stats)
