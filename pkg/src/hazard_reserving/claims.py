"""Claim records, CSV ingestion, feature encoding and the tie-interval risk grid.

Time conventions used throughout the package:

* ``accident_day`` is 1-based; day ``U`` starts at time ``U - 1``.
* ``delay`` is the recorded reporting delay in whole days.
* a claim is observed at the cutoff day iff ``accident_day + delay <= cutoff``.
* with grid width ``delta`` the accident period is ``k = (U - 1) // delta`` and the
  development index counts whole periods between the start of period ``k`` and the
  report, so that ``k + j`` is the calendar period of the report.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateScaleError,
    EmptyInputError,
    HorizonError,
    ParseError,
    ReservingError,
    SchemaError,
    UnseenLevelError,
)

ROLES = ("id", "accident_day", "delay_day", "categorical", "continuous")
ACCIDENT_COLUMN = "accident_day"


@dataclass(frozen=True)
class ClaimRecord:
    claim_id: str
    accident_day: int
    delay: int
    features: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Schema:
    """Maps CSV column names to roles."""

    columns: Mapping[str, str]

    def __post_init__(self):
        bad = {c: r for c, r in self.columns.items() if r not in ROLES}
        if bad:
            raise SchemaError(f"unknown roles {bad}; allowed: {ROLES}")
        for role in ("id", "accident_day", "delay_day"):
            n = sum(r == role for r in self.columns.values())
            if n != 1:
                raise SchemaError(f"schema needs exactly one '{role}' column, found {n}")

    def _single(self, role: str) -> str:
        return next(c for c, r in self.columns.items() if r == role)

    @property
    def id_column(self) -> str:
        return self._single("id")

    @property
    def accident_column(self) -> str:
        return self._single("accident_day")

    @property
    def delay_column(self) -> str:
        return self._single("delay_day")

    @property
    def categorical(self) -> list[str]:
        return [c for c, r in self.columns.items() if r == "categorical"]

    @property
    def continuous(self) -> list[str]:
        return [c for c, r in self.columns.items() if r == "continuous"]

    @classmethod
    def load(cls, path: str | Path) -> "Schema":
        with open(path) as fh:
            data = json.load(fh)
        return cls(dict(data.get("columns", data)))

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump({"columns": dict(self.columns)}, fh, indent=2)
            fh.write("\n")


@dataclass
class ClaimSet:
    """Columnar container of claims sharing one schema and cutoff."""

    schema: Schema
    claim_id: np.ndarray
    accident_day: np.ndarray
    delay: np.ndarray
    categorical: dict[str, np.ndarray]
    continuous: dict[str, np.ndarray]
    cutoff: int

    def __len__(self) -> int:
        return len(self.claim_id)

    def subset(self, idx) -> "ClaimSet":
        idx = np.asarray(idx)
        return ClaimSet(
            schema=self.schema,
            claim_id=self.claim_id[idx],
            accident_day=self.accident_day[idx],
            delay=self.delay[idx],
            categorical={k: v[idx] for k, v in self.categorical.items()},
            continuous={k: v[idx] for k, v in self.continuous.items()},
            cutoff=self.cutoff,
        )

    def records(self) -> Iterator[ClaimRecord]:
        for i in range(len(self)):
            feats: dict[str, object] = {k: str(v[i]) for k, v in self.categorical.items()}
            feats.update({k: float(v[i]) for k, v in self.continuous.items()})
            yield ClaimRecord(str(self.claim_id[i]), int(self.accident_day[i]), int(self.delay[i]), feats)

    @classmethod
    def from_records(
        cls, records: Sequence[ClaimRecord], schema: Schema, cutoff: int | None = None
    ) -> "ClaimSet":
        if not records:
            raise EmptyInputError("no claim records")
        ad = np.array([r.accident_day for r in records], dtype=np.int64)
        dl = np.array([r.delay for r in records], dtype=np.int64)
        cs = cls(
            schema=schema,
            claim_id=np.array([r.claim_id for r in records], dtype=object),
            accident_day=ad,
            delay=dl,
            categorical={c: np.array([str(r.features[c]) for r in records], dtype=object) for c in schema.categorical},
            continuous={c: np.array([float(r.features[c]) for r in records]) for c in schema.continuous},
            cutoff=int(cutoff if cutoff is not None else (ad + dl).max()),
        )
        return cs

    def concat(self, other: "ClaimSet") -> "ClaimSet":
        return ClaimSet(
            schema=self.schema,
            claim_id=np.concatenate([self.claim_id, other.claim_id]),
            accident_day=np.concatenate([self.accident_day, other.accident_day]),
            delay=np.concatenate([self.delay, other.delay]),
            categorical={k: np.concatenate([v, other.categorical[k]]) for k, v in self.categorical.items()},
            continuous={k: np.concatenate([v, other.continuous[k]]) for k, v in self.continuous.items()},
            cutoff=self.cutoff,
        )


@dataclass
class LoadResult:
    claims: ClaimSet
    rejected: list[tuple[int, str]]


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, f"column '{column}': not a number: {text!r}") from None
    if not math.isfinite(value) or value != int(value):
        raise ParseError(line, f"column '{column}': not an integer: {text!r}")
    return int(value)


def load_claims(path: str | Path, schema: Schema, cutoff: int | None = None) -> LoadResult:
    """Read a claims CSV. Rows reported after the cutoff are rejected, not loaded."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: empty file") from None
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise SchemaError(f"columns {missing} not found in header {header}")
        pos = {c: header.index(c) for c in schema.columns}
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            cid = row[pos[schema.id_column]].strip()
            if not cid:
                raise ParseError(line, "empty claim id")
            ad = _parse_int(row[pos[schema.accident_column]], line, schema.accident_column)
            dl = _parse_int(row[pos[schema.delay_column]], line, schema.delay_column)
            if ad < 1:
                raise ParseError(line, f"accident day must be >= 1, got {ad}")
            if dl < 0:
                raise ParseError(line, f"delay must be >= 0, got {dl}")
            feats: dict[str, object] = {}
            for c in schema.categorical:
                val = row[pos[c]].strip()
                if not val:
                    raise ParseError(line, f"column '{c}': missing value")
                feats[c] = val
            for c in schema.continuous:
                try:
                    val = float(row[pos[c]])
                except ValueError:
                    raise ParseError(line, f"column '{c}': not a number: {row[pos[c]]!r}") from None
                if not math.isfinite(val):
                    raise ParseError(line, f"column '{c}': non-finite value")
                feats[c] = val
            rows.append((line, ClaimRecord(cid, ad, dl, feats)))
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    if cutoff is None:
        cutoff = max(r.accident_day + r.delay for _, r in rows)
    kept, rejected = [], []
    for line, rec in rows:
        if rec.accident_day + rec.delay > cutoff:
            rejected.append((line, f"reported on day {rec.accident_day + rec.delay} after cutoff {cutoff}"))
        else:
            kept.append(rec)
    if not kept:
        raise EmptyInputError(f"{path}: every row is after the cutoff {cutoff}")
    return LoadResult(ClaimSet.from_records(kept, schema, cutoff), rejected)


def write_claims(claims: ClaimSet, path: str | Path) -> None:
    s = claims.schema
    cols = list(s.columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(claims)):
            out = []
            for c in cols:
                role = s.columns[c]
                if role == "id":
                    out.append(str(claims.claim_id[i]))
                elif role == "accident_day":
                    out.append(int(claims.accident_day[i]))
                elif role == "delay_day":
                    out.append(int(claims.delay[i]))
                elif role == "categorical":
                    out.append(str(claims.categorical[c][i]))
                else:
                    out.append(repr(float(claims.continuous[c][i])))
            w.writerow(out)


# ----------------------------------------------------------------------------
# feature encoding


@dataclass
class EncodedDataset:
    X: np.ndarray
    columns: list[str]
    # feature name -> indices of its columns in X
    blocks: dict[str, list[int]]
    kinds: dict[str, str]


@dataclass
class FeatureEncoder:
    """Full one-hot for categoricals, ``2 (x - min) / (max - min)`` for continuous columns.

    The accident day is treated as a continuous input named ``accident_day``.
    """

    levels: dict[str, list[str]]
    ranges: dict[str, tuple[float, float]]
    include_accident_day: bool = True
    n_buckets: int = 10
    bucket_edges: dict[str, list[float]] = field(default_factory=dict)

    @classmethod
    def fit(cls, claims: ClaimSet, include_accident_day: bool = True, n_buckets: int = 10) -> "FeatureEncoder":
        if len(claims) == 0:
            raise EmptyInputError("cannot fit an encoder on zero claims")
        levels = {}
        for name, col in claims.categorical.items():
            _, first = np.unique(col, return_index=True)
            levels[name] = [str(col[i]) for i in np.sort(first)]
        ranges = {}
        edges = {}
        conts = dict(claims.continuous)
        if include_accident_day:
            conts = {ACCIDENT_COLUMN: claims.accident_day.astype(float), **conts}
        for name, col in conts.items():
            lo, hi = float(np.min(col)), float(np.max(col))
            if not hi > lo:
                raise DegenerateScaleError(f"continuous column '{name}' is constant ({lo})")
            ranges[name] = (lo, hi)
            if name != ACCIDENT_COLUMN:
                qs = np.quantile(col, np.arange(1, n_buckets) / n_buckets)
                edges[name] = [float(q) for q in qs]
        return cls(levels, ranges, include_accident_day, n_buckets, edges)

    @property
    def columns(self) -> list[str]:
        cols = []
        for name in self.ranges:
            cols.append(name)
        for name, lv in self.levels.items():
            cols.extend(f"{name}={v}" for v in lv)
        return cols

    def transform(self, claims: ClaimSet) -> EncodedDataset:
        n = len(claims)
        parts, blocks, kinds = [], {}, {}
        col = 0
        for name, (lo, hi) in self.ranges.items():
            raw = claims.accident_day.astype(float) if name == ACCIDENT_COLUMN else claims.continuous[name]
            parts.append((2.0 * (raw - lo) / (hi - lo))[:, None])
            blocks[name] = [col]
            kinds[name] = "continuous"
            col += 1
        for name, lv in self.levels.items():
            values = claims.categorical[name]
            index = {v: i for i, v in enumerate(lv)}
            codes = np.empty(n, dtype=np.int64)
            for i, v in enumerate(values):
                try:
                    codes[i] = index[str(v)]
                except KeyError:
                    raise UnseenLevelError(f"level {v!r} of '{name}' was not seen in training") from None
            onehot = np.zeros((n, len(lv)))
            onehot[np.arange(n), codes] = 1.0
            parts.append(onehot)
            blocks[name] = list(range(col, col + len(lv)))
            kinds[name] = "categorical"
            col += len(lv)
        X = np.hstack(parts) if parts else np.zeros((n, 0))
        return EncodedDataset(X, self.columns, blocks, kinds)

    def cell_keys(self, claims: ClaimSet) -> np.ndarray:
        """Display key per claim: categorical labels plus quantile buckets of continuous features."""
        n = len(claims)
        pieces = [[f"{name}={v}" for v in claims.categorical[name]] for name in self.levels]
        for name, e in self.bucket_edges.items():
            b = np.searchsorted(np.asarray(e), claims.continuous[name], side="right")
            pieces.append([f"{name}=q{int(x)}" for x in b])
        if not pieces:
            return np.array(["all"] * n, dtype=object)
        return np.array(["|".join(t) for t in zip(*pieces)], dtype=object)

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "ranges": {k: list(v) for k, v in self.ranges.items()},
            "include_accident_day": self.include_accident_day,
            "n_buckets": self.n_buckets,
            "bucket_edges": self.bucket_edges,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureEncoder":
        return cls(
            {k: list(v) for k, v in d["levels"].items()},
            {k: (float(v[0]), float(v[1])) for k, v in d["ranges"].items()},
            bool(d["include_accident_day"]),
            int(d.get("n_buckets", 10)),
            {k: list(v) for k, v in d.get("bucket_edges", {}).items()},
        )


def preprocess_features(
    claims: ClaimSet, encoder: FeatureEncoder | None = None, include_accident_day: bool = True
) -> tuple[EncodedDataset, FeatureEncoder]:
    """Encode claims, fitting the scaling statistics first when no encoder is given."""
    if encoder is None:
        encoder = FeatureEncoder.fit(claims, include_accident_day=include_accident_day)
    return encoder.transform(claims), encoder


# ----------------------------------------------------------------------------
# risk grid


@dataclass
class RiskGrid:
    """Tie groups of the reverse-time partial likelihood.

    Claim ``i`` occurs in group ``group[i]`` and is exposed in every group
    ``j`` with ``group[i] <= j <= exit[i]``.
    """

    delta: int
    cutoff: int
    n_groups: int
    group: np.ndarray
    exit: np.ndarray
    period: np.ndarray | None = None
    boundary: str = "inclusive"

    def __post_init__(self):
        self.group = np.asarray(self.group, dtype=np.int64)
        self.exit = np.minimum(np.asarray(self.exit, dtype=np.int64), self.n_groups - 1)
        if len(self.group) and (self.group.min() < 0 or self.group.max() >= self.n_groups):
            raise HorizonError("occurrence group outside the grid")
        self.counts = np.bincount(self.group, minlength=self.n_groups)
        order = np.argsort(self.group, kind="stable")
        self.order = order
        starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]])
        # one Efron term per claim: (group, rank within group)
        self.term_group = np.repeat(np.arange(self.n_groups), self.counts)
        self.term_rank = np.arange(len(self.group)) - starts[self.term_group]
        self.exposed_own = self.exit >= self.group

    @property
    def n(self) -> int:
        return len(self.group)

    def exposure(self, j: int) -> np.ndarray:
        return np.flatnonzero((self.group <= j) & (self.exit >= j))

    def occurrences(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.group == j)

    def interval_sum(self, values: np.ndarray) -> np.ndarray:
        """Per-group sum of ``values`` over exposed claims; works on trailing axes too."""
        values = np.asarray(values, dtype=float)
        J = self.n_groups
        live = self.exposed_own
        flat = values[live].reshape(int(live.sum()), int(np.prod(values.shape[1:])))
        start, stop = self.group[live], self.exit[live] + 1
        acc = np.empty((J + 1, flat.shape[1]))
        for c in range(flat.shape[1]):
            acc[:, c] = np.bincount(start, flat[:, c], J + 1) - np.bincount(stop, flat[:, c], J + 1)
        return np.cumsum(acc, axis=0)[:J].reshape((J,) + values.shape[1:])

    def exposure_sizes(self) -> np.ndarray:
        return np.rint(self.interval_sum(np.ones(self.n))).astype(np.int64)

    def subset(self, idx) -> "RiskGrid":
        idx = np.asarray(idx)
        return RiskGrid(
            self.delta, self.cutoff, self.n_groups, self.group[idx], self.exit[idx],
            None if self.period is None else self.period[idx], self.boundary,
        )

    @classmethod
    def from_intervals(cls, group, exit, n_groups: int, delta: int = 1) -> "RiskGrid":
        return cls(delta, n_groups * delta, n_groups, np.asarray(group), np.asarray(exit))


def grid_indices(accident_day, delay, delta: int) -> tuple[np.ndarray, np.ndarray]:
    """Accident period and calendar-aligned development index on a grid of width ``delta``."""
    u = np.asarray(accident_day, dtype=np.int64) - 1
    k = u // delta
    j = (u - k * delta + np.asarray(delay, dtype=np.int64)) // delta
    return k, j


def build_risk_grid(
    claims: ClaimSet | tuple[Iterable[int], Iterable[int]],
    delta: int = 1,
    cutoff: int | None = None,
    horizon: int | None = None,
    boundary: str = "inclusive",
) -> RiskGrid:
    """Assign claims to tie groups and exposure intervals.

    ``claims`` is a ClaimSet or a pair ``(accident_days, delays)``. ``horizon``
    is the largest admissible recorded delay and defaults to ``cutoff - 1``.
    ``boundary="strict"`` uses ``u < cutoff - t(j+1)`` instead of ``<=``.
    """
    if isinstance(claims, ClaimSet):
        ad, dl = claims.accident_day, claims.delay
        cutoff = claims.cutoff if cutoff is None else cutoff
    else:
        ad, dl = (np.asarray(a, dtype=np.int64) for a in claims)
        if cutoff is None:
            cutoff = int((ad + dl).max())
    ad = np.asarray(ad, dtype=np.int64)
    dl = np.asarray(dl, dtype=np.int64)
    if delta < 1 or cutoff % delta:
        raise ReservingError(f"delta={delta} must be a positive divisor of the cutoff {cutoff}")
    if horizon is None:
        horizon = cutoff - 1
    if np.any(ad + dl > cutoff):
        raise ReservingError("claims reported after the cutoff cannot enter the risk grid")
    if np.any(dl > horizon):
        i = int(np.argmax(dl > horizon))
        raise HorizonError(f"recorded delay {int(dl[i])} exceeds the horizon {horizon}")
    n_groups = horizon // delta + 1
    K = cutoff // delta
    k, j = grid_indices(ad, dl, delta)
    if np.any(j >= n_groups):
        raise HorizonError("development index beyond the horizon; increase the horizon")
    last = K - 1 - k if boundary == "inclusive" else K - 2 - k
    if boundary not in ("inclusive", "strict"):
        raise ReservingError(f"unknown boundary rule {boundary!r}")
    return RiskGrid(delta, cutoff, n_groups, j, last, k, boundary)
