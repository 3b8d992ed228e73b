"""Occurrence triangles, lower-triangle predictions and regraining to coarser periods.

A coarse cell ``(k', j')`` at ``delta' = r * delta`` collects the fine cells
``(h, l)`` with ``h // r == k'`` and ``(h + l) // r == k' + j'``: same coarse
accident period and same coarse calendar period. Upper and lower triangles are
therefore preserved exactly by regraining.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .claims import ClaimSet, EncodedDataset, FeatureEncoder, grid_indices
from .errors import PredictionError, ReservingError
from .hazard import FactorTable


def n_dev_columns(delta: int, max_delay: int) -> int:
    """Development columns needed to hold delays up to ``max_delay`` days."""
    return (delta - 1 + max_delay) // delta + 1


@dataclass
class ClaimGroups:
    """Observed claims grouped by accident day and encoded feature row."""

    accident_day: np.ndarray
    X: np.ndarray
    count: np.ndarray
    first: np.ndarray  # claims of the group reported in development period 0
    label: np.ndarray
    member: np.ndarray  # group index of every claim
    data: EncodedDataset | None = None

    def period(self, delta: int) -> np.ndarray:
        return (self.accident_day - 1) // delta


def group_claims(claims: ClaimSet, encoder: FeatureEncoder, delta: int = 1) -> ClaimGroups:
    data = encoder.transform(claims)
    key = np.column_stack([claims.accident_day.astype(float), data.X])
    uniq, first_idx, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    _, j = grid_indices(claims.accident_day, claims.delay, delta)
    labels = encoder.cell_keys(claims)
    return ClaimGroups(
        accident_day=uniq[:, 0].astype(np.int64),
        X=uniq[:, 1:],
        count=np.bincount(inverse, minlength=len(uniq)).astype(float),
        first=np.bincount(inverse, weights=(j == 0).astype(float), minlength=len(uniq)),
        label=labels[first_idx],
        member=inverse,
        data=EncodedDataset(uniq[:, 1:], data.columns, data.blocks, data.kinds),
    )


def predict_lower(table: FactorTable, diagonal: np.ndarray) -> np.ndarray:
    """Fine-grid predicted occurrences, zero in the upper triangle.

    ``diagonal`` holds the observed cumulative count on the latest diagonal of
    each table row. Cell ``(k, j)`` with ``j >= K - k`` receives
    ``C (prod_{K-k..j} f - prod_{K-k..j-1} f)``.
    """
    K, J = table.n_periods, table.n_dev
    k = np.asarray(table.period)
    lf = np.log(table.factor)
    cols = np.arange(J)
    lower = cols[None, :] >= (K - k)[:, None]
    lf = np.where(lower, lf, 0.0)
    P = np.exp(np.cumsum(lf, axis=1))
    prev = np.concatenate([np.ones((len(k), 1)), P[:, :-1]], axis=1)
    pred = np.where(lower, np.asarray(diagonal, dtype=float)[:, None] * (P - prev), 0.0)
    if not np.all(np.isfinite(pred)):
        r = int(np.argwhere(~np.isfinite(pred))[0, 0])
        raise PredictionError(f"non-finite prediction in row {r} ({table.labels[r]}); use a smaller delta")
    return pred


def coarse_index(period: np.ndarray, n_dev: int, ratio: int) -> tuple[np.ndarray, np.ndarray]:
    """Coarse (accident, development) index for every fine cell of the given rows."""
    k = np.asarray(period)[:, None]
    l = np.arange(n_dev)[None, :]
    kc = k // ratio
    return np.broadcast_to(kc, (len(period), n_dev)), (k + l) // ratio - kc


def aggregate(values: np.ndarray, period: np.ndarray, key: np.ndarray, n_keys: int,
              n_periods: int, n_cols: int, ratio: int) -> np.ndarray:
    """Sum fine-cell values of each row into coarse cells, per display key."""
    kc, jc = coarse_index(period, values.shape[1], ratio)
    keep = jc < n_cols
    flat = (np.asarray(key)[:, None] * n_periods + kc) * n_cols + jc
    out = np.bincount(flat[keep], weights=values[keep], minlength=n_keys * n_periods * n_cols)
    return out.reshape(n_keys, n_periods, n_cols)


def build_cells(claims: ClaimSet, delta: int, keys: np.ndarray, key_names: list[str],
                n_cols: int | None = None) -> np.ndarray:
    """Occurrence counts ``O[key, k, j]`` by direct binning of claims at width ``delta``."""
    cutoff = claims.cutoff
    if cutoff % delta:
        raise ReservingError(f"delta={delta} does not divide the cutoff {cutoff}")
    K = cutoff // delta
    n_cols = n_cols or n_dev_columns(delta, cutoff)
    k, j = grid_indices(claims.accident_day, claims.delay, delta)
    if np.any(j >= n_cols):
        raise ReservingError("delay outside the triangle columns")
    index = {name: i for i, name in enumerate(key_names)}
    kid = np.array([index[v] for v in keys], dtype=np.int64)
    flat = (kid * K + k) * n_cols + j
    return np.bincount(flat, minlength=len(key_names) * K * n_cols).reshape(len(key_names), K, n_cols).astype(float)


@dataclass
class TriangleSet:
    delta: int
    cutoff: int
    keys: list[str]
    observed: np.ndarray  # [key, k, j]
    predicted: np.ndarray  # lower-triangle predictions
    fitted: np.ndarray | None = None  # fitted occurrences from the factor ladder
    factors: np.ndarray | None = None

    @property
    def n_periods(self) -> int:
        return self.observed.shape[1]

    def lower_mask(self) -> np.ndarray:
        K, J = self.observed.shape[1:]
        return (np.arange(K)[:, None] + np.arange(J)[None, :]) >= K

    def total_predicted(self) -> float:
        return float(self.predicted.sum())

    def export_factors(self, path) -> None:
        """Regrained factors per feature key; empty where the fitted cumulative is zero."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "j", "features", "factor"])
            for a, key in enumerate(self.keys):
                for k in range(self.factors.shape[1]):
                    for j in range(1, self.factors.shape[2]):
                        v = self.factors[a, k, j]
                        w.writerow([k, j, key, "" if not np.isfinite(v) else f"{v:.12g}"])

    def to_long_csv(self, path, truth: np.ndarray | None = None) -> None:
        lower = self.lower_mask()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["k", "j", "features", "observed", "predicted"] + (["actual"] if truth is not None else [])
            w.writerow(head)
            for a, key in enumerate(self.keys):
                for k in range(self.observed.shape[1]):
                    for j in range(self.observed.shape[2]):
                        row = [k, j, key, f"{self.observed[a, k, j]:.12g}" if not lower[k, j] else "",
                               f"{self.predicted[a, k, j]:.12g}" if lower[k, j] else ""]
                        if truth is not None:
                            row.append(f"{truth[a, k, j]:.12g}" if lower[k, j] else "")
                        w.writerow(row)


def fitted_increments(table: FactorTable, groups: ClaimGroups, anchor: str = "diagonal") -> np.ndarray:
    """Fitted occurrences per fine cell from the factor ladder of each row."""
    logP = table.log_cumulative()
    P = np.exp(logP - logP[:, -1:])  # scaled so the last column is 1
    inc = np.diff(np.concatenate([np.zeros((P.shape[0], 1)), P], axis=1), axis=1)
    K = table.n_periods
    k = np.asarray(table.period)
    if anchor == "diagonal":
        last = np.clip(K - 1 - k, 0, table.n_dev - 1)
        scale = groups.count / P[np.arange(len(k)), last]
    elif anchor == "first":
        scale = groups.first / P[:, 0]
    else:
        raise ReservingError(f"unknown anchor {anchor!r}")
    return scale[:, None] * inc


def regrain(
    table: FactorTable,
    groups: ClaimGroups,
    observed: ClaimSet,
    encoder: FeatureEncoder,
    coarse_delta: int,
    anchor: str = "diagonal",
    fine_predictions: np.ndarray | None = None,
) -> TriangleSet:
    """Aggregate fine predictions and fitted occurrences to width ``coarse_delta``."""
    delta = table.delta
    if coarse_delta % delta:
        raise ReservingError(f"coarse width {coarse_delta} is not a multiple of {delta}")
    r = coarse_delta // delta
    if table.n_periods % r:
        raise ReservingError(f"{table.n_periods} periods cannot be grouped in blocks of {r}")
    Kc = table.n_periods // r
    cutoff = table.n_periods * delta
    n_cols = n_dev_columns(coarse_delta, cutoff)
    claim_keys = encoder.cell_keys(observed)
    keys = sorted(set(claim_keys) | set(groups.label))
    kidx = {v: i for i, v in enumerate(keys)}
    gkey = np.array([kidx[v] for v in groups.label], dtype=np.int64)
    if fine_predictions is None:
        fine_predictions = predict_lower(table, groups.count)
    pred = aggregate(fine_predictions, table.period, gkey, len(keys), Kc, n_cols, r)
    fitted = aggregate(fitted_increments(table, groups, anchor), table.period, gkey, len(keys), Kc, n_cols, r)
    cum = np.cumsum(fitted, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(cum[:, :, :-1] > 0, cum[:, :, 1:] / cum[:, :, :-1], np.nan)
    factors = np.concatenate([np.ones(factors.shape[:2] + (1,)), factors], axis=2)
    obs = build_cells(observed, coarse_delta, claim_keys, keys, n_cols)
    return TriangleSet(coarse_delta, cutoff, keys, obs, pred, fitted, factors)
