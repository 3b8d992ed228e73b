"""Reserve accuracy metrics and the continuous ranked probability score."""

from __future__ import annotations

import numpy as np

from .claims import grid_indices
from .errors import ReservingError
from .hazard import FactorTable


def lower_mask(K: int, J: int) -> np.ndarray:
    return (np.arange(K)[:, None] + np.arange(J)[None, :]) >= K


def reserve_metrics(actual: np.ndarray, predicted: np.ndarray, aligned: bool = True) -> dict[str, float]:
    """Total, cell-wise and calendar-diagonal relative errors on the lower triangle.

    Inputs are ``K x J`` (or ``keys x K x J``, summed over keys). With
    ``aligned=False`` each diagonal pairs ``actual[k, j]`` with ``predicted[k, j-1]``.
    """
    O = np.asarray(actual, dtype=float)
    P = np.asarray(predicted, dtype=float)
    if O.ndim == 3:
        O, P = O.sum(axis=0), P.sum(axis=0)
    if O.shape != P.shape:
        raise ReservingError("actual and predicted triangles differ in shape")
    K, J = O.shape
    low = lower_mask(K, J)
    total = O[low].sum()
    if total <= 0:
        raise ReservingError("no actual occurrences in the lower triangle")
    if aligned:
        Pd = P
    else:
        Pd = np.zeros_like(P)
        Pd[:, 1:] = np.where(low[:, :-1], P[:, :-1], 0.0)
    # every metric sums cells per calendar diagonal in the same order, so the
    # inequalities between them also hold exactly in floating point
    diag = np.add.outer(np.arange(K), np.arange(J)).ravel()
    err = np.where(low, O - P, 0.0).ravel()
    cell_diag = np.bincount(diag, weights=err)
    r_tot = abs(cell_diag.sum()) / total
    r_cell = np.bincount(diag, weights=np.abs(err)).sum() / total
    per_diag = cell_diag if aligned else np.bincount(diag, weights=np.where(low, O - Pd, 0.0).ravel())
    r_cal = np.abs(per_diag).sum() / total
    return {"R_tot": float(r_tot), "R_cell": float(r_cell), "R_cal": float(r_cal)}


def crps_one(survival: np.ndarray, event: int, widths: np.ndarray) -> float:
    """Score of one claim against its survival curve over bins ``1..Z`` (index 0 unused)."""
    s = np.asarray(survival, dtype=float)
    d = np.asarray(widths, dtype=float)
    total = 0.0
    for z in range(1, len(s)):
        if z < event:
            total += (1.0 - s[z]) ** 2 * d[z]
        elif z > event:
            total += s[z] ** 2 * d[z]
        else:
            total += 0.5 * d[z] * (s[z] ** 2 + (1.0 - s[z]) ** 2)
    if event == 0:
        total += 0.5 * d[0] * (s[0] ** 2 + (1.0 - s[0]) ** 2)
    return total


def crps(survival: np.ndarray, event: np.ndarray, widths) -> np.ndarray:
    """Vectorised score for many claims; ``survival`` is ``claims x bins``."""
    S = np.atleast_2d(np.asarray(survival, dtype=float))
    event = np.asarray(event)
    m, Z = S.shape
    d = np.broadcast_to(np.asarray(widths, dtype=float), (Z,))
    z = np.arange(Z)[None, :]
    e = event[:, None]
    before = (1.0 - S) ** 2 * d
    after = S**2 * d
    own = 0.5 * d * (S**2 + (1.0 - S) ** 2)
    use = z >= 1
    use = use | (e == 0) & (z == 0)
    score = np.where(z < e, before, np.where(z > e, after, own))
    return np.where(use, score, 0.0).sum(axis=1)


def coarse_survival(table: FactorTable, rows: np.ndarray, accident_day: np.ndarray,
                    coarse_delta: int, n_cols: int, kind: str = "forward") -> np.ndarray:
    """Survival on the coarse grid implied by fine factor rows.

    For a claim in fine accident period ``h`` the coarse development period ``z``
    ends at fine index ``(h // r + z + 1) r - 1 - h``. With ``C`` the fitted
    cumulative count of the row, ``kind="forward"`` gives the delay survival
    ``1 - C(end z) / C(last)``; ``kind="reverse"`` gives ``C(end 0) / C(end z)``,
    the inverse factor product counted from the first period.
    """
    r = coarse_delta // table.delta
    logc = table.log_cumulative()[rows]
    h = (np.asarray(accident_day) - 1) // table.delta
    z = np.arange(n_cols)[None, :]
    end = np.minimum((h[:, None] // r + z + 1) * r - 1 - h[:, None], table.n_dev - 1)
    ends = np.take_along_axis(logc, end, axis=1)
    if kind == "forward":
        return 1.0 - np.exp(ends - logc[:, -1:])
    if kind == "reverse":
        return np.exp(ends[:, :1] - ends)
    raise ReservingError(f"unknown survival kind {kind!r}")


def claim_bins(accident_day, delay, coarse_delta: int) -> np.ndarray:
    return grid_indices(accident_day, delay, coarse_delta)[1]
