"""Baseline reverse hazard, development factors and survival curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .claims import RiskGrid
from .errors import BlowUpError, ReservingError

OK, EMPTY, BLOWUP = 0, 1, 2


@dataclass
class BaselineHazard:
    delta: int
    eta: float
    values: np.ndarray  # per unit time, one per development index
    shift: float  # scores are exponentiated as exp(phi - shift)
    empty: np.ndarray  # development indices with no exposure

    def to_dict(self) -> dict:
        return {"delta": self.delta, "eta": self.eta, "values": self.values.tolist(),
                "shift": self.shift, "empty": self.empty.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineHazard":
        return cls(int(d["delta"]), float(d["eta"]), np.asarray(d["values"], dtype=float),
                   float(d["shift"]), np.asarray(d["empty"], dtype=bool))


def estimate_baseline(phi: np.ndarray, grid: RiskGrid, eta: float = 0.5) -> BaselineHazard:
    """Occurrences over interpolated exposure, ``O_j / (delta (S_j - eta Q_j))``."""
    if not 0.0 <= eta <= 1.0:
        raise ReservingError(f"eta must lie in [0, 1], got {eta}")
    phi = np.asarray(phi, dtype=float)
    shift = float(phi.mean()) if phi.size else 0.0
    w = np.exp(phi - shift)
    S = grid.interval_sum(w)
    Q = np.bincount(grid.group, weights=w, minlength=grid.n_groups)
    O = grid.counts
    empty = grid.exposure_sizes() == 0
    denom = grid.delta * (S - eta * Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(O > 0, np.where(denom > 0, O / np.where(denom > 0, denom, 1.0), np.inf), 0.0)
    alpha[empty] = 0.0
    return BaselineHazard(grid.delta, eta, alpha, shift, empty)


def factor_from_hazard(step_hazard, eta: float = 0.5):
    """``(1 + eta z) / (1 - (1 - eta) z)`` for ``z = delta * hazard``.

    Paired with the baseline's ``S - eta Q`` denominator this returns the raw
    age-to-age ratio ``E / (E - O)`` on featureless data for every eta.
    """
    z = np.asarray(step_hazard, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (1.0 + eta * z) / (1.0 - (1.0 - eta) * z)


@dataclass
class FactorTable:
    """Development factors per row (accident period and feature combination) and development index.

    Column 0 carries no factor and is set to 1.
    """

    delta: int
    eta: float
    n_periods: int
    period: np.ndarray
    labels: np.ndarray
    log_risk: np.ndarray
    hazard: np.ndarray
    factor: np.ndarray
    flag: np.ndarray

    @property
    def n_dev(self) -> int:
        return self.factor.shape[1]

    def log_cumulative(self) -> np.ndarray:
        """``log prod_{l=1..j} f_l`` per row, zero at j = 0."""
        lf = np.log(self.factor)
        lf[:, 0] = 0.0
        return np.cumsum(lf, axis=1)

    def survival(self) -> np.ndarray:
        return np.exp(-self.log_cumulative())

    def export_csv(self, path, rows=None) -> None:
        rows = range(len(self.period)) if rows is None else rows
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "j", "features", "hazard", "factor", "flag"])
            for r in rows:
                for j in range(1, self.n_dev):
                    w.writerow([int(self.period[r]), j, self.labels[r],
                                f"{self.hazard[r, j]:.12g}", f"{self.factor[r, j]:.12g}",
                                ("ok", "empty", "blowup")[self.flag[r, j]]])


def dev_factors_from_hazard(
    baseline: BaselineHazard,
    log_risk: np.ndarray,
    period: np.ndarray,
    n_periods: int,
    labels=None,
    on_blowup: str = "raise",
    cap: float = 1e8,
) -> FactorTable:
    """Factors ``f_{k,j}(x)`` for rows with scores ``log_risk``.

    ``on_blowup="raise"`` fails when ``delta * hazard >= 1 / (1 - eta)``;
    ``"cap"`` replaces such factors by ``cap`` and flags them.
    """
    if on_blowup not in ("raise", "cap"):
        raise ReservingError(f"unknown blow-up policy {on_blowup!r}")
    log_risk = np.asarray(log_risk, dtype=float)
    m, J = len(log_risk), len(baseline.values)
    rel = np.exp(log_risk - baseline.shift)
    hazard = baseline.values[None, :] * rel[:, None]
    z = baseline.delta * hazard
    eta = baseline.eta
    factor = factor_from_hazard(z, eta)
    flag = np.zeros((m, J), dtype=np.int8)
    with np.errstate(invalid="ignore"):
        blown = ((1.0 - eta) * z >= 1.0) | ~np.isfinite(z)
    blown[:, 0] = False
    if blown.any():
        if on_blowup == "raise":
            r, j = np.argwhere(blown)[0]
            lab = "" if labels is None else str(labels[r])
            raise BlowUpError(int(r), int(j), float(z[r, j]), lab)
        factor[blown] = cap
        flag[blown] = BLOWUP
    factor[:, baseline.empty] = 1.0
    flag[:, baseline.empty] = EMPTY
    factor[:, 0] = 1.0
    flag[:, 0] = OK
    labels = np.asarray(labels if labels is not None else [""] * m, dtype=object)
    return FactorTable(baseline.delta, eta, n_periods, np.asarray(period), labels, log_risk, hazard, factor, flag)


def survival_curve(table: FactorTable, row: int) -> np.ndarray:
    """``1 / prod_{l=1..j} f_l`` for j = 0..J-1; the first entry is 1."""
    lf = np.log(table.factor[row])
    lf[0] = 0.0
    return np.exp(-np.cumsum(lf))
