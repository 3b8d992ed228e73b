"""Cubic P-spline basis on equally spaced knots with a second-difference penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError

DEGREE = 3


@dataclass(frozen=True)
class PSplineBasis:
    lo: float
    hi: float
    n_basis: int = 10

    def __post_init__(self):
        if self.n_basis < DEGREE + 1:
            raise ConfigError(f"a cubic basis needs at least {DEGREE + 1} functions, got {self.n_basis}")
        if not self.hi > self.lo:
            raise ConfigError("spline range is empty")

    @property
    def knots(self) -> np.ndarray:
        nseg = self.n_basis - DEGREE
        step = (self.hi - self.lo) / nseg
        return self.lo + step * np.arange(-DEGREE, nseg + DEGREE + 1)

    def design(self, x: np.ndarray) -> np.ndarray:
        # evaluation outside the fitted range is clamped to the boundary
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return BSpline.design_matrix(x, self.knots, DEGREE, extrapolate=False).toarray()

    def penalty(self) -> np.ndarray:
        return second_difference_penalty(self.n_basis)


def second_difference_penalty(m: int) -> np.ndarray:
    D = np.diff(np.eye(m), n=2, axis=0)
    return D.T @ D


def evaluate(coef: np.ndarray, basis: PSplineBasis, x: np.ndarray) -> np.ndarray:
    return basis.design(x) @ np.asarray(coef, dtype=float)
