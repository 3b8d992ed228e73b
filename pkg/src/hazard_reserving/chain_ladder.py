"""Volume-weighted chain ladder on an occurrence triangle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChainLadderError


@dataclass
class ChainLadderResult:
    factors: np.ndarray  # factors[j] links column j-1 to j; factors[0] is 1
    cumulative: np.ndarray  # completed cumulative triangle
    predicted: np.ndarray  # incremental predictions, zero in the upper triangle


def upper_mask(K: int, J: int) -> np.ndarray:
    return (np.arange(K)[:, None] + np.arange(J)[None, :]) <= K - 1


def cl_fit_predict(incremental: np.ndarray) -> ChainLadderResult:
    """Fit factors on cells with ``k + j <= K - 1`` and complete the lower triangle.

    Columns with no observed link (``j >= K``) get factor 1.
    """
    inc = np.asarray(incremental, dtype=float)
    K, J = inc.shape
    up = upper_mask(K, J)
    cum = np.cumsum(np.where(up, inc, 0.0), axis=1)
    f = np.ones(J)
    for j in range(1, min(J, K)):
        rows = slice(0, K - j)
        den = cum[rows, j - 1].sum()
        if den <= 0:
            raise ChainLadderError(f"zero cumulative volume feeding development column {j}")
        f[j] = cum[rows, j].sum() / den
    full = cum.copy()
    for k in range(K):
        for j in range(max(K - k, 1), J):
            full[k, j] = full[k, j - 1] * f[j]
    pred = np.where(up, 0.0, np.diff(np.concatenate([np.zeros((K, 1)), full], axis=1), axis=1))
    return ChainLadderResult(f, full, pred)
