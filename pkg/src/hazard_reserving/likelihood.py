"""Efron-tied reverse-time partial likelihood with per-claim gradient and Hessian diagonal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .claims import RiskGrid
from .errors import NonPositiveDenominatorError


@dataclass
class GroupSums:
    weights: np.ndarray  # exp(phi - shift)
    shift: float
    exposed: np.ndarray  # S_j
    occurring: np.ndarray  # Q_j
    denom: np.ndarray  # one Efron denominator per term
    frac: np.ndarray  # r / O_j per term


def group_sums(phi: np.ndarray, grid: RiskGrid) -> GroupSums:
    phi = np.asarray(phi, dtype=float)
    shift = float(phi.mean()) if phi.size else 0.0
    w = np.exp(phi - shift)
    S = grid.interval_sum(w)
    Q = np.bincount(grid.group, weights=w, minlength=grid.n_groups)
    tg = grid.term_group
    frac = grid.term_rank / np.maximum(grid.counts[tg], 1)
    D = S[tg] - frac * Q[tg]
    bad = ~(D > 0)
    if np.any(bad):
        t = int(np.argmax(bad))
        raise NonPositiveDenominatorError(int(tg[t]), int(grid.term_rank[t]), float(D[t]))
    return GroupSums(w, shift, S, Q, D, frac)


def efron_loss(phi: np.ndarray, grid: RiskGrid) -> float:
    """Negative log partial likelihood (sum over claims)."""
    if grid.n == 0:
        return 0.0
    gs = group_sums(phi, grid)
    return float(np.sum(np.log(gs.denom)) - np.sum(np.asarray(phi, dtype=float) - gs.shift))


def efron_grad_hess(phi: np.ndarray, grid: RiskGrid) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss, gradient and Hessian diagonal with respect to the claim scores."""
    phi = np.asarray(phi, dtype=float)
    if grid.n == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    gs = group_sums(phi, grid)
    J, tg, D, f = grid.n_groups, grid.term_group, gs.denom, gs.frac
    inv, inv2 = 1.0 / D, 1.0 / D**2
    A = np.bincount(tg, weights=inv, minlength=J)
    B = np.bincount(tg, weights=inv2, minlength=J)
    iota = np.bincount(tg, weights=f * inv, minlength=J)
    omega_in = np.bincount(tg, weights=(1.0 - (1.0 - f) ** 2) * inv2, minlength=J)
    omega_out = np.bincount(tg, weights=-(f**2) * inv2, minlength=J)

    cA = np.concatenate([[0.0], np.cumsum(A)])
    cB = np.concatenate([[0.0], np.cumsum(B)])
    own = grid.exposed_own
    lo, hi = grid.group, np.where(own, grid.exit, grid.group - 1)
    upsilon = np.where(own, cA[hi + 1] - cA[lo], 0.0)
    gamma = np.where(own, cB[hi + 1] - cB[lo], 0.0)
    l = grid.group
    omega = np.where(own, omega_in[l], omega_out[l])

    w = gs.weights
    g = w * (upsilon - iota[l]) - 1.0
    h = g + 1.0 - w**2 * (gamma - omega)
    loss = float(np.sum(np.log(D)) - np.sum(phi - gs.shift))
    return loss, g, h


def mean_loss(phi: np.ndarray, grid: RiskGrid) -> float:
    return efron_loss(phi, grid) / max(grid.n, 1)
