"""Penalised Cox fitter: linear effects plus optional P-spline smooths, Newton with step halving."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .claims import ClaimSet, EncodedDataset, FeatureEncoder, RiskGrid
from .errors import ConvergenceError, RankDeficiencyError, ConfigError
from .likelihood import efron_grad_hess, efron_loss, group_sums
from .splines import PSplineBasis


@dataclass
class CoxConfig:
    spline_features: tuple[str, ...] = ()
    n_basis: int = 10
    rho: float = 1.0
    tol: float = 1e-8
    max_iter: int = 100
    max_halvings: int = 30
    hessian: str = "exact"  # or "diagonal"


@dataclass
class CoxDesign:
    """Maps an encoded dataset to the Cox design matrix."""

    columns: list[str]
    source: list[int]  # encoded column feeding each linear term, -1 for spline blocks
    splines: dict[str, tuple[PSplineBasis, int, list[int]]] = field(default_factory=dict)

    @classmethod
    def build(cls, data: EncodedDataset, cfg: CoxConfig) -> "CoxDesign":
        for name in cfg.spline_features:
            if data.kinds.get(name) != "continuous":
                raise ConfigError(f"spline feature '{name}' must be a continuous column")
        columns, source, splines = [], [], {}
        for name, cols in data.blocks.items():
            if data.kinds[name] == "categorical":
                # first-seen level is the reference
                for c in cols[1:]:
                    columns.append(data.columns[c])
                    source.append(c)
            elif name in cfg.spline_features:
                basis = PSplineBasis(0.0, 2.0, cfg.n_basis)
                idx = []
                for b in range(1, cfg.n_basis):
                    idx.append(len(columns))
                    columns.append(f"s({name})[{b}]")
                    source.append(-1)
                splines[name] = (basis, cols[0], idx)
            else:
                columns.append(data.columns[cols[0]])
                source.append(cols[0])
        return cls(columns, source, splines)

    def matrix(self, data: EncodedDataset) -> np.ndarray:
        Z = np.zeros((data.X.shape[0], len(self.columns)))
        for i, c in enumerate(self.source):
            if c >= 0:
                Z[:, i] = data.X[:, c]
        for basis, col, idx in self.splines.values():
            Z[:, idx] = basis.design(data.X[:, col])[:, 1:]
        return Z

    def penalty(self) -> np.ndarray:
        P = np.zeros((len(self.columns), len(self.columns)))
        for basis, _, idx in self.splines.values():
            P[np.ix_(idx, idx)] = basis.penalty()[1:, 1:]
        return P


@dataclass
class CoxModel:
    encoder: FeatureEncoder
    design: CoxDesign
    coef: np.ndarray
    config: CoxConfig
    n_iter: int = 0
    loss_path: list[float] = field(default_factory=list)

    def log_risk_encoded(self, data: EncodedDataset) -> np.ndarray:
        return self.design.matrix(data) @ self.coef

    def log_risk(self, claims: ClaimSet) -> np.ndarray:
        return self.log_risk_encoded(self.encoder.transform(claims))

    def coefficients(self) -> dict[str, float]:
        return {c: float(b) for c, b in zip(self.design.columns, self.coef)}

    def to_dict(self) -> dict:
        return {
            "kind": "cox",
            "encoder": self.encoder.to_dict(),
            "config": asdict(self.config),
            "columns": self.design.columns,
            "coef": [float(b) for b in self.coef],
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoxModel":
        cfg = CoxConfig(**{**d["config"], "spline_features": tuple(d["config"]["spline_features"])})
        enc = FeatureEncoder.from_dict(d["encoder"])
        # rebuild the design from an empty encoded frame with the same layout
        probe = enc.transform(_probe_claims(enc))
        design = CoxDesign.build(probe, cfg)
        return cls(enc, design, np.asarray(d["coef"], dtype=float), cfg, int(d.get("n_iter", 0)))


def _probe_claims(enc: FeatureEncoder) -> ClaimSet:
    from .claims import Schema

    cols = {"id": "id", "ad": "accident_day", "dl": "delay_day"}
    cols.update({k: "categorical" for k in enc.levels})
    cols.update({k: "continuous" for k in enc.ranges if k != "accident_day"})
    return ClaimSet(
        Schema(cols),
        np.array(["x"], dtype=object),
        np.array([1]),
        np.array([0]),
        {k: np.array([v[0]], dtype=object) for k, v in enc.levels.items()},
        {k: np.array([r[0]]) for k, r in enc.ranges.items() if k != "accident_day"},
        1,
    )


def cox_gradient_hessian(phi: np.ndarray, Z: np.ndarray, grid: RiskGrid) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss, gradient and exact Hessian of the Efron loss in the linear coefficients."""
    gs = group_sums(phi, grid)
    J, tg, D, f = grid.n_groups, grid.term_group, gs.denom, gs.frac
    w = gs.weights
    wz = w[:, None] * Z
    S1 = grid.interval_sum(wz)
    S2 = grid.interval_sum(wz[:, :, None] * Z[:, None, :])
    p = Z.shape[1]
    Q1 = np.stack([np.bincount(grid.group, wz[:, c], J) for c in range(p)], axis=1) if p else np.zeros((J, 0))
    Q2 = np.zeros((J, p, p))
    for a in range(p):
        for b in range(a, p):
            Q2[:, a, b] = Q2[:, b, a] = np.bincount(grid.group, wz[:, a] * Z[:, b], J)
    inv, inv2 = 1.0 / D, 1.0 / D**2
    A = np.bincount(tg, inv, J)
    I = np.bincount(tg, f * inv, J)
    B = np.bincount(tg, inv2, J)
    Bf = np.bincount(tg, f * inv2, J)
    Bff = np.bincount(tg, f * f * inv2, J)
    grad = S1.T @ A - Q1.T @ I - Z.sum(axis=0)
    H = np.einsum("jab,j->ab", S2, A) - np.einsum("jab,j->ab", Q2, I)
    SS = np.einsum("ja,jb->jab", S1, S1)
    SQ = np.einsum("ja,jb->jab", S1, Q1)
    QQ = np.einsum("ja,jb->jab", Q1, Q1)
    H -= np.einsum("jab,j->ab", SS, B) - np.einsum("jab,j->ab", SQ + SQ.transpose(0, 2, 1), Bf)
    H -= np.einsum("jab,j->ab", QQ, Bff)
    loss = float(np.sum(np.log(D)) - np.sum(phi - gs.shift))
    return loss, grad, H


def fit_cox(data: EncodedDataset, grid: RiskGrid, encoder: FeatureEncoder, cfg: CoxConfig | None = None) -> CoxModel:
    cfg = cfg or CoxConfig()
    design = CoxDesign.build(data, cfg)
    Z = design.matrix(data)
    P = design.penalty()
    p = Z.shape[1]
    theta = np.zeros(p)

    def objective(th):
        return efron_loss(Z @ th, grid) + 0.5 * cfg.rho * th @ P @ th

    current = objective(theta)
    path = [current]
    for it in range(1, cfg.max_iter + 1):
        phi = Z @ theta
        if cfg.hessian == "exact":
            _, grad, H = cox_gradient_hessian(phi, Z, grid)
        elif cfg.hessian == "diagonal":
            _, g, h = efron_grad_hess(phi, grid)
            grad, H = Z.T @ g, Z.T @ (np.maximum(h, 0.0)[:, None] * Z)
        else:
            raise ConfigError(f"unknown hessian mode {cfg.hessian!r}")
        grad = grad + cfg.rho * P @ theta
        H = H + cfg.rho * P
        if p == 0:
            break
        ev = np.linalg.eigvalsh(H)
        if ev[0] <= 1e-10 * max(ev[-1], 1e-300):
            raise RankDeficiencyError(
                f"Hessian is singular (eigenvalues {ev[0]:.3g}..{ev[-1]:.3g}); "
                "check for constant or collinear design columns"
            )
        step = np.linalg.solve(H, grad)
        scale = 1.0
        for _ in range(cfg.max_halvings + 1):
            cand = theta - scale * step
            val = objective(cand)
            if val <= current + 1e-12 * abs(current):
                break
            scale *= 0.5
        else:
            raise ConvergenceError(f"step halving failed at iteration {it}")
        theta, current = cand, val
        path.append(current)
        if np.max(np.abs(scale * step)) < cfg.tol or np.max(np.abs(grad)) < cfg.tol:
            return CoxModel(encoder, design, theta, cfg, it, path)
    if p == 0:
        return CoxModel(encoder, design, theta, cfg, 0, path)
    raise ConvergenceError(f"no convergence after {cfg.max_iter} iterations")


def cox_log_risk(model: CoxModel, claims: ClaimSet) -> np.ndarray:
    return model.log_risk(claims)


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
