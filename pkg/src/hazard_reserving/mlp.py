"""Feed-forward network for the log-risk, trained by full-batch proximal gradient descent."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .claims import ClaimSet, EncodedDataset, FeatureEncoder, RiskGrid
from .errors import ConfigError, DivergenceError, NonPositiveDenominatorError
from .likelihood import efron_grad_hess

ACTIVATIONS = ("tanh", "relu")


@dataclass
class MLPConfig:
    n_layers: int = 2
    width: int = 10
    activation: str = "tanh"
    lr: float = 0.1
    epochs: int = 300
    rho: float = 0.0
    eps: float = 0.5  # share of the L2 part in the elastic penalty
    seed: int = 0
    zero_init: bool = False

    def validate(self) -> None:
        if self.n_layers < 0:
            raise ConfigError("n_layers must be >= 0")
        if self.n_layers > 0 and self.width < 1:
            raise ConfigError(f"hidden width must be >= 1, got {self.width}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}")
        if self.lr <= 0 or self.epochs < 0:
            raise ConfigError("lr must be positive and epochs non-negative")
        if self.rho < 0 or not 0 <= self.eps <= 1:
            raise ConfigError("rho must be >= 0 and eps in [0, 1]")


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else np.maximum(z, 0.0)


def _act_grad(z, a, kind):
    return 1.0 - a * a if kind == "tanh" else (z > 0).astype(float)


def init_params(n_in: int, cfg: MLPConfig) -> list[np.ndarray]:
    """Weights and biases alternating: [W1, b1, ..., W_out, b_out]."""
    rng = np.random.default_rng(cfg.seed)
    sizes = [n_in] + [cfg.width] * cfg.n_layers + [1]
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        if cfg.zero_init:
            W = np.zeros((a, b))
        else:
            lim = np.sqrt(6.0 / (a + b))
            W = rng.uniform(-lim, lim, size=(a, b))
        params += [W, np.zeros(b)]
    return params


def forward(params: list[np.ndarray], X: np.ndarray, activation: str):
    hs, zs = [X], []
    h = X
    n_hidden = len(params) // 2 - 1
    for i in range(n_hidden):
        z = h @ params[2 * i] + params[2 * i + 1]
        h = _act(z, activation)
        zs.append(z)
        hs.append(h)
    out = h @ params[-2] + params[-1]
    return out[:, 0], hs, zs


def backward(params, hs, zs, dphi, activation):
    grads = [None] * len(params)
    d = dphi[:, None]
    grads[-2] = hs[-1].T @ d
    grads[-1] = d.sum(axis=0)
    n_hidden = len(params) // 2 - 1
    for i in range(n_hidden - 1, -1, -1):
        d = (d @ params[2 * i + 2].T) * _act_grad(zs[i], hs[i + 1], activation)
        grads[2 * i] = hs[i].T @ d
        grads[2 * i + 1] = d.sum(axis=0)
    return grads


def penalty(params, rho: float, eps: float) -> float:
    if rho == 0:
        return 0.0
    sq = sum(float(np.sum(p * p)) for p in params)
    ab = sum(float(np.sum(np.abs(p))) for p in params)
    return rho * (eps * sq + (1 - eps) * ab)


def objective_and_gradient(params, X, grid: RiskGrid, cfg: MLPConfig):
    """Mean Efron loss plus elastic penalty, with its (sub)gradient."""
    phi, hs, zs = forward(params, X, cfg.activation)
    loss, g, _ = efron_grad_hess(phi, grid)
    n = max(grid.n, 1)
    grads = backward(params, hs, zs, g / n, cfg.activation)
    if cfg.rho:
        grads = [gr + cfg.rho * (2 * cfg.eps * p + (1 - cfg.eps) * np.sign(p)) for gr, p in zip(grads, params)]
    return loss / n + penalty(params, cfg.rho, cfg.eps), grads


@dataclass
class MLPModel:
    encoder: FeatureEncoder
    params: list[np.ndarray]
    config: MLPConfig
    history: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def log_risk_encoded(self, data: EncodedDataset) -> np.ndarray:
        return forward(self.params, data.X, self.config.activation)[0]

    def log_risk(self, claims: ClaimSet) -> np.ndarray:
        return self.log_risk_encoded(self.encoder.transform(claims))

    def to_dict(self) -> dict:
        return {
            "kind": "mlp",
            "encoder": self.encoder.to_dict(),
            "config": asdict(self.config),
            "params": [p.tolist() for p in self.params],
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLPModel":
        return cls(
            FeatureEncoder.from_dict(d["encoder"]),
            [np.asarray(p, dtype=float) for p in d["params"]],
            MLPConfig(**d["config"]),
            best_epoch=int(d.get("best_epoch", 0)),
        )


def _prox(p, step, rho, eps):
    if rho == 0:
        return p
    shrunk = np.sign(p) * np.maximum(np.abs(p) - step * rho * (1 - eps), 0.0)
    return shrunk / (1.0 + 2.0 * step * rho * eps)


def fit_mlp(data: EncodedDataset, grid: RiskGrid, encoder: FeatureEncoder, cfg: MLPConfig | None = None) -> MLPModel:
    cfg = cfg or MLPConfig()
    cfg.validate()
    X = data.X
    params = init_params(X.shape[1], cfg)
    n = max(grid.n, 1)
    best, best_params, best_epoch = np.inf, [p.copy() for p in params], 0
    history = []
    for epoch in range(cfg.epochs + 1):
        try:
            phi, hs, zs = forward(params, X, cfg.activation)
            loss, g, _ = efron_grad_hess(phi, grid)
        except (NonPositiveDenominatorError, FloatingPointError) as exc:
            raise DivergenceError(epoch, str(exc)) from None
        obj = loss / n + penalty(params, cfg.rho, cfg.eps)
        if not np.isfinite(obj):
            raise DivergenceError(epoch)
        history.append(obj)
        if obj < best:
            best, best_params, best_epoch = obj, [p.copy() for p in params], epoch
        if epoch == cfg.epochs:
            break
        grads = backward(params, hs, zs, g / n, cfg.activation)
        params = [_prox(p - cfg.lr * gr, cfg.lr, cfg.rho, cfg.eps) for p, gr in zip(params, grads)]
    return MLPModel(encoder, best_params, cfg, history, best_epoch)
