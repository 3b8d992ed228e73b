"""Second-order gradient boosting of regression trees on the Efron loss (exact greedy splits)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .claims import ClaimSet, EncodedDataset, FeatureEncoder, RiskGrid
from .errors import BoostingError, ConfigError, PredictionError
from .likelihood import efron_grad_hess, efron_loss

HESS_FLOOR = 1e-6


@dataclass
class GBMConfig:
    n_rounds: int = 100
    eta: float = 0.1
    max_depth: int = 4
    min_child_weight: float = 1.0
    subsample: float = 1.0
    lambda_: float = 1.0
    alpha: float = 0.0
    gamma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_rounds < 0 or self.max_depth < 0:
            raise ConfigError("n_rounds and max_depth must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ConfigError("subsample must lie in (0, 1]")
        if self.eta < 0 or self.lambda_ < 0 or self.alpha < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ConfigError("eta, lambda, alpha, gamma and min_child_weight must be >= 0")


@dataclass
class Tree:
    """Flat binary tree; rows with ``x[feature] < threshold`` go left."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = feat[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, feat[nd]] < thr[nd]
            node[r] = np.where(go_left, left[nd], right[nd])
            active = feat[node] >= 0
        return np.asarray(self.value)[node]

    def to_dict(self) -> dict:
        return asdict(self)


def _soft(G, alpha):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def _score(G, H, cfg):
    return _soft(G, cfg.alpha) ** 2 / (H + cfg.lambda_)


def leaf_weight(G: float, H: float, cfg: GBMConfig) -> float:
    denom = H + cfg.lambda_
    return float(-_soft(G, cfg.alpha) / denom) if denom > 0 else 0.0


def best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: GBMConfig):
    """Best (gain, feature, threshold) over midpoints of unique values; None if no positive gain."""
    G, H = g.sum(), h.sum()
    parent = _score(G, H, cfg)
    best = None
    for f in range(X.shape[1]):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        GL = np.cumsum(g[order])[cut]
        HL = np.cumsum(h[order])[cut]
        GR, HR = G - GL, H - HL
        ok = (HL >= cfg.min_child_weight) & (HR >= cfg.min_child_weight)
        if not ok.any():
            continue
        gain = 0.5 * (_score(GL, HL, cfg) + _score(GR, HR, cfg) - parent) - cfg.gamma
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))  # first maximum: lowest threshold
        if gain[i] > 0 and (best is None or gain[i] > best[0]):
            best = (float(gain[i]), f, 0.5 * (xs[cut[i]] + xs[cut[i] + 1]))
    return best


def build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: GBMConfig) -> Tree:
    tree = Tree()
    h = np.maximum(h, HESS_FLOOR)

    def grow(rows: np.ndarray, depth: int) -> int:
        gs, hs = g[rows], h[rows]
        split = best_split(X[rows], gs, hs, cfg) if depth < cfg.max_depth and rows.size > 1 else None
        if split is None:
            return tree.add_leaf(leaf_weight(gs.sum(), hs.sum(), cfg))
        _, f, thr = split
        node = tree.add_leaf(0.0)
        go_left = X[rows, f] < thr
        l_id = grow(rows[go_left], depth + 1)
        r_id = grow(rows[~go_left], depth + 1)
        tree.feature[node], tree.threshold[node] = f, float(thr)
        tree.left[node], tree.right[node] = l_id, r_id
        return node

    grow(np.arange(X.shape[0]), 0)
    return tree


@dataclass
class GBMModel:
    encoder: FeatureEncoder | None
    trees: list[Tree]
    config: GBMConfig
    train_loss: list[float] = field(default_factory=list)
    n_features: int | None = None

    def log_risk_encoded(self, data: EncodedDataset | np.ndarray) -> np.ndarray:
        X = data.X if isinstance(data, EncodedDataset) else np.asarray(data, dtype=float)
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise PredictionError(f"rows have {X.shape[1]} columns, the model was trained on {self.n_features}")
        phi = np.zeros(X.shape[0])
        for t in self.trees:
            phi += self.config.eta * t.predict(X)
        return phi

    def log_risk(self, claims: ClaimSet) -> np.ndarray:
        return self.log_risk_encoded(self.encoder.transform(claims))

    def to_dict(self) -> dict:
        return {
            "kind": "gbm",
            "encoder": None if self.encoder is None else self.encoder.to_dict(),
            "config": asdict(self.config),
            "trees": [t.to_dict() for t in self.trees],
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBMModel":
        enc = None if d["encoder"] is None else FeatureEncoder.from_dict(d["encoder"])
        return cls(enc, [Tree(**t) for t in d["trees"]], GBMConfig(**d["config"]), n_features=d.get("n_features"))


def fit_gbm(data: EncodedDataset, grid: RiskGrid, encoder: FeatureEncoder | None, cfg: GBMConfig | None = None) -> GBMModel:
    cfg = cfg or GBMConfig()
    cfg.validate()
    X = data.X
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    phi = np.zeros(n)
    trees, losses = [], []
    for r in range(cfg.n_rounds):
        loss, g, h = efron_grad_hess(phi, grid)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise BoostingError(r)
        losses.append(loss)
        if cfg.subsample < 1.0:
            rows = np.sort(rng.choice(n, size=max(1, int(round(cfg.subsample * n))), replace=False))
        else:
            rows = np.arange(n)
        tree = build_tree(X[rows], g[rows], h[rows], cfg)
        trees.append(tree)
        phi += cfg.eta * tree.predict(X)
    losses.append(efron_loss(phi, grid))
    return GBMModel(encoder, trees, cfg, losses, X.shape[1])
