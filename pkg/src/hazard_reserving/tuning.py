"""Seeded random hyperparameter search with claim-wise cross-validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .claims import ClaimSet, EncodedDataset, FeatureEncoder, build_risk_grid
from .errors import ConfigError, ReservingError
from .gbm import GBMConfig, fit_gbm
from .likelihood import mean_loss
from .mlp import ACTIVATIONS, MLPConfig, fit_mlp

# (low, high, integer?)
GBM_SPACE = {
    "eta": (0.0, 1.0, False),
    "max_depth": (0, 25, True),
    "min_child_weight": (0.0, 50.0, False),
    "subsample": (0.1, 1.0, False),
    "lambda_": (0.0, 50.0, False),
    "alpha": (0.0, 50.0, False),
}
MLP_SPACE = {
    "n_layers": (2, 10, True),
    "width": (2, 10, True),
    "lr": (0.005, 0.5, False),
    "rho": (0.0, 0.5, False),
    "eps": (0.0, 0.5, False),
}


@dataclass
class TuneConfig:
    model: str = "gbm"
    trials: int = 20
    folds: int = 3
    seed: int = 0
    delta: int = 1
    base_gbm: GBMConfig = field(default_factory=GBMConfig)
    base_mlp: MLPConfig = field(default_factory=MLPConfig)

    def __post_init__(self):
        if self.model not in ("gbm", "mlp"):
            raise ConfigError("tuning supports model 'gbm' or 'mlp'")
        if self.trials < 1 or self.folds < 2:
            raise ConfigError("need trials >= 1 and folds >= 2")


@dataclass
class TuneResult:
    best: dict
    best_score: float
    trials: list[dict]

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for t in self.trials:
                fh.write(json.dumps(t, sort_keys=True) + "\n")


def sample_params(space: dict, rng: np.random.Generator) -> dict:
    out = {}
    for name, (lo, hi, integer) in space.items():
        out[name] = int(rng.integers(lo, hi + 1)) if integer else float(rng.uniform(lo, hi))
    return out


def fold_ids(n: int, folds: int, seed: int) -> np.ndarray:
    ids = np.empty(n, dtype=np.int64)
    ids[np.random.default_rng(seed).permutation(n)] = np.arange(n) % folds
    return ids


def cv_score(claims: ClaimSet, model_cfg, kind: str, folds: int, seed: int, delta: int = 1) -> float:
    """Mean held-out loss per claim over claim-wise folds."""
    encoder = FeatureEncoder.fit(claims)
    data = encoder.transform(claims)
    grid = build_risk_grid(claims, delta)
    ids = fold_ids(len(claims), folds, seed)
    fit = fit_gbm if kind == "gbm" else fit_mlp
    scores = []
    for f in range(folds):
        tr, va = np.flatnonzero(ids != f), np.flatnonzero(ids == f)
        model = fit(EncodedDataset(data.X[tr], data.columns, data.blocks, data.kinds), grid.subset(tr),
                    encoder, model_cfg)
        phi = model.log_risk_encoded(EncodedDataset(data.X[va], data.columns, data.blocks, data.kinds))
        scores.append(mean_loss(phi, grid.subset(va)))
    return float(np.mean(scores))


def tune_random(claims: ClaimSet, cfg: TuneConfig) -> TuneResult:
    """Uniform random search; failing trials are logged with their error and skipped."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.model == "gbm":
        space, base = GBM_SPACE, cfg.base_gbm
    else:
        space, base = MLP_SPACE, cfg.base_mlp
    log = []
    for t in range(cfg.trials):
        params = sample_params(space, rng)
        if cfg.model == "mlp":
            params["activation"] = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
        entry = {"trial": t, "params": params}
        try:
            entry["score"] = cv_score(claims, replace(base, **params), cfg.model, cfg.folds, cfg.seed, cfg.delta)
            if not np.isfinite(entry["score"]):
                raise ReservingError("non-finite cross-validated loss")
        except ReservingError as exc:
            entry["score"] = None
            entry["error"] = f"{type(exc).__name__}: {exc}"
        log.append(entry)
    ok = [e for e in log if e["score"] is not None]
    if not ok:
        raise ReservingError("every tuning trial failed")
    best = min(ok, key=lambda e: e["score"])
    full = {**asdict(base), **best["params"]}
    return TuneResult(full, best["score"], log)
