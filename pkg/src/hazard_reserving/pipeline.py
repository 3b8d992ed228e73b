"""End-to-end reserving runs: fit a log-risk model, build factors, predict and score."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .chain_ladder import cl_fit_predict
from .claims import ClaimSet, FeatureEncoder, RiskGrid, build_risk_grid
from .cox import CoxConfig, CoxModel, fit_cox
from .errors import ConfigError
from .evaluation import claim_bins, coarse_survival, crps, reserve_metrics
from .gbm import GBMConfig, GBMModel, fit_gbm
from .hazard import BaselineHazard, FactorTable, dev_factors_from_hazard, estimate_baseline
from .likelihood import mean_loss
from .mlp import MLPConfig, MLPModel, fit_mlp
from .simulate import SimulationConfig, simulate
from .triangles import (
    ClaimGroups,
    TriangleSet,
    build_cells,
    group_claims,
    n_dev_columns,
    predict_lower,
    regrain,
)

MODELS = ("cl", "cox", "gbm", "mlp")


def reserving_gbm() -> GBMConfig:
    # Strong leaf shrinkage keeps thin leaves (the last few accident days) near
    # zero; their scores otherwise blow up the forecast for the newest rows.
    return GBMConfig(max_depth=2, min_child_weight=50.0, lambda_=50.0)


@dataclass
class PipelineConfig:
    model: str = "cox"
    delta: int = 1
    eval_delta: int = 90
    eta: float = 0.5
    val_fraction: float = 0.2
    split_seed: int = 0
    anchor: str = "diagonal"
    blowup: str = "cap"
    blowup_cap: float = 1e8
    crps_survival: str = "forward"
    cox: CoxConfig = field(default_factory=CoxConfig)
    gbm: GBMConfig = field(default_factory=reserving_gbm)
    mlp: MLPConfig = field(default_factory=MLPConfig)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")


@dataclass
class FittedReserve:
    config: PipelineConfig
    encoder: FeatureEncoder
    model: CoxModel | GBMModel | MLPModel
    grid: RiskGrid
    baseline: BaselineHazard
    groups: ClaimGroups
    table: FactorTable
    fine_predictions: np.ndarray
    triangle: TriangleSet
    losses: dict[str, float]


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(round(val_fraction * n))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit_log_risk(kind: str, data, grid: RiskGrid, encoder: FeatureEncoder, cfg: PipelineConfig):
    if kind == "cox":
        return fit_cox(data, grid, encoder, cfg.cox)
    if kind == "gbm":
        return fit_gbm(data, grid, encoder, cfg.gbm)
    if kind == "mlp":
        return fit_mlp(data, grid, encoder, cfg.mlp)
    raise ConfigError(f"model {kind!r} has no log-risk")


def _rows(data, idx):
    from .claims import EncodedDataset

    return EncodedDataset(data.X[idx], data.columns, data.blocks, data.kinds)


def fit_reserve(observed: ClaimSet, cfg: PipelineConfig) -> FittedReserve:
    """Fit the configured model and derive fine factors plus the coarse triangle.

    Cox is fitted on all observed claims; the boosted trees and the network on a
    seeded training share, with the rest kept for an out-of-sample loss.
    """
    encoder = FeatureEncoder.fit(observed)
    data = encoder.transform(observed)
    grid = build_risk_grid(observed, cfg.delta)
    losses: dict[str, float] = {}
    if cfg.model == "cox":
        model = fit_log_risk("cox", data, grid, encoder, cfg)
        losses["in_sample"] = mean_loss(model.log_risk_encoded(data), grid)
    else:
        tr, va = split_indices(len(observed), cfg.val_fraction, cfg.split_seed)
        model = fit_log_risk(cfg.model, _rows(data, tr), grid.subset(tr), encoder, cfg)
        phi = model.log_risk_encoded(data)
        losses["in_sample"] = mean_loss(phi[tr], grid.subset(tr))
        if len(va):
            losses["out_of_sample"] = mean_loss(phi[va], grid.subset(va))
    phi = model.log_risk_encoded(data)
    baseline = estimate_baseline(phi, grid, cfg.eta)
    groups, table, fine, tri = forecast(model, encoder, baseline, observed, cfg)
    return FittedReserve(cfg, encoder, model, grid, baseline, groups, table, fine, tri, losses)


def forecast(model, encoder: FeatureEncoder, baseline: BaselineHazard, observed: ClaimSet,
             cfg: PipelineConfig) -> tuple[ClaimGroups, FactorTable, np.ndarray, TriangleSet]:
    """Factor table per observed group, fine lower-triangle forecast and its coarse triangle."""
    groups = group_claims(observed, encoder, cfg.delta)
    K = observed.cutoff // cfg.delta
    table = dev_factors_from_hazard(
        baseline, model.log_risk_encoded(groups.data), groups.period(cfg.delta), K,
        groups.label, on_blowup=cfg.blowup, cap=cfg.blowup_cap,
    )
    fine = predict_lower(table, groups.count)
    tri = regrain(table, groups, observed, encoder, cfg.eval_delta, cfg.anchor, fine)
    return groups, table, fine, tri


def model_from_dict(d: dict):
    kinds = {"cox": CoxModel, "gbm": GBMModel, "mlp": MLPModel}
    if d.get("kind") not in kinds:
        raise ConfigError(f"unknown model kind {d.get('kind')!r}")
    return kinds[d["kind"]].from_dict(d)


def save_fit(fitted: FittedReserve, path) -> None:
    from .config import to_plain

    bundle = {
        "pipeline": to_plain(fitted.config),
        "model": fitted.model.to_dict(),
        "baseline": fitted.baseline.to_dict(),
        "losses": fitted.losses,
    }
    with open(path, "w") as fh:
        json.dump(bundle, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_fit(path, observed: ClaimSet) -> FittedReserve:
    """Rebuild a fitted reserve from a saved bundle and the claims it should develop."""
    from .config import build

    with open(path) as fh:
        bundle = json.load(fh)
    cfg = build(PipelineConfig, bundle["pipeline"])
    model = model_from_dict(bundle["model"])
    baseline = BaselineHazard.from_dict(bundle["baseline"])
    grid = build_risk_grid(observed, cfg.delta)
    groups, table, fine, tri = forecast(model, model.encoder, baseline, observed, cfg)
    return FittedReserve(cfg, model.encoder, model, grid, baseline, groups, table, fine, tri,
                         dict(bundle["losses"]))


def claim_factor_table(fitted: FittedReserve, claims: ClaimSet) -> FactorTable:
    cfg = fitted.config
    phi = fitted.model.log_risk(claims)
    K = fitted.table.n_periods
    return dev_factors_from_hazard(
        fitted.baseline, phi, (claims.accident_day - 1) // cfg.delta, K,
        fitted.encoder.cell_keys(claims), on_blowup=cfg.blowup, cap=cfg.blowup_cap,
    )


def truth_cells(truth: ClaimSet, encoder: FeatureEncoder, keys: list[str], delta: int, cutoff: int):
    tkeys = encoder.cell_keys(truth) if len(truth) else np.array([], dtype=object)
    all_keys = list(keys) + sorted(set(tkeys) - set(keys))
    truth = _with_cutoff(truth, cutoff)
    return all_keys, build_cells(truth, delta, tkeys, all_keys, n_dev_columns(delta, cutoff))


def _with_cutoff(claims: ClaimSet, cutoff: int) -> ClaimSet:
    out = claims.subset(np.arange(len(claims)))
    out.cutoff = cutoff
    return out


def _pad_keys(arr: np.ndarray, n_keys: int) -> np.ndarray:
    if arr.shape[0] == n_keys:
        return arr
    pad = np.zeros((n_keys - arr.shape[0],) + arr.shape[1:])
    return np.concatenate([arr, pad], axis=0)


def evaluate_reserve(fitted: FittedReserve, truth: ClaimSet, aligned: bool = True) -> dict[str, float]:
    cfg = fitted.config
    tri = fitted.triangle
    keys, actual = truth_cells(truth, fitted.encoder, tri.keys, cfg.eval_delta, tri.cutoff)
    pred = _pad_keys(tri.predicted, len(keys))
    out = reserve_metrics(actual, pred, aligned=aligned)
    out["crps"] = heldout_crps(fitted, truth)
    out["predicted_total"] = float(pred.sum())
    out["actual_total"] = float(actual.sum())
    return out


def heldout_crps(fitted: FittedReserve, truth: ClaimSet) -> float:
    if len(truth) == 0:
        return float("nan")
    cfg = fitted.config
    table = claim_factor_table(fitted, truth)
    n_cols = n_dev_columns(cfg.eval_delta, fitted.triangle.cutoff)
    S = coarse_survival(table, np.arange(len(truth)), truth.accident_day, cfg.eval_delta, n_cols,
                        cfg.crps_survival)
    events = claim_bins(truth.accident_day, truth.delay, cfg.eval_delta)
    return float(np.mean(crps(S, events, float(cfg.eval_delta))))


def chain_ladder_metrics(observed: ClaimSet, truth: ClaimSet, delta: int, aligned: bool = True) -> dict[str, float]:
    cutoff = observed.cutoff
    n_cols = n_dev_columns(delta, cutoff)
    obs = build_cells(observed, delta, np.array(["all"] * len(observed)), ["all"], n_cols)[0]
    res = cl_fit_predict(obs)
    act = build_cells(_with_cutoff(truth, cutoff), delta, np.array(["all"] * len(truth)), ["all"], n_cols)[0]
    out = reserve_metrics(act, res.predicted, aligned=aligned)
    out["crps"] = float("nan")
    out["predicted_total"] = float(res.predicted.sum())
    out["actual_total"] = float(act.sum())
    return out


def run_scenario(scenario: str, seed: int, models, cfg: PipelineConfig,
                 sim: SimulationConfig | None = None) -> list[dict]:
    """Simulate one data set and score every requested model on it."""
    sim = sim or SimulationConfig(scenario=scenario)
    data = simulate(sim, seed)
    rows = []
    for kind in models:
        if kind == "cl":
            metrics = chain_ladder_metrics(data.observed, data.truth, cfg.eval_delta)
            losses: dict[str, float] = {}
        else:
            c = replace(cfg, model=kind)
            fitted = fit_reserve(data.observed, c)
            metrics = evaluate_reserve(fitted, data.truth)
            losses = fitted.losses
        rows.append({"scenario": scenario, "seed": seed, "model": kind, **metrics,
                     **{f"loss_{k}": v for k, v in losses.items()}})
    return rows


def summarise(rows: list[dict], metrics=("R_tot", "R_cell", "R_cal", "crps")) -> list[dict]:
    """Mean and standard deviation per (scenario, model)."""
    out = []
    seen = []
    for r in rows:
        key = (r["scenario"], r["model"])
        if key not in seen:
            seen.append(key)
    for sc, mod in seen:
        sel = [r for r in rows if r["scenario"] == sc and r["model"] == mod]
        row = {"scenario": sc, "model": mod, "n": len(sel)}
        for m in metrics:
            v = np.array([r[m] for r in sel], dtype=float)
            row[f"{m}_mean"] = float(np.mean(v))
            row[f"{m}_sd"] = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
        out.append(row)
    return out
