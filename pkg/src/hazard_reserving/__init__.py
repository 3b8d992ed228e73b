"""Claim-count reserving from a reverse-time hazard fitted on individual claims."""

from .chain_ladder import cl_fit_predict
from .claims import ClaimSet, FeatureEncoder, Schema, build_risk_grid, load_claims, write_claims
from .cox import CoxConfig, fit_cox
from .evaluation import crps, reserve_metrics
from .gbm import GBMConfig, fit_gbm
from .hazard import dev_factors_from_hazard, estimate_baseline
from .likelihood import efron_grad_hess, efron_loss
from .mlp import MLPConfig, fit_mlp
from .pipeline import PipelineConfig, evaluate_reserve, fit_reserve
from .simulate import SimulationConfig, simulate

__all__ = [
    "ClaimSet", "CoxConfig", "FeatureEncoder", "GBMConfig", "MLPConfig", "PipelineConfig", "Schema",
    "SimulationConfig", "build_risk_grid", "cl_fit_predict", "crps", "dev_factors_from_hazard",
    "efron_grad_hess", "efron_loss", "estimate_baseline", "evaluate_reserve", "fit_cox", "fit_gbm",
    "fit_mlp", "fit_reserve", "load_claims", "reserve_metrics", "simulate", "write_claims",
]
