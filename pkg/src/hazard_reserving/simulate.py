"""Synthetic claim-count scenarios with known reverse-time hazards.

Scenarios alpha to epsilon draw reporting delays from a right-truncated
Frechet-Weibull law whose scale carries the log-risk; zeta uses a transformed
gamma delay driven by continuous covariates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .claims import ClaimSet, Schema
from .errors import ConfigError

SCENARIOS = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta")
BETAS = (1.1512, 1.95601, -0.021206, -0.3, 0.4, -0.7, 0.1)

CLAIM_TYPE_SCHEMA = Schema(
    {"claim_id": "id", "accident_day": "accident_day", "delay": "delay_day", "claim_type": "categorical"}
)
ZETA_SCHEMA = Schema(
    {
        "claim_id": "id",
        "accident_day": "accident_day",
        "delay": "delay_day",
        "business_use": "categorical",
        "age": "continuous",
        "property_value": "continuous",
    }
)


@dataclass
class SimulationConfig:
    scenario: str = "alpha"
    days: int = 1440  # accident days, cutoff day and delay truncation point
    rate: float = 0.05
    exposure: float = 200.0
    nu: float = 0.5
    pi: float = 60.0
    k: float = 1.0
    xi0: float = 0.1
    betas: tuple[float, ...] = BETAS
    month_base: int = 0
    epsilon_pi_shift: tuple[float, float] = (34.5387, 58.6803)
    zeta_rate: float = 0.02
    zeta_expected: float = 9448.0
    zeta_meanlog: float = 3.034513
    zeta_sdlog: float = 0.4087569
    zeta_scale: float = 0.2
    zeta_days_per_year: float = 360.0
    zeta_min_exposure: float = 1.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")


@dataclass
class SimulatedData:
    observed: ClaimSet
    truth: ClaimSet  # claims reported after the cutoff
    log_risk: np.ndarray = field(repr=False)  # true scores of observed claims
    config: SimulationConfig = field(repr=False)


def rtfwd_cdf(t, xi, nu=0.5, pi=60.0, k=1.0, b=1440.0):
    t = np.asarray(t, dtype=float)
    c = pi**nu * np.asarray(xi, dtype=float) ** (nu * k)
    return np.exp(-c * (t ** (-nu * k) - b ** (-nu * k)))


def rtfwd_inverse_cdf(u, xi, nu=0.5, pi=60.0, k=1.0, b=1440.0):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ConfigError("uniform variates must lie strictly inside (0, 1)")
    c = pi**nu * np.asarray(xi, dtype=float) ** (nu * k)
    return (-np.log(u) / c + b ** (-nu * k)) ** (-1.0 / (nu * k))


def transformed_gamma(rng: np.random.Generator, s1, s2, scale: float) -> np.ndarray:
    """``scale * G ** (1 / s2)`` with ``G ~ Gamma(s1, 1)``."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if np.any(s2 <= 0):
        raise ConfigError("transformed gamma power must be positive")
    return scale * rng.gamma(s1) ** (1.0 / s2)


def month_index(ad, base: int = 0) -> np.ndarray:
    """Month of the accident day on a 360-day year, starting at ``base``."""
    return ((np.asarray(ad) - 1) % 360) // 30 + base


def scenario_log_risk(cfg: SimulationConfig, ad: np.ndarray, claim_type: np.ndarray) -> np.ndarray:
    b = cfg.betas
    ct1 = (claim_type == 1).astype(float)
    phi = b[0] * (1 - ct1) + b[1] * ct1
    if cfg.scenario == "gamma":
        phi = phi + b[2] * ct1 * np.sqrt(ad)
    elif cfg.scenario == "delta":
        m = month_index(ad, cfg.month_base)
        base = cfg.month_base
        seasons = [(2, 3, 4), (5, 6, 7), (8, 9, 10), (11, 12 - base, 1)]
        # with 1-based months the last group is {11, 12, 1}; 0-based it is {11, 0, 1}
        if base == 0:
            seasons[3] = (11, 0, 1)
        for coef, months in zip(b[3:7], seasons):
            phi = phi + coef * np.isin(m, months)
    return phi


def _exposures(cfg: SimulationConfig) -> dict[int, np.ndarray]:
    ad = np.arange(1, cfg.days + 1)
    flat = np.full(cfg.days, cfg.exposure)
    if cfg.scenario == "beta":
        return {0: flat, 1: cfg.exposure - ad // 10}
    return {0: flat, 1: flat.copy()}


def zeta_start_exposure(cfg: SimulationConfig) -> float:
    ad = np.arange(1, cfg.days + 1)

    def expected(e0):
        return cfg.zeta_rate * np.maximum(e0 - (ad - 1), cfg.zeta_min_exposure).sum() - cfg.zeta_expected

    return brentq(expected, cfg.zeta_min_exposure, 1e7)


def expected_claims(cfg: SimulationConfig) -> float:
    if cfg.scenario == "zeta":
        return cfg.zeta_expected
    return float(sum(cfg.rate * e.sum() for e in _exposures(cfg).values()))


def simulate(cfg: SimulationConfig, seed: int) -> SimulatedData:
    rng = np.random.default_rng(seed)
    if cfg.scenario == "zeta":
        return _simulate_zeta(cfg, rng)
    ad_parts, ct_parts = [], []
    days = np.arange(1, cfg.days + 1)
    for ct, expo in _exposures(cfg).items():
        counts = rng.poisson(cfg.rate * expo)
        ad_parts.append(np.repeat(days, counts))
        ct_parts.append(np.full(counts.sum(), ct))
    ad = np.concatenate(ad_parts)
    ct = np.concatenate(ct_parts)
    order = np.lexsort((ct, ad))
    ad, ct = ad[order], ct[order]
    phi = scenario_log_risk(cfg, ad, ct)
    xi = cfg.xi0 * np.exp(phi / (cfg.nu * cfg.k))
    pi = np.full(len(ad), cfg.pi)
    if cfg.scenario == "epsilon":
        pi = pi + np.where(ct == 0, cfg.epsilon_pi_shift[0], cfg.epsilon_pi_shift[1])
    u = rng.uniform(size=len(ad))
    t = rtfwd_inverse_cdf(u, xi, cfg.nu, pi, cfg.k, cfg.days)
    delay = np.floor(t).astype(np.int64)
    cats = {"claim_type": ct.astype(str).astype(object)}
    return _split(cfg, CLAIM_TYPE_SCHEMA, ad, delay, cats, {}, phi)


def _simulate_zeta(cfg: SimulationConfig, rng: np.random.Generator) -> SimulatedData:
    days = np.arange(1, cfg.days + 1)
    e0 = zeta_start_exposure(cfg)
    counts = rng.poisson(cfg.zeta_rate * np.maximum(e0 - (days - 1), cfg.zeta_min_exposure))
    ad = np.repeat(days, counts)
    n = len(ad)
    value = rng.lognormal(cfg.zeta_meanlog, cfg.zeta_sdlog, size=n)
    business = rng.uniform(size=n) < 0.5
    age = rng.integers(50, 56, size=n).astype(float)
    s1 = 1.0 + 1.0 / value
    s2 = 1.0 - (1.0 + business) / 10.0
    t = np.full(n, np.inf)
    todo = np.arange(n)
    # truncation at the horizon by resampling the draws beyond it
    while todo.size:
        t[todo] = transformed_gamma(rng, s1[todo], s2[todo], cfg.zeta_scale) * cfg.zeta_days_per_year
        todo = todo[t[todo] > cfg.days]
    delay = np.floor(t).astype(np.int64)
    cats = {"business_use": np.where(business, "Y", "N").astype(object)}
    conts = {"age": age, "property_value": value}
    return _split(cfg, ZETA_SCHEMA, ad, delay, cats, conts, np.log(s1) + np.log(s2))


def _split(cfg, schema, ad, delay, cats, conts, phi) -> SimulatedData:
    n = len(ad)
    ids = np.array([f"c{i:06d}" for i in range(1, n + 1)], dtype=object)
    full = ClaimSet(schema, ids, ad.astype(np.int64), delay, cats, conts, cfg.days)
    seen = ad + delay <= cfg.days
    return SimulatedData(
        full.subset(np.flatnonzero(seen)), full.subset(np.flatnonzero(~seen)), phi[seen], cfg
    )
