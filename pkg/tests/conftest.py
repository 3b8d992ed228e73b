from dataclasses import dataclass

import numpy as np
import pytest

from hazard_reserving.claims import ClaimSet, EncodedDataset, FeatureEncoder, RiskGrid, Schema, build_risk_grid
from hazard_reserving.simulate import SimulatedData, SimulationConfig, simulate


@dataclass
class Prepared:
    sim: SimulatedData
    encoder: FeatureEncoder
    data: EncodedDataset
    grid: RiskGrid


def prepare(scenario: str, seed: int) -> Prepared:
    sim = simulate(SimulationConfig(scenario=scenario), seed)
    enc = FeatureEncoder.fit(sim.observed)
    return Prepared(sim, enc, enc.transform(sim.observed), build_risk_grid(sim.observed))


@pytest.fixture(scope="session")
def alpha() -> Prepared:
    return prepare("alpha", 1)


def make_claims(ad, delay, cutoff, categorical=None, continuous=None) -> ClaimSet:
    """Build a claim set directly from arrays (roles inferred from the dict they come in)."""
    categorical = categorical or {}
    continuous = continuous or {}
    roles = {"id": "id", "ad": "accident_day", "dl": "delay_day"}
    roles.update({k: "categorical" for k in categorical})
    roles.update({k: "continuous" for k in continuous})
    ad = np.asarray(ad, dtype=np.int64)
    return ClaimSet(
        Schema(roles),
        np.array([str(i) for i in range(len(ad))], dtype=object),
        ad,
        np.asarray(delay, dtype=np.int64),
        {k: np.asarray(v).astype(str).astype(object) for k, v in categorical.items()},
        {k: np.asarray(v, dtype=float) for k, v in continuous.items()},
        int(cutoff),
    )


def null_effect_claims(n: int, seed: int, cutoff: int = 60) -> ClaimSet:
    """Reported claims whose delay does not depend on the binary feature."""
    rng = np.random.default_rng(seed)
    ad, dl, x = [], [], []
    while len(ad) < n:
        a = int(rng.integers(1, cutoff + 1))
        d = int(rng.geometric(0.15)) - 1
        if a + d <= cutoff:
            ad.append(a)
            dl.append(d)
            x.append(int(rng.integers(0, 2)))
    return make_claims(ad, dl, cutoff, categorical={"flag": x})


@pytest.fixture(scope="session")
def alpha_reserve(alpha):
    from hazard_reserving.pipeline import PipelineConfig, fit_reserve

    return fit_reserve(alpha.sim.observed, PipelineConfig(model="cox"))


def proportional_claims(counts_by_period=(1, 2, 3, 4), profile=(4, 2, 1, 1), width=90):
    """Claims whose coarse triangle has exactly proportional rows.

    Returns ``(observed, truth)`` split at the cutoff ``len(counts) * width``.
    """
    K = len(counts_by_period)
    ad, dl = [], []
    for k, c in enumerate(counts_by_period):
        for j, p in enumerate(profile):
            n = c * p
            ad += [k * width + 1] * n
            dl += [j * width] * n
    ad, dl = np.array(ad), np.array(dl)
    cutoff = K * width
    seen = ad + dl <= cutoff
    return make_claims(ad[seen], dl[seen], cutoff), make_claims(ad[~seen], dl[~seen], cutoff)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
