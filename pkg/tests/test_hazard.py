import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hazard_reserving.chain_ladder import cl_fit_predict
from hazard_reserving.claims import RiskGrid, build_risk_grid
from hazard_reserving.cox import CoxConfig, fit_cox
from hazard_reserving.errors import BlowUpError
from hazard_reserving.hazard import (
    BaselineHazard,
    dev_factors_from_hazard,
    estimate_baseline,
    factor_from_hazard,
    survival_curve,
)
from hazard_reserving.simulate import SimulationConfig, rtfwd_cdf
from hazard_reserving.triangles import build_cells, predict_lower
from conftest import make_claims


def two_claim_grid():
    # group 1: one occurrence, two exposed claims
    return RiskGrid.from_intervals([0, 1], [1, 1], n_groups=2)


def test_baseline_hand_values():
    grid = two_claim_grid()
    assert estimate_baseline(np.zeros(2), grid, eta=0.5).values[1] == pytest.approx(2 / 3)
    assert estimate_baseline(np.zeros(2), grid, eta=0.0).values[1] == pytest.approx(0.5)


def test_baseline_zero_without_occurrences():
    grid = RiskGrid.from_intervals([0, 0], [2, 2], n_groups=3)
    base = estimate_baseline(np.zeros(2), grid)
    assert base.values[1] == 0.0 and base.values[2] == 0.0
    assert not base.empty[1]


def test_empty_exposure_is_flagged():
    grid = RiskGrid.from_intervals([0], [0], n_groups=3)
    base = estimate_baseline(np.zeros(1), grid)
    assert list(base.empty) == [False, True, True]
    table = dev_factors_from_hazard(base, np.zeros(1), np.zeros(1, dtype=int), 1)
    assert np.all(table.factor[0, 1:] == 1.0)


def test_factor_hand_values():
    assert factor_from_hazard(0.0) == 1.0
    assert factor_from_hazard(2 / 3, 0.5) == pytest.approx(2.0, rel=1e-15)
    # at eta = 1/2 the transform is (2 + z) / (2 - z)
    z = np.linspace(0, 1.9, 20)
    assert np.allclose(factor_from_hazard(z, 0.5), (2 + z) / (2 - z), rtol=1e-14)


def test_blowup_names_cell():
    base = BaselineHazard(1, 0.5, np.array([0.0, 0.5, 2.5]), 0.0, np.zeros(3, dtype=bool))
    with pytest.raises(BlowUpError) as info:
        dev_factors_from_hazard(base, np.zeros(2), np.array([0, 1]), 2, labels=["a", "b"])
    assert (info.value.row, info.value.j) == (0, 2)
    assert "smaller delta" in str(info.value)
    capped = dev_factors_from_hazard(base, np.zeros(2), np.array([0, 1]), 2, on_blowup="cap", cap=1e6)
    assert capped.factor[0, 2] == 1e6 and capped.flag[0, 2] == 2


def test_survival_hand_values():
    base = BaselineHazard(1, 0.5, np.array([0.0, 0.0, 0.0]), 0.0, np.zeros(3, dtype=bool))
    table = dev_factors_from_hazard(base, np.zeros(1), np.zeros(1, dtype=int), 1)
    assert np.array_equal(survival_curve(table, 0), [1.0, 1.0, 1.0])
    # one development step with f = 2
    base = BaselineHazard(1, 0.5, np.array([0.0, 2 / 3]), 0.0, np.zeros(2, dtype=bool))
    table = dev_factors_from_hazard(base, np.zeros(1), np.zeros(1, dtype=int), 1)
    assert survival_curve(table, 0)[1] == pytest.approx(0.5)


def random_claims(seed, n, cutoff, delta=1):
    rng = np.random.default_rng(seed)
    ad = rng.integers(1, cutoff + 1, n)
    dl = np.minimum(rng.geometric(0.3, n) - 1, cutoff - ad)
    return make_claims(ad, dl, cutoff)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(20, 300), st.floats(0.0, 1.0))
def test_featureless_factor_is_age_to_age_ratio(seed, n, eta):
    claims = random_claims(seed, n, cutoff=12)
    grid = build_risk_grid(claims)
    base = estimate_baseline(np.zeros(n), grid, eta=eta)
    table = dev_factors_from_hazard(base, np.zeros(1), np.zeros(1, dtype=int), 12, on_blowup="cap")
    E, O = grid.exposure_sizes().astype(float), grid.counts.astype(float)
    for j in range(1, grid.n_groups):
        if E[j] > O[j] > 0:
            assert table.factor[0, j] == pytest.approx(E[j] / (E[j] - O[j]), rel=1e-12)
        elif O[j] == 0 and E[j] > 0:
            assert table.factor[0, j] == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(30, 500), st.sampled_from([1, 2, 3]))
def test_chain_ladder_reduction(seed, n, delta):
    cutoff = 12 * delta
    claims = random_claims(seed, n, cutoff)
    K = cutoff // delta
    inc = build_cells(claims, delta, np.array(["all"] * n), ["all"], K)[0]
    cum = np.cumsum(inc, axis=1)
    assume(all(cum[: K - j, j - 1].sum() > 0 for j in range(1, K)))  # otherwise chain ladder is undefined
    cl = cl_fit_predict(inc)
    grid = build_risk_grid(claims, delta=delta)
    base = estimate_baseline(np.zeros(n), grid)
    k = np.arange(K)
    table = dev_factors_from_hazard(base, np.zeros(K), k, K)
    assert np.allclose(table.factor[0, 1:K], cl.factors[1:K], rtol=1e-10, atol=0)
    diagonal = cum[k, K - 1 - k]
    assert np.allclose(predict_lower(table, diagonal)[:, :K], cl.predicted, rtol=1e-10, atol=1e-10)


def test_alpha_survival_matches_closed_form(alpha):
    model = fit_cox(alpha.data, alpha.grid, alpha.encoder, CoxConfig())
    phi = model.log_risk_encoded(alpha.data)
    base = estimate_baseline(phi, alpha.grid)
    cfg = SimulationConfig()
    ct = alpha.sim.observed.categorical["claim_type"]
    for level, beta in (("0", cfg.betas[0]), ("1", cfg.betas[1])):
        row = int(np.flatnonzero(ct == level)[0])
        table = dev_factors_from_hazard(base, phi[[row]], np.zeros(1, dtype=int), 1440, on_blowup="cap")
        xi = cfg.xi0 * np.exp(beta / (cfg.nu * cfg.k))
        days = np.arange(1, 1441)  # delay d is reported at development index d, so t < d + 1
        F = rtfwd_cdf(days, xi, cfg.nu, cfg.pi, cfg.k, 1440.0)
        logc = table.log_cumulative()[0]
        # predictive delay distribution read from the factor ladder
        fitted_F = np.exp(logc - logc[-1])
        assert np.max(np.abs(fitted_F - F)) <= 0.05
        # the ratio form C_0 / C_j against its closed form F(1) / F(j + 1)
        assert np.max(np.abs(survival_curve(table, 0) - F[0] / F)) <= 0.05


def test_survival_monotone(alpha):
    model = fit_cox(alpha.data, alpha.grid, alpha.encoder, CoxConfig())
    phi = model.log_risk_encoded(alpha.data)
    table = dev_factors_from_hazard(estimate_baseline(phi, alpha.grid), phi[:50],
                                    np.zeros(50, dtype=int), 1440, on_blowup="cap")
    S = table.survival()
    assert np.all(np.diff(S, axis=1) <= 1e-15)


def test_baseline_dict_round_trip():
    base = estimate_baseline(np.array([0.1, -0.2]), two_claim_grid())
    again = BaselineHazard.from_dict(base.to_dict())
    assert np.array_equal(again.values, base.values) and again.eta == base.eta
