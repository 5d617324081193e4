import numpy as np
import pytest

from conftest import stable_var_coefs, three_var_model
from tca import (
    ReducedVar,
    TransmissionOrdering,
    VarmaModel,
    cholesky_irfs,
    estimate_lp_irfs,
    estimate_var_ols,
    identify_internal_instrument,
    simulate_var,
)
from tca.errors import RankDeficientRegressorsError, ZeroImpactError
from tca.model import ma_coefficients


def simulate(rng, coefs, T, intercept=None, chol=None):
    K = coefs[0].shape[0] if coefs else (chol.shape[0] if chol is not None else 1)
    innov = rng.normal(size=(T, K))
    if chol is not None:
        innov = innov @ chol.T
    p = len(coefs)
    init = np.zeros((max(p, 1), K))
    data = simulate_var(coefs, intercept, innov[p:] if p else innov, init[:p])
    return data if p else innov


class TestEstimateVarOls:
    def test_ar1_recovery(self):
        rng = np.random.default_rng(12345)
        data = simulate(rng, [np.array([[0.5]])], 10_000)
        var = estimate_var_ols(data, 1)
        assert abs(var.coefs[0][0, 0] - 0.5) < 0.03

    def test_white_noise_has_no_dynamics(self):
        rng = np.random.default_rng(99)
        data = rng.normal(size=(4000, 3))
        var = estimate_var_ols(data, 1)
        Y = data[1:]
        X = np.hstack([np.ones((Y.shape[0], 1)), data[:-1]])
        xtx_inv = np.linalg.inv(X.T @ X)
        for i in range(3):
            for j in range(3):
                se = np.sqrt(var.sigma_u[i, i] * xtx_inv[1 + j, 1 + j])
                assert abs(var.coefs[0][i, j]) < 3 * se

    def test_var1_known_companion(self):
        rng = np.random.default_rng(777)
        A1 = np.array([[0.4, 0.1], [0.0, 0.3]])
        data = simulate(rng, [A1], 20_000)
        var = estimate_var_ols(data, 1)
        assert np.max(np.abs(var.coefs[0] - A1)) < 0.03

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(5)
        data = simulate(rng, stable_var_coefs(rng, 3, 2), 2000)
        var = estimate_var_ols(data, 2)
        Y = data[2:]
        X = np.hstack([np.ones((Y.shape[0], 1)), data[1:-1], data[:-2]])
        cross = X.T @ var.residuals
        assert np.max(np.abs(cross)) <= 1e-8 * max(1.0, np.abs(data).max()) * len(Y)
        assert np.max(np.abs(var.residuals.mean(axis=0))) <= 1e-8 * np.abs(data).max()

    def test_rank_deficient_raises(self):
        data = np.zeros((50, 1))
        with pytest.raises(RankDeficientRegressorsError):
            estimate_var_ols(np.hstack([data, data]), 1)

    def test_too_short_sample_rejected(self):
        with pytest.raises(ValueError):
            estimate_var_ols(np.random.default_rng(0).normal(size=(5, 2)), 2)

    def test_dof_correction(self):
        rng = np.random.default_rng(3)
        data = simulate(rng, [np.array([[0.2]])], 100)
        var = estimate_var_ols(data, 1)
        T = 100
        resid = var.residuals
        expected = resid.T @ resid / (T - 1 - 1 - 1)
        assert np.allclose(var.sigma_u, expected)


class TestIdentifyInternalInstrument:
    def test_pure_rescaling_under_unit_covariance(self):
        var = ReducedVar(var_names=("ffr", "y"), coefs=(), sigma_u=np.eye(2))
        col = identify_internal_instrument(var, 1, normalize_on=1, impact=0.25, h=2)
        assert col.phi[0] == 0.25
        assert np.allclose(col.phi[1:], 0.0)

    def test_static_three_var_model_proportions(self):
        # the static recursive model cast as a VAR(0): the first
        # orthogonalised innovation is the demand disturbance
        a2, a3, a4 = 0.5, 0.8, 1.5
        A = three_var_model(0.0, a2, a3, a4).A0
        Ainv = np.linalg.inv(A)
        var = ReducedVar(
            var_names=("x", "pi", "i"), coefs=(), sigma_u=Ainv @ Ainv.T
        )
        col = identify_internal_instrument(var, 1, normalize_on=1, impact=1.0, h=0)
        assert np.allclose(col.phi, [1.0, a2, a2 * a4 + a3], atol=1e-12)

    def test_equals_rescaled_cholesky_column(self, rng):
        coefs = stable_var_coefs(rng, 3, 2)
        S = rng.normal(size=(3, 3))
        sigma = S @ S.T + 0.5 * np.eye(3)
        var = ReducedVar(var_names=("a", "b", "c"), coefs=tuple(coefs),
                         sigma_u=sigma)
        h = 3
        col = identify_internal_instrument(var, 1, normalize_on=2, impact=0.25, h=h)
        P = np.linalg.cholesky(sigma)
        theta = ma_coefficients(var, h)
        raw = np.concatenate([theta[t] @ P[:, 0] for t in range(h + 1)])
        expected = raw * (0.25 / raw[1])
        assert np.max(np.abs(col.phi - expected)) <= 1e-12

    def test_scale_equivariance(self, rng):
        coefs = stable_var_coefs(rng, 2, 1)
        var = ReducedVar(var_names=("a", "b"), coefs=tuple(coefs),
                         sigma_u=np.array([[1.0, 0.3], [0.3, 1.0]]))
        c1 = identify_internal_instrument(var, 1, 1, impact=0.5, h=2)
        c2 = identify_internal_instrument(var, 1, 1, impact=1.0, h=2)
        assert np.array_equal(2.0 * c1.phi, c2.phi)

    def test_instrument_must_be_first(self):
        var = ReducedVar(var_names=("a", "b"), coefs=(), sigma_u=np.eye(2))
        with pytest.raises(ValueError, match="position 1"):
            identify_internal_instrument(var, 2, 1, impact=1.0)

    def test_zero_impact(self):
        sigma = np.array([[1.0, 0.0], [0.0, 1.0]])
        var = ReducedVar(var_names=("a", "b"), coefs=(), sigma_u=sigma)
        with pytest.raises(ZeroImpactError):
            identify_internal_instrument(var, 1, normalize_on=2, impact=1.0)


class TestEstimateLpIrfs:
    def _dgp(self, rng, T):
        coefs = [np.array([[0.5, 0.1, 0.0], [0.2, 0.4, 0.1], [-0.1, 0.2, 0.3]])]
        S = np.array([[1.0, 0.0, 0.0], [0.4, 0.9, 0.0], [-0.2, 0.3, 0.8]])
        data = simulate(rng, coefs, T, chol=S)
        return coefs, S, data

    def test_unit_coefficient_on_own_impact(self, rng):
        _, _, data = self._dgp(rng, 2000)
        lp = estimate_lp_irfs(data, shock_var=1, ordered_before=[], horizons=0,
                              lags=1)
        assert abs(lp.beta[0, 0] - 1.0) <= 1e-8

    def test_converges_to_var_implied_irfs(self):
        rng = np.random.default_rng(42)
        coefs, S, data = self._dgp(rng, 50_000)
        H = 4
        lp = estimate_lp_irfs(data, shock_var=1, ordered_before=[], horizons=H,
                              lags=1)
        var = ReducedVar(var_names=("a", "b", "c"), coefs=tuple(coefs),
                         sigma_u=S @ S.T)
        theta = ma_coefficients(var, H)
        implied = np.stack([theta[t] @ S[:, 0] / S[0, 0] for t in range(H + 1)])
        assert np.max(np.abs(lp.beta - implied)) < 0.05

    def test_contemporaneous_controls_estimate_orthogonalised_ratio(self):
        rng = np.random.default_rng(4242)
        coefs, S, data = self._dgp(rng, 50_000)
        lp = estimate_lp_irfs(data, shock_var=2, ordered_before=[1], horizons=0,
                              lags=1)
        var = ReducedVar(var_names=("a", "b", "c"), coefs=tuple(coefs),
                         sigma_u=S @ S.T)
        pt = cholesky_irfs(var, TransmissionOrdering.identity(var.var_names), 0)
        assert abs(lp.gamma[0, 2] - pt[2, 1] / pt[1, 1]) < 0.05

    def test_lp_var_gap_shrinks_with_sample_size(self):
        gaps = []
        for T in (2_000, 20_000, 200_000):
            rng = np.random.default_rng(2024)  # fixed seed family
            coefs, S, data = self._dgp(rng, T)
            H = 3
            lp = estimate_lp_irfs(data, 1, [], H, lags=1)
            var = ReducedVar(var_names=("a", "b", "c"), coefs=tuple(coefs),
                             sigma_u=S @ S.T)
            theta = ma_coefficients(var, H)
            implied = np.stack(
                [theta[t] @ S[:, 0] / S[0, 0] for t in range(H + 1)]
            )
            gaps.append(np.max(np.abs(lp.beta - implied)))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_rank_deficient_horizon_flagged_not_dropped(self, rng):
        data = rng.normal(size=(300, 2))
        data = np.hstack([data, data[:, :1]])  # duplicated column
        lp = estimate_lp_irfs(data, shock_var=1, ordered_before=[2],
                              horizons=2, lags=1)
        # every horizon is flagged and keeps its (NaN) row in the grid
        assert lp.flagged == (0, 1, 2)
        assert lp.beta.shape == (3, 3) and lp.gamma.shape == (3, 3)
        assert np.isnan(lp.gamma).all() and np.isnan(lp.beta).all()

    def test_too_small_sample_rejected(self, rng):
        with pytest.raises(ValueError, match="too few"):
            estimate_lp_irfs(rng.normal(size=(20, 3)), 1, [], horizons=10,
                             lags=4)


class TestSimulateVar:
    def test_matches_manual_recursion(self, rng):
        A1 = np.array([[0.5, 0.1], [0.0, 0.4]])
        innov = rng.normal(size=(5, 2))
        data = simulate_var([A1], [0.2, -0.1], innov, np.zeros((1, 2)))
        y = np.zeros(2)
        for t in range(5):
            y = np.array([0.2, -0.1]) + A1 @ y + innov[t]
            assert np.allclose(data[t + 1], y)
