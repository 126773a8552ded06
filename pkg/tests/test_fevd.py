"""
Tests for generalized variance decompositions, connectedness tables and the
simulation oracle.
"""

import numpy as np
import pytest

from conftest import A_STABLE_3, SIGMA_3
from data_ingest import GroupPartition
from errors import FevdError
from fevd import (
    GvdMatrix,
    connectedness_frame,
    connectedness_table,
    empirical_fev_oracle,
    fev_check_frame,
    gvd,
    sgvd,
    spillover_frame,
)
from simulate import DgpSpec, simulate_var
from var_core import VarModel, fit_var, forecast_error_variance


def _random_stable_model(rng, K=4, p=2):
    while True:
        A = [rng.uniform(-0.3, 0.3, size=(K, K)) for _ in range(p)]
        L = rng.uniform(-0.5, 0.5, size=(K, K))
        sigma = L @ L.T + 0.5 * np.eye(K)
        model = VarModel.from_coefficients(None, A, sigma)
        comp_moduli = np.abs(np.linalg.eigvals(np.vstack([np.hstack(A), np.eye(K * p)[: K * (p - 1)]])))
        if comp_moduli.max() < 0.95:
            return model


class TestGvd:
    @pytest.mark.parametrize("h", [1, 10, 20])
    def test_identity_process(self, h):
        model = VarModel.from_coefficients(None, [np.zeros((3, 3))], np.eye(3))
        np.testing.assert_allclose(gvd(model, h).values, np.eye(3), atol=1e-15)

    def test_correlated_white_noise(self):
        rho = 0.6
        model = VarModel.from_coefficients(None, [np.zeros((2, 2))], np.array([[1.0, rho], [rho, 1.0]]))
        values = gvd(model, 5).values
        np.testing.assert_allclose(values, [[1.0, rho ** 2], [rho ** 2, 1.0]], atol=1e-14)
        np.testing.assert_allclose(sgvd(gvd(model, 5)).values[0], [100 / (1 + rho ** 2), 100 * rho ** 2 / (1 + rho ** 2)])

    def test_no_feedback_into_first_variable(self):
        # lower-triangular dynamics with diagonal shocks: nothing reaches y1
        A = np.array([[0.5, 0.0], [0.4, 0.3]])
        model = VarModel.from_coefficients(None, [A], np.diag([1.0, 2.0]))
        values = gvd(model, 10).values
        assert values[0, 1] == 0.0
        assert values[1, 0] > 0.0

    def test_row_normalization(self):
        g = GvdMatrix(("a", "b", "c"), 1, np.array([[1.0, 1.0, 2.0], [1.0, 1.0, 0.0], [0.0, 0.0, 3.0]]))
        s = sgvd(g)
        np.testing.assert_allclose(s.values[0], [25.0, 25.0, 50.0])
        assert s.percent

    def test_rows_sum_to_hundred(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            s = sgvd(gvd(_random_stable_model(rng), 10))
            np.testing.assert_allclose(s.values.sum(axis=1), 100.0, atol=1e-9)
            assert np.all(s.values >= 0)

    def test_order_invariance(self):
        rng = np.random.default_rng(31)
        model = _random_stable_model(rng)
        base = gvd(model, 8).values
        for _ in range(20):
            perm = rng.permutation(model.K)
            permuted = VarModel.from_coefficients(
                None, [a[np.ix_(perm, perm)] for a in model.A], model.sigma_u[np.ix_(perm, perm)]
            )
            np.testing.assert_allclose(gvd(permuted, 8).values, base[np.ix_(perm, perm)], rtol=1e-10, atol=1e-14)

    def test_order_invariance_after_refit(self):
        rng = np.random.default_rng(41)
        K = 5
        A = 0.3 * np.eye(K) + rng.uniform(-0.1, 0.1, size=(K, K))
        L = rng.uniform(-0.5, 0.5, size=(K, K))
        sigma = L @ L.T + 0.5 * np.eye(K)
        panel = simulate_var(DgpSpec(A=(A,), sigma_u=(sigma + sigma.T) / 2, n=1000, seed=41))
        base = gvd(fit_var(panel, 2), 10).values
        for _ in range(20):
            perm = rng.permutation(K)
            refit = fit_var(panel.select([panel.names[k] for k in perm]), 2)
            np.testing.assert_allclose(gvd(refit, 10).values, base[np.ix_(perm, perm)], atol=1e-8)

    def test_long_horizon_converges(self, stable_model):
        a = sgvd(gvd(stable_model, 200)).values
        b = sgvd(gvd(stable_model, 199)).values
        assert np.abs(a - b).max() < 1e-6

    def test_scale_invariance(self, stable_model):
        D = np.diag([10.0, 0.1, 3.0])
        Dinv = np.linalg.inv(D)
        scaled = VarModel.from_coefficients(None, [D @ A_STABLE_3 @ Dinv], D @ SIGMA_3 @ D)
        np.testing.assert_allclose(gvd(scaled, 10).values, gvd(stable_model, 10).values, rtol=1e-9)

    def test_zero_diagonal(self):
        model = VarModel.from_coefficients(None, [np.zeros((2, 2))], np.diag([1.0, 0.0]), names=("a", "b"))
        with pytest.raises(FevdError, match="zero diagonal"):
            gvd(model, 5)

    def test_negative_entries_rejected(self):
        with pytest.raises(FevdError):
            GvdMatrix(("a", "b"), 1, np.array([[1.0, -0.1], [0.0, 1.0]]))


class TestConnectedness:
    def _table(self, partition=None):
        s = GvdMatrix(("a", "b"), 10, np.array([[90.0, 10.0], [20.0, 80.0]]), percent=True)
        return connectedness_table(s, partition)

    def test_margins(self):
        table = self._table()
        np.testing.assert_allclose(table.from_all, [10.0, 20.0])
        np.testing.assert_allclose(table.to_all, [20.0, 10.0])
        np.testing.assert_allclose(table.net, [10.0, -10.0])
        assert table.total == pytest.approx(15.0)
        assert table.net.sum() == pytest.approx(0.0)

    def test_group_margins(self):
        table = self._table(GroupPartition({"a": "g1", "b": "g2"}))
        assert table.groups == ("g1", "g2")
        np.testing.assert_allclose(table.from_group, [[0.0, 10.0], [20.0, 0.0]])
        np.testing.assert_allclose(table.to_group, [[0.0, 10.0], [20.0, 0.0]])
        np.testing.assert_allclose(table.from_other_group, [10.0, 20.0])
        np.testing.assert_allclose(table.from_own_group, [0.0, 0.0])
        np.testing.assert_allclose(table.to_other_group, [20.0, 10.0])

    def test_requires_percent(self, stable_model):
        with pytest.raises(FevdError, match="percent"):
            connectedness_table(gvd(stable_model, 5))

    def test_frame_layout(self):
        names = [f"c{k}" for k in range(5)] + [f"s{k}" for k in range(8)]
        labels = {n: ("crypto" if n.startswith("c") else "stock") for n in names}
        rng = np.random.default_rng(4)
        values = rng.uniform(0.1, 1.0, size=(13, 13))
        values = 100.0 * values / values.sum(axis=1, keepdims=True)
        table = connectedness_table(GvdMatrix(tuple(names), 10, values, percent=True), GroupPartition(labels))
        frame = connectedness_frame(table)
        assert frame.shape == (15, 15)
        assert list(frame.columns[-2:]) == ["From crypto", "From stock"]
        assert list(frame.index[-2:]) == ["To crypto", "To stock"]
        assert frame.index.name == "h=10"
        row = frame.loc["c0"]
        assert row["From crypto"] + row["From stock"] == pytest.approx(100.0 - row["c0"])
        assert np.isnan(frame.loc["To crypto", "From crypto"])
        # group margins cover every off-diagonal cell exactly once
        assert frame.loc[["To crypto", "To stock"], names].to_numpy().sum() == pytest.approx(table.from_all.sum())

    def test_spillover_frame(self):
        frame = spillover_frame(self._table())
        assert list(frame.columns) == ["own", "from_all", "to_all", "net"]
        assert frame.loc["a", "own"] == 90.0


class TestOracle:
    def test_matches_analytic_variance(self, stable_model):
        empirical = empirical_fev_oracle(stable_model, 10, 100_000, seed=1)
        analytic = np.diag(forecast_error_variance(stable_model, 10))
        np.testing.assert_allclose(empirical, analytic, rtol=0.02)

    def test_one_step_is_sigma_diagonal(self, stable_model):
        empirical = empirical_fev_oracle(stable_model, 1, 50_000, seed=2)
        np.testing.assert_allclose(empirical, np.diag(SIGMA_3), rtol=0.03)

    def test_deterministic_and_worker_independent(self, stable_model):
        serial = empirical_fev_oracle(stable_model, 5, 25_000, seed=3, workers=1)
        again = empirical_fev_oracle(stable_model, 5, 25_000, seed=3, workers=1)
        threaded = empirical_fev_oracle(stable_model, 5, 25_000, seed=3, workers=3)
        assert np.array_equal(serial, again)
        assert np.array_equal(serial, threaded)

    def test_too_few_simulations(self, stable_model):
        with pytest.raises(FevdError, match="at least"):
            empirical_fev_oracle(stable_model, 5, 999, seed=0)

    def test_unstable_model(self):
        model = VarModel.from_coefficients(None, [np.eye(2)], np.eye(2))
        with pytest.raises(FevdError, match="unstable"):
            empirical_fev_oracle(model, 5, 1000, seed=0)

    def test_check_frame(self, stable_model):
        frame = fev_check_frame(stable_model, 5, 20_000, seed=4)
        assert list(frame.columns) == ["analytic", "empirical", "relative_error"]
        assert (frame["relative_error"] < 0.05).all()
