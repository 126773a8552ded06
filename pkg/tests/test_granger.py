"""
Tests for the pairwise Wald tests, the p-value matrix and the causal network.
"""

import numpy as np
import pytest

from config import PVALUE_CORNER_LABEL
from data_ingest import ReturnPanel
from errors import GrangerError
from granger import (
    PValueMatrix,
    causal_network,
    chi2_sf,
    edge_table,
    pvalue_matrix,
    pvalue_table,
    restriction_indices,
    wald_noncausality,
)
from simulate import DgpSpec, GrangerTest, mc_rejection_rate
from var_core import VarModel, fit_var


def _diagonal_model():
    """K=2, p=1 model with no cross-lag coefficients and identity coefficient covariance."""
    model = VarModel.from_coefficients([0.1, -0.2], [np.diag([0.4, 0.3])], np.eye(2), names=("x", "y"))
    return VarModel(
        names=model.names, p=1, c=model.c, A=model.A, sigma_u=model.sigma_u,
        coef_cov=np.eye(2 * model.m), nobs=100, dof=97,
    )


def _two_variable_pvalues(value):
    return PValueMatrix(("x", "y"), np.array([[np.nan, 1.0], [value, np.nan]]))


def _driven_panel(n=800, seed=5):
    """y_t = 0.8 x_{t-1} + e_t with x white noise."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = np.empty(n)
    y[0] = rng.standard_normal()
    y[1:] = 0.8 * x[:-1] + rng.standard_normal(n - 1)
    return ReturnPanel.from_array(np.column_stack([x, y]), names=("x", "y"))


class TestWald:
    def test_zero_cross_coefficients(self):
        result = wald_noncausality(_diagonal_model(), "x", "y")
        assert result.stat == 0.0
        assert result.pvalue == 1.0
        assert result.df == 1

    def test_restriction_positions(self):
        model = fit_var(ReturnPanel.from_array(np.random.default_rng(0).standard_normal((200, 3))), 2)
        # source 2, target 1: m = 7, lag 1 at 7 + 1 + 2, lag 2 at 7 + 1 + 3 + 2
        assert restriction_indices(model, 2, 1) == [10, 13]
        assert model.coef_vector[10] == model.A[0][1, 2]
        assert model.coef_vector[13] == model.A[1][1, 2]

    def test_same_variable(self):
        with pytest.raises(GrangerError, match="must differ"):
            wald_noncausality(_diagonal_model(), "x", "x")

    def test_population_model_has_no_covariance(self, stable_model):
        with pytest.raises(GrangerError, match="no coefficient covariance"):
            wald_noncausality(stable_model, "a", "b")

    def test_singular_block(self):
        base = _diagonal_model()
        cov = np.eye(2 * base.m)
        cov[4, 4] = 0.0
        model = VarModel(names=base.names, p=1, c=base.c, A=base.A, sigma_u=base.sigma_u, coef_cov=cov)
        with pytest.raises(GrangerError, match="singular"):
            wald_noncausality(model, "x", "y")

    def test_chi2_tail(self):
        assert chi2_sf(3.841458820694124, 1) == pytest.approx(0.05, rel=1e-9)
        assert chi2_sf(0.0, 3) == 1.0

    def test_strong_driver_detected(self):
        model = fit_var(_driven_panel(), 1)
        assert wald_noncausality(model, "x", "y").pvalue < 1e-10
        assert wald_noncausality(model, "y", "x").pvalue > 1e-3

    def test_scale_invariance(self):
        panel = _driven_panel()
        scaled = ReturnPanel(panel.dates, panel.names, panel.values * np.array([1000.0, 0.01]))
        original = wald_noncausality(fit_var(panel, 2), "y", "x")
        rescaled = wald_noncausality(fit_var(scaled, 2), "y", "x")
        assert rescaled.stat == pytest.approx(original.stat, rel=1e-6)
        assert rescaled.pvalue == pytest.approx(original.pvalue, rel=1e-6)


class TestPValueMatrix:
    def test_orientation(self):
        pm = pvalue_matrix(fit_var(_driven_panel(), 1))
        # row = target, column = source
        assert pm.p[1, 0] == pm.pvalue("x", "y")
        assert pm.p[1, 0] < 1e-10
        assert np.isnan(pm.p[0, 0]) and np.isnan(pm.p[1, 1])
        assert not pm.failed

    def test_white_noise(self, white_noise_panel):
        pm = pvalue_matrix(fit_var(white_noise_panel, 1))
        assert pm.pvalue("x", "y") > 0.001
        assert pm.pvalue("y", "x") > 0.001

    def test_thirteen_variables(self):
        names = [f"v{k}" for k in range(13)]
        panel = ReturnPanel.from_array(np.random.default_rng(9).standard_normal((500, 13)), names=names)
        pm = pvalue_matrix(fit_var(panel, 1))
        off = pm.p[~np.eye(13, dtype=bool)]
        assert off.size == 156
        assert np.all(np.isfinite(off))
        assert np.all((off >= 0) & (off <= 1))

    def test_diagonal_forced_to_nan(self):
        pm = PValueMatrix(("x", "y"), np.array([[0.3, 0.2], [0.1, 0.4]]))
        assert np.isnan(pm.p[0, 0]) and np.isnan(pm.p[1, 1])

    def test_out_of_range(self):
        with pytest.raises(GrangerError):
            PValueMatrix(("x", "y"), np.array([[np.nan, 1.5], [0.1, np.nan]]))

    def test_table_layout(self):
        table = pvalue_table(_two_variable_pvalues(0.0123456), decimals=3)
        assert table.index.name == PVALUE_CORNER_LABEL
        assert list(table.columns) == ["x", "y"]
        assert table.loc["y", "x"] == 0.012
        assert np.isnan(table.loc["x", "x"])

    @pytest.mark.slow
    def test_size_under_noncausality(self):
        spec = DgpSpec(A=(np.array([[0.5, 0.0], [0.0, 0.3]]),), sigma_u=np.eye(2), n=2000, burn_in=200, seed=7)
        result = mc_rejection_rate(spec, GrangerTest("y1", "y2"), 0.05, 1000)
        assert 0.03 <= result.rate <= 0.07

    @pytest.mark.slow
    def test_power_against_causality(self):
        spec = DgpSpec(A=(np.array([[0.5, 0.0], [0.4, 0.5]]),), sigma_u=np.eye(2), n=2000, burn_in=200, seed=8)
        result = mc_rejection_rate(spec, GrangerTest("y1", "y2"), 0.05, 100)
        assert result.rate >= 0.99


class TestCausalNetwork:
    def test_insignificant_pair(self):
        assert causal_network(_two_variable_pvalues(0.5)).edges == ()

    def test_strong_band(self):
        (edge,) = causal_network(_two_variable_pvalues(0.049)).edges
        assert (edge.source, edge.target, edge.band) == ("x", "y", "5%")

    def test_boundary_is_inclusive(self):
        (edge,) = causal_network(_two_variable_pvalues(0.05)).edges
        assert edge.band == "5%"

    def test_weak_band(self):
        (edge,) = causal_network(_two_variable_pvalues(0.07)).edges
        assert edge.band == "10%"
        assert edge.weight == 0.07

    def test_edges_are_subset_of_significant_pairs(self):
        pm = _two_variable_pvalues(0.07)
        g = causal_network(pm, levels=(0.05,))
        assert g.edges == ()
        assert g.bands == ("5%",)

    @pytest.mark.parametrize("seed", range(5))
    def test_stricter_level_keeps_a_subset(self, seed):
        rng = np.random.default_rng(seed)
        pm = PValueMatrix(tuple(f"v{k}" for k in range(13)), rng.uniform(0.0, 0.3, size=(13, 13)))
        strict = causal_network(pm, levels=(0.05,))
        loose = causal_network(pm, levels=(0.10,))
        assert len(strict.edges) <= len(loose.edges)
        assert strict.edge_set() <= loose.edge_set()
        banded = causal_network(pm, levels=(0.05, 0.10))
        assert {(e.source, e.target) for e in banded.edges if e.band == "5%"} == strict.edge_set()
        assert banded.edge_set() == loose.edge_set()

    def test_levels_validated(self):
        with pytest.raises(GrangerError, match="increasing"):
            causal_network(_two_variable_pvalues(0.01), levels=(0.10, 0.05))
        with pytest.raises(GrangerError, match=r"\(0, 1\)"):
            causal_network(_two_variable_pvalues(0.01), levels=(0.0, 0.05))

    def test_nan_cells_are_skipped(self):
        pm = PValueMatrix(("x", "y"), np.array([[np.nan, np.nan], [0.01, np.nan]]), failed={("y", "x")})
        g = causal_network(pm)
        assert g.edge_set() == {("x", "y")}

    def test_edge_table(self):
        frame = edge_table(causal_network(_two_variable_pvalues(0.02)))
        assert list(frame.columns) == ["source", "target", "pvalue", "band"]
        assert frame.iloc[0].tolist() == ["x", "y", 0.02, "5%"]
