import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import least_squares

from geocl.estimation import (DistanceLaw, EmpiricalCdf, FitError, LogisticCurve,
                              check_chung_lu_condition, derivative_ratio, empirical_F1,
                              empirical_F2, estimate_intensities, fit_logistic, fit_model,
                              fit_quality, geometric_weights, load_fit, ratio_turning_points,
                              rho_hat, write_fit_report, write_intensities)
from geocl.graph import SpatialGraph, degrees, distance_matrix, edge_density

from conftest import random_graph

logistic_params = st.tuples(
    st.floats(-3, 3).map(lambda e: 10.0 ** e / 1000.0),     # plateau in [1e-6, 1]
    st.floats(0.3, 6.0),                                     # alpha
    st.floats(-4.0, -1.0).map(lambda e: -(10.0 ** e)),      # beta
    st.floats(1.5, 4.0),                                     # grid end in midpoints
)


def noiseless_cdf(L, alpha, beta, span, num=200):
    xs = np.linspace(0.0, span * (-alpha / beta), num)
    return EmpiricalCdf(xs, LogisticCurve(L, alpha, beta).value(xs))


class TestLogisticCurve:
    def test_values(self):
        c = LogisticCurve(0.5, 1.0, -0.1)
        assert c.value(10.0) == pytest.approx(0.25)
        assert c.midpoint == 10.0
        assert c.derivative(10.0) == pytest.approx(0.5 * 0.1 / 4)

    def test_derivative_matches_finite_difference(self):
        c = LogisticCurve(0.04, 2.9, -0.003)
        x = np.linspace(1, 3000, 50)
        h = 1e-3
        fd = (c.value(x + h) - c.value(x - h)) / (2 * h)
        np.testing.assert_allclose(c.derivative(x), fd, rtol=1e-6)

    def test_no_overflow_far_out(self):
        c = LogisticCurve(1.0, 3.0, -0.002)
        assert np.isfinite(c.log_derivative(1e6))
        assert c.value(-1e6) == 0.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            LogisticCurve(1.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            LogisticCurve(0.0, 1.0, -0.1)


class TestFitLogistic:
    @given(logistic_params)
    def test_recovers_noiseless(self, params):
        L, a, b, span = params
        fit = fit_logistic(noiseless_cdf(L, a, b, span), L)
        assert fit.alpha == pytest.approx(a, rel=1e-6)
        assert fit.beta == pytest.approx(b, rel=1e-6)

    def test_matches_scipy_on_noisy_data(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            L, a, b = 0.05, rng.uniform(1, 4), -10 ** rng.uniform(-3.5, -2)
            xs = np.linspace(0, 3 * (-a / b), 150)
            ps = np.maximum.accumulate(np.clip(
                LogisticCurve(L, a, b).value(xs) + rng.normal(0, 0.01 * L, xs.size), 0, 1))
            cdf = EmpiricalCdf(xs, ps)
            ours = fit_logistic(cdf, L)
            s = xs.max()
            ref = least_squares(lambda th: L / (1 + np.exp(th[0] + th[1] * xs / s)) - ps,
                                x0=[0.0, -1.0], xtol=1e-15, ftol=1e-15, gtol=1e-15).x
            assert ours.alpha == pytest.approx(ref[0], rel=1e-6)
            assert ours.beta == pytest.approx(ref[1] / s, rel=1e-6)

    def test_degenerate_cdf(self):
        with pytest.raises(FitError):
            fit_logistic(EmpiricalCdf(np.arange(5.0), np.full(5, 0.5)), 1.0)

    def test_fit_quality(self):
        xs = np.linspace(0, 100, 11)
        c = LogisticCurve(1.0, 2.0, -0.05)
        q = fit_quality(EmpiricalCdf(xs, c.value(xs)), c)
        assert q.mse == pytest.approx(0.0, abs=1e-30) and q.mean_percent_error == pytest.approx(0.0)
        shifted = EmpiricalCdf(xs, c.value(xs) * 0.5)
        q = fit_quality(shifted, c, x_min=50)
        assert q.mean_percent_error == pytest.approx(100.0)


class TestEmpiricalCurves:
    def brute(self, g, xs):
        d = distance_matrix(g)
        a = np.zeros((g.n, g.n))
        for i, j in g.edges.tolist():
            a[i, j] = a[j, i] = 1
        f1 = [((d <= x) & (a > 0)).sum() / g.n ** 2 for x in xs]
        f2 = [(d <= x).sum() / g.n ** 2 for x in xs]
        return np.array(f1), np.array(f2)

    @given(st.integers(0, 2**32 - 1), st.integers(3, 25))
    def test_ordered_matches_matrix_count(self, seed, n):
        g = random_graph(np.random.default_rng(seed), n)
        c1, c2 = empirical_F1(g, 40), empirical_F2(g, 40)
        f1, f2 = self.brute(g, c1.xs)
        np.testing.assert_allclose(c1.ps, f1, atol=1e-15)
        np.testing.assert_allclose(c2.ps, f2, atol=1e-15)
        assert c2.ps[-1] == pytest.approx(1.0)

    def test_limits_at_zero(self):
        g = random_graph(np.random.default_rng(9), 30)
        assert empirical_F1(g).ps[0] == g.num_loops / g.n ** 2
        assert empirical_F2(g).ps[0] == 1 / g.n
        assert empirical_F1(g).ps[-1] == pytest.approx((2 * g.num_edges - g.num_loops) / g.n ** 2)

    def test_unordered_plateau_is_density(self):
        g = random_graph(np.random.default_rng(9), 30)
        assert empirical_F1(g, convention="unordered").ps[-1] == pytest.approx(edge_density(g))
        assert empirical_F2(g, convention="unordered").ps[-1] == pytest.approx(1.0)

    def test_callable_step(self):
        cdf = EmpiricalCdf(np.array([0.0, 1.0, 2.0]), np.array([0.1, 0.5, 1.0]))
        np.testing.assert_array_equal(cdf(np.array([-1, 0, 0.5, 1, 5])), [0, 0.1, 0.1, 0.5, 1.0])


LAW = DistanceLaw(0.044865137, LogisticCurve(0.044865137, 2.94589, -0.00293112),
                  LogisticCurve(1.0, 3.16284, -0.0018741))


class TestRatioAndWeights:
    def test_ratio_closed_form(self):
        x = np.linspace(0, 4000, 101)
        f1, f2 = LAW.f1, LAW.f2
        e1, e2 = np.exp(f1.alpha + f1.beta * x), np.exp(f2.alpha + f2.beta * x)
        direct = (f1.L * f1.beta * e1 / (1 + e1) ** 2) / (f2.L * f2.beta * e2 / (1 + e2) ** 2)
        np.testing.assert_allclose(derivative_ratio(LAW, x), direct, rtol=1e-12)

    def test_single_turning_point_when_slopes_ordered(self):
        pts = ratio_turning_points(LAW, 5000.0)
        assert pts.size == 1
        assert 500 < pts[0] < 800

    def test_monotone_when_slopes_equal(self):
        law = DistanceLaw(0.1, LogisticCurve(0.1, 2.0, -0.002), LogisticCurve(1.0, 3.0, -0.002))
        assert ratio_turning_points(law, 5000.0).size == 0
        r = law.ratio(np.linspace(0, 5000, 100))
        assert np.all(np.diff(r) < 0)

    def test_geometric_weights_brute_force(self):
        g = random_graph(np.random.default_rng(2), 25)
        d = distance_matrix(g)
        expect = LAW.ratio(d).sum(axis=1)
        np.testing.assert_allclose(geometric_weights(g, LAW), expect, rtol=1e-12)

    def test_rho_hat(self):
        np.testing.assert_allclose(rho_hat([2, 4], [1.0, 2.0], 10, 0.1), [2.0, 2.0])
        with pytest.raises(ValueError):
            rho_hat([1], [0.0], 1, 0.1)

    def test_chung_lu_condition(self):
        assert check_chung_lu_condition([1, 1, 1]).ok
        bad = check_chung_lu_condition([3, 1, 1, 1, 1])
        assert not bad.ok and bad.violators == (0,)


class TestFitModel:
    def test_toy_named(self, toy_graphs):
        g = toy_graphs["named"]
        res = fit_model(g)
        m = res.model
        assert m.epsilon == edge_density(g)
        assert m.f1.L == m.epsilon and m.f2.L == 1.0
        assert m.f1.beta < 0 and m.f2.beta < 0
        np.testing.assert_array_equal(m.degrees, degrees(g))
        np.testing.assert_allclose(m.rho_hat, estimate_intensities(g, m.law))
        assert m.sum_rho == pytest.approx(m.rho_hat.sum())

    def test_no_edges(self):
        g = SpatialGraph(np.random.default_rng(0).random((5, 3)), np.empty((0, 2)))
        with pytest.raises(FitError):
            fit_model(g)

    def test_report_roundtrip(self, toy_graphs, tmp_path):
        g = toy_graphs["full"]
        res = fit_model(g)
        write_fit_report(res, tmp_path / "fit.json")
        rep = json.loads((tmp_path / "fit.json").read_text())
        for key in ("epsilon", "alpha1", "beta1", "alpha2", "beta2", "mse_f1", "mpe_f2_tail",
                    "sum_rho", "chung_lu_ok", "violators"):
            assert key in rep
        back = load_fit(tmp_path / "fit.json", g)
        np.testing.assert_allclose(back.rho_hat, res.model.rho_hat, rtol=1e-12)
        write_intensities(g, back, tmp_path / "rho.csv")
        lines = (tmp_path / "rho.csv").read_text().splitlines()
        assert lines[0] == "id,degree,omega,rho_hat,dist_to_centroid"
        assert len(lines) == g.n + 1


class TestInvariants:
    @given(logistic_params)
    def test_midpoint_identity(self, params):
        L, a, b, _ = params
        c = LogisticCurve(L, a, b)
        assert float(c.value(c.midpoint)) == pytest.approx(L / 2, rel=1e-12)

    def test_constant_ratio_gives_n_times_c(self):
        g = random_graph(np.random.default_rng(8), 40)
        eps = 0.3
        law = DistanceLaw(eps, LogisticCurve(eps, 2.0, -0.004), LogisticCurve(1.0, 2.0, -0.004))
        np.testing.assert_allclose(geometric_weights(g, law), g.n * eps, rtol=1e-13)

    @given(st.integers(0, 2**32 - 1), st.integers(3, 30))
    def test_intensity_forward_map(self, seed, n):
        g = random_graph(np.random.default_rng(seed), n, p=0.4)
        if g.num_edges == 0:
            return
        eps = edge_density(g)
        law = DistanceLaw(eps, LogisticCurve(eps, 2.9, -0.003), LogisticCurve(1.0, 3.2, -0.0019))
        omega = geometric_weights(g, law)
        rho = estimate_intensities(g, law, omega)
        np.testing.assert_allclose(rho * omega / (n * eps), degrees(g), rtol=1e-12, atol=1e-12)
        assert np.all(rho[degrees(g) > 0] > 0)

    @given(st.floats(0.3, 5.0), st.floats(-0.01, -0.0005), st.floats(0.3, 5.0), st.floats(0.1, 0.95))
    def test_ratio_positive_and_single_peak(self, a1, b1, a2, frac):
        b2 = b1 * frac  # b1 < b2 < 0
        law = DistanceLaw(0.05, LogisticCurve(0.05, a1, b1), LogisticCurve(1.0, a2, b2))
        x_max = 5 * max(law.f1.midpoint, law.f2.midpoint)
        xs = np.linspace(0, x_max, 2001)
        assert np.all(law.ratio(xs) > 0)
        turns = ratio_turning_points(law, x_max, num=50001)
        # the peak may sit at negative x; it is interior whenever the ratio rises at 0
        rising = (b1 - b2) - 2 * b1 / (1 + math.exp(-a1)) + 2 * b2 / (1 + math.exp(-a2)) > 1e-9
        assert turns.size == 1 if rising else turns.size <= 1

    def test_unordered_two_vertex_example(self):
        g = SpatialGraph(np.array([[0, 0, 0], [5, 0, 0.0]]), np.array([[0, 1]]))
        c1 = empirical_F1(g, 11, "unordered")
        c2 = empirical_F2(g, 11, "unordered")
        assert c1(4.9) == 0.0 and c1(5.0) == pytest.approx(1 / 3)
        assert c2(0.0) == pytest.approx(2 / 3) and c2(5.0) == 1.0
