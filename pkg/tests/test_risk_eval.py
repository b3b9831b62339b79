import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from driftnet.drift_models import ClassParams
from driftnet.relu_net import Network
from driftnet.risk_eval import (
    Cell,
    DriftFamily,
    RiskEstimate,
    RiskReport,
    empirical_risk,
    fit_loglog,
    generalization_risk,
    l2_pi_risk,
    rate_sweep,
    summarize,
)
from driftnet.sde_sim import (
    ObservedPath,
    SdeModel,
    constant_diffusion,
    constant_drift,
    ou_model,
    simulate_path,
)
from driftnet.trainer import TrainConfig

CLS = ClassParams(0, (1, 1), (1,), (1.0,), 1.0)


def on_cube(g):
    def f(x):
        x = np.atleast_2d(x)
        inside = np.all((x >= 0) & (x <= 1), axis=1)
        return np.where(inside, g(x), 0.0)

    return f


f0 = on_cube(lambda x: -x[:, 0])
zero = lambda x: np.zeros(np.atleast_2d(x).shape[0])
frozen = SdeModel(1, constant_drift([0.0]), constant_diffusion(np.zeros((1, 1))))


def path_of(points):
    obs = np.asarray(points, dtype=float).reshape(-1, 1)
    return ObservedPath(0.1, obs, 0, 1)


class TestEmpirical:
    def test_exact_zero(self):
        p = simulate_path(ou_model(), np.array([0.2]), 200, 0.05, 5, seed=1)
        assert empirical_risk(f0, f0, p) == 0.0

    def test_constant_offset(self):
        p = path_of(np.linspace(0.1, 0.9, 9))
        shifted = on_cube(lambda x: -x[:, 0] + 0.3)
        assert empirical_risk(shifted, f0, p) == pytest.approx(0.09, rel=1e-12)

    def test_outside_cube(self):
        p = path_of([2.0, -1.0, 3.0, 1.5])
        assert empirical_risk(on_cube(lambda x: x[:, 0] + 5), f0, p) == 0.0

    def test_last_observation_unused(self):
        a = path_of([0.5, 0.5, 0.5])
        b = path_of([0.5, 0.5, 2.0])
        g = on_cube(lambda x: 1.0 + 0 * x[:, 0])
        assert empirical_risk(g, zero, a) == empirical_risk(g, zero, b) == 1.0

    @settings(max_examples=30)
    @given(st.integers(0, 10**6), st.floats(1.01, 10.0))
    def test_scalar_inflation(self, seed, c):
        rng = np.random.default_rng(seed)
        p = path_of(rng.uniform(-0.5, 1.5, 60))
        fhat = on_cube(lambda x: np.sin(5 * x[:, 0]))
        inflated = lambda x: f0(x) + c * (fhat(x) - f0(x))
        assert empirical_risk(inflated, f0, p) == pytest.approx(c * c * empirical_risk(fhat, f0, p), rel=1e-12)


class TestGeneralization:
    def test_exact_zero(self):
        est = generalization_risk(f0, f0, ou_model(), 100, 0.05, 5, copies=3, seed=2)
        assert (est.estimate, est.stderr) == (0.0, 0.0)

    def test_deterministic_copies(self):
        shifted = on_cube(lambda x: -x[:, 0] - 0.5)
        est = generalization_risk(shifted, f0, frozen, 50, 0.1, 2, copies=4, seed=0, x0_sampler=[0.3])
        assert est.estimate == pytest.approx(0.25, rel=1e-14)
        assert est.stderr == 0.0

    def test_needs_two_copies(self):
        with pytest.raises(ValueError):
            generalization_risk(zero, f0, ou_model(), 10, 0.1, copies=1)

    def test_reseeding_agreement(self):
        hits = 0
        for trial in range(20):
            a = generalization_risk(zero, f0, ou_model(), 200, 0.05, 2, copies=6, seed=2 * trial)
            b = generalization_risk(zero, f0, ou_model(), 200, 0.05, 2, copies=6, seed=2 * trial + 1)
            hits += abs(a.estimate - b.estimate) <= 3 * math.hypot(a.stderr, b.stderr)
        assert hits >= 18

    def test_stderr_scaling(self):
        ratios = []
        for rep in range(10):
            small = generalization_risk(zero, f0, ou_model(), 40, 0.05, 2, copies=8, seed=100 + rep)
            big = generalization_risk(zero, f0, ou_model(), 40, 0.05, 2, copies=32, seed=200 + rep)
            ratios.append(small.stderr / big.stderr)
        assert 2 / 1.5 <= np.median(ratios) <= 2 * 1.5


class TestL2Pi:
    def test_exact_zero(self):
        est = l2_pi_risk(f0, f0, ou_model(), None, 50.0, 0.05, seed=0, substeps=2)
        assert est.estimate == 0.0

    def test_ou_invariant_mass(self):
        indicator = on_cube(lambda x: np.ones(len(x)))
        est = l2_pi_risk(indicator, zero, ou_model(), None, 4000.0, 0.05, seed=4, substeps=5)
        target = norm.cdf(math.sqrt(2.0)) - 0.5
        assert target == pytest.approx(0.4214, abs=1e-4)
        assert abs(est.estimate - target) <= 3 * est.stderr

    def test_horizon_doubling(self):
        indicator = on_cube(lambda x: np.ones(len(x)))
        a = l2_pi_risk(indicator, zero, ou_model(), None, 1000.0, 0.05, seed=5, substeps=5)
        b = l2_pi_risk(indicator, zero, ou_model(), None, 2000.0, 0.05, seed=6, substeps=5)
        assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.stderr, b.stderr)


class TestLogLog:
    def test_exact_line(self):
        h = np.array([10.0, 100.0, 1000.0])
        fit = fit_loglog(h, 3.0 * h**-0.7)
        assert fit["slope"] == pytest.approx(-0.7, abs=1e-12)
        assert fit["intercept"] == pytest.approx(math.log(3.0), abs=1e-12)

    def test_zero_risks_excluded(self):
        fit = fit_loglog([1.0, 2.0, 4.0, 8.0], [1.0, 0.0, 0.25, 0.125])
        assert fit["excluded"] == 1 and fit["points"] == 3
        assert fit["slope"] == pytest.approx(-1.0)

    def test_undefined(self):
        fit = fit_loglog([1.0, 2.0, 4.0], [0.0, 0.0, 0.0])
        assert not fit["defined"] and math.isnan(fit["slope"])


def fixed(fn):
    return lambda data, cell, seed, family: (fn, {"psi_hat": 0.0})


FAMILY = DriftFamily(ou_model(), f0)


class TestSweep:
    def test_needs_three_cells(self):
        with pytest.raises(ValueError):
            rate_sweep(FAMILY, CLS, [(100, 0.1), (200, 0.1)], TrainConfig(), [0], fixed(zero))

    def test_increasing_horizon(self):
        with pytest.raises(ValueError):
            rate_sweep(FAMILY, CLS, [(100, 0.1), (50, 0.1), (300, 0.1)], TrainConfig(), [0], fixed(zero))

    def test_perfect_estimator(self):
        res = rate_sweep(FAMILY, CLS, [(100, 0.1), (300, 0.1), (900, 0.1)], TrainConfig(), [0], fixed(f0), copies=2)
        assert all(m == 0.0 for _, m in res.cell_means)
        assert not res.slope_defined and res.excluded == 3

    def test_zero_predictor_is_flat(self):
        grid = [Cell(1000, 0.05, 2), Cell(2000, 0.05, 2), Cell(4000, 0.05, 2)]
        res = rate_sweep(FAMILY, CLS, grid, TrainConfig(), [0, 1], fixed(zero), copies=8)
        assert res.slope_defined
        assert abs(res.slope) <= 0.15
        assert res.exponent == pytest.approx(-2 / 3)

    def test_rows_and_summary(self):
        grid = [Cell(100, 0.1, 2), Cell(200, 0.1, 2), Cell(400, 0.1, 2)]
        res = rate_sweep(FAMILY, CLS, grid, TrainConfig(), [3], fixed(zero), copies=2)
        assert [r["n"] for r in res.rows] == [100, 200, 400]
        assert all(r["status"] == "ok" for r in res.rows)
        again = summarize(res.rows, CLS)
        assert again.slope == res.slope

    def test_failed_rows_skipped(self):
        rows = [
            {"n": 100, "delta": 0.1, "gen_risk": 0.5, "status": "ok"},
            {"n": 200, "delta": 0.1, "gen_risk": "", "status": "failed: X: y"},
        ]
        res = summarize(rows, CLS)
        assert res.failed == 1 and len(res.cell_means) == 1


def test_report_rejects_negative():
    with pytest.raises(ValueError):
        RiskReport(-1.0, RiskEstimate(0.1, 0.0, 2), 0.0, 0.1, 0.1, 10, 0.1, 0, 2, 3, 4, 1.0)


def test_network_is_an_estimator():
    from driftnet.relu_net import NetworkParams

    p = NetworkParams((np.array([[1.0]]), np.array([[-1.0]])), (np.zeros(1),), 2, 1.0)
    est = generalization_risk(Network(p), f0, frozen, 20, 0.1, 1, copies=2, x0_sampler=[0.4])
    assert est.estimate == 0.0
