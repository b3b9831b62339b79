import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from driftnet.drift_models import (
    ClassParams,
    Layer,
    build_composition,
    confine_drift,
    cutoff,
    holder_constant_estimate,
    radial_probe,
    smoothstep,
    validate_b0,
    validate_ergodicity,
)
from driftnet.errors import ClassViolation
from driftnet.sde_sim import SdeModel, constant_diffusion, constant_drift, ou_model

Q0 = ClassParams(0, (1, 1), (1,), (2.0,), 2.0)
ADD = ClassParams(1, (2, 2, 1), (1, 2), (2.0, 1.0), 2.0)


def square():
    return build_composition(Q0, "single-layer-polynomial", options={"coefs": [0.0, 0.0, 1.0]})


def additive():
    return build_composition(ADD, "additive", options={"coefs": [[0.0, 0.0, 0.5], [0.0, 0.0, 0.5]]})


def zero():
    return build_composition(Q0, "single-layer-polynomial", options={"coefs": [0.0]})


class TestClassParams:
    def test_active_cannot_exceed_dims(self):
        with pytest.raises(ClassViolation):
            ClassParams(0, (1, 1), (2,), (1.0,), 1.0)

    def test_endpoint(self):
        with pytest.raises(ClassViolation):
            ClassParams(0, (2, 2), (1,), (1.0,), 1.0)


class TestBuildComposition:
    def test_zero_polynomial(self):
        f = zero()
        x = np.random.default_rng(0).uniform(-1, 2, (50, 1))
        assert np.all(f(x) == 0.0)

    def test_square(self):
        f = square()
        assert f(np.array([0.5])) == pytest.approx(0.25, abs=1e-15)
        assert f(np.array([1.5])) == 0.0

    def test_additive(self):
        assert additive()(np.array([1.0, 1.0])) == pytest.approx(1.0, abs=1e-15)

    def test_seed_determinism(self):
        a = build_composition(ADD, "product-of-splines", seed=4)
        b = build_composition(ADD, "product-of-splines", seed=4)
        x = np.random.default_rng(1).uniform(0, 1, (64, 2))
        assert np.array_equal(a(x), b(x))

    def test_recipe_needs_matching_depth(self):
        with pytest.raises(ClassViolation):
            build_composition(Q0, "additive")

    def test_custom_closure_reads_checked(self):
        layer = Layer(lambda u: u[:, :1] + u[:, 1:2], ((0, 1),), 0.0, 2.0, "u1+u2")
        cls = ClassParams(0, (2, 1), (1,), (1.0,), 1.0)
        with pytest.raises(ClassViolation):
            build_composition(cls, "custom-closure", layers=[layer])

    def test_custom_closure_evaluates(self):
        layer = Layer(lambda u: u[:, :1] * 3.0, ((0,),), 0.0, 3.0, "3 u1")
        cls = ClassParams(0, (2, 1), (1,), (1.0,), 3.0)
        f = build_composition(cls, "custom-closure", layers=[layer])
        assert f(np.array([0.5, 0.9])) == pytest.approx(1.5)
        assert f(np.array([0.5, 1.1])) == 0.0

    def test_ranges_within_bound(self):
        f = build_composition(ADD, "product-of-splines", seed=2)
        assert f.check_ranges(np.random.default_rng(0).uniform(0, 1, (256, 2)))

    @given(st.integers(0, 1000), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    def test_support_is_the_cube(self, seed, point):
        f = build_composition(ADD, "product-of-splines", seed=seed)
        x = np.array(point)
        if np.any((x < 0) | (x > 1)):
            assert f(x) == 0.0


class TestConfinedDrift:
    def test_dead_zone_equals_f(self):
        b = confine_drift(square(), 1, 0.5)
        for x in np.linspace(-1.0, 1.0, 41):
            assert b(np.array([x]))[0] == pytest.approx(float(square()(np.array([x]))), abs=1e-15)

    def test_far_field_is_pure_pull(self):
        b = confine_drift(additive(), 2, 0.7)
        for p in radial_probe(2, 4.0, 20.0, 128, seed=3):
            assert np.dot(b(p), p) == pytest.approx(-0.7 * np.linalg.norm(p), rel=1e-12)

    def test_hand_value(self):
        b = confine_drift(zero(), 1, 1.0)
        assert b(np.array([3.0]))[0] == pytest.approx(-1.0, abs=1e-15)

    def test_origin(self):
        b = confine_drift(square(), 1, 1.0)
        assert b(np.array([0.0]))[0] == 0.0

    def test_python_closure_path(self):
        b = confine_drift(lambda x: 0.5 if 0 <= x[0] <= 1 else 0.0, 1, 1.0, dim=1)
        assert b(np.array([0.5]))[0] == 0.5
        assert b(np.array([5.0]))[0] == pytest.approx(-1.0)

    def test_rate_domain(self):
        with pytest.raises(ValueError):
            confine_drift(square(), 1, 1.5)

    def test_target_matches_drift_on_cube(self):
        b = confine_drift(additive(), 1, 1.0)
        x = np.random.default_rng(0).uniform(-0.5, 1.5, (200, 2))
        want = np.array([b(p)[0] if np.all((p >= 0) & (p <= 1)) else 0.0 for p in x])
        np.testing.assert_allclose(b.target(x), want, atol=1e-14)

    def test_cutoff_shape(self):
        assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0 and smoothstep(0.5) == 0.5
        assert cutoff(1.0, 1) == 0.0 and cutoff(2.0, 1) == 1.0 and cutoff(7.0, 1) == 1.0


class TestValidators:
    @pytest.mark.parametrize("make,coord", [(zero, 1), (square, 1), (additive, 2)])
    def test_confined_examples_pass(self, make, coord):
        f = make()
        b = confine_drift(f, coord, 1.0)
        rep = validate_b0(b, b.dim, 1.0, 2.0)
        assert rep.passed
        assert rep.n_points >= 1000

    def test_repelling_fails(self):
        rep = validate_b0(lambda x: np.asarray(x, dtype=float), 1, 1.0, 100.0)
        assert not rep.radial_ok and rep.radial_margin > 0

    def test_zero_drift_fails(self):
        rep = validate_b0(lambda x: np.zeros(2), 2, 1.0, 1.0)
        assert not rep.radial_ok

    def test_sup_bound(self):
        # sup |f| = 1 on the cube and the pull is switched off there
        b = confine_drift(square(), 1, 1.0)
        assert validate_b0(b, 1, 1.0, 1.0).sup_ok
        assert not validate_b0(b, 1, 1.0, 0.5).sup_ok

    def test_ou_ergodic(self):
        rep = validate_ergodicity(ou_model(dim=2), 1.0, 1.0, (1.0, 1.0))
        assert rep.passed

    def test_degenerate_noise_fails_lower(self):
        m = SdeModel(1, ou_model().drift, constant_diffusion(np.zeros((1, 1))))
        rep = validate_ergodicity(m, 1.0, 1.0, (1.0, 1.0))
        assert rep.drift_ok and rep.lower_margin > 0

    def test_zero_drift_fails_pull(self):
        m = SdeModel(1, constant_drift([0.0]), constant_diffusion(np.eye(1)))
        assert not validate_ergodicity(m, 1.0, 1.0, (1.0, 1.0)).drift_ok


class TestHolder:
    @pytest.mark.parametrize("c,beta", [(3.0, 1.0), (-0.5, 0.4), (2.0, 0.9)])
    def test_constant(self, c, beta):
        est = holder_constant_estimate(lambda x: np.full(len(x), c), beta)
        assert est.constant == pytest.approx(abs(c), abs=1e-12)

    def test_identity(self):
        est = holder_constant_estimate(lambda x: x[:, 0], 1.0)
        assert est.constant == pytest.approx(2.0, abs=1e-6)

    def test_square(self):
        est = holder_constant_estimate(lambda x: x[:, 0] ** 2, 2.0)
        assert est.constant == pytest.approx(5.0, abs=1e-4)

    def test_supplied_derivative(self):
        est = holder_constant_estimate(lambda x: x[:, 0] ** 2, 2.0, derivatives={(1,): lambda x: 2 * x[:, 0]})
        assert est.constant == pytest.approx(5.0, abs=1e-12)

    def test_monotone_in_level(self):
        g = lambda x: np.sin(3 * x[:, 0])
        vals = [holder_constant_estimate(g, 0.5, level=k).constant for k in range(2, 8)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= 1 + 2 * math.sqrt(3)

    def test_dependency_count(self):
        est = holder_constant_estimate(lambda x: x[:, 1], 1.0, dim=3, level=3)
        assert est.depends_on == 1

    def test_unbounded_flagged(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            est = holder_constant_estimate(lambda x: 1.0 / x[:, 0], 1.0)
        assert not est.bounded
