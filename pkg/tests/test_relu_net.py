import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftnet.errors import NetworkConstraintError
from driftnet.relu_net import (
    Architecture,
    NetworkParams,
    count_nonzero,
    dumps,
    forward,
    grad_lsq,
    init_params,
    least_squares_loss,
    loads,
    project_params,
    shifted_relu,
    unflatten,
    zeros,
)


def identity_net():
    return NetworkParams((np.array([[1.0]]), np.array([[1.0]])), (np.zeros(1),), 3, 1.0)


def random_params(rng, d=2, depth=2, width=4, scale=2.0, F=1.0):
    arch = Architecture.uniform(d, depth, width)
    flat = rng.uniform(-scale, scale, arch.n_entries)
    return arch, unflatten(flat, arch, arch.n_entries, F)


class TestShiftedRelu:
    def test_plain(self):
        np.testing.assert_array_equal(shifted_relu([0.0, 0.0], [-1.0, 2.0]), [0.0, 2.0])

    def test_shifted(self):
        np.testing.assert_array_equal(shifted_relu([1.0, -1.0], [2.0, 0.0]), [1.0, 1.0])

    def test_equal(self):
        y = np.array([0.3, -2.0, 5.0])
        np.testing.assert_array_equal(shifted_relu(y, y), np.zeros(3))

    def test_shape_error(self):
        with pytest.raises(ValueError):
            shifted_relu([0.0], [1.0, 2.0])


class TestForward:
    def test_zero_net(self):
        arch = Architecture.uniform(2, 3, 5)
        x = np.random.default_rng(0).uniform(-1, 2, (100, 2))
        assert np.all(forward(zeros(arch, 4, 1.0), arch, x) == 0.0)

    def test_identity_on_cube(self):
        p = identity_net()
        arch = p.architecture()
        assert forward(p, arch, np.array([0.3])) == 0.3
        assert forward(p, arch, np.array([1.5])) == 0.0

    def test_rejects_infeasible(self):
        p = NetworkParams((np.array([[2.0]]), np.array([[1.0]])), (np.zeros(1),), 3, 1.0)
        with pytest.raises(NetworkConstraintError):
            forward(p, p.architecture(), np.array([0.5]))
        p = NetworkParams((np.array([[1.0]]), np.array([[1.0]])), (np.array([0.5]),), 2, 1.0)
        with pytest.raises(NetworkConstraintError):
            forward(p, p.architecture(), np.array([0.5]))

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(3)
        arch = Architecture.uniform(3, 1, 6)
        w0, w1 = rng.uniform(-1, 1, (6, 3)), rng.uniform(-1, 1, (1, 6))
        x = rng.uniform(0, 1, (50, 3))
        raw = lambda w: np.maximum(x @ w.T, 0.0) @ w1.T
        big = NetworkParams((w0, w1), (np.zeros(6),), arch.n_entries, 100.0)
        for c in (0.25, 0.5, 1.0):
            small = NetworkParams((c * w0, w1), (np.zeros(6),), arch.n_entries, 100.0)
            np.testing.assert_allclose(forward(small, arch, x), c * forward(big, arch, x), rtol=1e-13, atol=1e-15)
            np.testing.assert_allclose(forward(small, arch, x), c * raw(w0)[:, 0], rtol=1e-13, atol=1e-15)

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.floats(0.1, 3.0))
    def test_bound_and_support(self, seed, F):
        rng = np.random.default_rng(seed)
        arch, p = random_params(rng, scale=1.0, F=F)
        x = rng.uniform(-1, 2, (200, 2))
        out = forward(p, arch, x)
        assert np.all(np.abs(out) <= F)
        off = ~np.all((x >= 0) & (x <= 1), axis=1)
        assert np.all(out[off] == 0.0)


class TestCountAndProject:
    def test_count(self):
        arch = Architecture(1, (2, 2, 1))
        assert count_nonzero(zeros(arch, 2, 1.0)) == 0
        p = NetworkParams((np.eye(2), np.zeros((1, 2))), (np.zeros(2),), 2, 1.0)
        assert count_nonzero(p) == 2

    def test_hand_trace(self):
        arch = Architecture(1, (3, 1, 1))
        p = NetworkParams((np.array([[2.0, 0.5, -3.0]]), np.zeros((1, 1))), (np.zeros(1),), 5, 1.0)
        out = project_params(p, 2)
        np.testing.assert_array_equal(out.weights[0], [[1.0, 0.0, -1.0]])
        assert out.sparsity_budget == 2

    def test_tie_goes_to_earlier_entry(self):
        p = NetworkParams((np.array([[0.5, -0.5, 0.5]]), np.zeros((1, 1))), (np.zeros(1),), 5, 1.0)
        np.testing.assert_array_equal(project_params(p, 2).weights[0], [[0.5, -0.5, 0.0]])

    def test_feasible_fixed(self):
        p = identity_net()
        q = project_params(p, 3)
        np.testing.assert_array_equal(q.flat(), p.flat())

    def test_large_budget_only_clips(self):
        rng = np.random.default_rng(1)
        arch, p = random_params(rng)
        q = project_params(p, arch.n_entries + 5)
        np.testing.assert_array_equal(q.flat(), np.clip(p.flat(), -1, 1))

    @given(st.integers(0, 2**31), st.integers(2, 40))
    def test_feasibility_closure(self, seed, s):
        arch, p = random_params(np.random.default_rng(seed))
        q = project_params(p, s)
        assert np.max(np.abs(q.flat())) <= 1.0
        assert count_nonzero(q) <= s


def _fd_check(p, x, y, rng, h=1e-6):
    loss, grad = grad_lsq(p, x, y)
    flat = p.flat()
    bad = []
    for i in rng.choice(flat.size, size=min(flat.size, 25), replace=False):
        up, dn = flat.copy(), flat.copy()
        up[i] += h
        dn[i] -= h
        fd = (least_squares_loss(p.with_flat(up), x, y) - least_squares_loss(p.with_flat(dn), x, y)) / (2 * h)
        if abs(fd - grad[i]) > 1e-4 * max(abs(fd), 1e-3):
            bad.append((i, fd, grad[i]))
    return loss, bad


def _kink_distance(p, x):
    h = x
    dist = np.inf
    for w, v in zip(p.weights[:-1], p.shifts):
        z = h @ w.T - v
        dist = min(dist, np.min(np.abs(z[z != 0.0]), initial=np.inf))
        h = np.maximum(z, 0.0)
    raw = (h @ p.weights[-1].T)[:, 0]
    return min(dist, np.min(np.abs(np.abs(raw) - p.sup_bound)))


class TestGradient:
    def test_hand_chain_rule(self):
        arch = Architecture(1, (1, 1, 1))
        p = NetworkParams((np.array([[0.5]]), np.array([[1.0]])), (np.zeros(1),), 3, 1.0)
        loss, grad = grad_lsq(p, np.array([[1.0]]), np.array([0.0]))
        assert loss == pytest.approx(0.25, abs=1e-15)
        assert grad[0] == pytest.approx(1.0, abs=1e-15)

    def test_exact_fit(self):
        p = identity_net()
        x = np.linspace(0, 1, 11)[:, None]
        loss, grad = grad_lsq(p, x, x[:, 0])
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_mask(self):
        rng = np.random.default_rng(5)
        arch, p = random_params(rng, scale=1.0)
        mask = rng.random(arch.n_entries) < 0.5
        _, full = grad_lsq(p, rng.uniform(0, 1, (30, 2)), rng.normal(size=30))
        _, part = grad_lsq(p, rng.uniform(0, 1, (30, 2)), rng.normal(size=30), mask)
        assert np.all(part[~mask] == 0.0)

    def test_outside_samples_count_in_loss_only(self):
        p = identity_net()
        loss, grad = grad_lsq(p, np.array([[0.5], [2.0]]), np.array([0.0, 1.0]))
        assert loss == pytest.approx((0.25 + 1.0) / 2)
        inner_loss, inner_grad = grad_lsq(p, np.array([[0.5]]), np.array([0.0]))
        np.testing.assert_allclose(grad, inner_grad / 2)

    @pytest.mark.parametrize("seed", range(8))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        arch, p = random_params(rng, d=2, depth=2, width=5, scale=1.0, F=5.0)
        x = rng.uniform(0, 1, (12, 2))
        while _kink_distance(p, x) < 1e-3:
            x = rng.uniform(0, 1, (12, 2))
        _, bad = _fd_check(p, x, rng.normal(size=12), rng)
        assert not bad


class TestInit:
    def test_zero_budget(self):
        arch = Architecture.uniform(2, 2, 4)
        p = init_params(arch, "zeros_plus_sparse", seed=1, s=0)
        assert count_nonzero(p) == 0

    def test_uniform_bounded(self):
        arch = Architecture.uniform(2, 3, 50)
        p = init_params(arch, "uniform_pm1_scaled", seed=2)
        assert np.max(np.abs(p.flat())) <= 1.0

    @pytest.mark.parametrize("scheme", ["uniform_pm1_scaled", "zeros_plus_sparse"])
    def test_deterministic(self, scheme):
        arch = Architecture.uniform(2, 3, 8)
        a = init_params(arch, scheme, seed=9, s=20)
        b = init_params(arch, scheme, seed=9, s=20)
        assert a.flat().tobytes() == b.flat().tobytes()

    def test_chains_within_budget(self):
        arch = Architecture.uniform(1, 4, 6)
        for s in (2, 6, 12, 30):
            p = init_params(arch, "zeros_plus_sparse", seed=s, s=s)
            assert count_nonzero(p) <= s
            assert np.max(np.abs(p.flat())) <= 1.0

    def test_sign_patterns_cycle(self):
        arch = Architecture.uniform(1, 2, 4)
        signs = set()
        for pattern in range(4):
            p = init_params(arch, "zeros_plus_sparse", seed=0, s=4, sign_pattern=pattern)
            w_in = p.weights[0][p.weights[0] != 0][0]
            w_out = p.weights[-1][p.weights[-1] != 0][0]
            signs.add((np.sign(w_in), np.sign(w_out)))
        assert len(signs) == 4

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            init_params(Architecture.uniform(1, 1, 2), "xavier")


class TestSerialization:
    def test_round_trip_bits(self):
        arch = Architecture.uniform(3, 2, 7)
        p = init_params(arch, "uniform_pm1_scaled", seed=4, s=30, F=1.7)
        q = loads(dumps(p))
        assert q.flat().tobytes() == p.flat().tobytes()
        assert (q.sparsity_budget, q.sup_bound) == (30, 1.7)
        assert q.architecture() == arch

    def test_version_checked(self):
        text = dumps(identity_net()).replace('"version": 1', '"version": 9')
        with pytest.raises(ValueError):
            loads(text)


def test_numpy_fallback_matches_kernel():
    """The pure-numpy path, selected in a fresh interpreter, agrees with the jitted one."""
    script = textwrap.dedent(
        """
        import sys, numpy as np
        from driftnet.relu_net import Architecture, init_params, evaluate, grad_lsq
        arch = Architecture.uniform(2, 4, 12)
        p = init_params(arch, "uniform_pm1_scaled", seed=7, s=90, F=2.0)
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.2, 1.2, (300, 2)); y = rng.normal(size=300)
        loss, g = grad_lsq(p, x, y)
        np.save(sys.argv[1], np.concatenate([evaluate(p, x), [loss], g]))
        """
    )
    outs = []
    for flag in ("1", "0"):
        path = os.path.join(os.environ.get("TMPDIR", "/tmp"), f"driftnet_parity_{flag}_{os.getpid()}.npy")
        env = dict(os.environ, DRIFTNET_NUMBA=flag)
        subprocess.run([sys.executable, "-c", script, path], env=env, check=True)
        outs.append(np.load(path))
        os.remove(path)
    np.testing.assert_allclose(outs[0], outs[1], rtol=1e-12, atol=1e-13)
