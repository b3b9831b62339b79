"""Sparse, bounded ReLU networks supported on the unit cube.

Weights act on column vectors: ``W_j`` has shape ``(p_{j+1}, p_j)``, so a
hidden layer computes ``relu(W_{j-1} h - v_j)``. Parameters are stored densely;
sparsity is a constraint on the number of nonzero entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._accel import NUMBA_ENABLED, njit
from .errors import NetworkConstraintError

FORMAT_NAME = "driftnet-network"
FORMAT_VERSION = 1
INIT_SCHEMES = ("uniform_pm1_scaled", "zeros_plus_sparse")


@dataclass(frozen=True)
class Architecture:
    depth: int
    widths: tuple

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if len(self.widths) != self.depth + 2:
            raise ValueError(f"widths needs depth+2 = {self.depth + 2} entries")
        if any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        if self.widths[-1] != 1:
            raise ValueError("output width must be 1")

    @classmethod
    def uniform(cls, d: int, depth: int, width: int) -> "Architecture":
        return cls(depth, (d,) + (width,) * depth + (1,))

    @property
    def dim(self) -> int:
        return self.widths[0]

    @property
    def n_entries(self) -> int:
        w = self.widths
        return sum(w[j + 1] * w[j] for j in range(self.depth + 1)) + sum(w[1:-1])


@dataclass(frozen=True)
class NetworkParams:
    """``weights`` = (W_0, ..., W_L); ``shifts`` = (v_1, ..., v_L)."""

    weights: tuple
    shifts: tuple
    sparsity_budget: int
    sup_bound: float

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        vs = tuple(np.array(v, dtype=np.float64).reshape(-1) for v in self.shifts)
        for a in ws + vs:
            a.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "shifts", vs)

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    def arrays(self) -> list[np.ndarray]:
        """Entries in ranking order W_0, v_1, W_1, ..., v_L, W_L."""
        out = [self.weights[0]]
        for v, w in zip(self.shifts, self.weights[1:]):
            out.extend([v, w])
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, flat: np.ndarray, sparsity_budget: Optional[int] = None) -> "NetworkParams":
        return unflatten(flat, self.architecture(), self.sparsity_budget if sparsity_budget is None else sparsity_budget, self.sup_bound)

    def architecture(self) -> Architecture:
        widths = [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]
        return Architecture(self.depth, tuple(widths))


def unflatten(flat: np.ndarray, arch: Architecture, s: int, F: float) -> NetworkParams:
    p = arch.widths
    pos = 0
    weights, shifts = [], []
    for j in range(arch.depth + 1):
        if j > 0:
            shifts.append(flat[pos : pos + p[j]])
            pos += p[j]
        size = p[j + 1] * p[j]
        weights.append(flat[pos : pos + size].reshape(p[j + 1], p[j]))
        pos += size
    if pos != flat.size:
        raise ValueError("flat parameter vector does not match the architecture")
    return NetworkParams(tuple(weights), tuple(shifts), int(s), float(F))


def zeros(arch: Architecture, s: int, F: float) -> NetworkParams:
    return unflatten(np.zeros(arch.n_entries), arch, s, F)


def shifted_relu(v, y) -> np.ndarray:
    """Component-wise max(y_i - v_i, 0)."""
    v = np.asarray(v, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if v.shape[-1] != y.shape[-1]:
        raise ValueError(f"shift has {v.shape[-1]} entries but input has {y.shape[-1]}")
    return np.maximum(y - v, 0.0)


def count_nonzero(params: NetworkParams) -> int:
    return int(sum(np.count_nonzero(a) for a in params.arrays()))


def check_feasible(params: NetworkParams, arch: Optional[Architecture] = None) -> None:
    if arch is not None:
        if params.depth != arch.depth:
            raise NetworkConstraintError(f"params have depth {params.depth}, architecture {arch.depth}")
        for j, w in enumerate(params.weights):
            if w.shape != (arch.widths[j + 1], arch.widths[j]):
                raise NetworkConstraintError(f"W_{j} has shape {w.shape}, expected {(arch.widths[j + 1], arch.widths[j])}")
        for j, v in enumerate(params.shifts, start=1):
            if v.shape != (arch.widths[j],):
                raise NetworkConstraintError(f"v_{j} has {v.size} entries, expected {arch.widths[j]}")
    biggest = max(float(np.max(np.abs(a))) if a.size else 0.0 for a in params.arrays())
    if not biggest <= 1.0:
        raise NetworkConstraintError(f"parameter magnitude {biggest} exceeds 1")
    nnz = count_nonzero(params)
    if nnz > params.sparsity_budget:
        raise NetworkConstraintError(f"{nnz} nonzero parameters exceed the budget s = {params.sparsity_budget}")


def _layout(widths):
    """Offsets of each W_j and v_j inside the flat parameter vector."""
    L = len(widths) - 2
    w_off = np.zeros(L + 1, dtype=np.int64)
    v_off = np.zeros(L + 1, dtype=np.int64)
    pos = 0
    for j in range(L + 1):
        if j > 0:
            v_off[j] = pos
            pos += widths[j]
        w_off[j] = pos
        pos += widths[j + 1] * widths[j]
    return w_off, v_off


def _live_units(weights, shifts):
    """Index lists of units that can be nonzero (forward) and that reach the
    output through nonzero weights (backward), padded into 2-D arrays."""
    L = len(weights) - 1
    widths = [weights[0].shape[1]] + [w.shape[0] for w in weights]
    fwd = [np.arange(widths[0])]
    for j in range(L):
        feeds = np.any(weights[j][:, fwd[j]] != 0.0, axis=1) if fwd[j].size else np.zeros(widths[j + 1], bool)
        fwd.append(np.flatnonzero(feeds | (shifts[j] < 0.0)))
    bwd = [None] * (L + 1)
    on = np.zeros(widths[L], bool)
    on[fwd[L]] = True
    bwd[L] = np.flatnonzero(on & (weights[L][0] != 0.0))
    for j in range(L - 1, -1, -1):
        on = np.zeros(widths[j], bool)
        on[fwd[j]] = True
        reach = np.any(weights[j][bwd[j + 1], :] != 0.0, axis=0) if bwd[j + 1].size else np.zeros(widths[j], bool)
        bwd[j] = np.flatnonzero(on & reach)
    pmax = max(widths)
    f_idx = np.zeros((L + 1, pmax), np.int64)
    b_idx = np.zeros((L + 1, pmax), np.int64)
    f_cnt = np.zeros(L + 1, np.int64)
    b_cnt = np.zeros(L + 1, np.int64)
    for j in range(L + 1):
        f_cnt[j], b_cnt[j] = fwd[j].size, bwd[j].size
        f_idx[j, : fwd[j].size] = fwd[j]
        b_idx[j, : bwd[j].size] = bwd[j]
    return f_idx, f_cnt, b_idx, b_cnt


@njit
def _forward_sample(flat, widths, w_off, v_off, f_idx, f_cnt, x, H):
    """Fill H[j, :p_j] with activations of one point; return the raw output.

    Only forward-live units are written; the rest of H stays zero.
    """
    L = widths.shape[0] - 2
    for c in range(widths[0]):
        H[0, c] = x[c]
    for j in range(L):
        p_in = widths[j]
        for a in range(f_cnt[j + 1]):
            r = f_idx[j + 1, a]
            z = -flat[v_off[j + 1] + r]
            base = w_off[j] + r * p_in
            for b in range(f_cnt[j]):
                c = f_idx[j, b]
                z += flat[base + c] * H[j, c]
            H[j + 1, r] = z if z > 0.0 else 0.0
    raw = 0.0
    for b in range(f_cnt[L]):
        c = f_idx[L, b]
        raw += flat[w_off[L] + c] * H[L, c]
    return raw


@njit
def _raw_kernel(flat, widths, w_off, v_off, f_idx, f_cnt, x):
    n = x.shape[0]
    out = np.empty(n)
    H = np.zeros((widths.shape[0], widths.max()))
    for k in range(n):
        out[k] = _forward_sample(flat, widths, w_off, v_off, f_idx, f_cnt, x[k], H)
    return out


@njit
def _grad_kernel(flat, widths, w_off, v_off, f_idx, f_cnt, b_idx, b_cnt, x, y, F, scale, grad):
    """Add scale * gradient of sum_k (clip(f(x_k)) - y_k)^2 to ``grad``; return the
    summed squared residual.

    A unit is on when its activation is positive, so the ReLU derivative at
    the kink is 0. Units outside the live sets carry no gradient.
    """
    L = widths.shape[0] - 2
    pmax = widths.max()
    H = np.zeros((L + 1, pmax))
    delta = np.zeros(pmax)
    dz = np.zeros(pmax)
    total = 0.0
    for k in range(x.shape[0]):
        raw = _forward_sample(flat, widths, w_off, v_off, f_idx, f_cnt, x[k], H)
        fit = min(max(raw, -F), F)
        resid = fit - y[k]
        total += resid * resid
        if raw > F or raw < -F:
            continue
        g = 2.0 * resid * scale
        if g == 0.0:
            continue
        for b in range(f_cnt[L]):
            c = f_idx[L, b]
            grad[w_off[L] + c] += g * H[L, c]
        for b in range(b_cnt[L]):
            c = b_idx[L, b]
            delta[c] = g * flat[w_off[L] + c]
        for j in range(L - 1, -1, -1):
            p_in = widths[j]
            any_on = False
            for a in range(b_cnt[j + 1]):
                r = b_idx[j + 1, a]
                if H[j + 1, r] > 0.0:
                    dz[r] = delta[r]
                    any_on = True
                else:
                    dz[r] = 0.0
            if not any_on:
                break
            if j > 0:
                for b in range(b_cnt[j]):
                    delta[b_idx[j, b]] = 0.0
            for a in range(b_cnt[j + 1]):
                r = b_idx[j + 1, a]
                d = dz[r]
                if d == 0.0:
                    continue
                grad[v_off[j + 1] + r] -= d
                base = w_off[j] + r * p_in
                for b in range(f_cnt[j]):
                    c = f_idx[j, b]
                    grad[base + c] += d * H[j, c]
                if j > 0:
                    for b in range(b_cnt[j]):
                        c = b_idx[j, b]
                        delta[c] += d * flat[base + c]
    return total


def _kernel_args(weights, shifts):
    flat, widths = _pack(weights, shifts)
    w_off, v_off = _layout(widths)
    f_idx, f_cnt, b_idx, b_cnt = _live_units(weights, shifts)
    return flat, widths, w_off, v_off, f_idx, f_cnt, b_idx, b_cnt


def _raw_batch(weights, shifts, x):
    if NUMBA_ENABLED and x.shape[0] > 0:
        flat, widths, w_off, v_off, f_idx, f_cnt, _, _ = _kernel_args(weights, shifts)
        return _raw_kernel(flat, widths, w_off, v_off, f_idx, f_cnt, np.ascontiguousarray(x))
    return _raw_batch_numpy(weights, shifts, x)


def _pack(weights, shifts):
    parts = [weights[0].ravel()]
    for v, w in zip(shifts, weights[1:]):
        parts.extend([v, w.ravel()])
    widths = np.array([weights[0].shape[1]] + [w.shape[0] for w in weights], dtype=np.int64)
    return np.concatenate(parts), widths


def _raw_batch_numpy(weights, shifts, x):
    h = x
    for w, v in zip(weights[:-1], shifts):
        h = np.maximum(h @ w.T - v, 0.0)
    return (h @ weights[-1].T)[:, 0]


def in_cube(x: np.ndarray) -> np.ndarray:
    return np.all((x >= 0.0) & (x <= 1.0), axis=1)


def evaluate(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Network value on rows of ``x`` without re-validating ``params``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.zeros(x.shape[0])
    inside = in_cube(x)
    if np.any(inside):
        raw = _raw_batch(params.weights, params.shifts, x[inside])
        out[inside] = np.clip(raw, -params.sup_bound, params.sup_bound)
    return out


def forward(params: NetworkParams, arch: Architecture, x) -> np.ndarray | float:
    """f(x) = clip(W_L relu_{v_L} ... W_1 relu_{v_1} W_0 x, -F, F) on [0,1]^d, 0 elsewhere.

    ``x`` is a single point of length d or an (N, d) batch.
    """
    check_feasible(params, arch)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    vals = evaluate(params, x.reshape(1, -1) if single else x)
    return float(vals[0]) if single else vals


class Network:
    """Callable wrapper so a fitted network can stand in for any estimator."""

    def __init__(self, params: NetworkParams):
        self.params = params

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.params, x)


def project_params(params: NetworkParams, s: int, clip: float = 1.0) -> NetworkParams:
    """Clip entries to [-clip, clip], then keep the ``s`` largest magnitudes.

    Ties go to the earlier entry in the order W_0, v_1, W_1, ..., v_L, W_L
    (row-major within each array).
    """
    flat = np.clip(params.flat(), -clip, clip)
    s = int(s)
    if s < flat.size:
        order = np.argsort(-np.abs(flat), kind="stable")
        flat[order[s:]] = 0.0
    return params.with_flat(flat, sparsity_budget=max(s, 0))


def active_mask(params: NetworkParams) -> np.ndarray:
    return params.flat() != 0.0


def grad_lsq(params: NetworkParams, x: np.ndarray, y: np.ndarray, mask: Optional[np.ndarray] = None):
    """Mean squared error of the network against ``y`` and its gradient.

    Returns ``(loss, grad)`` with ``grad`` a flat vector in :meth:`NetworkParams.flat`
    order. Samples outside the cube or with the output clamp active contribute
    no gradient, ReLU kinks use subgradient 0, and entries where ``mask`` is
    False get zero gradient.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    inside = in_cube(x)
    xi = x[inside]
    if NUMBA_ENABLED:
        args = _kernel_args(params.weights, params.shifts)
        grad = np.zeros(args[0].size)
        resid_out = y[~inside]
        sq = _grad_kernel(
            *args, np.ascontiguousarray(xi), np.ascontiguousarray(y[inside]),
            float(params.sup_bound), 1.0 / n, grad,
        )
        if mask is not None:
            grad = np.where(mask, grad, 0.0)
        return float((np.dot(resid_out, resid_out) + sq) / n), grad
    ws, vs = params.weights, params.shifts
    F = params.sup_bound

    acts = [xi]
    pre = []
    h = xi
    for w, v in zip(ws[:-1], vs):
        z = h @ w.T - v
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    raw = (h @ ws[-1].T)[:, 0]
    fit = np.clip(raw, -F, F)

    resid_out = y[~inside]
    resid_in = fit - y[inside]
    loss = (np.dot(resid_out, resid_out) + np.dot(resid_in, resid_in)) / n

    g = np.where(np.abs(raw) <= F, 2.0 * resid_in / n, 0.0)[:, None]
    gw = [None] * len(ws)
    gv = [None] * len(vs)
    gw[-1] = g.T @ acts[-1]
    delta = g @ ws[-1]
    for j in range(len(vs) - 1, -1, -1):
        dz = delta * (pre[j] > 0.0)
        gv[j] = -dz.sum(axis=0)
        gw[j] = dz.T @ acts[j]
        if j > 0:
            delta = dz @ ws[j]
    parts = [gw[0]]
    for v, w in zip(gv, gw[1:]):
        parts.extend([v, w])
    grad = np.concatenate([p.ravel() for p in parts])
    if mask is not None:
        grad = np.where(mask, grad, 0.0)
    return float(loss), grad


def least_squares_loss(params: NetworkParams, x: np.ndarray, y: np.ndarray) -> float:
    r = evaluate(params, x) - y
    return float(np.dot(r, r) / len(y))


def init_params(
    arch: Architecture,
    scheme: str = "uniform_pm1_scaled",
    seed: int = 0,
    s: Optional[int] = None,
    F: float = 1.0,
    sign_pattern: Optional[int] = None,
) -> NetworkParams:
    """Random feasible parameters.

    ``uniform_pm1_scaled`` draws W_j entries from U(-a, a) with
    a = min(1, sqrt(6 / fan_in)) and zero shifts, then projects onto the
    budget ``s`` (default: no sparsity limit).

    ``zeros_plus_sparse`` starts from zero and lays down ``s // (L + 2)``
    input-to-output chains: a random first-layer weight and shift, unit
    weights through the hidden layers, a random output weight. With fewer
    than L + 2 entries available it places ``s`` random entries instead.
    Chain signs are random unless ``sign_pattern`` is given: chain c then gets
    output sign from bit 0 and input sign from bit 1 of ``sign_pattern + c``,
    so consecutive patterns cover all four sign combinations.
    """
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    budget = arch.n_entries if s is None else int(s)
    p, L = arch.widths, arch.depth

    if scheme == "uniform_pm1_scaled":
        weights = [rng.uniform(-1, 1, (p[j + 1], p[j])) * min(1.0, np.sqrt(6.0 / p[j])) for j in range(L + 1)]
        shifts = [np.zeros(p[j]) for j in range(1, L + 1)]
        params = NetworkParams(tuple(weights), tuple(shifts), budget, F)
        return project_params(params, budget)

    weights = [np.zeros((p[j + 1], p[j])) for j in range(L + 1)]
    shifts = [np.zeros(p[j]) for j in range(1, L + 1)]
    chains = min(budget // (L + 2), min(p[1:-1]))
    if chains == 0:
        params = NetworkParams(tuple(weights), tuple(shifts), budget, F)
        flat = params.flat()
        if budget > 0:
            pick = rng.choice(flat.size, size=min(budget, flat.size), replace=False)
            flat[pick] = rng.uniform(-1, 1, pick.size)
        return params.with_flat(flat)
    units = [rng.choice(p[j], size=chains, replace=False) for j in range(1, L + 1)]
    inputs = rng.integers(0, p[0], size=chains)
    for c in range(chains):
        if sign_pattern is None:
            s_in, s_out = rng.choice([-1.0, 1.0]), rng.choice([-1.0, 1.0])
        else:
            bits = int(sign_pattern) + c
            s_out, s_in = (1.0 if bits & 1 == 0 else -1.0), (1.0 if bits & 2 == 0 else -1.0)
        weights[0][units[0][c], inputs[c]] = s_in * rng.uniform(0.25, 1.0)
        shifts[0][units[0][c]] = -rng.uniform(0.25, 1.0)
        for j in range(1, L):
            weights[j][units[j][c], units[j - 1][c]] = 1.0
        weights[L][0, units[L - 1][c]] = s_out * rng.uniform(0.25, 1.0)
    return NetworkParams(tuple(weights), tuple(shifts), budget, F)


# --------------------------------------------------------------------------
# serialization: JSON text, floats stored as hex strings for exact round trips


def dumps(params: NetworkParams) -> str:
    arch = params.architecture()
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "depth": arch.depth,
        "widths": list(arch.widths),
        "sparsity_budget": params.sparsity_budget,
        "sup_bound": float(params.sup_bound).hex(),
        "weights": [[float(v).hex() for v in w.ravel()] for w in params.weights],
        "shifts": [[float(v).hex() for v in s] for s in params.shifts],
    }
    return json.dumps(doc, indent=1)


def loads(text: str) -> NetworkParams:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError("not a driftnet network file")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported network format version {doc.get('version')}")
    arch = Architecture(doc["depth"], tuple(doc["widths"]))
    p = arch.widths
    weights = tuple(
        np.array([float.fromhex(v) for v in w]).reshape(p[j + 1], p[j]) for j, w in enumerate(doc["weights"])
    )
    shifts = tuple(np.array([float.fromhex(v) for v in s]) for s in doc["shifts"])
    return NetworkParams(weights, shifts, int(doc["sparsity_budget"]), float.fromhex(doc["sup_bound"]))
