"""Ground-truth drifts: composition-class functions on the unit cube, confined
into an ergodic drift, plus numeric class-membership checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import norm, qmc

from ._accel import NUMBA_ENABLED, is_jitted, njit
from .errors import ClassViolation
from .sde_sim import SdeModel, constant_diffusion

RECIPES = ("additive", "product-of-splines", "single-layer-polynomial", "custom-closure")
VALIDATION_TOL = 1e-9


@dataclass(frozen=True)
class ClassParams:
    """Composition class: ``q`` inner layers, widths ``dims`` = (d_0, ..., d_{q+1}),
    active-coordinate counts ``active`` = (t_0, ..., t_q), smoothness
    ``smooth`` = (beta_0, ..., beta_q) and Hölder radius ``holder_k``."""

    q: int
    dims: tuple
    active: tuple
    smooth: tuple
    holder_k: float

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        object.__setattr__(self, "active", tuple(int(v) for v in self.active))
        object.__setattr__(self, "smooth", tuple(float(v) for v in self.smooth))
        self.validate()

    @property
    def d(self) -> int:
        return self.dims[0]

    def validate(self) -> None:
        q = int(self.q)
        problems = []
        if q < 0:
            problems.append("q must be nonnegative")
        if len(self.dims) != q + 2:
            problems.append(f"dims needs q+2 = {q + 2} entries, got {len(self.dims)}")
        elif self.dims[-1] != 1:
            problems.append("last entry of dims must be 1")
        if len(self.active) != q + 1 or len(self.smooth) != q + 1:
            problems.append("active and smooth need q+1 entries")
        if any(v < 1 for v in self.dims) or any(v < 1 for v in self.active):
            problems.append("dims and active entries must be positive integers")
        if any(b <= 0 for b in self.smooth):
            problems.append("smoothness entries must be positive")
        if self.holder_k <= 0:
            problems.append("holder_k must be positive")
        if len(self.dims) == q + 2 and len(self.active) == q + 1:
            for i, (t, di) in enumerate(zip(self.active, self.dims)):
                if t > di:
                    problems.append(f"t_{i} = {t} exceeds d_{i} = {di}")
        if problems:
            raise ClassViolation("; ".join(problems))


@dataclass(frozen=True)
class Layer:
    """One map g_i: [lower, upper]^{n_in} -> R^{n_out}; ``reads[j]`` lists the
    input coordinates output j depends on."""

    func: Callable[[np.ndarray], np.ndarray]
    reads: tuple
    lower: float
    upper: float
    expression: str = ""

    @property
    def n_out(self) -> int:
        return len(self.reads)


@dataclass(frozen=True)
class CompositionSpec:
    params: ClassParams
    layers: tuple
    recipe: str
    kernel: Optional[Callable] = None

    def raw(self, x: np.ndarray) -> np.ndarray:
        """Composition on rows of ``x`` without the support rule."""
        u = np.atleast_2d(np.asarray(x, dtype=np.float64))
        for layer in self.layers:
            u = np.atleast_2d(layer.func(u))
        return u[:, 0]

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.params.d:
            raise ValueError(f"expected points of dimension {self.params.d}")
        inside = np.all((pts >= 0.0) & (pts <= 1.0), axis=1)
        out = np.zeros(pts.shape[0])
        if np.any(inside):
            out[inside] = self.raw(pts[inside])
        return float(out[0]) if single else out

    def layer_ranges(self, probe: np.ndarray) -> list[tuple[float, float]]:
        """Observed (min, max) of every layer output over ``probe`` points in the cube."""
        u = np.atleast_2d(probe)
        ranges = []
        for layer in self.layers:
            u = np.atleast_2d(layer.func(u))
            ranges.append((float(u.min()), float(u.max())))
        return ranges

    def check_ranges(self, probe: np.ndarray) -> bool:
        k = self.params.holder_k
        return all(abs(lo) <= k and abs(hi) <= k for lo, hi in self.layer_ranges(probe))


# --------------------------------------------------------------------------
# recipe kernels


@njit
def _horner(coef, u):
    acc = 0.0
    for k in range(coef.shape[0] - 1, -1, -1):
        acc = acc * u + coef[k]
    return acc


@njit
def _bspline(coef, u):
    # uniform cubic B-spline on [0, 1] with coef.shape[0] >= 4 control values
    nseg = coef.shape[0] - 3
    s = u * nseg
    i = int(math.floor(s))
    if i >= nseg:
        i = nseg - 1
    if i < 0:
        i = 0
    w = s - i
    w2 = w * w
    w3 = w2 * w
    b0 = (1.0 - 3.0 * w + 3.0 * w2 - w3) / 6.0
    b1 = (4.0 - 6.0 * w2 + 3.0 * w3) / 6.0
    b2 = (1.0 + 3.0 * w + 3.0 * w2 - 3.0 * w3) / 6.0
    b3 = w3 / 6.0
    return b0 * coef[i] + b1 * coef[i + 1] + b2 * coef[i + 2] + b3 * coef[i + 3]


def _make_kernel(d, idx, coef, spline, combine, n_comb):
    """Compile f(x) = combine_j (sum_{a in idx[j]} basis_j(x_a)) with zero extension.

    combine: 0 = single output, 1 = sum of first n_comb, 2 = product of first n_comb.
    """
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    n_out, n_read = idx.shape

    @njit
    def inner(x):
        for a in range(d):
            if not (0.0 <= x[a] <= 1.0):
                return 0.0
        if combine == 2:
            acc = 1.0
        else:
            acc = 0.0
        for j in range(n_out):
            if combine != 0 and j >= n_comb:
                break
            g = 0.0
            for r in range(n_read):
                if spline:
                    g += _bspline(coef[j], x[idx[j, r]])
                else:
                    g += _horner(coef[j], x[idx[j, r]])
            if combine == 2:
                acc *= g
            else:
                acc += g
        return acc

    return inner


def _basis_layer(idx, coef, spline, lower, upper, label):
    idx = np.asarray(idx, dtype=np.int64)
    coef = np.asarray(coef, dtype=np.float64)

    def func(u):
        u = np.atleast_2d(u)
        out = np.zeros((u.shape[0], idx.shape[0]))
        for j in range(idx.shape[0]):
            for a in idx[j]:
                col = u[:, a]
                if spline:
                    out[:, j] += np.array([_bspline_py(coef[j], v) for v in col])
                else:
                    out[:, j] += np.polynomial.polynomial.polyval(col, coef[j])
        return out

    return Layer(func, tuple(tuple(int(a) for a in row) for row in idx), lower, upper, label)


def _bspline_py(coef, u):
    fn = _bspline.py_func if NUMBA_ENABLED else _bspline
    return fn(coef, float(u))


def _combine_layer(n_in, n_comb, mode, lower, upper):
    reads = (tuple(range(n_comb)),)
    if mode == "sum":
        func = lambda u: np.sum(np.atleast_2d(u)[:, :n_comb], axis=1, keepdims=True)
        expr = "u_1 + ... + u_t"
    else:
        func = lambda u: np.prod(np.atleast_2d(u)[:, :n_comb], axis=1, keepdims=True)
        expr = "u_1 * ... * u_t"
    return Layer(func, reads, lower, upper, expr)


def _coef_rows(options, key, n_out, default_fn):
    raw = options.get(key)
    if raw is None:
        rows = [default_fn() for _ in range(n_out)]
    else:
        raw = [float(v) for v in raw] if np.ndim(raw) == 1 else raw
        rows = [list(raw)] * n_out if np.ndim(raw) == 1 else [list(map(float, r)) for r in raw]
    if len(rows) != n_out:
        raise ClassViolation(f"{key} needs {n_out} rows")
    width = max(len(r) for r in rows)
    out = np.zeros((n_out, width))
    for j, r in enumerate(rows):
        out[j, : len(r)] = r
    return out


def _read_indices(options, params, layer, n_out, rng):
    d_in, t = params.dims[layer], params.active[layer]
    given = options.get("coords")
    if given is not None and layer == 0:
        idx = np.asarray(given, dtype=np.int64).reshape(n_out, -1) - 1
    elif n_out == 1:
        idx = np.arange(t).reshape(1, t)
    else:
        idx = np.array([(j + np.arange(t)) % d_in for j in range(n_out)])
    if idx.shape[1] > t:
        raise ClassViolation(f"layer {layer} output reads {idx.shape[1]} coordinates but t_{layer} = {t}")
    if idx.min() < 0 or idx.max() >= d_in:
        raise ClassViolation(f"layer {layer} reads a coordinate outside 1..{d_in}")
    return idx


def build_composition(
    params: ClassParams,
    recipe: str,
    seed: int = 0,
    options: Optional[Mapping] = None,
    layers: Optional[Sequence[Layer]] = None,
) -> CompositionSpec:
    """Build a function f = g_q o ... o g_0 on [0,1]^d, zero off the cube.

    Recipes:
      * ``single-layer-polynomial`` (q = 0): f(x) = sum_{a in A} P(x_a), |A| <= t_0;
        ``options["coefs"]`` lists ascending polynomial coefficients.
      * ``additive`` (q = 1): g_0j(x) = P_j(x_{a_j}), f = sum of the first t_1 outputs.
      * ``product-of-splines`` (q = 1): g_0j is a uniform cubic B-spline in one
        coordinate, f = product of the first t_1 outputs.
      * ``custom-closure``: caller-supplied ``layers``; no compiled kernel.

    Random coefficients are drawn from ``seed`` when not supplied.
    """
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {RECIPES}")
    options = dict(options or {})
    rng = np.random.Generator(np.random.Philox(int(seed)))
    d = params.d

    if recipe == "custom-closure":
        if layers is None or len(layers) != params.q + 1:
            raise ClassViolation("custom-closure needs q+1 layers")
        for i, layer in enumerate(layers):
            if layer.n_out != params.dims[i + 1]:
                raise ClassViolation(f"layer {i} has {layer.n_out} outputs, expected d_{i + 1} = {params.dims[i + 1]}")
            for reads in layer.reads:
                if len(set(reads)) > params.active[i]:
                    raise ClassViolation(f"layer {i} output reads {len(set(reads))} > t_{i} = {params.active[i]} coordinates")
        return CompositionSpec(params, tuple(layers), recipe, None)

    if recipe == "single-layer-polynomial":
        if params.q != 0:
            raise ClassViolation("single-layer-polynomial requires q = 0")
        coef = _coef_rows(options, "coefs", 1, lambda: rng.uniform(-0.5, 0.5, 4))
        idx = _read_indices(options, params, 0, 1, rng)
        layer = _basis_layer(idx, coef, False, 0.0, 1.0, f"sum_a P(x_a), coefs={coef[0].tolist()}")
        kernel = _make_kernel(d, idx, coef, False, 0, 1)
        return CompositionSpec(params, (layer,), recipe, kernel)

    if params.q != 1:
        raise ClassViolation(f"{recipe} requires q = 1")
    n_mid, t1 = params.dims[1], params.active[1]
    idx = _read_indices(options, params, 0, n_mid, rng)
    if recipe == "additive":
        coef = _coef_rows(options, "coefs", n_mid, lambda: rng.uniform(-0.5, 0.5, 4))
        spline, mode, combine = False, "sum", 1
    else:
        knots = int(options.get("control_points", 6))
        coef = _coef_rows(options, "coefs", n_mid, lambda: rng.uniform(0.25, 1.0, knots))
        if coef.shape[1] < 4:
            raise ClassViolation("product-of-splines needs at least 4 control values")
        spline, mode, combine = True, "prod", 2
    g0 = _basis_layer(idx, coef, spline, 0.0, 1.0, f"{recipe} inner layer")
    probe = _cube_lattice(d, 4000)
    mid = g0.func(probe)
    g1 = _combine_layer(n_mid, t1, mode, float(mid.min()), float(mid.max()))
    kernel = _make_kernel(d, idx, coef, spline, combine, t1)
    return CompositionSpec(params, (g0, g1), recipe, kernel)


def _cube_lattice(d: int, target: int) -> np.ndarray:
    per_axis = max(2, int(round(target ** (1.0 / d))))
    axes = [np.linspace(0.0, 1.0, per_axis)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


# --------------------------------------------------------------------------
# confinement


@njit
def smoothstep(v):
    if v <= 0.0:
        return 0.0
    if v >= 1.0:
        return 1.0
    return v * v * v * (v * (6.0 * v - 15.0) + 10.0)


def cutoff(u: float, d: int) -> float:
    """psi(u) = S((u - d)/d): 0 for u <= d, 1 for u >= 2d, C^2, Lipschitz 15/(8d)."""
    return smoothstep((u - d) / d)


def _confined_kernel(inner, d, coord0, rate):
    @njit
    def drift(x):
        out = np.zeros(d)
        out[coord0] = inner(x)
        nrm2 = 0.0
        for a in range(d):
            nrm2 += x[a] * x[a]
        if nrm2 > 0.0:
            nrm = math.sqrt(nrm2)
            pull = rate * smoothstep((nrm - d) / d) / nrm
            for a in range(d):
                out[a] -= pull * x[a]
        return out

    return drift


@dataclass(frozen=True)
class ConfinedDrift:
    """b(x) = f(x) e_coord - r (x/|x|) psi(|x|); b(0) = f(0) e_coord."""

    inner: Callable
    coord: int
    radial_rate: float
    dim: int
    drift: Callable = field(repr=False)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.drift(np.asarray(x, dtype=np.float64)))

    def target(self, x) -> np.ndarray:
        """The regression target f_0 = b^coord restricted to the unit cube."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=1)
        out = np.zeros(x.shape[0])
        if np.any(inside):
            if isinstance(self.inner, CompositionSpec):
                # the radial cutoff vanishes for |x| <= d, which covers the cube
                out[inside] = self.inner(x[inside])
            else:
                out[inside] = np.array([self.drift(p)[self.coord - 1] for p in x[inside]])
        return out

    def model(self, sigma: float = 1.0) -> SdeModel:
        return SdeModel(
            dim=self.dim,
            drift=self.drift,
            diffusion=constant_diffusion(sigma * np.eye(self.dim)),
            name=f"confined(coord={self.coord}, r={self.radial_rate})",
        )


def confine_drift(f, coord: int, r: float, dim: Optional[int] = None) -> ConfinedDrift:
    """Wrap a cube-supported f into a drift satisfying <b(x), x> <= -r|x| for |x| > 2d.

    ``f`` is a :class:`CompositionSpec` or a closure on length-d arrays (pass
    ``dim``); numba-compiled closures keep the drift compiled.
    """
    if not (0.0 < r <= 1.0):
        raise ValueError("radial rate r must lie in (0, 1]")
    if isinstance(f, CompositionSpec):
        d = f.params.d
        scalar = f.kernel
        if scalar is None:
            spec = f
            scalar = lambda x: float(spec(x))
    else:
        if dim is None:
            raise ValueError("dim is required when f is a closure")
        d, scalar = int(dim), f
    if not 1 <= coord <= d:
        raise IndexError(f"coord {coord} outside 1..{d}")
    if is_jitted(scalar):
        drift = _confined_kernel(scalar, d, coord - 1, float(r))
    else:
        rate = float(r)

        def drift(x):
            x = np.asarray(x, dtype=np.float64)
            out = np.zeros(d)
            out[coord - 1] = scalar(x)
            nrm = float(np.sqrt(x @ x))
            if nrm > 0.0:
                out -= rate * cutoff(nrm, d) / nrm * x
            return out

    return ConfinedDrift(inner=f, coord=int(coord), radial_rate=float(r), dim=d, drift=drift)


# --------------------------------------------------------------------------
# probes and validators


def radial_probe(d: int, r_min: float, r_max: float, n_points: int = 2048, seed: int = 0) -> np.ndarray:
    """Scrambled-Sobol points with radii in (r_min, r_max] and uniform directions."""
    m = int(math.ceil(math.log2(max(n_points, 2))))
    u = qmc.Sobol(d + 1, scramble=True, seed=seed).random_base2(m)[:n_points]
    radius = r_max - (r_max - r_min) * u[:, 0]
    if d == 1:
        direction = np.where(u[:, 1:] < 0.5, -1.0, 1.0)
    else:
        z = norm.ppf(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
        direction = z / np.linalg.norm(z, axis=1, keepdims=True)
    return radius[:, None] * direction


def _eval_points(b, pts):
    return np.array([np.asarray(b(p), dtype=np.float64) for p in pts])


@dataclass(frozen=True)
class B0Report:
    radial_margin: float
    sup_margin: float
    n_points: int
    r_max: float

    @property
    def radial_ok(self) -> bool:
        return self.radial_margin <= VALIDATION_TOL

    @property
    def sup_ok(self) -> bool:
        return self.sup_margin <= VALIDATION_TOL

    @property
    def passed(self) -> bool:
        return self.radial_ok and self.sup_ok


def validate_b0(b, d: int, r: float, K: float, n_points: int = 2048, r_max: Optional[float] = None, seed: int = 0) -> B0Report:
    """Check <b(x), x> <= -r|x| for |x| > 2d and sup |b|_inf <= K on a probe.

    Margins are worst-case ``<b,x> + r|x|`` and ``|b|_inf - K``; positive means violated.
    """
    r_max = 10.0 * d if r_max is None else float(r_max)
    outer = radial_probe(d, 2.0 * d, r_max, n_points, seed)
    bo = _eval_points(b, outer)
    radial = np.einsum("ij,ij->i", bo, outer) + r * np.linalg.norm(outer, axis=1)
    inner = np.vstack([radial_probe(d, 0.0, 2.0 * d, n_points, seed + 1), _cube_lattice(d, n_points)])
    bi = _eval_points(b, inner)
    sup = max(np.abs(bo).max(), np.abs(bi).max())
    return B0Report(float(radial.max()), float(sup - K), len(outer) + len(inner), r_max)


@dataclass(frozen=True)
class ErgodicityReport:
    drift_margin: float
    lower_margin: float
    upper_margin: float
    m0: float

    @property
    def drift_ok(self) -> bool:
        return self.drift_margin <= VALIDATION_TOL

    @property
    def diffusion_ok(self) -> bool:
        return self.lower_margin <= VALIDATION_TOL and self.upper_margin <= VALIDATION_TOL

    @property
    def passed(self) -> bool:
        return self.drift_ok and self.diffusion_ok


def validate_ergodicity(
    model: SdeModel,
    r: float,
    alpha: float,
    lambdas: tuple,
    m0: Optional[float] = None,
    r_max: Optional[float] = None,
    n_points: int = 2048,
    seed: int = 0,
) -> ErgodicityReport:
    """Numeric check of the drift-pull and diffusion-nondegeneracy conditions.

    (i) <b(x), x> <= -r |x|^alpha for |x| > m0 (default 2d);
    (ii) lambda_- |x|^2 <= |Sigma(x)^T x|^2 <= lambda_+ |x|^2.
    Both lambdas, r and alpha >= 1 must be admissible or the affected condition fails.
    """
    d = model.dim
    m0 = 2.0 * d if m0 is None else float(m0)
    r_max = max(10.0 * d, 2.0 * m0) if r_max is None else float(r_max)
    lam_lo, lam_hi = (float(v) for v in lambdas)

    outer = radial_probe(d, m0, r_max, n_points, seed)
    bo = _eval_points(model.drift, outer)
    nrm = np.linalg.norm(outer, axis=1)
    drift_margin = float(np.max(np.einsum("ij,ij->i", bo, outer) + r * nrm**alpha))
    if r <= 0 or alpha < 1:
        drift_margin = max(drift_margin, math.inf)

    pts = radial_probe(d, 0.0, r_max, n_points, seed + 1)
    sig = np.array([np.asarray(model.diffusion(p), dtype=np.float64) for p in pts])
    proj = np.einsum("nji,nj->ni", sig, pts)
    q = np.sum(proj**2, axis=1)
    x2 = np.sum(pts**2, axis=1)
    scale = np.maximum(x2, 1.0)
    lower = float(np.max((lam_lo * x2 - q) / scale))
    upper = float(np.max((q - lam_hi * x2) / scale))
    if lam_lo <= 0:
        lower = math.inf
    if lam_hi <= 0:
        upper = math.inf
    return ErgodicityReport(drift_margin, lower, upper, m0)


# --------------------------------------------------------------------------
# Hölder constant


@dataclass(frozen=True)
class HolderEstimate:
    constant: float
    derivative_sup: float
    quotient_sup: float
    bounded: bool
    depends_on: int
    n_points: int


def _fd_operator(g, alpha, h):
    alpha = tuple(alpha)
    if not any(alpha):
        return g
    a = next(i for i, v in enumerate(alpha) if v > 0)
    lower = list(alpha)
    lower[a] -= 1
    inner = _fd_operator(g, lower, h)

    def deriv(x):
        e = np.zeros(x.shape[1])
        e[a] = h
        return (inner(x + e) - inner(x - e)) / (2.0 * h)

    return deriv


def _multi_indices(p: int, order: int):
    for combo in itertools.combinations_with_replacement(range(p), order):
        alpha = [0] * p
        for c in combo:
            alpha[c] += 1
        yield tuple(alpha)


def holder_constant_estimate(
    g: Callable[[np.ndarray], np.ndarray],
    beta: float,
    dim: int = 1,
    domain: tuple = (0.0, 1.0),
    level: Optional[int] = None,
    derivatives: Optional[Mapping[tuple, Callable]] = None,
    step: float = 1e-4,
) -> HolderEstimate:
    """Probe lower bound on the Hölder-ball norm of ``g`` on ``domain^dim``.

    Sums sup |d^a g| over |a| < beta, plus the Hölder quotient (sup norm in the
    denominator) of the order-floor(beta) derivatives with exponent
    beta - floor(beta). At integer beta that exponent is zero, so the quotient
    is taken instead on order beta-1 derivatives with exponent 1.

    The probe is a dyadic lattice with 2**level + 1 points per axis; raising
    ``level`` only adds points, so the estimate is nondecreasing in ``level``.
    ``g`` maps an (N, dim) array to N values.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    p = int(dim)
    if level is None:
        level = max(1, int(math.floor(math.log2(1100 ** (1.0 / p) - 1))))
    lo, hi = (float(v) for v in domain)
    axis = np.linspace(lo, hi, 2**level + 1)
    pts = np.stack(np.meshgrid(*([axis] * p), indexing="ij"), axis=-1).reshape(-1, p)
    derivatives = dict(derivatives or {})

    def partial(alpha):
        if alpha in derivatives:
            return np.asarray(derivatives[alpha](pts), dtype=np.float64)
        return np.asarray(_fd_operator(g, alpha, step)(pts), dtype=np.float64)

    if float(beta).is_integer():
        max_order, q_order, q_exp = int(beta) - 1, int(beta) - 1, 1.0
    else:
        max_order, q_order, q_exp = int(math.floor(beta)), int(math.floor(beta)), beta - math.floor(beta)

    deriv_sum = 0.0
    cache = {}
    for order in range(max_order + 1):
        for alpha in _multi_indices(p, order):
            vals = partial(alpha)
            cache[alpha] = vals
            deriv_sum += float(np.max(np.abs(vals)))

    diff = np.max(np.abs(pts[:, None, :] - pts[None, :, :]), axis=-1)
    off = diff > 0
    denom = diff[off] ** q_exp
    quot = 0.0
    for alpha in _multi_indices(p, q_order):
        vals = cache.get(alpha)
        if vals is None:
            vals = partial(alpha)
        dv = np.abs(vals[:, None] - vals[None, :])[off]
        quot += float(np.max(dv / denom)) if dv.size else 0.0

    base = cache[(0,) * p] if (0,) * p in cache else np.asarray(g(pts))
    depends = 0
    grid = np.asarray(base).reshape([len(axis)] * p)
    for a in range(p):
        depends += int(np.ptp(grid, axis=a).max() > 1e-12)
    total = deriv_sum + quot
    bounded = bool(np.isfinite(total))
    return HolderEstimate(
        constant=total if bounded else math.inf,
        derivative_sup=deriv_sum,
        quotient_sup=quot,
        bounded=bounded,
        depends_on=depends,
        n_points=len(pts),
    )
