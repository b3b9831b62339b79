"""Euler-Maruyama simulation of dX = b(X) dt + Sigma(X) dw and drift regression data.

Random numbers come from numpy's counter-based ``Philox`` bit generator.
Noise is drawn in blocks outside the integrator kernel, so the numba and
numpy code paths consume the same stream.
"""

from __future__ import annotations

import functools
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Optional, Sequence

import numpy as np

from ._accel import NUMBA_ENABLED, is_jitted, njit
from .errors import ConstraintViolation, SimulationExplosion

EXPLOSION_LIMIT = 1.0e6
DEFAULT_SUBSTEPS = 50
PATH_MAGIC = b"DRFTPATH1"

_MASK64 = (1 << 64) - 1
# upper bound on normals held in memory per block
_BLOCK_NORMALS = 1 << 20


@dataclass(frozen=True)
class SdeModel:
    """Drift and diffusion coefficients of a ``dim``-dimensional diffusion.

    ``drift`` maps a length-``dim`` float array to a length-``dim`` array and
    ``diffusion`` maps it to a ``(dim, dim)`` array. Passing numba-compiled
    functions lets the integrator run fully compiled.
    """

    dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    lipschitz_hint: Optional[tuple] = None
    sup_hint: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    @property
    def compiled(self) -> bool:
        return is_jitted(self.drift) and is_jitted(self.diffusion)

    def check_coefficients(self, points: np.ndarray) -> None:
        """Raise if drift or diffusion is non-finite at any probe point, or if a
        supplied drift Lipschitz hint is exceeded by a difference quotient."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        bs = np.array([np.asarray(self.drift(p), dtype=np.float64) for p in points])
        ss = np.array([np.asarray(self.diffusion(p), dtype=np.float64) for p in points])
        if bs.shape != (len(points), self.dim) or ss.shape != (len(points), self.dim, self.dim):
            raise ValueError("coefficient output has the wrong shape")
        if not (np.all(np.isfinite(bs)) and np.all(np.isfinite(ss))):
            raise ValueError("coefficients are not finite on the probe set")
        if self.lipschitz_hint is not None:
            lb = float(self.lipschitz_hint[0])
            dx = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
            db = np.linalg.norm(bs[:, None, :] - bs[None, :, :], axis=-1)
            off = dx > 0
            worst = np.max(db[off] / dx[off]) if np.any(off) else 0.0
            if worst > lb * (1 + 1e-6):
                raise ValueError(f"drift difference quotient {worst:.6g} exceeds Lipschitz hint {lb:.6g}")


@dataclass(frozen=True)
class ObservedPath:
    delta: float
    obs: np.ndarray
    seed: int
    substeps: int

    @property
    def n(self) -> int:
        return self.obs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.obs.shape[1]


@dataclass(frozen=True)
class RegressionSet:
    """Pairs (X_{k delta}, Y_{k delta}); ``coord`` is 1-based."""

    coord: int
    inputs: np.ndarray
    targets: np.ndarray
    delta: float

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    def subset(self, index) -> "RegressionSet":
        return RegressionSet(self.coord, self.inputs[index], self.targets[index], self.delta)


# --------------------------------------------------------------------------
# coefficient helpers


def constant_drift(value: Sequence[float]) -> Callable:
    c = np.asarray(value, dtype=np.float64).copy()

    @njit
    def drift(x):
        return c.copy()

    return drift


def linear_drift(matrix) -> Callable:
    """b(x) = A x."""
    a = np.atleast_2d(np.asarray(matrix, dtype=np.float64)).copy()

    rows, cols = a.shape

    @njit
    def drift(x):
        out = np.zeros(rows)
        for i in range(rows):
            for j in range(cols):
                out[i] += a[i, j] * x[j]
        return out

    return drift


def constant_diffusion(matrix) -> Callable:
    s = np.atleast_2d(np.asarray(matrix, dtype=np.float64)).copy()

    @njit
    def diffusion(x):
        return s

    return diffusion


@functools.lru_cache(maxsize=64)
def ou_model(theta: float = 1.0, sigma: float = 1.0, dim: int = 1) -> SdeModel:
    """Isotropic Ornstein-Uhlenbeck model b(x) = -theta x, Sigma = sigma I.

    Cached so repeated calls reuse the compiled coefficient functions.
    """
    eye = np.eye(dim)
    return SdeModel(
        dim=dim,
        drift=linear_drift(-theta * eye),
        diffusion=constant_diffusion(sigma * eye),
        lipschitz_hint=(abs(theta), 0.0),
        name=f"ou(theta={theta}, sigma={sigma})",
    )


# --------------------------------------------------------------------------
# seeds


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th independent stream: ``seed XOR splitmix64(index)``."""
    return (int(seed) & _MASK64) ^ _splitmix64(int(index))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))


# --------------------------------------------------------------------------
# integrator kernels


@njit
def _em_block_compiled(drift, diffusion, x, noise, h, sqrt_h, out, limit):
    nobs, m, d = noise.shape
    xn = np.empty(d)
    for i in range(nobs):
        for j in range(m):
            b = drift(x)
            s = diffusion(x)
            norm2 = 0.0
            for a in range(d):
                acc = 0.0
                for c in range(d):
                    acc += s[a, c] * noise[i, j, c]
                xn[a] = x[a] + b[a] * h + acc * sqrt_h
                norm2 += xn[a] * xn[a]
            if not (norm2 <= limit * limit):
                return i
            for a in range(d):
                x[a] = xn[a]
        for a in range(d):
            out[i, a] = x[a]
    return -1


def _em_block_numpy(drift, diffusion, x, noise, h, sqrt_h, out, limit):
    nobs, m, _ = noise.shape
    for i in range(nobs):
        for j in range(m):
            xn = x + np.asarray(drift(x)) * h + (np.asarray(diffusion(x)) @ noise[i, j]) * sqrt_h
            if not (xn @ xn <= limit * limit):
                return i
            x[:] = xn
        out[i] = x
    return -1


def _pick_kernel(model: SdeModel):
    if NUMBA_ENABLED and model.compiled:
        return _em_block_compiled
    return _em_block_numpy


def simulate_path(
    model: SdeModel,
    x0,
    n: int,
    delta: float,
    substeps: int = DEFAULT_SUBSTEPS,
    seed: int = 0,
) -> ObservedPath:
    """Integrate with step ``delta / substeps`` and record every ``delta``.

    Raises:
        ConstraintViolation: ``delta`` outside (0, 1] or bad counts.
        SimulationExplosion: the state became non-finite or exceeded 1e6 in norm.
    """
    delta = float(delta)
    if not (0.0 < delta <= 1.0):
        raise ConstraintViolation(f"observation interval {delta} violates Δ ≤ 1 and Δ > 0")
    n, substeps = int(n), int(substeps)
    if n < 1 or substeps < 1:
        raise ConstraintViolation("n and substeps must be at least 1")
    d = model.dim
    x = np.array(x0, dtype=np.float64).reshape(d).copy()
    if not np.all(np.isfinite(x)):
        raise SimulationExplosion(0, "initial state is not finite")

    obs = np.empty((n + 1, d))
    obs[0] = x
    h = delta / substeps
    sqrt_h = float(np.sqrt(h))
    kernel = _pick_kernel(model)
    rng = _rng(seed)
    block = max(1, _BLOCK_NORMALS // (substeps * d))
    done = 0
    while done < n:
        k = min(block, n - done)
        noise = rng.standard_normal((k, substeps, d))
        status = kernel(model.drift, model.diffusion, x, noise, h, sqrt_h, obs[done + 1 : done + 1 + k], EXPLOSION_LIMIT)
        if status >= 0:
            raise SimulationExplosion(done + status + 1)
        done += k
    return ObservedPath(delta=delta, obs=obs, seed=int(seed), substeps=substeps)


def point_mass(x0) -> Callable[[np.random.Generator], np.ndarray]:
    x0 = np.asarray(x0, dtype=np.float64).copy()

    def sampler(rng):
        return x0.copy()

    return sampler


def _initial_state(x0_sampler, d: int, seed: int) -> np.ndarray:
    if x0_sampler is None:
        return np.zeros(d)
    if not callable(x0_sampler):
        return np.asarray(x0_sampler, dtype=np.float64).reshape(d)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & _MASK64, 0x5EED])))
    return np.asarray(x0_sampler(rng), dtype=np.float64).reshape(d)


def simulate_copies(
    model: SdeModel,
    x0_sampler,
    n: int,
    delta: float,
    substeps: int = DEFAULT_SUBSTEPS,
    count: int = 1,
    seed: int = 0,
) -> list[ObservedPath]:
    """``count`` independent paths; path ``j`` uses ``derive_seed(seed, j)``.

    ``x0_sampler`` is ``None`` (start at the origin), a fixed point, or a
    callable taking a ``numpy.random.Generator``.
    """
    return list(iter_copies(model, x0_sampler, n, delta, substeps, count, seed))


def iter_copies(model, x0_sampler, n, delta, substeps=DEFAULT_SUBSTEPS, count=1, seed=0):
    """Lazy version of :func:`simulate_copies`; yields one path at a time."""
    if int(count) < 1:
        raise ConstraintViolation("count must be at least 1")
    for j in range(int(count)):
        sj = derive_seed(seed, j)
        x0 = _initial_state(x0_sampler, model.dim, sj)
        yield simulate_path(model, x0, n, delta, substeps, sj)


def make_regression_set(path: ObservedPath, coord: int) -> RegressionSet:
    """Targets ``(X^i_{(k+1)delta} - X^i_{k delta}) / delta`` for the 1-based ``coord``."""
    if not 1 <= coord <= path.dim:
        raise IndexError(f"coord {coord} outside 1..{path.dim}")
    if path.obs.shape[0] < 2:
        raise ConstraintViolation("path needs at least two observations")
    col = path.obs[:, coord - 1]
    targets = (col[1:] - col[:-1]) / path.delta
    return RegressionSet(coord=int(coord), inputs=path.obs[:-1], targets=targets, delta=path.delta)


def check_sampling(n: int, delta: float) -> None:
    """Require Δ ≤ 1 and nΔ ≥ 2 for estimation."""
    problems = []
    if not (0.0 < delta <= 1.0):
        problems.append(f"Δ = {delta}")
    if n * delta < 2.0:
        problems.append(f"nΔ = {n * delta:g}")
    if problems:
        raise ConstraintViolation(f"{', '.join(problems)} violates the sampling regime (Δ ≤ 1 and nΔ ≥ 2)")


def ou_reference_moments(theta: float, sigma: float, x0: float, t: float) -> tuple[float, float]:
    """Exact mean and variance of the OU process dX = -theta X dt + sigma dw at time t."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    mean = x0 * np.exp(-theta * t)
    var = sigma**2 * -np.expm1(-2.0 * theta * t) / (2.0 * theta)
    return float(mean), float(var)


# --------------------------------------------------------------------------
# binary dump: magic, then little-endian u64 d, u64 n, f64 delta, u64 seed,
# u64 substeps, then (n+1) x d row-major f64 observations

_HEADER = struct.Struct("<QQdQQ")


def write_path(path: ObservedPath, fh: BinaryIO) -> None:
    fh.write(PATH_MAGIC)
    fh.write(_HEADER.pack(path.dim, path.n, path.delta, path.seed & _MASK64, path.substeps))
    fh.write(np.ascontiguousarray(path.obs, dtype="<f8").tobytes())


def read_path(fh: BinaryIO) -> ObservedPath:
    magic = fh.read(len(PATH_MAGIC))
    if magic != PATH_MAGIC:
        raise ValueError("not a DRFTPATH1 file")
    d, n, delta, seed, m = _HEADER.unpack(fh.read(_HEADER.size))
    raw = fh.read(8 * d * (n + 1))
    if len(raw) != 8 * d * (n + 1):
        raise ValueError("truncated path file")
    obs = np.frombuffer(raw, dtype="<f8").reshape(n + 1, d).astype(np.float64)
    return ObservedPath(delta=delta, obs=obs, seed=seed, substeps=m)
