"""Risk estimates for drift estimators and log-log rate sweeps.

Every Monte Carlo estimate is reported together with its standard error.
Estimators and targets are callables mapping an (N, d) array to N values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .drift_models import ClassParams
from .relu_net import Network
from .sde_sim import (
    DEFAULT_SUBSTEPS,
    ObservedPath,
    SdeModel,
    derive_seed,
    iter_copies,
    make_regression_set,
    simulate_path,
    _initial_state,
)
from .theory_calc import RateParams, oracle_remainder, phi_n, select_architecture, theory_exponent
from .trainer import TrainConfig, estimate_opt_gap, fit_least_squares

CSV_COLUMNS = (
    "n",
    "delta",
    "n_delta",
    "seed",
    "emp_risk",
    "gen_risk",
    "gen_stderr",
    "psi_hat",
    "phi_n",
    "remainder",
    "L",
    "width",
    "s",
    "F",
    "status",
)
CSV_VERSION = 1

# stream offsets keeping training paths, evaluation copies and initial states apart
_COPY_STREAM = 0x0C0FFEE
_TRAIN_STREAM = 0x7EA1


@dataclass(frozen=True)
class RiskEstimate:
    estimate: float
    stderr: float
    copies: int


@dataclass(frozen=True)
class RiskReport:
    """Risks, theory values and design metadata for one fitted estimator."""

    empirical: float
    generalization: RiskEstimate
    psi_hat: float
    phi_n: float
    remainder: float
    n: int
    delta: float
    seed: int
    L: int
    width: int
    s: int
    F: float
    l2_pi: Optional[RiskEstimate] = None

    def __post_init__(self):
        risks = [self.empirical, self.generalization.estimate, self.generalization.stderr]
        if self.l2_pi is not None:
            risks += [self.l2_pi.estimate, self.l2_pi.stderr]
        if any(r < 0 for r in risks):
            raise ValueError("risks and standard errors must be nonnegative")

    @classmethod
    def from_row(cls, row: dict, copies: int, l2_pi: Optional[RiskEstimate] = None) -> "RiskReport":
        if row.get("status") != "ok":
            raise ValueError(f"row is not a successful fit: {row.get('status')}")
        gen = RiskEstimate(float(row["gen_risk"]), float(row["gen_stderr"]), int(copies))
        return cls(
            float(row["emp_risk"]), gen, float(row["psi_hat"]), float(row["phi_n"]), float(row["remainder"]),
            int(row["n"]), float(row["delta"]), int(row["seed"]), int(row["L"]), int(row["width"]),
            int(row["s"]), float(row["F"]), l2_pi,
        )


def _sq_error(fhat, f0, x):
    diff = np.asarray(fhat(x), dtype=np.float64) - np.asarray(f0(x), dtype=np.float64)
    return diff * diff


def empirical_risk(fhat, f0, path: ObservedPath) -> float:
    """(1/n) sum_{k<n} (fhat(X_k) - f0(X_k))^2 over the observed path."""
    if path.obs.shape[0] < 2:
        raise ValueError("path needs at least two observations")
    return float(np.mean(_sq_error(fhat, f0, path.obs[:-1])))


def generalization_risk(
    fhat,
    f0,
    model: SdeModel,
    n: int,
    delta: float,
    substeps: int = DEFAULT_SUBSTEPS,
    copies: int = 4,
    seed: int = 0,
    x0_sampler=None,
) -> RiskEstimate:
    """Average squared error along ``copies`` fresh, independent paths."""
    if copies < 2:
        raise ValueError("need at least two copies for a standard error")
    per_path = np.array(
        [
            np.mean(_sq_error(fhat, f0, p.obs[:-1]))
            for p in iter_copies(model, x0_sampler, n, delta, substeps, copies, seed)
        ]
    )
    return RiskEstimate(float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(copies)), int(copies))


def l2_pi_risk(
    fhat,
    f0,
    model: SdeModel,
    burn_in: Optional[float],
    horizon: float,
    delta: float,
    seed: int = 0,
    substeps: int = DEFAULT_SUBSTEPS,
    x0=None,
    batches: int = 20,
) -> RiskEstimate:
    """Ergodic time average of (fhat - f0)^2 after a burn-in, as a proxy for
    the integral against the invariant law. ``burn_in`` and ``horizon`` are in
    time units; ``burn_in=None`` uses 10% of the horizon but at least 100
    observation intervals. The standard error comes from ``batches``
    contiguous batch means.
    """
    if burn_in is None:
        burn_in = max(0.1 * horizon, 100 * delta)
    skip = int(round(burn_in / delta))
    keep = int(round(horizon / delta))
    if keep < batches:
        raise ValueError("horizon too short for the requested batches")
    x0 = np.zeros(model.dim) if x0 is None else x0
    path = simulate_path(model, x0, skip + keep, delta, substeps, seed)
    err = _sq_error(fhat, f0, path.obs[skip + 1 :])
    means = np.array([b.mean() for b in np.array_split(err, batches)])
    return RiskEstimate(float(err.mean()), float(means.std(ddof=1) / math.sqrt(batches)), int(batches))


# --------------------------------------------------------------------------
# slopes


def fit_loglog(horizons: Sequence[float], risks: Sequence[float]) -> dict:
    """Least-squares line through (ln nΔ, ln risk), skipping nonpositive risks."""
    h = np.asarray(horizons, dtype=np.float64)
    r = np.asarray(risks, dtype=np.float64)
    keep = np.isfinite(r) & (r > 0)
    out = {"points": int(keep.sum()), "excluded": int((~keep).sum())}
    if keep.sum() < 2:
        out.update(slope=math.nan, intercept=math.nan, defined=False)
        return out
    design = np.column_stack([np.ones(keep.sum()), np.log(h[keep])])
    coef, *_ = np.linalg.lstsq(design, np.log(r[keep]), rcond=None)
    out.update(slope=float(coef[1]), intercept=float(coef[0]), defined=True)
    return out


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class DriftFamily:
    """A simulated model together with the estimation target for one coordinate."""

    model: SdeModel
    target: Callable[[np.ndarray], np.ndarray]
    coord: int = 1
    x0: object = None
    sup_bound: float = 1.0
    holder_k: float = 1.0

    @classmethod
    def from_confined(cls, confined, sigma: float = 1.0, x0=None, holder_k: Optional[float] = None) -> "DriftFamily":
        k = float(holder_k) if holder_k is not None else 1.0
        return cls(confined.model(sigma), confined.target, confined.coord, x0, max(k, 1.0), k)


@dataclass(frozen=True)
class Cell:
    n: int
    delta: float
    substeps: int = DEFAULT_SUBSTEPS

    @property
    def horizon(self) -> float:
        return self.n * self.delta


def network_estimator(cls: ClassParams, cfg: TrainConfig, constants: Optional[dict] = None, arch=None, s=None):
    """Estimator hook that fits a network with an auto-selected (or fixed) architecture."""

    def estimate(data, cell: Cell, seed: int, family: DriftFamily):
        F = family.sup_bound
        if arch is None:
            rate = RateParams(cls, cell.n, cell.delta, constants or {})
            use_arch, use_s = select_architecture(rate, F, family.holder_k)
        else:
            use_arch, use_s = arch, s
        run_cfg = TrainConfig(**{**cfg.__dict__, "seed": derive_seed(seed, _TRAIN_STREAM)})
        fit = fit_least_squares(data, use_arch, use_s, F, run_cfg)
        info = {
            "psi_hat": estimate_opt_gap(fit) if run_cfg.extend else math.nan,
            "L": use_arch.depth,
            "width": use_arch.widths[1],
            "s": use_s,
            "F": F,
            "params": fit.best_params,
        }
        return Network(fit.best_params), info

    return estimate


def run_cell(family: DriftFamily, cls: ClassParams, cell: Cell, seed: int, estimator, copies: int, constants=None) -> dict:
    """Simulate, estimate and score one (cell, seed); returns one CSV row."""
    row = {k: "" for k in CSV_COLUMNS}
    row.update(n=cell.n, delta=cell.delta, n_delta=cell.horizon, seed=seed)
    rate = RateParams(cls, cell.n, cell.delta, constants or {})
    row["phi_n"] = phi_n(rate)[0]
    x0 = _initial_state(family.x0, family.model.dim, derive_seed(seed, _TRAIN_STREAM))
    path = simulate_path(family.model, x0, cell.n, cell.delta, cell.substeps, seed)
    data = make_regression_set(path, family.coord)
    fhat, info = estimator(data, cell, seed, family)
    gen = generalization_risk(
        fhat, family.target, family.model, cell.n, cell.delta, cell.substeps, copies,
        derive_seed(seed, _COPY_STREAM), family.x0,
    )
    row.update(
        emp_risk=empirical_risk(fhat, family.target, path),
        gen_risk=gen.estimate,
        gen_stderr=gen.stderr,
        psi_hat=info.get("psi_hat", math.nan),
        L=info.get("L", ""),
        width=info.get("width", ""),
        s=info.get("s", ""),
        F=info.get("F", ""),
        status="ok",
    )
    if info.get("s") and info.get("L") and info["s"] >= 2 and info["F"] >= 1:
        row["remainder"] = oracle_remainder(cell.n, cell.delta, info["s"], info["L"], info["F"])
    else:
        row["remainder"] = math.nan
    return row


@dataclass
class SweepResult:
    rows: list
    cell_means: list
    slope: float
    intercept: float
    slope_defined: bool
    exponent: float
    excluded: int = 0
    failed: int = 0


def summarize(rows: Sequence[dict], cls: ClassParams) -> SweepResult:
    by_cell = {}
    for row in rows:
        if row.get("status") != "ok":
            continue
        by_cell.setdefault((row["n"], row["delta"]), []).append(float(row["gen_risk"]))
    cells = sorted(by_cell, key=lambda c: (c[0] * c[1], c[0]))
    means = [(c[0] * c[1], float(np.mean(by_cell[c]))) for c in cells]
    fit = fit_loglog([m[0] for m in means], [m[1] for m in means])
    failed = sum(1 for r in rows if r.get("status") != "ok")
    return SweepResult(
        rows=list(rows),
        cell_means=means,
        slope=fit["slope"],
        intercept=fit["intercept"],
        slope_defined=fit["defined"],
        exponent=theory_exponent(cls),
        excluded=fit["excluded"],
        failed=failed,
    )


def rate_sweep(
    family: DriftFamily,
    cls: ClassParams,
    grid: Sequence[Cell],
    train_cfg: TrainConfig,
    seeds: Sequence[int],
    estimator=None,
    copies: int = 4,
    constants: Optional[dict] = None,
) -> SweepResult:
    """Mean generalization risk per grid cell and the fitted log-log slope
    against nΔ, alongside the theoretical exponent."""
    grid = [c if isinstance(c, Cell) else Cell(*c) for c in grid]
    if len(grid) < 3:
        raise ValueError("a rate sweep needs at least 3 grid cells")
    horizons = [c.horizon for c in grid]
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("grid must have strictly increasing nΔ")
    if estimator is None:
        estimator = network_estimator(cls, train_cfg, constants)
    rows = [run_cell(family, cls, c, s, estimator, copies, constants) for c in grid for s in seeds]
    return summarize(rows, cls)
