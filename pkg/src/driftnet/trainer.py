"""Projected gradient least-squares fitting over the sparse network class."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .relu_net import (
    Architecture,
    NetworkParams,
    grad_lsq,
    in_cube,
    init_params,
    least_squares_loss,
    project_params,
    zeros,
)
from .sde_sim import RegressionSet, derive_seed


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    Step size at iteration t is ``step_size / (1 + t / decay)``; ``decay``
    defaults to ``steps / 2``. The gradient is rescaled to norm at most
    ``max_grad_norm`` (``None`` disables this); without it the first steps on
    deep chains overshoot into the output clamp, where the gradient vanishes
    for good. ``batch=None`` means full batch. Restart 0 is
    always the zero network; restart r >= 1 uses chain sign pattern r - 1.
    """

    steps: int = 400
    step_size: float = 0.05
    decay: Optional[float] = None
    momentum: float = 0.9
    max_grad_norm: Optional[float] = 1.0
    batch: Optional[int] = None
    restarts: int = 5
    projection_every: int = 10
    relaxed_factor: int = 4
    init: str = "zeros_plus_sparse"
    extend: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be at least 1")
        if self.projection_every < 1:
            raise ValueError("projection_every must be at least 1")


@dataclass
class FitResult:
    best_params: NetworkParams
    best_loss: float
    per_restart_losses: list
    trace: list = field(default_factory=list)
    extended_losses: Optional[list] = None
    best_restart: int = 0
    zero_loss: float = 0.0


def _run(params, x, y, inside, s, cfg, rng, start, stop, state):
    """Advance one restart from iteration ``start`` to ``stop``.

    ``state`` carries velocity, the hard-phase support mask and the best
    feasible point so far; it is updated in place.
    """
    decay = cfg.decay if cfg.decay is not None else cfg.steps / 2.0
    relaxed_until = cfg.steps // 2
    flat = params.flat()
    n = len(y)
    xin, yin = x[inside], y[inside]
    out_term = float(np.dot(y[~inside], y[~inside])) / n
    n_in = len(yin)
    trace = []
    if n_in == 0:
        return params, trace

    for t in range(start, stop):
        if cfg.batch is None or cfg.batch >= n_in:
            _, grad = grad_lsq(params, xin, yin, state["mask"])
        else:
            pick = rng.integers(0, n_in, size=cfg.batch)
            _, grad = grad_lsq(params, xin[pick], yin[pick], state["mask"])
        grad *= n_in / n
        if cfg.max_grad_norm is not None:
            norm = float(np.linalg.norm(grad))
            if norm > cfg.max_grad_norm:
                grad *= cfg.max_grad_norm / norm
        eta = cfg.step_size / (1.0 + t / decay)
        state["velocity"] = cfg.momentum * state["velocity"] - eta * grad
        flat = np.clip(flat + state["velocity"], -1.0, 1.0)
        if state["mask"] is not None:
            flat = np.where(state["mask"], flat, 0.0)
        params = params.with_flat(flat)

        if (t + 1) % cfg.projection_every == 0 or t + 1 == stop:
            budget = s if t + 1 > relaxed_until else cfg.relaxed_factor * s
            params = project_params(params, budget)
            flat = params.flat()
            if t + 1 > relaxed_until:
                state["mask"] = flat != 0.0
                state["velocity"] = np.where(state["mask"], state["velocity"], 0.0)
            candidate = params if budget == s else project_params(params, s)
            cand_loss = least_squares_loss(candidate, xin, yin) * n_in / n + out_term
            if cand_loss < state["best_loss"]:
                state["best_loss"] = cand_loss
                state["best"] = candidate
            trace.append((t + 1, state["best_loss"]))
    return params, trace


def fit_least_squares(data: RegressionSet, arch: Architecture, s: int, F: float, cfg: TrainConfig) -> FitResult:
    """Minimize mean (Y - f(X))^2 over networks with at most ``s`` nonzero
    parameters bounded by 1 and outputs clamped to [-F, F].

    Every restart is projected back onto the constraint set; the returned
    network is the best feasible point seen. With ``cfg.extend`` each restart
    also continues for another ``steps`` iterations, recorded in
    ``extended_losses`` for :func:`estimate_opt_gap`.
    """
    if data.n < 1:
        raise ValueError("empty regression set")
    if s < 2:
        raise ValueError("sparsity budget s must be at least 2")
    x = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.targets, dtype=np.float64)
    inside = in_cube(x)
    n = len(y)

    zero = zeros(arch, s, F)
    zero_loss = float(np.dot(y, y)) / n
    losses, extended, trace = [zero_loss], [zero_loss], [(0, cfg.steps, zero_loss)]
    bests = [zero]

    for r in range(1, cfg.restarts):
        rseed = derive_seed(cfg.seed, r)
        rng = np.random.Generator(np.random.Philox(rseed))
        params = init_params(arch, cfg.init, seed=rseed, s=s, F=F, sign_pattern=r - 1)
        state = {
            "velocity": np.zeros(arch.n_entries),
            "mask": None,
            "best": None,
            "best_loss": np.inf,
        }
        params, tr = _run(params, x, y, inside, s, cfg, rng, 0, cfg.steps, state)
        losses.append(state["best_loss"])
        bests.append(state["best"])
        trace.extend((r, step, val) for step, val in tr)
        if cfg.extend:
            _run(params, x, y, inside, s, cfg, rng, cfg.steps, 2 * cfg.steps, state)
            extended.append(state["best_loss"])

    best = min(range(len(losses)), key=lambda i: (losses[i], i))
    return FitResult(
        best_params=bests[best],
        best_loss=float(losses[best]),
        per_restart_losses=[float(v) for v in losses],
        trace=trace,
        extended_losses=[float(v) for v in extended] if cfg.extend else None,
        best_restart=best,
        zero_loss=zero_loss,
    )


def estimate_opt_gap(fit: FitResult) -> float:
    """Surrogate optimization gap: best loss minus the lowest loss any restart
    reaches with twice the iteration budget (never negative).

    It bounds only the gap to what this optimizer can find, not to the exact
    infimum over the class.
    """
    if fit.extended_losses is None:
        raise ValueError("fit was run without the extended budget")
    floor = min(min(fit.extended_losses), fit.best_loss)
    return float(fit.best_loss - floor)
