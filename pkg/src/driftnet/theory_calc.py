"""Closed-form rate quantities and architecture selection.

``log2`` appears exactly where the depth condition and the depth constant use
base 2; every other logarithm is natural. Unknown universal constants in the
risk bounds are set to 1, so those values are structural (shape-only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .drift_models import ClassParams
from .errors import ConstraintViolation, InfeasibleArchitecture
from .relu_net import Architecture

DEFAULT_CONSTANTS = {"c_L_upper": 64.0, "c_p": 1.0, "c_s_lower": 1.0, "c_s_upper": 4.0}
_SLACK_TOL = 1e-9


@dataclass(frozen=True)
class RateParams:
    cls: ClassParams
    n: int
    delta: float
    constants: dict = field(default_factory=lambda: dict(DEFAULT_CONSTANTS))

    def __post_init__(self):
        merged = dict(DEFAULT_CONSTANTS)
        merged.update(self.constants or {})
        unknown = set(merged) - set(DEFAULT_CONSTANTS)
        if unknown:
            raise ValueError(f"unknown constants {sorted(unknown)}")
        if any(v <= 0 for v in merged.values()):
            raise ValueError("constants must be positive")
        object.__setattr__(self, "constants", merged)
        if not (0 < self.delta <= 1.0) or self.n * self.delta < 2.0:
            raise ConstraintViolation(
                f"n = {self.n}, Δ = {self.delta} violates the sampling regime (Δ ≤ 1 and nΔ ≥ 2)"
            )

    @property
    def horizon(self) -> float:
        return self.n * self.delta


def beta_star(beta, i: int) -> float:
    """beta_i * prod_{l > i} min(beta_l, 1)."""
    beta = [float(b) for b in beta]
    if not 0 <= i < len(beta):
        raise IndexError(f"index {i} outside 0..{len(beta) - 1}")
    out = beta[i]
    for b in beta[i + 1 :]:
        out *= min(b, 1.0)
    return out


def rate_exponents(cls: ClassParams) -> list[float]:
    """Per-layer exponents -2 beta_i* / (2 beta_i* + t_i)."""
    out = []
    for i, t in enumerate(cls.active):
        bs = beta_star(cls.smooth, i)
        out.append(-2.0 * bs / (2.0 * bs + t))
    return out


def critical_index(cls: ClassParams) -> int:
    """Smallest i minimizing beta_i* / (2 beta_i* + t_i), i.e. the slowest layer."""
    exps = rate_exponents(cls)
    worst = max(exps)
    return next(i for i, e in enumerate(exps) if e >= worst - 1e-15 * max(1.0, abs(worst)))


def theory_exponent(cls: ClassParams) -> float:
    return rate_exponents(cls)[critical_index(cls)]


def phi_n(rate: RateParams | ClassParams, horizon: float | None = None) -> tuple[float, int]:
    """max_i (n Delta)^{-2 beta_i*/(2 beta_i* + t_i)} and the index attaining it.

    Accepts a :class:`RateParams`, or a :class:`ClassParams` plus ``horizon`` = nΔ.
    """
    if isinstance(rate, RateParams):
        cls, horizon = rate.cls, rate.horizon
    else:
        cls = rate
    if horizon is None or horizon < 1.0:
        raise ValueError("nΔ must be at least 1")
    i = critical_index(cls)
    return float(horizon ** rate_exponents(cls)[i]), i


def c_l_lower(cls: ClassParams) -> float:
    """sum_i (beta_i + t_i)/t_i * log2(max(4 t_i, 4 beta_i))."""
    return float(
        sum((b + t) / t * math.log2(max(4.0 * t, 4.0 * b)) for b, t in zip(cls.smooth, cls.active))
    )


def covering_bound(delta: float, L: int, d: int, s: int) -> float:
    """(s+1) log(2^{2L+6} delta^{-1} (L+1) d^2 s^{2L}), natural log, for 0 < delta < 1."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if s < 2:
        raise ValueError("s must be at least 2")
    log_arg = (2 * L + 6) * math.log(2.0) - math.log(delta) + math.log(L + 1) + 2 * math.log(d) + 2 * L * math.log(s)
    return (s + 1) * log_arg


def oracle_remainder(n: int, delta: float, s: int, L: int, F: float) -> float:
    """F^2 (s (L log s + log nΔ) log(nΔ) / (nΔ) + Δ), leading constant set to 1."""
    horizon = n * delta
    if horizon < 2.0 or not (0 < delta <= 1.0):
        raise ConstraintViolation(f"nΔ = {horizon:g}, Δ = {delta:g} violates the sampling regime (Δ ≤ 1 and nΔ ≥ 2)")
    if s < 2 or F < 1:
        raise ValueError("requires s >= 2 and F >= 1")
    lt = math.log(horizon)
    return F**2 * (s * (L * math.log(s) + lt) * lt / horizon + delta)


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    slack: float
    detail: str


@dataclass(frozen=True)
class ConditionReport:
    conditions: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _bounds(rate: RateParams):
    phi, _ = phi_n(rate)
    scale = rate.horizon * phi
    c = rate.constants
    q = rate.cls.q
    depth_lo = 11 * q + 8 + c_l_lower(rate.cls) * math.log2(scale)
    depth_hi = c["c_L_upper"] * scale
    width_lo = c["c_p"] * scale
    log_h = math.log(rate.horizon)
    s_lo = c["c_s_lower"] * scale * log_h
    s_hi = c["c_s_upper"] * scale * log_h
    return depth_lo, depth_hi, width_lo, s_lo, s_hi


def check_conditions(arch: Architecture, s: int, rate: RateParams, F: float, K: float) -> ConditionReport:
    """Evaluate the four architecture conditions; slack >= 0 means satisfied."""
    depth_lo, depth_hi, width_lo, s_lo, s_hi = _bounds(rate)
    L = arch.depth
    min_width = min(arch.widths[1:-1])
    rows = [
        ("i", F - max(K, 1.0), f"F = {F:g} vs K ∨ 1 = {max(K, 1.0):g}"),
        ("ii", min(L - depth_lo, depth_hi - L), f"{depth_lo:.4f} ≤ L = {L} ≤ {depth_hi:.4f}"),
        ("iii", min_width - width_lo, f"min width {min_width} ≥ {width_lo:.4f}"),
        ("iv", min(s - s_lo, s_hi - s), f"{s_lo:.4f} ≤ s = {s} ≤ {s_hi:.4f}"),
    ]
    return ConditionReport(tuple(Condition(n, sl >= -_SLACK_TOL, float(sl), d) for n, sl, d in rows))


def select_architecture(rate: RateParams, F: float, K: float) -> tuple[Architecture, int]:
    """Smallest admissible depth, width ceil(c_p nΔ phi_n) ∨ d, sparsity at the lower sandwich end.

    Raises:
        InfeasibleArchitecture: the constants leave no admissible value for some condition.
    """
    c = rate.constants
    if c["c_s_lower"] > c["c_s_upper"]:
        raise InfeasibleArchitecture("iv", "c_s_lower exceeds c_s_upper")
    depth_lo, depth_hi, width_lo, s_lo, _ = _bounds(rate)
    L = max(int(math.ceil(depth_lo - 1e-12)), 1)
    width = max(int(math.ceil(width_lo - 1e-12)), rate.cls.d)
    s = max(int(math.ceil(s_lo - 1e-12)), 2)
    arch = Architecture.uniform(rate.cls.d, L, width)
    report = check_conditions(arch, s, rate, F, K)
    for cond in report.conditions:
        if not cond.passed:
            raise InfeasibleArchitecture(cond.name, f"condition ({cond.name}) has no admissible value: {cond.detail}")
    return arch, s


def theory_report(rate: RateParams, F: float, K: float) -> dict:
    """Labeled key/value summary of every closed-form quantity for one design."""
    cls = rate.cls
    phi, istar = phi_n(rate)
    out = {"n": rate.n, "delta": rate.delta, "n_delta": rate.horizon}
    for i in range(cls.q + 1):
        out[f"beta_star[{i}]"] = beta_star(cls.smooth, i)
    out.update(
        phi_n=phi,
        i_star=istar,
        rate_exponent=theory_exponent(cls),
        c_L_lower=c_l_lower(cls),
    )
    for k, v in rate.constants.items():
        out[k] = v
    try:
        arch, s = select_architecture(rate, F, K)
    except InfeasibleArchitecture as exc:
        out["architecture"] = f"infeasible: {exc}"
        return out
    out.update(L=arch.depth, width=arch.widths[1], s=s, F=F)
    out["covering_bound(delta=1/(nΔ))"] = covering_bound(1.0 / rate.horizon, arch.depth, cls.d, s) if rate.horizon > 1 else math.nan
    out["oracle_remainder (up to constants)"] = oracle_remainder(rate.n, rate.delta, s, arch.depth, F)
    out["phi_n*L*log^3(nΔ) (up to constants)"] = phi * arch.depth * math.log(rate.horizon) ** 3
    out["phi_n*log^4(nΔ) (up to constants)"] = phi * math.log(rate.horizon) ** 4
    for cond in check_conditions(arch, s, rate, F, K).conditions:
        out[f"condition_{cond.name}"] = f"{'pass' if cond.passed else 'fail'} (slack {cond.slack:.4g})"
    return out
