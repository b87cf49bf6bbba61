"""Security-cost / residual-risk model and the optimal security level.

Enforcement cost is ``K(S) = c * S**gamma`` and residual cheating risk is
``R(S, tau) = L0 * exp(-lambda * tau) * exp(-S / s0)``.  Trust and security
are substitutes: the marginal value of security ``|dR/dS|`` shrinks as
``tau`` grows, so the minimiser ``S*(tau)`` of ``K + R`` falls with trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.optimize import minimize_scalar

S_TOL = 1e-10


class DomainError(ValueError):
    """Raised when a security level or trust value is negative."""


@dataclass(frozen=True)
class EnforcementParams:
    cost_coeff: float = 1.0
    cost_exponent: float = 1.0
    risk_scale: float = 100.0
    trust_sensitivity: float = 1.0
    security_scale: float = 1.0

    def __post_init__(self):
        for name in ("cost_coeff", "risk_scale", "trust_sensitivity", "security_scale"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite positive number, got {value!r}")
        if not (self.cost_exponent >= 1 and math.isfinite(self.cost_exponent)):
            raise ValueError(f"cost_exponent must be >= 1, got {self.cost_exponent!r}")


BASELINE = EnforcementParams()


@dataclass(frozen=True)
class EnforcementPoint:
    security: float
    cost: float
    residual_risk: float
    total: float


def _check_nonneg(**values: float) -> None:
    for name, value in values.items():
        if not value >= 0:
            raise DomainError(f"{name} must be non-negative, got {value!r}")


def cost(params: EnforcementParams, S: float) -> float:
    _check_nonneg(S=S)
    if S == 0:
        return 0.0
    return params.cost_coeff * S**params.cost_exponent


def marginal_cost(params: EnforcementParams, S: float) -> float:
    """K'(S)."""
    _check_nonneg(S=S)
    g = params.cost_exponent
    if g == 1:
        return params.cost_coeff
    if S == 0:
        return 0.0
    return params.cost_coeff * g * S ** (g - 1)


def residual_risk(params: EnforcementParams, S: float, tau: float) -> float:
    _check_nonneg(S=S, tau=tau)
    return params.risk_scale * math.exp(-params.trust_sensitivity * tau - S / params.security_scale)


def risk_gradient(params: EnforcementParams, S: float, tau: float) -> float:
    """dR/dS, always negative."""
    return -residual_risk(params, S, tau) / params.security_scale


def foc_residual(params: EnforcementParams, S: float, tau: float) -> float:
    """``K'(S) + dR/dS``: zero at an interior optimum, positive past it."""
    return marginal_cost(params, S) + risk_gradient(params, S, tau)


def evaluate(params: EnforcementParams, S: float, tau: float) -> EnforcementPoint:
    k = cost(params, S)
    r = residual_risk(params, S, tau)
    return EnforcementPoint(security=S, cost=k, residual_risk=r, total=k + r)


def search_upper_bound(params: EnforcementParams) -> float:
    """An upper bracket on S* valid for every tau >= 0.

    Starts from ``s0 * ln(L0 / (c * s0)) + 10 * s0`` and doubles until the
    first-order residual at tau = 0 is positive.
    """
    s0 = params.security_scale
    upper = max(s0 * math.log(params.risk_scale / (params.cost_coeff * s0)) + 10 * s0, s0)
    while foc_residual(params, upper, 0.0) <= 0:
        upper *= 2
    return upper


def closed_form_linear(params: EnforcementParams, tau: float) -> float:
    """Closed-form S* for the linear cost family (gamma = 1)."""
    if params.cost_exponent != 1:
        raise ValueError("closed form exists only for cost_exponent == 1")
    _check_nonneg(tau=tau)
    s0 = params.security_scale
    inner = params.risk_scale * math.exp(-params.trust_sensitivity * tau) / (params.cost_coeff * s0)
    return max(0.0, s0 * math.log(inner))


def optimal_security(params: EnforcementParams, tau: float) -> float:
    """Socially optimal security level for trust environment ``tau``.

    A bounded Brent minimisation on ``[0, S_max]`` locates the optimum; since
    the objective is strictly convex the first-order residual is strictly
    increasing, and a few Newton steps on it polish the interior solution to
    machine precision.
    """
    _check_nonneg(tau=tau)
    if foc_residual(params, 0.0, tau) >= 0:
        return 0.0
    upper = search_upper_bound(params)
    res = minimize_scalar(
        lambda s: cost(params, s) + residual_risk(params, s, tau),
        bounds=(0.0, upper),
        method="bounded",
        options={"xatol": S_TOL},
    )
    s = float(res.x)
    s0 = params.security_scale
    g = params.cost_exponent
    # foc is strictly increasing: keep a sign bracket and fall back to bisection
    lo, hi = 0.0, upper
    for _ in range(200):
        f = foc_residual(params, s, tau)
        if f == 0:
            break
        if f < 0:
            lo = s
        else:
            hi = s
        curvature = residual_risk(params, s, tau) / s0**2
        if g != 1 and s > 0:
            curvature += params.cost_coeff * g * (g - 1) * s ** (g - 2)
        s_next = s - f / curvature
        if not lo < s_next < hi:
            # bisect in log space: optima with cost_exponent near 1 can be astronomically small
            s_next = math.sqrt(lo * hi) if lo > 0 else hi * 1e-4
            if not lo < s_next < hi:
                s_next = 0.5 * (lo + hi)
        if abs(s_next - s) <= 4e-16 * s or hi - lo <= 4e-16 * hi:
            s = s_next
            break
        s = s_next
    return s


def comparative_statics(
    params: EnforcementParams, tau_grid: Sequence[float]
) -> list[tuple[float, float]]:
    taus = list(tau_grid)
    if not taus:
        raise ValueError("tau_grid must be non-empty")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau_grid must be strictly ascending")
    _check_nonneg(tau=taus[0])
    return [(t, optimal_security(params, t)) for t in taus]


def statics_table(params: EnforcementParams, tau_grid: Sequence[float]) -> list[dict]:
    """Rows with columns ``tau, s_star, cost, risk, total``."""
    rows = []
    for tau, s in comparative_statics(params, tau_grid):
        pt = evaluate(params, s, tau)
        rows.append(
            {"tau": tau, "s_star": s, "cost": pt.cost, "risk": pt.residual_risk, "total": pt.total}
        )
    return rows
