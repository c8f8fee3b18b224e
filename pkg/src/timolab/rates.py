"""Comparison-principle machinery for lower energy-decay envelopes.

Once the shifted energy has dropped below the threshold (r0^2/gamma)^2 at
some time T0, the decay of the shifted energy Ecal is bounded from below in
two equivalent ways built from the convexity surrogate Psi of the damping
law:

* the K-form:    Ecal(t) >= (1/gamma^2) K^{-1}(sigma (t - T0))^2, where
  K(chi) = int_chi^{gamma sqrt(Ecal(T0))} dy / Psi(y);
* the Psi'-form: Ecal(t) >= (1/(gamma C)^2) (Psi'^{-1}(1/(t - T0)))^2,

with gamma = (4/rho2) sqrt(Estar(0)) and
sigma = alpha_a/rho2 + beta r0 / (tau C1).  The module evaluates both
envelopes, solves the scalar comparison ODE z' + kappa Psi(z) = 0 that
underlies them, and fits decay exponents on log-log windows.

The constants C1 and C_cal are not pinned by the decay theory (it only
asserts their existence); defaults are derived from the law and from a
one-point calibration, and both are overridable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .laws import (DampingLaw, DomainError, SingularityError, eval_g,
                   eval_psi, eval_psi_prime, _reciprocal_psi_integral)


@dataclass(frozen=True)
class EnvelopeParams:
    """Constants entering the lower envelopes."""

    gamma: float
    sigma: float
    T0: float
    r0: float
    C1: float
    C_cal: float
    E_cal_T0: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.sigma > 0 and self.C1 > 0
                and self.C_cal > 0):
            raise ValueError("gamma, sigma, C1, C_cal must be positive")
        if self.T0 < 0 or self.E_cal_T0 < 0:
            raise ValueError("T0 and E_cal_T0 must be nonnegative")


def gamma_const(Estar0: float, rho2: float) -> float:
    """gamma = (4/rho2) sqrt(Estar(0))."""
    if Estar0 < 0 or rho2 <= 0:
        raise ValueError("need Estar0 >= 0 and rho2 > 0")
    return (4.0 / rho2) * math.sqrt(Estar0)


def sigma_const(alpha_a: float, rho2: float, beta: float, r0: float,
                tau: float, C1: float) -> float:
    """sigma = alpha_a / rho2 + beta r0 / (tau C1)."""
    if alpha_a < 0:
        raise ValueError("alpha_a must be nonnegative")
    for name, val in (("rho2", rho2), ("beta", beta), ("r0", r0),
                      ("tau", tau), ("C1", C1)):
        if val <= 0:
            raise ValueError(f"{name} must be positive")
    return alpha_a / rho2 + beta * r0 / (tau * C1)


def default_C1(law: DampingLaw, eps: float = 0.5) -> float:
    """The linear-minorant constant used in sigma.

    For laws linear near the origin this is the fitted slope g(eps)/eps;
    otherwise the minorant slope g0(eps1)/eps with eps1 = min(r0, g0(r0)).
    """
    if law.linear_near_origin:
        return float(eval_g(law, eps)) / eps
    eps1 = min(law.r0, float(law.g0(law.r0)))
    return float(law.g0(eps1)) / eps


def K(chi: float, upper: float, law: DampingLaw) -> float:
    """K(chi) = int_chi^upper dy / Psi(y), strictly decreasing in chi.

    The quadrature runs in the variable u = ln y, which keeps the
    integrand finite even when Psi vanishes rapidly at 0.
    """
    if chi <= 0:
        raise DomainError("K needs chi > 0 (the integrand may blow up at 0)")
    if chi > upper * (1.0 + 1e-14):
        raise DomainError("K needs chi <= upper")
    if chi >= upper:
        return 0.0
    return _reciprocal_psi_integral(law, chi, upper)


def K_inverse(v: float, upper: float, law: DampingLaw) -> float:
    """The chi in (0, upper] with K(chi) = v, by bisection in ln chi.

    Returns 0.0 when v exceeds every attainable K value (possible only
    when the integral converges at 0), signalling the domain infimum.
    """
    if v < 0:
        raise DomainError("K_inverse needs v >= 0")
    if v == 0.0:
        return upper
    lo = upper
    for _ in range(1000):
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
        if K(lo, upper, law) >= v:
            break
    else:
        return 0.0
    hi = min(2.0 * lo, upper)
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(200):
        lmid = 0.5 * (llo + lhi)
        if K(math.exp(lmid), upper, law) > v:
            llo = lmid
        else:
            lhi = lmid
        if lhi - llo <= 1e-10:
            break
    chi = math.exp(0.5 * (llo + lhi))
    kv = K(chi, upper, law)
    if kv > 0 and abs(kv - v) > 1e-6 * v:
        raise SingularityError("K bisection failed to invert (non-monotone K?)")
    return chi


def solve_comparison_ode(z0: float, kappa: float, law: DampingLaw,
                         t_grid) -> np.ndarray:
    """Solve z' + kappa Psi(z) = 0, z(0) = z0, on the given time grid.

    Integrates y = ln z (so positivity is automatic) with an adaptive
    Runge-Kutta pair; values that underflow are clamped at 1e-300.
    """
    if not 0 < z0 <= law.r0**2 * (1.0 + 1e-12):
        raise DomainError("z0 must lie in (0, r0^2]")
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be increasing and nonnegative")

    floor = math.log(1e-300)

    def f(t, y):
        z = math.exp(max(y[0], floor))
        return [-kappa * eval_psi(law, z) / z]

    t_end = float(t_grid[-1])
    sol = solve_ivp(f, (0.0, t_end) if t_end > 0 else (0.0, 1e-12),
                    [math.log(z0)], t_eval=t_grid if t_end > 0 else None,
                    method="RK45", rtol=1e-10, atol=1e-12, dense_output=False)
    if not sol.success:
        raise SingularityError(f"comparison ODE failed: {sol.message}")
    if t_end > 0:
        y = sol.y[0]
    else:
        y = np.full(t_grid.shape, math.log(z0))
    return np.exp(np.maximum(y, floor))


def lower_envelope_K(t, ep: EnvelopeParams, law: DampingLaw):
    """The K-form lower envelope (1/gamma^2) K^{-1}(sigma (t - T0))^2."""
    upper = ep.gamma * math.sqrt(ep.E_cal_T0)
    if ep.E_cal_T0 <= 0:
        raise ValueError("E_cal_T0 must be positive for the K envelope")
    scalar = np.isscalar(t)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < ep.T0 - 1e-12):
        raise DomainError("the K envelope is defined for t >= T0")
    out = np.array([(K_inverse(ep.sigma * max(ti - ep.T0, 0.0), upper, law)
                     / ep.gamma)**2 for ti in ts])
    return float(out[0]) if scalar else out


def psi_prime_inverse(y: float, law: DampingLaw) -> float:
    """The x in (0, r0^2] with Psi'(x) = y, by bisection (Psi' increasing)."""
    r2 = law.r0**2
    top = eval_psi_prime(law, r2)
    if y > top * (1.0 + 1e-12):
        raise DomainError(
            f"Psi' never reaches {y:g} on (0, r0^2] (max {top:g}); t too small")
    if y <= 0:
        raise DomainError("Psi'^{-1} needs a positive argument")
    lo, hi = r2 * 1e-280, r2
    if eval_psi_prime(law, lo) > y:
        return lo
    for _ in range(200):
        mid = math.sqrt(lo * hi)  # bisection in log space
        if eval_psi_prime(law, mid) < y:
            lo = mid
        else:
            hi = mid
        if math.log(hi / lo) <= 1e-10:
            break
    return math.sqrt(lo * hi)


def lower_envelope_psi(t, ep: EnvelopeParams, law: DampingLaw):
    """The Psi'-form envelope (1/(gamma C_cal)^2) (Psi'^{-1}(1/(t-T0)))^2."""
    scalar = np.isscalar(t)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= ep.T0 + 1.0):
        raise DomainError("the Psi' envelope needs t > T0 + 1")
    out = np.array([(psi_prime_inverse(1.0 / (ti - ep.T0), law)
                     / (ep.gamma * ep.C_cal))**2 for ti in ts])
    return float(out[0]) if scalar else out


def calibrate_C_cal(ep_no_cal: EnvelopeParams, law: DampingLaw,
                    anchor_offset: float = 10.0) -> float:
    """Pick C_cal so the two envelopes agree at t = T0 + anchor_offset.

    Falls back to 1 when either side degenerates at the anchor.
    """
    t_anchor = ep_no_cal.T0 + anchor_offset
    try:
        xstar = psi_prime_inverse(1.0 / anchor_offset, law)
        upper = ep_no_cal.gamma * math.sqrt(ep_no_cal.E_cal_T0)
        chi = K_inverse(ep_no_cal.sigma * anchor_offset, upper, law)
    except (DomainError, SingularityError, ValueError):
        return 1.0
    if chi <= 0 or xstar <= 0:
        return 1.0
    return xstar / chi


@dataclass(frozen=True)
class ComparisonBoundReport:
    """Verdict of z(t)^2 >= C^2 (Psi'^{-1}(R/t))^2 for sampled t >= T1."""

    applicable: bool
    holds: bool
    best_C: float
    n_checked: int


def comparison_bound_check(t_grid, z_series, law: DampingLaw, R: float = 1.0,
                      C: float = 1.0, T1: float = 1.0) -> ComparisonBoundReport:
    """Check the comparison-solution lower bound against Psi'^{-1}(R/t).

    The check is run in the squared form used by the envelope chain
    (Psi'^{-1}(1/t) <= const * z(t)); for laws with constant Psi' the
    inverse is not defined and the report says not-applicable.  ``best_C``
    is the largest constant for which the bound holds on the sample.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    z_series = np.asarray(z_series, dtype=float)
    lo = law.r0**2 * 1e-12
    spread = (eval_psi_prime(law, law.r0**2) - eval_psi_prime(law, lo))
    if abs(spread) <= 1e-12 * abs(eval_psi_prime(law, law.r0**2)):
        return ComparisonBoundReport(applicable=False, holds=False,
                                best_C=0.0, n_checked=0)
    mask = t_grid >= T1
    ratios = []
    for ti, zi in zip(t_grid[mask], z_series[mask]):
        try:
            xi = psi_prime_inverse(R / ti, law)
        except DomainError:
            continue
        ratios.append(zi / xi)
    if not ratios:
        return ComparisonBoundReport(applicable=True, holds=False,
                                best_C=0.0, n_checked=0)
    best = float(np.min(ratios))
    return ComparisonBoundReport(applicable=True, holds=bool(best >= C or C == 0.0),
                            best_C=best, n_checked=len(ratios))


def fit_decay_exponent(t, y, window) -> float:
    """Least-squares slope of ln y vs ln t restricted to window = [ta, tb]."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ta, tb = window
    mask = (t >= ta) & (t <= tb)
    if np.count_nonzero(mask) < 10:
        raise ValueError("window must contain at least 10 samples")
    if np.any(y[mask] <= 0):
        raise ValueError("y must be positive on the window")
    slope, _ = np.polyfit(np.log(t[mask]), np.log(y[mask]), 1)
    return float(slope)


def detect_T0(records: Sequence, gamma: float, r0: float) -> Optional[float]:
    """First sampled time with Ecal <= (r0^2 / gamma)^2; None if never."""
    if not records:
        raise ValueError("records must be nonempty")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    threshold = (r0**2 / gamma)**2
    for rec in records:
        if rec.Ecal <= threshold:
            return rec.t
    return None


def envelope_params_from_run(result, law: DampingLaw,
                             C1: Optional[float] = None,
                             C_cal: Optional[float] = None,
                             anchor_offset: float = 10.0) -> Optional[EnvelopeParams]:
    """Assemble EnvelopeParams from a finished run; None if T0 not reached."""
    gamma = gamma_const(result.records[0].Estar, result.params.rho2)
    c1 = default_C1(law) if C1 is None else C1
    sigma = sigma_const(result.profile.alpha_a, result.params.rho2,
                        result.params.beta, law.r0, result.params.tau, c1)
    T0 = detect_T0(result.records, gamma, law.r0)
    if T0 is None:
        return None
    ecal_T0 = next(r.Ecal for r in result.records if r.t >= T0)
    base = EnvelopeParams(gamma=gamma, sigma=sigma, T0=T0, r0=law.r0,
                          C1=c1, C_cal=1.0, E_cal_T0=ecal_T0)
    if C_cal is None:
        C_cal = calibrate_C_cal(base, law, anchor_offset)
    return replace(base, C_cal=C_cal)
