"""Scalar damping laws and their convexity surrogates.

A :class:`DampingLaw` packages the frictional nonlinearity g acting on the
rotation rate, extended to all of R as an odd function, together with the
machinery derived from it:

* ``Psi(x) = sqrt(x) * g(sqrt(x))`` -- the convexity surrogate,
* ``Lambda(x) = Psi(x) / (x * Psi'(x))`` -- the ratio that decides whether
  the comparison-principle rate machinery applies,
* numerical certifiers ``check_H1`` (monotonicity + near-origin sandwich +
  linear growth at infinity) and ``check_H2`` (strict convexity of Psi and
  the limit conditions on Lambda).

Laws are immutable and all evaluators accept scalars or numpy arrays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad


class DomainError(ValueError):
    """An evaluation was requested outside a function's domain."""


class SingularityError(ArithmeticError):
    """A denominator (e.g. Psi') vanished where an inverse was needed."""


@dataclass(frozen=True)
class DampingLaw:
    """An odd, nondecreasing damping nonlinearity g and its metadata.

    ``g_pos`` / ``g_prime_pos`` / ``g0_pos`` act on positive arguments only;
    the odd extension (and g(0) = 0) is applied by the evaluators.  ``r0``
    is the right endpoint such that Psi is strictly convex on [0, r0^2].
    ``linear_near_origin`` selects the linear-minorant branch when deriving
    the default envelope constant C1.
    """

    name: str
    g_pos: Callable[[np.ndarray], np.ndarray]
    g_prime_pos: Optional[Callable[[np.ndarray], np.ndarray]] = None
    g0_pos: Optional[Callable[[np.ndarray], np.ndarray]] = None
    r0: float = 1.0
    linear_near_origin: bool = False

    def __post_init__(self):
        if not self.r0 > 0:
            raise DomainError("r0 must be positive")

    @property
    def has_analytic_derivative(self) -> bool:
        return self.g_prime_pos is not None

    def g0(self, s):
        """The increasing odd minorant near the origin (defaults to g)."""
        fn = self.g0_pos if self.g0_pos is not None else self.g_pos
        return _odd_eval(fn, s)


def _odd_eval(fn_pos, s):
    """Evaluate an odd extension of ``fn_pos`` (defined on s > 0)."""
    s = np.asarray(s, dtype=float)
    mag = np.abs(s)
    out = np.zeros_like(mag)
    nz = mag > 0.0
    if np.any(nz):
        with np.errstate(over="raise"):
            out[nz] = fn_pos(mag[nz])
    out = np.sign(s) * out
    if out.ndim == 0:
        return float(out)
    return out


def _even_eval(fn_pos, s, at_zero=0.0):
    """Evaluate an even extension (for derivatives of odd functions)."""
    s = np.asarray(s, dtype=float)
    mag = np.abs(s)
    out = np.full_like(mag, at_zero)
    nz = mag > 0.0
    if np.any(nz):
        out[nz] = fn_pos(mag[nz])
    if out.ndim == 0:
        return float(out)
    return out


def eval_g(law: DampingLaw, s):
    """g(s), odd-extended to all real s."""
    try:
        out = _odd_eval(law.g_pos, s)
    except FloatingPointError:
        raise DomainError(f"law {law.name!r} overflows at s={s!r}")
    if not np.all(np.isfinite(out)):
        raise DomainError(f"law {law.name!r} is not finite at s={s!r}")
    return out


def g_derivative(law: DampingLaw, s, rel_step: float = 1e-7):
    """dg/ds, analytic when available, else a symmetric secant.

    The derivative of an odd function is even, so the positive-branch
    formula is evaluated at |s|.
    """
    if law.g_prime_pos is not None:
        return _even_eval(law.g_prime_pos, s)
    s = np.asarray(s, dtype=float)
    e = rel_step * (1.0 + np.abs(s))
    out = (eval_g(law, s + e) - eval_g(law, s - e)) / (2.0 * e)
    if out.ndim == 0:
        return float(out)
    return out


def eval_psi(law: DampingLaw, x):
    """Psi(x) = sqrt(x) g(sqrt(x)) for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("Psi is only defined for x >= 0")
    r = np.sqrt(x)
    out = r * eval_g(law, r)
    if out.ndim == 0:
        return float(out)
    return out


def eval_psi_prime(law: DampingLaw, x):
    """Psi'(x), analytic via g' when available, else a central difference."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("Psi' is evaluated on x > 0")
    if law.g_prime_pos is not None:
        r = np.sqrt(x)
        out = 0.5 * (eval_g(law, r) / r + g_derivative(law, r))
    else:
        h = 1e-6 * x
        out = (eval_psi(law, x + h) - eval_psi(law, x - h)) / (2.0 * h)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"Psi' is not finite at x={x!r}")
    if out.ndim == 0:
        return float(out)
    return out


def eval_lambda(law: DampingLaw, x):
    """Lambda(x) = Psi(x) / (x Psi'(x)) on 0 < x <= r0^2."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("Lambda is evaluated on x > 0")
    psip = eval_psi_prime(law, x)
    if np.any(np.asarray(psip) == 0.0):
        raise SingularityError("Psi' vanishes; Lambda is singular here")
    out = eval_psi(law, x) / (x * psip)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# built-in laws
# ---------------------------------------------------------------------------

def linear_law(c: float = 1.0) -> DampingLaw:
    """g(s) = c s (the viscous baseline; Lambda is identically 1)."""
    if c <= 0:
        raise DomainError("linear law needs c > 0")
    return DampingLaw(
        name=f"linear(c={c:g})",
        g_pos=lambda s: c * s,
        g_prime_pos=lambda s: c * np.ones_like(s),
        r0=1.0,
        linear_near_origin=True,
    )


def power_law(p: float) -> DampingLaw:
    """g(s) = sign(s) |s|^p with p > 1; Psi(x) = x^((p+1)/2)."""
    if p <= 1:
        raise DomainError("power law needs p > 1")
    return DampingLaw(
        name=f"power(p={p:g})",
        g_pos=lambda s: s**p,
        g_prime_pos=lambda s: p * s ** (p - 1.0),
        r0=1.0,
        linear_near_origin=False,
    )


def example2_law() -> DampingLaw:
    """g(s) = exp(-(ln s)^2)/s for s > 0, odd-extended with g(0) = 0.

    Increasing on (0, e^-1/2); Psi(x) = exp(-(ln x)^2/4) with
    Lambda(x) = -2/ln(x) -> 0.  Psi'' changes sign where
    (ln x)^2 + 2 ln x - 2 = 0, i.e. at x = e^(-1-sqrt(3)) ~ 0.0651, so the
    default r0 = 0.25 keeps r0^2 = 0.0625 inside the convex region.
    """

    def g(s):
        ln = np.log(s)
        return np.exp(-ln * ln) / s

    def gp(s):
        ln = np.log(s)
        return -(1.0 + 2.0 * ln) / (s * s) * np.exp(-ln * ln)

    return DampingLaw(
        name="example2",
        g_pos=g,
        g_prime_pos=gp,
        r0=0.25,
        linear_near_origin=False,
    )


def tabulated_law(path: str, r0: float = 1.0) -> DampingLaw:
    """Load a tabulated law from a two-column CSV (s, g(s)), s increasing.

    Evaluation interpolates linearly between samples and extrapolates with
    the end slopes; the derivative falls back to a secant.
    """
    s_tab, g_tab = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            s_tab.append(float(row[0]))
            g_tab.append(float(row[1]))
    s_arr = np.asarray(s_tab)
    g_arr = np.asarray(g_tab)
    if s_arr.size < 2 or np.any(np.diff(s_arr) <= 0):
        raise DomainError(f"table {path!r} must have >= 2 strictly increasing s values")
    if np.any(s_arr <= 0):
        raise DomainError(f"table {path!r} must sample s > 0 (odd extension is automatic)")

    lo_slope = (g_arr[1] - g_arr[0]) / (s_arr[1] - s_arr[0])
    hi_slope = (g_arr[-1] - g_arr[-2]) / (s_arr[-1] - s_arr[-2])

    def g(s):
        out = np.interp(s, s_arr, g_arr)
        out = np.where(s < s_arr[0], g_arr[0] + lo_slope * (s - s_arr[0]), out)
        out = np.where(s > s_arr[-1], g_arr[-1] + hi_slope * (s - s_arr[-1]), out)
        return out

    return DampingLaw(name=f"table:{path}", g_pos=g, r0=r0)


# ---------------------------------------------------------------------------
# hypothesis certifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class H1Report:
    monotone: bool
    sandwich_ok: bool
    c1: float
    c2: float
    eps: float
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return self.monotone and self.sandwich_ok and self.c1 > 0


@dataclass(frozen=True)
class H2Report:
    convex_ok: bool
    lambda_liminf: float
    lambda_limsup: float
    lambda_vanishing: bool
    branch1_ok: bool
    branch2_value: float
    branch2_ok: bool
    mu: float
    z1: float

    @property
    def passed(self) -> bool:
        return self.convex_ok and (self.branch1_ok or self.branch2_ok)


def _g0_inverse(law: DampingLaw, y: float, hi0: float) -> Optional[float]:
    """Invert the minorant g0 on (0, inf) by bisection; None on failure."""
    if y <= 0:
        return 0.0
    lo, hi = 0.0, hi0
    for _ in range(200):
        if law.g0(hi) >= y:
            break
        hi *= 2.0
        if hi > 1e12:
            return None
    else:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if law.g0(mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return hi


def check_H1(law: DampingLaw, eps: float, samples: int = 200) -> H1Report:
    """Certify monotonicity, the near-origin sandwich, and linear growth.

    Checks, on sampled grids: g nondecreasing on [-1/eps, 1/eps];
    g0(|s|) <= |g(s)| <= g0^{-1}(|s|) for |s| <= eps (g0^{-1} by
    bisection); and fits c1 <= |g(s)|/|s| <= c2 on eps <= |s| <= 1/eps.
    """
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if samples < 10:
        raise DomainError("need at least 10 samples")

    notes = []
    mags = np.geomspace(eps * 1e-6, 1.0 / eps, samples)
    grid = np.concatenate([-mags[::-1], [0.0], mags])
    vals = eval_g(law, grid)
    monotone = bool(np.all(np.diff(vals) >= -1e-14 * max(1.0, np.max(np.abs(vals)))))

    sandwich_ok = True
    for s in np.geomspace(eps * 1e-6, eps, samples):
        gs = abs(eval_g(law, s))
        if law.g0(s) > gs * (1.0 + 1e-12) + 1e-300:
            sandwich_ok = False
            notes.append(f"g0({s:.3e}) > |g({s:.3e})|")
            break
        inv = _g0_inverse(law, s, hi0=max(eps, s))
        if inv is None:
            sandwich_ok = False
            notes.append("g0 not invertible on the sampled range")
            break
        if gs > inv * (1.0 + 1e-10) + 1e-300:
            sandwich_ok = False
            notes.append(f"|g({s:.3e})| > g0^-1({s:.3e})")
            break

    body = np.geomspace(eps, 1.0 / eps, samples)
    ratios = np.abs(eval_g(law, body)) / body
    c1 = float(np.min(ratios))
    c2 = float(np.max(ratios))
    return H1Report(monotone=monotone, sandwich_ok=sandwich_ok, c1=c1, c2=c2,
                    eps=eps, notes=tuple(notes))


def check_H2(law: DampingLaw, mu: float = 2.0, z1: Optional[float] = None) -> H2Report:
    """Certify strict convexity of Psi on [0, r0^2] and the Lambda limits.

    Convexity is tested through positive second divided differences of Psi
    on a log-spaced grid.  The x -> 0 limits of Lambda are estimated at
    x = r0^2 * 10^-j, j = 1..12; a monotone collapse of the samples is
    reported as a vanishing limit (liminf treated as 0), which routes the
    verdict to the alternative integral branch.
    """
    r2 = law.r0**2
    xs = np.geomspace(r2 * 1e-12, r2, 240)
    psis = eval_psi(law, xs)
    slopes = np.diff(psis) / np.diff(xs)
    slope_scale = np.maximum(np.abs(slopes[1:]), 1e-300)
    convex_ok = bool(np.all(np.diff(slopes) > 1e-12 * slope_scale))

    lam = np.array([eval_lambda(law, r2 * 10.0 ** (-j)) for j in range(1, 13)])
    vanishing = bool(lam[-1] < 0.2 * lam[0])
    liminf_est = float(np.min(lam[-4:]))
    limsup_est = float(np.max(lam[-4:]))
    branch1_ok = (not vanishing) and (0.0 < liminf_est) and (limsup_est < 1.0 - 1e-9)

    if z1 is None:
        z1 = 0.5 * r2
    qs = []
    for j in range(1, 9):
        x = r2 * 10.0 ** (-j)
        if mu * x >= z1:
            continue
        try:
            integral = _reciprocal_psi_integral(law, x, z1)
            qs.append(eval_psi(law, mu * x) / (mu * x) * integral)
        except (OverflowError, FloatingPointError):
            break
    if len(qs) >= 3:
        q = np.asarray(qs)
        vanishing_c = bool(q[-1] < 0.2 * q[0])
        branch2_value = float(np.min(q[-3:]))
    else:
        vanishing_c = True
        branch2_value = 0.0
    branch2_ok = ((not vanishing_c) and branch2_value > 0.0
                  and limsup_est < 1.0 - 1e-9)

    return H2Report(convex_ok=convex_ok, lambda_liminf=liminf_est,
                    lambda_limsup=limsup_est, lambda_vanishing=vanishing,
                    branch1_ok=branch1_ok, branch2_value=branch2_value,
                    branch2_ok=branch2_ok, mu=mu, z1=z1)


def _reciprocal_psi_integral(law: DampingLaw, lo: float, hi: float) -> float:
    """int_lo^hi dy / Psi(y) via the substitution y = e^u."""
    if not 0 < lo < hi:
        raise DomainError("need 0 < lo < hi")

    def f(u):
        y = math.exp(u)
        return y / eval_psi(law, y)

    val, _ = quad(f, math.log(lo), math.log(hi), epsabs=0.0, epsrel=1e-10, limit=400)
    return val
