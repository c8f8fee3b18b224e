"""Energy-consistent discretization and implicit time stepping.

The beam system couples two wave equations (transverse displacement phi and
shear rotation psi) to a hyperbolic heat pair (temperature theta and flux q),
with a frictional nonlinearity a(x) g(psi_t) on the rotation equation:

    rho1 phi_tt - k (phi_x + psi)_x                        = 0
    rho2 psi_tt - b psi_xx + k (phi_x + psi) + delta theta_x
                 + a(x) g(psi_t)                           = 0
    rho3 theta_t + q_x + delta psi_xt                      = 0
    tau  q_t + beta q + theta_x                            = 0

on x in (0, 1) with phi, psi, q pinned at both ends and theta free.

The spatial scheme is chosen so the semidiscrete energy identity is exact:
shear/bending terms live on cell midpoints (yielding compact three-point
second differences at the nodes) and the first-derivative couplings use a
summation-by-parts operator whose boundary rows are one-sided.  With the
trapezoid quadrature this gives, for any damping law,

    dE/dt = -beta * trapz(q^2) - trapz(a * w * g(w))

to machine precision, and the implicit midpoint rule then satisfies the same
identity discretely: E_{n+1} - E_n = -dt * D(midpoint state), again for any
law, because E is a quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .laws import DampingLaw, eval_g, g_derivative


class StepError(RuntimeError):
    """Newton failed to converge within the iteration budget."""


class DivergenceError(StepError):
    """The state became non-finite during a step."""


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients of the beam/heat system; nondimensional, all positive.

    delta = 0 is allowed: it decouples the heat pair and is the conservative
    diagnostic configuration.
    """

    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 1.0
    b: float = 1.0
    k: float = 1.0
    delta: float = 1.0
    tau: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("rho1", "rho2", "rho3", "b", "k", "tau", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"parameter {name} must be positive")
        if self.delta < 0:
            raise ValueError("parameter delta must be nonnegative")


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on [0, 1]: N cells, N+1 nodes."""

    N: int

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("grid needs N >= 8 cells")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)


@dataclass(frozen=True)
class DampingProfile:
    """Samples of the nonnegative damping weight a(x) on the grid nodes."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if np.any(a < 0):
            raise ValueError("damping profile must be nonnegative")
        object.__setattr__(self, "a", a)

    @property
    def alpha_a(self) -> float:
        """Discrete sup norm of a."""
        return float(np.max(self.a))

    @property
    def omega_nonempty(self) -> bool:
        return bool(np.any(self.a > 0))


def global_profile(grid: Grid, amplitude: float = 1.0) -> DampingProfile:
    """a(x) = amplitude everywhere."""
    return DampingProfile(a=np.full(grid.N + 1, float(amplitude)))


def bump_profile(grid: Grid, lo: float = 0.3, hi: float = 0.7,
                 peak: float = 1.0) -> DampingProfile:
    """Smooth bump supported on (lo, hi), peak value `peak` at the center."""
    x = grid.x
    a = np.zeros_like(x)
    inside = (x > lo) & (x < hi)
    s = (x[inside] - lo) / (hi - lo)
    a[inside] = peak * np.exp(1.0 - 1.0 / (4.0 * s * (1.0 - s)))
    return DampingProfile(a=a)


@dataclass
class BeamState:
    """Nodal fields at time t; phi, v, psi, w, q vanish at nodes 0 and N."""

    t: float
    phi: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    q: np.ndarray

    def copy(self) -> "BeamState":
        return BeamState(self.t, self.phi.copy(), self.v.copy(),
                         self.psi.copy(), self.w.copy(),
                         self.theta.copy(), self.q.copy())


def zero_state(grid: Grid) -> BeamState:
    n = grid.N + 1
    return BeamState(0.0, *(np.zeros(n) for _ in range(6)))


def default_initial_state(grid: Grid, amp: float = 1.0,
                          theta_mean: float = 0.0) -> BeamState:
    """Smooth initial data compatible with the boundary conditions.

    phi0 = amp sin(pi x), psi0 = amp sin(2 pi x), theta0 = amp cos(pi x)
    + theta_mean, q0 = amp sin(pi x); zero initial velocities.
    """
    x = grid.x
    return BeamState(
        t=0.0,
        phi=amp * np.sin(np.pi * x),
        v=np.zeros_like(x),
        psi=amp * np.sin(2.0 * np.pi * x),
        w=np.zeros_like(x),
        theta=amp * np.cos(np.pi * x) + theta_mean,
        q=amp * np.sin(np.pi * x),
    )


def sbp_first_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """First derivative: centered inside, one-sided at the two boundary rows.

    Together with trapezoid weights W this operator D satisfies the
    summation-by-parts identity W D + (W D)^T = diag(-1, 0, ..., 0, 1),
    which is what makes the discrete energy flux telescope exactly.
    """
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (f[1] - f[0]) / h
    out[-1] = (f[-1] - f[-2]) / h
    return out


class OperatorBundle:
    """Discrete right-hand side of the first-order system on a fixed grid."""

    def __init__(self, params: PhysicalParams, grid: Grid,
                 profile: DampingProfile):
        if len(profile.a) != grid.N + 1:
            raise ValueError("damping profile does not match the grid")
        self.params = params
        self.grid = grid
        self.profile = profile
        self._band = None      # (l_and_u, A_banded) cache
        self._template = None  # (dt, banded Newton matrix) cache

    # -- continuous-in-time right-hand side -------------------------------

    def shear(self, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
        """Cell-midpoint shear strain phi_x + psi (length N)."""
        h = self.grid.h
        return np.diff(phi) / h + 0.5 * (psi[:-1] + psi[1:])

    def rhs(self, state: BeamState, law: Optional[DampingLaw]):
        """Time derivatives (phi_t, v_t, psi_t, w_t, theta_t, q_t).

        law=None drops the frictional term (the linear part of the system).
        Boundary slots of v_t, w_t, q_t are zero so Dirichlet data persists.
        """
        p = self.params
        h = self.grid.h
        phi, v, psi, w, theta, q = (state.phi, state.v, state.psi,
                                    state.w, state.theta, state.q)
        u = self.shear(phi, psi)

        dtheta = sbp_first_derivative(theta, h)
        dq = sbp_first_derivative(q, h)
        dw = sbp_first_derivative(w, h)

        phi_t = v.copy()
        psi_t = w.copy()
        v_t = np.zeros_like(v)
        w_t = np.zeros_like(w)
        q_t = np.zeros_like(q)

        v_t[1:-1] = (p.k / p.rho1) * np.diff(u) / h
        bend = p.b * (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / (h * h)
        w_t[1:-1] = (bend - p.k * 0.5 * (u[:-1] + u[1:])
                     - p.delta * dtheta[1:-1]) / p.rho2
        if law is not None:
            w_t[1:-1] -= (self.profile.a[1:-1] / p.rho2) * eval_g(law, w[1:-1])

        theta_t = -(dq + p.delta * dw) / p.rho3
        q_t[1:-1] = -(p.beta * q[1:-1] + dtheta[1:-1]) / p.tau
        return phi_t, v_t, psi_t, w_t, theta_t, q_t

    # -- flat packing for the Newton solve ---------------------------------

    @property
    def n_unknowns(self) -> int:
        return 6 * self.grid.N - 4

    def _index_arrays(self):
        N = self.grid.N
        base = 1 + 6 * np.arange(N - 1)
        return base

    def pack(self, state: BeamState) -> np.ndarray:
        """Flatten the evolving degrees of freedom, node-major for bandedness."""
        base = self._index_arrays()
        y = np.empty(self.n_unknowns)
        y[0] = state.theta[0]
        y[base + 0] = state.phi[1:-1]
        y[base + 1] = state.v[1:-1]
        y[base + 2] = state.psi[1:-1]
        y[base + 3] = state.w[1:-1]
        y[base + 4] = state.theta[1:-1]
        y[base + 5] = state.q[1:-1]
        y[-1] = state.theta[-1]
        return y

    def unpack(self, y: np.ndarray, t: float) -> BeamState:
        N = self.grid.N
        base = self._index_arrays()
        st = zero_state(self.grid)
        st.t = t
        st.phi[1:-1] = y[base + 0]
        st.v[1:-1] = y[base + 1]
        st.psi[1:-1] = y[base + 2]
        st.w[1:-1] = y[base + 3]
        st.theta[1:-1] = y[base + 4]
        st.q[1:-1] = y[base + 5]
        st.theta[0] = y[0]
        st.theta[-1] = y[-1]
        return st

    def rhs_packed(self, y: np.ndarray, law: Optional[DampingLaw]) -> np.ndarray:
        st = self.unpack(y, 0.0)
        phi_t, v_t, psi_t, w_t, theta_t, q_t = self.rhs(st, law)
        return self.pack(BeamState(0.0, phi_t, v_t, psi_t, w_t, theta_t, q_t))

    # -- banded Jacobian machinery -----------------------------------------

    def _linear_band(self):
        """Banded storage of the linear generator A (damping excluded)."""
        if self._band is not None:
            return self._band
        n = self.n_unknowns
        half = 9  # generous; the stencil reaches at most +-7 slots
        ab = np.zeros((2 * half + 1, n))
        e = np.zeros(n)
        maxoff = 0
        for j in range(n):
            e[j] = 1.0
            col = self.rhs_packed(e, None)
            e[j] = 0.0
            rows = np.nonzero(col)[0]
            if rows.size:
                off = int(np.max(np.abs(rows - j)))
                if off > half:
                    raise AssertionError("stencil exceeded the band allocation")
                maxoff = max(maxoff, off)
                ab[half + rows - j, j] = col[rows]
        half_used = max(maxoff, 1)
        trim = half - half_used
        self._band = (half_used, ab[trim: 2 * half + 1 - trim] if trim else ab)
        return self._band

    def _newton_template(self, dt: float):
        """Banded I - (dt/2) A, reused across steps at a fixed dt."""
        if self._template is not None and self._template[0] == dt:
            return self._template[1], self._template[2]
        half, ab = self._linear_band()
        tmpl = -(0.5 * dt) * ab
        tmpl[half, :] += 1.0
        self._template = (dt, half, tmpl)
        return half, tmpl

    @property
    def w_slots(self) -> np.ndarray:
        return self._index_arrays() + 3


def semidiscretize(params: PhysicalParams, grid: Grid,
                   profile: DampingProfile) -> OperatorBundle:
    """Build the discrete operator bundle for the first-order system."""
    return OperatorBundle(params, grid, profile)


def step(state: BeamState, dt: float, bundle: OperatorBundle,
         law: Optional[DampingLaw], max_iter: int = 50) -> BeamState:
    """One implicit-midpoint step: solve X = U + dt F((U + X)/2) by Newton.

    The Jacobian is the cached banded template I - (dt/2) A plus the damping
    derivative (dt/2) a g'(w_mid) / rho2 on the w diagonal, with a tiny
    Levenberg shift so degenerate g'(0) = 0 stays invertible.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = bundle.params
    U = bundle.pack(state)
    half, tmpl = bundle._newton_template(dt)
    wslots = bundle.w_slots
    a_int = bundle.profile.a[1:-1]

    X = U + dt * bundle.rhs_packed(U, law)  # explicit Euler predictor
    scale = max(1.0, float(np.linalg.norm(U)))
    tol = 1e-12 * scale

    prev = np.inf
    for _ in range(max_iter):
        mid = 0.5 * (U + X)
        R = X - U - dt * bundle.rhs_packed(mid, law)
        if not np.all(np.isfinite(R)):
            raise DivergenceError(f"state became non-finite near t={state.t:g}")
        rn = float(np.linalg.norm(R))
        if rn <= tol:
            break
        if rn <= 1e2 * tol and rn > 0.5 * prev:
            break  # stalled at the rounding floor, already far below demand
        prev = rn
        ab = tmpl.copy()
        if law is not None:
            gp = g_derivative(law, mid[wslots])
            ab[half, wslots] += (0.5 * dt / p.rho2) * a_int * gp
        ab[half, :] += 1e-12
        X = X + solve_banded((half, half), ab, -R)
    else:
        raise StepError(
            f"Newton stalled at t={state.t:g}: residual {rn:.3e} > tol {tol:.3e}")

    out = bundle.unpack(X, state.t + dt)
    return out


def compute_stability_number(params: PhysicalParams) -> float:
    """Diagnostic chi; chi = 0 marks the borderline coupling regime.

    chi = (tau - rho1/(k rho3)) (rho2 - rho1 b / k) - rho1^2 delta^2 / (k rho3)
    """
    p = params
    return ((p.tau - p.rho1 / (p.k * p.rho3)) * (p.rho2 - p.rho1 * p.b / p.k)
            - p.rho1**2 * p.delta**2 / (p.k * p.rho3))


@dataclass
class RunResult:
    """Everything a run produces: sampled records plus audit-grade arrays."""

    records: list
    final_state: BeamState
    step_E: np.ndarray          # E at every step boundary (length nsteps+1)
    step_D_mid: np.ndarray      # dissipation at every step midpoint
    step_times: np.ndarray
    dt: float
    theta_ref: float
    params: PhysicalParams
    grid: Grid
    profile: DampingProfile
    law: Optional[DampingLaw]
    bundle: OperatorBundle
    snapshots: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def run(config) -> RunResult:
    """Integrate a RunConfig from t = 0 to t = T.

    Samples an EnergyRecord every `sample_every` steps (plus the final
    time), stores per-step total energy and midpoint dissipation for the
    dissipation audit, and captures state snapshots at requested times.
    Deterministic given the config.
    """
    from . import energy as en  # local import to keep module layering simple

    params = config.params
    grid = Grid(config.N)
    profile = config.make_profile(grid)
    law = config.make_law()
    bundle = semidiscretize(params, grid, profile)
    state = config.make_initial_state(grid)

    theta_ref = config.theta_ref
    if theta_ref is None:
        theta_ref = float(np.trapezoid(state.theta, dx=grid.h))

    nsteps = int(round(config.T / config.dt))
    dt = config.T / nsteps

    step_E = np.empty(nsteps + 1)
    step_D = np.empty(nsteps)
    step_t = dt * np.arange(nsteps + 1)
    step_E[0] = en.total_energy(state, params)

    snap_times = sorted(getattr(config, "snapshot_times", ()) or ())
    snap_iter = iter(snap_times)
    next_snap = next(snap_iter, None)

    def record(st):
        return en.EnergyRecord(
            t=st.t,
            E=en.total_energy(st, params),
            Estar=en.first_order_energy(st, params, bundle, law),
            Ecal=en.shifted_energy(st, params, theta_ref),
            D=en.dissipation(st, params, profile, law),
            theta_mean=float(np.trapezoid(st.theta, dx=grid.h)),
        )

    records = [record(state)]
    snapshots = {}
    for n in range(nsteps):
        try:
            new = step(state, dt, bundle, law)
        except StepError as exc:
            raise StepError(f"run failed at t={state.t:g}: {exc}") from exc
        mid = BeamState(state.t + 0.5 * dt,
                        0.5 * (state.phi + new.phi), 0.5 * (state.v + new.v),
                        0.5 * (state.psi + new.psi), 0.5 * (state.w + new.w),
                        0.5 * (state.theta + new.theta), 0.5 * (state.q + new.q))
        step_D[n] = en.dissipation(mid, params, profile, law)
        step_E[n + 1] = en.total_energy(new, params)
        state = new
        if (n + 1) % config.sample_every == 0 or n == nsteps - 1:
            records.append(record(state))
        while next_snap is not None and state.t >= next_snap - 0.5 * dt:
            snapshots[next_snap] = state.copy()
            next_snap = next(snap_iter, None)

    return RunResult(records=records, final_state=state, step_E=step_E,
                     step_D_mid=step_D, step_times=step_t, dt=dt,
                     theta_ref=theta_ref, params=params, grid=grid,
                     profile=profile, law=law, bundle=bundle,
                     snapshots=snapshots)
