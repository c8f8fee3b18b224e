"""Discretization, time stepping, and the run loop."""

import numpy as np
import pytest

from timolab import config as C
from timolab import energy as E
from timolab import laws as L
from timolab import solver as S

FIELDS = ("phi", "v", "psi", "w", "theta", "q")


def make_bundle(N=64, delta=1.0, a_peak=1.0):
    params = S.PhysicalParams(delta=delta)
    grid = S.Grid(N)
    profile = S.global_profile(grid, a_peak)
    return params, grid, profile, S.semidiscretize(params, grid, profile)


def compatible_state(grid, coupled=True):
    """Smooth initial data whose right-hand side vanishes at the corners."""
    x = grid.x
    bump = (4.0 * x * (1.0 - x)) ** 3
    theta = np.cos(np.pi * x) if coupled else np.zeros_like(x)
    q = 0.5 * bump if coupled else np.zeros_like(x)
    return S.BeamState(0.0, bump.copy(), np.zeros_like(x), 0.5 * bump,
                       np.zeros_like(x), theta, q)


def state_diff(a, b, stride=1):
    tot = 0.0
    for f in FIELDS:
        fa, fb = getattr(a, f), getattr(b, f)
        if stride > 1:
            fb = fb[::stride]
        tot += np.sum((fa - fb) ** 2) / len(fa)
    return np.sqrt(tot)


class TestTypes:
    def test_params_positive(self):
        with pytest.raises(ValueError):
            S.PhysicalParams(rho1=0.0)
        with pytest.raises(ValueError):
            S.PhysicalParams(delta=-0.1)
        S.PhysicalParams(delta=0.0)  # conservative coupling is allowed

    def test_grid_minimum(self):
        with pytest.raises(ValueError):
            S.Grid(4)
        g = S.Grid(10)
        assert g.h == pytest.approx(0.1)
        assert len(g.x) == 11

    def test_profile_nonnegative(self):
        with pytest.raises(ValueError):
            S.DampingProfile(a=np.array([-1.0, 0.0]))

    def test_bump_profile_support(self):
        g = S.Grid(100)
        prof = S.bump_profile(g)
        x = g.x
        assert np.all(prof.a[(x <= 0.3) | (x >= 0.7)] == 0.0)
        assert prof.omega_nonempty
        assert prof.alpha_a <= 1.0


class TestRhs:
    def test_zero_state_is_equilibrium(self):
        _, grid, _, bundle = make_bundle()
        derivs = bundle.rhs(S.zero_state(grid), L.power_law(2))
        for d in derivs:
            assert np.all(d == 0.0)

    def test_constant_theta_is_steady(self):
        _, grid, _, bundle = make_bundle()
        st = S.zero_state(grid)
        st.theta[:] = 3.0
        _, _, _, _, theta_t, q_t = bundle.rhs(st, None)
        assert np.all(theta_t == 0.0)
        assert np.all(q_t == 0.0)

    def test_shear_divergence_second_order(self):
        # discrete (phi_x + psi)_x vs -pi^2 sin(pi x) for phi = sin(pi x)
        errs = []
        for N in (64, 128, 256):
            params, grid, _, bundle = make_bundle(N)
            st = S.zero_state(grid)
            st.phi = np.sin(np.pi * grid.x)
            _, v_t, _, _, _, _ = bundle.rhs(st, None)
            exact = -(params.k / params.rho1) * np.pi**2 * np.sin(
                np.pi * grid.x)
            errs.append(np.max(np.abs(v_t[1:-1] - exact[1:-1])))
        order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
        assert all(1.8 <= o <= 2.2 for o in order)


class TestStep:
    def test_zero_fixed_point(self):
        _, grid, _, bundle = make_bundle()
        new = S.step(S.zero_state(grid), 1e-2, bundle, L.power_law(2))
        assert state_diff(new, S.zero_state(grid)) == 0.0

    def test_boundary_invariance(self):
        _, grid, _, bundle = make_bundle()
        st = compatible_state(grid)
        for _ in range(5):
            st = S.step(st, 1e-2, bundle, L.power_law(3))
        for f in ("phi", "v", "psi", "w", "q"):
            arr = getattr(st, f)
            assert arr[0] == 0.0 and arr[-1] == 0.0

    def test_conservative_preserves_energy(self):
        params, grid, profile, _ = make_bundle(64, delta=0.0, a_peak=0.0)
        bundle = S.semidiscretize(params, grid, profile)
        st = compatible_state(grid, coupled=False)
        e0 = E.total_energy(st, params)
        st = S.step(st, 5e-3, bundle, None)
        assert abs(E.total_energy(st, params) - e0) <= 1e-12 * e0

    def test_linear_damping_energy_balance(self):
        params, grid, profile, bundle = make_bundle(64)
        law = L.linear_law(1.0)
        st = compatible_state(grid)
        dt = 1e-3
        e0 = E.total_energy(st, params)
        new = S.step(st, dt, bundle, law)
        mid = S.BeamState(0.0, *(0.5 * (getattr(st, f) + getattr(new, f))
                                 for f in FIELDS))
        defect = abs(E.total_energy(new, params) - e0
                     + dt * E.dissipation(mid, params, profile, law))
        assert defect <= 1e-10 * e0

    def test_bad_dt_rejected(self):
        _, grid, _, bundle = make_bundle()
        with pytest.raises(ValueError):
            S.step(S.zero_state(grid), -1.0, bundle, None)


class TestStabilityNumber:
    def test_zero_case(self):
        params = S.PhysicalParams(rho1=1, rho3=1, k=1, b=2, rho2=2,
                                  delta=0.0, tau=3)
        assert S.compute_stability_number(params) == 0.0

    def test_all_ones_with_coupling(self):
        assert S.compute_stability_number(S.PhysicalParams()) == -1.0

    def test_equal_speeds_with_coupling_negative(self):
        params = S.PhysicalParams(rho1=2, k=4, rho2=1, b=2, delta=0.5)
        assert S.compute_stability_number(params) < 0.0


class TestRun:
    def test_short_conservative_run_drift(self):
        cfg = C.preset_config("conservative", T=2.0)
        res = S.run(cfg)
        Earr = res.column("E")
        assert np.max(np.abs(Earr - Earr[0])) <= 1e-10 * Earr[0]

    def test_damped_run_energy_monotone(self):
        cfg = C.preset_config("example1_p2", T=5.0)
        res = S.run(cfg)
        Earr = res.column("E")
        assert np.all(np.diff(Earr) <= 1e-10 * Earr[0])

    def test_heat_only_dissipation_monotone(self):
        # a = 0 but beta > 0 with nonzero q0: still nonincreasing
        cfg = C.preset_config("linear", N=64, T=2.0, dt=5e-3,
                              profile_peak=0.0)
        res = S.run(cfg)
        Earr = res.column("E")
        assert np.all(np.diff(Earr) <= 1e-10 * Earr[0])

    def test_theta_mean_conserved(self):
        cfg = C.preset_config("example1_p3", T=2.0)
        res = S.run(cfg)
        tm = res.column("theta_mean")
        assert np.max(np.abs(tm - tm[0])) <= 1e-10

    def test_snapshots_recorded(self):
        cfg = C.preset_config("linear", N=32, T=1.0, dt=1e-2)
        cfg.snapshot_times = (0.5,)
        res = S.run(cfg)
        assert 0.5 in res.snapshots
        assert res.snapshots[0.5].t == pytest.approx(0.5, abs=1e-2)


class TestConvergence:
    def setup_run(self, N, dt, T=1.0):
        params = S.PhysicalParams()
        grid = S.Grid(N)
        profile = S.global_profile(grid, 1.0)
        bundle = S.semidiscretize(params, grid, profile)
        law = L.linear_law(1.0)
        st = compatible_state(grid)
        for _ in range(int(round(T / dt))):
            st = S.step(st, dt, bundle, law)
        return st

    def test_second_order_in_dt(self):
        s1 = self.setup_run(64, 4e-3)
        s2 = self.setup_run(64, 2e-3)
        s3 = self.setup_run(64, 1e-3)
        order = np.log2(state_diff(s1, s2) / state_diff(s2, s3))
        assert 1.8 <= order <= 2.2

    def test_second_order_in_h(self):
        ref = self.setup_run(512, 5e-4)
        e64 = state_diff(self.setup_run(64, 5e-4), ref, stride=8)
        e128 = state_diff(self.setup_run(128, 5e-4), ref, stride=4)
        order = np.log2(e64 / e128)
        assert 1.8 <= order <= 2.2
