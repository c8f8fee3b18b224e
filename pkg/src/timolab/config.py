"""Run configuration: key=value files, presets, and factory helpers.

A config file holds one ``key = value`` per line with ``#`` comments.  The
``scenario`` key pulls in a named preset first; any other keys then
override the preset's values.  Unknown keys are rejected so typos fail
loudly.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import laws, solver


class ConfigError(ValueError):
    """A config file or value failed validation."""


@dataclass
class RunConfig:
    """A fully resolved run description; see KEYS for the file syntax."""

    scenario: str = ""
    params: solver.PhysicalParams = field(
        default_factory=solver.PhysicalParams)
    law: str = "power"            # power | linear | example2 | table:<path> | none
    p: float = 2.0                # power-law exponent
    c: float = 1.0                # linear-law slope
    table_r0: float = 1.0         # convexity endpoint for tabulated laws
    profile: str = "global"       # global | bump
    profile_peak: float = 1.0
    bump_lo: float = 0.3
    bump_hi: float = 0.7
    init: str = "default"         # default | mechanical | file:<path>
    amp: float = 1.0
    theta_mean: float = 0.0
    N: int = 200
    dt: float = 1e-3
    T: float = 10.0
    sample_every: int = 10
    theta_ref: Optional[float] = None
    r0: Optional[float] = None    # override of the law's convexity endpoint
    C1: Optional[float] = None
    C_cal: Optional[float] = None
    R: float = 1.0
    out: str = "out"
    seed: int = 0                 # reserved; runs are deterministic
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.N < 8:
            raise ConfigError("N must be >= 8")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be >= 1")

    # -- factories used by solver.run --------------------------------------

    def make_law(self) -> Optional[laws.DampingLaw]:
        if self.law == "none":
            return None
        if self.law == "linear":
            law = laws.linear_law(self.c)
        elif self.law == "power":
            law = laws.power_law(self.p)
        elif self.law == "example2":
            law = laws.example2_law()
        elif self.law.startswith("table:"):
            law = laws.tabulated_law(self.law[len("table:"):], r0=self.table_r0)
        else:
            raise ConfigError(f"unknown law {self.law!r}")
        if self.r0 is not None:
            law = laws.DampingLaw(law.name, law.g_pos, law.g_prime_pos,
                                  law.g0_pos, self.r0, law.linear_near_origin)
        return law

    def make_profile(self, grid: solver.Grid) -> solver.DampingProfile:
        if self.profile == "global":
            return solver.global_profile(grid, self.profile_peak)
        if self.profile == "bump":
            return solver.bump_profile(grid, self.bump_lo, self.bump_hi,
                                       self.profile_peak)
        raise ConfigError(f"unknown profile {self.profile!r}")

    def make_initial_state(self, grid: solver.Grid) -> solver.BeamState:
        if self.init == "default":
            return solver.default_initial_state(grid, self.amp,
                                                self.theta_mean)
        if self.init == "mechanical":
            st = solver.default_initial_state(grid, self.amp, 0.0)
            st.theta[:] = 0.0
            st.q[:] = 0.0
            return st
        if self.init.startswith("file:"):
            return _load_state_file(self.init[len("file:"):], grid)
        raise ConfigError(f"unknown initial-data selector {self.init!r}")


def _load_state_file(path: str, grid: solver.Grid) -> solver.BeamState:
    """Read a snapshot CSV (x, phi, v, psi, w, theta, q) as initial data."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    except OSError as exc:
        raise ConfigError(f"cannot read initial-data file {path!r}: {exc}")
    if data.ndim != 2 or data.shape[1] != 7 or data.shape[0] != grid.N + 1:
        raise ConfigError(
            f"initial-data file {path!r} must have {grid.N + 1} rows of "
            "x,phi,v,psi,w,theta,q")
    _, phi, v, psi, w, theta, q = data.T
    st = solver.BeamState(0.0, phi.copy(), v.copy(), psi.copy(), w.copy(),
                          theta.copy(), q.copy())
    for name in ("phi", "v", "psi", "w", "q"):
        arr = getattr(st, name)
        if arr[0] != 0.0 or arr[-1] != 0.0:
            raise ConfigError(f"initial {name} must vanish at the boundary")
    return st


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESETS = {
    "conservative": dict(
        law="none", profile_peak=0.0, init="mechanical",
        params=dict(delta=0.0),
        N=128, dt=5e-3, T=50.0, sample_every=20,
    ),
    "linear": dict(
        law="linear", c=1.0, amp=0.5,
        N=256, dt=1e-3, T=10.0, sample_every=100,
    ),
    "example1_p2": dict(
        law="power", p=2.0, amp=0.18, theta_mean=0.3,
        N=64, dt=5e-3, T=200.0, sample_every=20,
    ),
    "example1_p3": dict(
        law="power", p=3.0, amp=0.18, theta_mean=0.3,
        N=64, dt=5e-3, T=200.0, sample_every=20,
    ),
    "example2": dict(
        law="example2", amp=0.05, theta_mean=0.1,
        N=64, dt=5e-3, T=200.0, sample_every=20,
    ),
    "bump_omega": dict(
        law="power", p=2.0, profile="bump", amp=0.3, theta_mean=0.2,
        N=64, dt=5e-3, T=100.0, sample_every=20,
    ),
    "equal_speeds_chi0": dict(
        law="linear", amp=0.5, theta_mean=0.2,
        params=dict(delta=0.0, b=1.0, rho2=1.0, k=1.0, rho1=1.0, tau=2.0),
        N=64, dt=5e-3, T=50.0, sample_every=20,
    ),
}

PRESET_DESCRIPTIONS = {
    "conservative": "undamped, uncoupled elastic beam; energy must not drift",
    "linear": "viscous damping g(s)=s on the whole beam; exact audit case",
    "example1_p2": "power damping p=2; algebraic lower envelope t^-4",
    "example1_p3": "power damping p=3; algebraic lower envelope t^-2",
    "example2": "log-Gaussian damping; exp(-4 sqrt(ln t)) lower envelope",
    "bump_omega": "power damping localized on the bump omega=(0.3,0.7)",
    "equal_speeds_chi0": "equal wave speeds, no coupling: stability number 0",
}

_PARAM_KEYS = {"rho1", "rho2", "rho3", "b", "k", "delta", "tau", "beta"}
_FLOAT_KEYS = {"p", "c", "table_r0", "profile_peak", "bump_lo", "bump_hi",
               "amp", "theta_mean", "dt", "T", "R"}
_OPT_FLOAT_KEYS = {"theta_ref", "r0", "C1", "C_cal"}
_INT_KEYS = {"N", "sample_every", "seed"}
_STR_KEYS = {"scenario", "law", "profile", "init", "out"}

KEYS = sorted(_PARAM_KEYS | _FLOAT_KEYS | _OPT_FLOAT_KEYS | _INT_KEYS
              | _STR_KEYS | {"snapshot_times"})


def preset_config(name: str, **overrides) -> RunConfig:
    """Instantiate a named preset, optionally overriding fields."""
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario {name!r}; "
                          f"choose from {sorted(PRESETS)}")
    preset = copy.deepcopy(PRESETS[name])
    param_kwargs = preset.pop("params", {})
    preset.update(overrides)
    params = solver.PhysicalParams(**param_kwargs)
    return RunConfig(scenario=name, params=params, **preset)


def list_presets():
    """Preset names with one-line descriptions."""
    return [(name, PRESET_DESCRIPTIONS[name]) for name in sorted(PRESETS)]


def parse_config(path: str) -> RunConfig:
    """Parse a key=value config file into a validated RunConfig."""
    raw = {}
    lines = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot open config {path!r}: {exc}")
    with fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = text.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value
            lines[key] = lineno
    return build_config(raw, origin=path, lines=lines)


def build_config(raw: dict, origin: str = "<args>",
                 lines: Optional[dict] = None) -> RunConfig:
    """Turn a flat {key: string-or-value} dict into a RunConfig."""
    lines = lines or {}

    def where(key):
        return f"{origin}:{lines[key]}" if key in lines else origin

    def conv(key, value, kind):
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(
                f"{where(key)}: key {key!r} needs a {kind.__name__} value, "
                f"got {value!r}")

    scenario = raw.get("scenario")
    if scenario is not None:
        cfg = preset_config(str(scenario))
    else:
        cfg = RunConfig()

    param_kwargs = {f.name: getattr(cfg.params, f.name)
                    for f in fields(cfg.params)}
    for key, value in raw.items():
        if key == "scenario":
            continue
        if key in _PARAM_KEYS:
            param_kwargs[key] = conv(key, value, float)
        elif key in _FLOAT_KEYS:
            setattr(cfg, key, conv(key, value, float))
        elif key in _OPT_FLOAT_KEYS:
            setattr(cfg, key, conv(key, value, float))
        elif key in _INT_KEYS:
            setattr(cfg, key, conv(key, value, int))
        elif key in _STR_KEYS:
            setattr(cfg, key, str(value))
        elif key == "snapshot_times":
            parts = [s for s in str(value).replace(",", " ").split() if s]
            cfg.snapshot_times = tuple(conv(key, s, float) for s in parts)
        else:  # pragma: no cover - KEYS gate should prevent this
            raise ConfigError(f"{where(key)}: unknown key {key!r}")
    try:
        cfg.params = solver.PhysicalParams(**param_kwargs)
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}")
    cfg.__post_init__()
    cfg.make_law()       # validate the law selection eagerly
    if cfg.profile not in ("global", "bump"):
        raise ConfigError(f"{origin}: unknown profile {cfg.profile!r}")
    return cfg
