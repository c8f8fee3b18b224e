"""Numerical laboratory for a nonlinearly damped thermoelastic beam.

The package simulates a shear-deformable beam coupled to second-sound heat
conduction, with a frictional nonlinearity on the rotation equation, and
checks two analytic claims against the discrete dynamics: strong stability
(the shifted energy decays to zero while the total energy settles at the
thermal offset) and lower bounds on how slowly that decay may proceed,
expressed through the convexity surrogate of the damping law.
"""

from .laws import (DampingLaw, DomainError, SingularityError, check_H1,
                   check_H2, eval_g, eval_lambda, eval_psi, eval_psi_prime,
                   example2_law, linear_law, power_law, tabulated_law)
from .solver import (BeamState, DampingProfile, DivergenceError, Grid,
                     PhysicalParams, StepError, compute_stability_number,
                     default_initial_state, run, semidiscretize, step)
from .energy import (EnergyRecord, audit_dissipation, dissipation,
                     first_order_energy, shifted_energy, total_energy)
from .rates import (EnvelopeParams, K, K_inverse, detect_T0,
                    fit_decay_exponent, gamma_const, lower_envelope_K,
                    lower_envelope_psi, sigma_const, solve_comparison_ode)
from .config import ConfigError, RunConfig, list_presets, parse_config, \
    preset_config

__version__ = "1.0.0"
