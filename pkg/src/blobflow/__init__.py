"""Deterministic-particle (blob) simulation of diffusive gradient flows."""

from .mollifier import Mollifier
from .potentials import DriftPotential, InteractionPotential, drift_grad, interaction_grad, interaction_value
from .ensemble import (
    ParticleEnsemble, GridSpec, GridField,
    discretize_density, second_moment, blob_density, sample_on_grid,
)
from .dynamics import (
    ProblemSpec, DynamicsError,
    conv_phi_at_particles, velocity_field, discrete_energy, dissipation,
    energy_gradient_check,
)
from .integrator import (
    RK4Fixed, RK45Adaptive, IntegratorConfig, Trajectory, integrate, step_rk4, simulate,
)
from .reference import (
    heat_kernel, barenblatt, barenblatt_K, barenblatt_support_radius,
    fp_steady_state, ks_second_moment_slope,
    HeatKernel, Barenblatt, Mixture, FPSteadyState,
)
from .metrics import (
    DiscreteMeasure, l1_error, linf_error, w2_1d, w2_2d,
    quantile_from_density, measure_from_field, measure_from_ensemble,
)
from .transport import solve_transport, TransportError
from .diagnostics import QuadratureGrid, nonlocal_sobolev, bv_eps_norm, assemble_series
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .runner import run_scenario, convergence_sweep, ks2d_criticality

__version__ = "0.1.0"
