"""Finite-difference simulation and certification of observer-based boundary
control for a magnetizable piezoelectric beam."""
from .config_io import ExperimentConfig, parse_config, write_snapshots, write_trace
from .diagnostics import (
    bound_check, decay_fit, discrete_energy, dissipation_residual, energy_trace, lyapunov_value,
    sandwich_check,
)
from .discretization import Grid, assemble, build_grid, initial_profile
from .errors import *  # noqa: F401,F403
from .gains import (
    PAPER_GAINS, GainSet, LyapunovParams, check_lemma4, equivalence_constants, search_certificate,
)
from .integrator import InitialCondition, SimState, StepperConfig, default_dt, integrate, simulate, step
from .model import PAPER_MATERIAL, MaterialParams, coupling_matrices, validate_material
from .spectral import first_order_matrix, spectral_abscissa, system_spectrum

__version__ = "0.1.0"
