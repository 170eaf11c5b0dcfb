"""Persistence thresholds, principal eigenvalues and traveling waves for a
nonlocal dispersal population in a moving habitat."""

__version__ = "0.1.0"

from .config import RunConfig
from .errors import AuditFailure, CFLError, ConfigError, HabitatError, NumericalError
from .grid import Field, Grid
from .growth import GrowthModel
from .kernels import ConvolutionOperator, Kernel, bump, gaussian, moment_generating
from .spectral import (characteristic_roots, principal_eigenvalue,
                       principal_eigenvalue_growthrate, principal_eigenvalue_operator,
                       spreading_speed)
from .frame_solver import evolve, simulate_fixed_frame, steady_state_from_above
from .periodic import periodic_principal_eigenvalue, periodization_limit
from .analysis import classify, critical_patch_size, phase_sweep
