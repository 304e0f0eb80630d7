"""Compressible viscoelastic flow of Oldroyd type on a periodic box, with
monitors for the identities and bounds the continuous system satisfies."""

from .constitutive import PressureLaw, piola_stress
from .errors import (
    CFLError,
    ConfigError,
    InvariantViolation,
    LameSolveError,
    NonPositiveDensityError,
    PicardDivergenceError,
    SnapshotIOError,
    TimeStepUnderflowError,
    ViscoflowError,
)
from .grid import Grid
from .interpolation import sample_at
from .lame import LameProblem, solve_momentum
from .monitors import MonitorReport, MonitorSettings, MonitorSuite, curl_defect
from .operators import discrete_norm, divergence, gradient, laplacian, tensor_divergence
from .stepper import Physics, State, StepConfig, advect_prescribed, picard_step, run_simulation

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "ConfigError",
    "Grid",
    "InvariantViolation",
    "LameProblem",
    "LameSolveError",
    "MonitorReport",
    "MonitorSettings",
    "MonitorSuite",
    "NonPositiveDensityError",
    "Physics",
    "PicardDivergenceError",
    "PressureLaw",
    "SnapshotIOError",
    "State",
    "StepConfig",
    "TimeStepUnderflowError",
    "ViscoflowError",
    "advect_prescribed",
    "curl_defect",
    "discrete_norm",
    "divergence",
    "gradient",
    "laplacian",
    "picard_step",
    "piola_stress",
    "run_simulation",
    "sample_at",
    "solve_momentum",
    "tensor_divergence",
]
