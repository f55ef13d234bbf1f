"""Projection methods that make one-step SDE schemes conserve invariants exactly."""

from .core import (
    ConfigurationError,
    ConservationCheckError,
    DegenerateGradientError,
    Invariant,
    NonConvergenceError,
    NumericalError,
    ProjSDEError,
    SdeModel,
    SingularMatrixError,
    SkewGradientForm,
    SpecialClassData,
    UnsupportedModelError,
    check_conserved,
    default_skew_gradient,
)
from .harness import (
    ConvergenceReport,
    DriftReport,
    StudyConfig,
    StudyError,
    fit_order,
    integrate,
    parse_method,
    run_convergence,
    run_drift,
)
from .models import MODELS, build_model, exact_kubo, kubo, lotka_volterra, pendulum
from .noise import BrownianGrid, RngStream, TruncationConfig, coarsen, sample_grid
from .projection import ProjectionConfig, project, project_multi, project_single, projected_step
from .report import export_report, load_report
from .schemes import METHODS, SchemeConfig, discrete_gradient, get_scheme

__version__ = "0.1.0"
