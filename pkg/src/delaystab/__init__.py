"""Delayed feedback stabilization of parabolic systems.

Pipeline: build a model, split its spectrum at the decay target, verify
stabilizability, design the delay-compensating gain, synthesize the
memory kernel, and integrate the delayed closed loop with certified
exponential decay.
"""

from .errors import (
    ConfigError,
    DelaystabError,
    GainDesignError,
    KernelSolveError,
    ModelBuildError,
    SimulationBlowup,
    SimulationError,
    SpectralSplitError,
)
from .models import (
    Forcing,
    Nonlinearity,
    ParabolicModel,
    build_convection_diffusion_1d,
    build_custom_lti,
    build_semilinear_1d,
    burgers_nonlinearity,
    cubic_nonlinearity,
    lift_boundary_control,
)
from .spectral import (
    HautusReport,
    SpectralSplit,
    compute_split,
    hautus_check,
    stable_decay_constant,
)
from .gain import FeedbackDesign, design_from_gain, design_gain, default_margin_rate
from .kernel import (
    HistoryBuffer,
    MemoryKernel,
    dump_kernel,
    eval_feedback,
    load_kernel,
    solve_kernel,
)
from .loop import (
    DecayCertificate,
    Trajectory,
    artstein_residuals,
    fit_decay,
    picard_semilinear,
    probe_stable_radius,
    simulate_linear,
    simulate_semilinear,
)
from .config import ScenarioConfig, parse_config, parse_config_file

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DelaystabError", "GainDesignError", "KernelSolveError",
    "ModelBuildError", "SimulationBlowup", "SimulationError", "SpectralSplitError",
    "Forcing", "Nonlinearity", "ParabolicModel",
    "build_convection_diffusion_1d", "build_custom_lti", "build_semilinear_1d",
    "burgers_nonlinearity", "cubic_nonlinearity", "lift_boundary_control",
    "HautusReport", "SpectralSplit", "compute_split", "hautus_check",
    "stable_decay_constant",
    "FeedbackDesign", "design_from_gain", "design_gain", "default_margin_rate",
    "HistoryBuffer", "MemoryKernel", "dump_kernel", "eval_feedback",
    "load_kernel", "solve_kernel",
    "DecayCertificate", "Trajectory", "artstein_residuals", "fit_decay",
    "picard_semilinear", "probe_stable_radius", "simulate_linear", "simulate_semilinear",
    "ScenarioConfig", "parse_config", "parse_config_file",
]
