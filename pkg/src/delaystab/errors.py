"""Exception hierarchy. The CLI maps these onto exit-code classes."""


class DelaystabError(Exception):
    """Base class for all package errors."""


class ModelBuildError(DelaystabError):
    """Invalid model data: dimension mismatch, bad shift, bad grid."""


class SpectralSplitError(DelaystabError):
    """Ill-posed spectral split, e.g. an eigenvalue on the boundary strip."""


class GainDesignError(DelaystabError):
    """Gain synthesis failed (unstabilizable pair or numerical failure)."""


class KernelSolveError(DelaystabError):
    """Memory-kernel synthesis failed or misconfigured."""


class SimulationError(DelaystabError):
    """Closed-loop simulation misconfigured (step/delay mismatch, horizon)."""


class SimulationBlowup(SimulationError):
    """Norm exceeded the blow-up threshold; carries the partial history."""

    def __init__(self, message, times=None, norms=None):
        super().__init__(message)
        self.times = times
        self.norms = norms


class ConfigError(DelaystabError):
    """Scenario file does not parse or violates a constraint."""
