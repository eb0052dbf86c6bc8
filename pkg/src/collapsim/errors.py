"""Exception hierarchy for collapsim.

Every error raised by the library derives from CollapsimError so callers can
catch simulation failures without swallowing unrelated bugs.
"""


class CollapsimError(Exception):
    """Base class for all collapsim errors."""


class ConfigurationError(CollapsimError):
    """Invalid parameters, dimensions, or scenario configuration."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        # full list of validation problems, for config parsers that report
        # every violation rather than the first
        self.problems = list(problems) if problems else [message]


class DegenerateInputError(CollapsimError):
    """Inputs that are syntactically valid but physically degenerate (e.g. all-zero weights)."""


class ResourceLimitError(CollapsimError):
    """Requested Hilbert space exceeds the configured dimension cap."""


class KernelIntegrityError(CollapsimError):
    """Noise kernel failed positivity beyond numerical tolerance."""


class StepSizeError(CollapsimError):
    """Per-step norm drift exceeded the configured bound; dt is too large."""


class NumericalOverflowError(CollapsimError):
    """NaN or Inf appeared in state amplitudes."""


class DegenerateHitError(CollapsimError):
    """A localization hit annihilated the state (zero post-hit norm)."""


class DegenerateDynamicsError(CollapsimError):
    """Repeated resampling of localization hits failed to produce a valid state."""


class UnsupportedModelError(CollapsimError):
    """Operation requested for a model variant it does not support."""


class InconclusiveCollapseError(CollapsimError):
    """Too few trajectories resolved an outcome; increase the collapse horizon."""


class EnsembleError(CollapsimError):
    """More than the tolerated fraction of trajectories failed."""


class FitQualityError(CollapsimError):
    """Time series does not match the assumed functional form (low R^2 or too few points)."""
