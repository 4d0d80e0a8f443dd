"""Exception types shared across the package."""


class NlwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(NlwaveError):
    """Invalid or inconsistent experiment configuration."""


class PulseOverlapsSupport(NlwaveError):
    """Initial pulse band intersects the nonlinearity support, so the
    free-wave Cauchy data would not be valid."""


class NumericalBlowup(NlwaveError):
    """Solution amplitude exceeded the runaway threshold."""


class WrongVariant(NlwaveError):
    """Operation called with an incompatible nonlinearity variant."""


class GridMismatch(NlwaveError):
    """Two fields do not share a grid or kind."""


class GridTooCoarse(NlwaveError):
    """Sampling cannot resolve the requested harmonic."""


class EnvelopeUnderflow(NlwaveError):
    """Envelope too small on the requested band for a stable division."""


class DivisionBand(NlwaveError):
    """Normalization field vanishes on the evaluation band."""


class DomainTooSmall(NlwaveError):
    """Requested abscissa exceeds the sampled data range."""


class SupportLeak(NlwaveError):
    """Field is non-negligible near the grid boundary."""
