"""Exception types shared across the package."""


class PoltrackError(Exception):
    """Base class for all package-specific errors."""


class SingularMatrix(PoltrackError):
    """A 2x2 matrix is numerically singular (|det| ~ 0 or condition > 1e12)."""


class DegeneratePDL(PoltrackError):
    """The channel's smallest singular value collapsed below numerical floor."""


class InvalidFrame(PoltrackError):
    """Pilot/frame layout parameters violate their preconditions."""


class LengthMismatch(PoltrackError):
    """Two symbol sequences that must align have different lengths."""


class TapBlowup(PoltrackError):
    """A gradient-descent equalizer diverged (tap norm above 1e6)."""
