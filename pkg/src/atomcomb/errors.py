"""Exception types shared across the package."""


class AtomCombError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(AtomCombError, ValueError):
    """A physical parameter or index is out of its allowed range."""


class ConfigError(AtomCombError, ValueError):
    """A run configuration file is missing, malformed, or inconsistent."""


class DegenerateDriveError(AtomCombError):
    """Two distinct tones share a carrier frequency (delta = 0).

    Merge them into a single tone with
    :func:`atomcomb.floquet.merge_degenerate_drives` first.
    """


class SolverError(AtomCombError):
    """A linear solve failed or produced a non-physical state."""


class ConvergenceError(AtomCombError):
    """An iterative refinement (harmonic cutoff, step size) did not converge."""


class WindowError(AtomCombError):
    """A correlation window is too short for the requested accuracy."""
