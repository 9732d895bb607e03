class FstirapError(Exception):
    """Base class for errors raised by this package."""


class DegenerateDarkStateError(FstirapError, ValueError):
    """Both couplings vanish, so the dark-state direction is undefined."""


class BasisMismatchError(FstirapError, ValueError):
    pass


class IntegrationError(FstirapError, RuntimeError):
    """Time propagation failed (norm drift, non-finite Hamiltonian, solver failure)."""


class ClassificationError(FstirapError, ValueError):
    pass


class SequencingError(FstirapError, ValueError):
    """Pulse supports of consecutive protocol stages overlap."""


class ConfigError(FstirapError, ValueError):
    pass
