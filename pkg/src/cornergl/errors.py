"""Exception types shared across the package."""


class CornerGLError(Exception):
    """Base class for all package errors."""


class NonConvergence(CornerGLError):
    """An iterative solver stalled before reaching its tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InvalidParams(CornerGLError, ValueError):
    """Parameters outside the supported range."""


class DegenerateMinimizer(CornerGLError):
    """The nontrivial branch is lost (profile collapsed to zero)."""


class InvalidGeometry(CornerGLError, ValueError):
    """Wedge construction constraints violated."""


class OutsideDomain(CornerGLError, ValueError):
    """Point does not belong to the closed wedge polygon."""


class MeshFailure(CornerGLError):
    """Mesh generation produced an invalid or low-quality mesh."""


class UnderflowRegionTooLarge(CornerGLError):
    """Too many nodes masked by the profile underflow floor."""


class InsufficientRange(CornerGLError):
    """Not enough usable samples to fit a decay rate."""


class ConfigError(CornerGLError, ValueError):
    """Run configuration is malformed or out of range."""
