"""Exception hierarchy shared by every solver"""
from __future__ import annotations


class WaveguideError(Exception):
    """Base class for all library errors"""


class ConfigError(WaveguideError):
    """Run configuration could not be parsed into domain objects"""


class DomainError(WaveguideError):
    """Invalid geometry or density (b <= 0, Sigma <= 0, ...)"""


class ConvergenceError(WaveguideError):
    """An iterative or adaptive procedure did not reach its tolerance"""


class SingularKernelError(WaveguideError):
    """G2 evaluated on its logarithmic singularity (dx = 0)"""


class SlabRegimeError(WaveguideError):
    """No localized slab bound state for the requested amplitude"""


class BracketError(WaveguideError):
    """Root not bracketed; carries the bracket and the residual there"""

    def __init__(self, message: str, lo: float, hi: float, f_lo: float, f_hi: float):
        super().__init__(f"{message} (f({lo!r})={f_lo!r}, f({hi!r})={f_hi!r})")
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi


class ShiftPlacementError(WaveguideError):
    """Inverse iteration did not land on the ground state"""
