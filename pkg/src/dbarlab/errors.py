"""Exception hierarchy shared by every module."""

from __future__ import annotations


class DbarLabError(Exception):
    """Base class for all errors raised by the package."""


class NumericalFailure(DbarLabError):
    """A numerical routine could not reach its target accuracy."""


class NoConvergence(NumericalFailure):
    """Projection onto a boundary failed within the iteration cap."""


class OutsideShell(DbarLabError):
    """A point lies outside the neighbourhood where the distance is C^2."""


class BadJet(DbarLabError):
    """A jet violates |d rho| = 1 beyond tolerance."""


class ShellTooThin(DbarLabError):
    """Mollification radius does not fit inside the shell."""


class DegenerateTangent(NumericalFailure):
    """The complex normal has (near) zero length."""


class DegreeMismatch(DbarLabError):
    """Forms of different bidegree were combined."""


class DegreeOverflow(DbarLabError):
    """A wedge product would exceed the top degree."""


class UnsupportedSupport(DbarLabError):
    """A test form does not honour its declared support."""


class BoundaryConditionViolated(DbarLabError):
    """A test form fails its declared boundary condition."""


class NotClosed(DbarLabError):
    """A form expected to be dbar-closed is not."""


class MarginOrder(DbarLabError):
    """Cutoff margins are not strictly ordered inside the shell."""


class QTooSmall(DbarLabError):
    """The mixed constant only exists for q >= 2."""


class MissingInputs(DbarLabError):
    """A conditional constant lacks one of its user-supplied leaves."""


class MemoryGuard(DbarLabError):
    """An operator would exceed the nonzero budget."""


class NotInRange(NumericalFailure):
    """The least-squares residual stagnated above tolerance."""


class SpectralStagnation(NumericalFailure):
    """Smallest singular value iteration failed to stabilise."""


class ResolutionTooCoarse(NumericalFailure):
    """No spectral gap separates the numerical kernel from the rest."""


class ConfigError(DbarLabError):
    """Invalid run configuration."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
