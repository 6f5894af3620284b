"""Exception types raised by the certification toolkit."""

from __future__ import annotations

import numpy as np


class BasincertError(Exception):
    """Base class for all toolkit errors."""


class EmptyTarget(BasincertError):
    """The target set has no points or samples to minimize over."""


class EmptyRegion(BasincertError):
    """A region yielded no sample points at the requested resolution."""


class EmptyAnnulus(EmptyRegion):
    """The annulus cl(X') with distance-to-target >= d_bar/2 has no samples."""


class NotStrictSubset(BasincertError):
    """The candidate neighborhood covers the whole domain; its complement is empty."""


class NonpositiveResult(BasincertError):
    """The escape distance is not positive: the target touches the complement."""


class NonpositiveLevel(BasincertError):
    """min W over the annulus is <= 0: W vanishes somewhere off the target set."""


class NondifferentiableAt(BasincertError):
    """One-sided differences disagree at this point; the gradient is undefined here.

    Not a failure of the field: the pointwise decrease bound is only required
    where the Lyapunov candidate is differentiable.
    """

    def __init__(self, x, detail: str = ""):
        self.x = np.asarray(x, dtype=float)
        msg = f"no gradient at {self.x.tolist()}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class StepTooLarge(BasincertError):
    """Integration step exceeds the stability cap min(0.01, 0.1/M)."""


class LeftDomain(BasincertError):
    """Projection back onto the domain moved a state by more than tol_proj.

    Signals a velocity pointing genuinely out of the domain, i.e. an
    ill-posed inclusion violating the tangency invariant.
    """


class TooManyKinks(BasincertError):
    """More than 1% of samples are nondifferentiable points of W."""


class UnknownFamily(BasincertError):
    """Dynamic family name not recognized."""


class UnsupportedFamily(BasincertError):
    """No gains-based Lyapunov candidate ships for this dynamic family."""


class PreconditionFailed(BasincertError):
    """A documented precondition of an operation does not hold."""

    def __init__(self, msg: str, failed: list[str] | None = None):
        super().__init__(msg)
        self.failed = failed or []


class SchemaMismatch(BasincertError):
    """Certificate schema version or config hash differs from the recorded one."""


class ConfigError(BasincertError):
    """Malformed run configuration; carries the offending field name."""

    def __init__(self, field: str, msg: str):
        self.field = field
        super().__init__(f"config field '{field}': {msg}")
