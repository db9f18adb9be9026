"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MinEntropyError(Exception):
    """Base class for every error raised by this package."""


class InvalidState(MinEntropyError, ValueError):
    """An object violates its type invariants or dimensions do not match."""


class InfeasibleSpectrum(MinEntropyError):
    """A spectrum has a largest eigenvalue above 1/d.

    Attributes
    ----------
    lambda_max : float
        Largest eigenvalue of the offending spectrum.
    d : int
        Requested dimension.
    """

    def __init__(self, message: str, lambda_max: float | None = None, d: int | None = None):
        super().__init__(message)
        self.lambda_max = lambda_max
        self.d = d


class InfeasiblePad(InfeasibleSpectrum):
    """The pad's marginal min-entropy is below log2 d."""


class InfeasibleSOR(InfeasibleSpectrum):
    """A randomness source cannot dephase d^2-dimensional states."""


class InsufficientCatalyst(InfeasibleSpectrum):
    """The catalyst's min-entropy is too small for the requested transition."""


class NotMajorized(MinEntropyError):
    """A target vector is not majorized by the source spectrum."""


class UnsupportedOrder(MinEntropyError, ValueError):
    """No orthogonal Latin square pair of this order can be constructed.

    Attributes
    ----------
    d : int
        Requested order.
    next_supported : int
        Smallest supported order larger than ``d``.
    overhead_bits : float
        ``log2(next_supported) - log2(d)``, the extra min-entropy an embedding costs.
    """

    def __init__(self, d: int, next_supported: int, overhead_bits: float):
        super().__init__(
            f"no pair of orthogonal Latin squares is constructed for order {d} "
            f"(orders 2 and 6 admit none, and d = 2 mod 4 is not covered by the "
            f"field/product construction); smallest supported order is {next_supported}, "
            f"embedding costs {overhead_bits:.6f} extra bits of min-entropy"
        )
        self.d = d
        self.next_supported = next_supported
        self.overhead_bits = overhead_bits


class CapacityExceeded(MinEntropyError, ValueError):
    """A requested simulation exceeds the dense-matrix size limits."""
