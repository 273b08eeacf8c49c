"""Scalar results with provenance."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

EXACT = "exact"
MONTE_CARLO = "monte-carlo"
QUADRATURE = "quadrature"
_METHODS = (EXACT, MONTE_CARLO, QUADRATURE)


@dataclass(frozen=True)
class MetricEstimate:
    """A metric value together with how it was obtained.

    Attributes:
        value: point estimate; may be +-inf where the metric diverges.
        std_error: Monte-Carlo standard error, 0 for exact and quadrature results.
        sample_count: number of prior samples used (0 when none were drawn).
        seed: master seed of the sample stream, if any.
        method: one of "exact", "monte-carlo", "quadrature".
    """

    value: float
    std_error: float = 0.0
    sample_count: int = 0
    seed: Optional[int] = None
    method: str = EXACT

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "std_error", float(self.std_error))
        object.__setattr__(self, "sample_count", int(self.sample_count))
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.std_error >= 0):
            raise ValueError("std_error must be nonnegative")
        if self.method != MONTE_CARLO and self.std_error != 0:
            raise ValueError("deterministic methods carry zero std_error")
        if math.isnan(self.value):
            raise ValueError("value is NaN")

    @classmethod
    def exact(cls, value: float) -> "MetricEstimate":
        return cls(float(value))

    def within(self, target: float, sigmas: float = 3.0, atol: float = 0.0) -> bool:
        """True when |value - target| <= sigmas * std_error + atol."""
        return abs(self.value - target) <= sigmas * self.std_error + atol

    def to_dict(self) -> dict:
        return asdict(self)

    def __float__(self):
        return self.value
