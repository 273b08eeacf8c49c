"""Exception hierarchy for ldp_metrics."""


class LdpMetricsError(ValueError):
    """Base class for all library errors."""


class InvalidProtocol(LdpMetricsError):
    pass


class NegativeEntry(InvalidProtocol):
    pass


class ColumnSumMismatch(InvalidProtocol):
    def __init__(self, column: int, deviation: float):
        self.column = column
        self.deviation = deviation
        super().__init__(
            f"column {column} sums to 1{deviation:+.3e}; tolerance exceeded")


class DimensionMismatch(LdpMetricsError):
    pass


class OutputSpaceTooLarge(LdpMetricsError):
    pass


class WeightMismatch(LdpMetricsError):
    pass


class InvalidSimplexPoint(LdpMetricsError):
    pass


class InvalidPrior(LdpMetricsError):
    pass


class NonPositiveArgument(LdpMetricsError):
    pass


class DegeneratePrior(LdpMetricsError):
    pass


class NotFaithful(LdpMetricsError):
    pass


class TooManyRejections(LdpMetricsError):
    pass


class DegenerateWorstCase(LdpMetricsError):
    pass


class BudgetExceeded(LdpMetricsError):
    pass


class AlphabetTooLarge(LdpMetricsError):
    pass


class OddAlphabet(LdpMetricsError):
    pass


class EpsilonZero(LdpMetricsError):
    pass


class TallyLengthMismatch(LdpMetricsError):
    pass


class AllSamplesUnderflow(LdpMetricsError):
    pass


class EffectiveSampleSizeTooLow(LdpMetricsError):
    pass


class ParseError(LdpMetricsError):
    pass


class UnknownSuite(LdpMetricsError):
    pass
