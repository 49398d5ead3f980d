"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
:class:`StatisticalError` (the data cannot be tested, exit 1) and plain
input/shape problems (exit 2).
"""


class BlockTestError(Exception):
    """Base class for every error raised by this package."""


class StatisticalError(BlockTestError):
    """The data are valid input but degenerate for the requested statistic."""


class ZeroVariance(StatisticalError):
    pass


class DegenerateGrid(StatisticalError):
    pass


class TooFewBlocks(StatisticalError):
    pass


class SingularFactor(StatisticalError):
    pass


class InsufficientNullSample(StatisticalError):
    pass


class NoValidPartition(BlockTestError, ValueError):
    pass


class DimensionMismatch(BlockTestError, ValueError):
    pass


class UnknownKind(BlockTestError, ValueError):
    pass


class InvalidRho(BlockTestError, ValueError):
    pass


class InvalidP(BlockTestError, ValueError):
    pass


class LagOutOfRange(BlockTestError, ValueError):
    pass


class SizeGuardExceeded(BlockTestError, ValueError):
    pass


class NotSymmetric(BlockTestError, ValueError):
    pass


class NotDivisible(BlockTestError, ValueError):
    pass


class ParseError(BlockTestError, ValueError):
    pass
