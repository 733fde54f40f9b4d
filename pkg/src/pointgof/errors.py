"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`PointGofError`
so callers (and the CLI) can tell input problems apart from bugs.  The CLI maps
:class:`ConfigError` subclasses to exit code 2 and :class:`NumericError`
subclasses to exit code 3.
"""


class PointGofError(Exception):
    pass


class ConfigError(PointGofError, ValueError):
    """Invalid user input: bad parameters, malformed files, impossible settings."""


class NumericError(PointGofError, ArithmeticError):
    """A computation could not produce a meaningful result."""


# pattern-core
class InvalidWindow(ConfigError):
    pass


class DuplicatePoint(ConfigError):
    pass


class OutOfWindow(ConfigError):
    pass


class TooFewPoints(NumericError):
    pass


class EmptyPattern(NumericError):
    pass


class InvalidGrid(ConfigError):
    pass


# simulators
class InvalidSpec(ConfigError):
    pass


class SSIFailure(NumericError):
    pass


# summaries
class BandwidthNonpositive(ConfigError):
    pass


class NoValidTestLocations(NumericError):
    pass


class InvalidArgs(ConfigError):
    pass


# statistics / orderings / procedures
class DegenerateScale(NumericError):
    pass


class TooFewSimulations(ConfigError):
    pass


class IndexOutOfGrid(ConfigError):
    pass


class MixedTags(ConfigError):
    pass


class MixedDirections(ConfigError):
    pass


class MismatchedShapes(ConfigError):
    pass


class AlphaTooSmall(ConfigError):
    pass


class InsufficientSimulations(ConfigError):
    pass


class EstimatorFailure(NumericError):
    pass
