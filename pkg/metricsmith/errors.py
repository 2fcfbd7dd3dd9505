"""
Error Hierarchy
Every failure raised by the toolkit, grouped by the CLI exit code it maps to
"""


class MetricsmithError(ValueError):
    """Base class for toolkit errors"""
    exit_code = 2


# Exit code 1: usage / configuration

class ConfigError(MetricsmithError):
    exit_code = 1


class NonPositiveBeta(ConfigError):
    pass


class NonPositiveTemperature(ConfigError):
    pass


class ParameterOutOfRange(ConfigError):
    pass


class NotStochastic(ConfigError):
    pass


class RatioOutOfRange(ConfigError):
    pass


class KOutOfRange(ConfigError):
    pass


class UnknownMetric(ConfigError):
    pass


# Exit code 2: data

class DataError(MetricsmithError):
    exit_code = 2


class LengthMismatch(DataError):
    pass


class UnknownLabel(DataError):
    pass


class InvalidLabelSpace(DataError):
    pass


class ScoreRowNotNormalized(DataError):
    pass


class NoPredictions(DataError):
    pass


class EmptyInput(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EmptyTraining(DataError):
    pass


class MixedTaskTypes(DataError):
    pass


class EmptyFoldSet(DataError):
    pass


class MalformedInput(DataError):
    """Unparseable prediction file; message names the 1-based row and column"""

    def __init__(self, message: str, row: int = 0, column: str = ""):
        super().__init__(message)
        self.row = row
        self.column = column


# Exit code 3: metric cannot be computed on this data

class MetricInfeasible(MetricsmithError):
    exit_code = 3


class MissingScores(MetricInfeasible):
    pass


class SingleClassInput(MetricInfeasible):
    pass


class NoPositives(MetricInfeasible):
    pass


class NotBinary(MetricInfeasible):
    pass


class ConstantTarget(MetricInfeasible):
    pass


class AllTargetsNearZero(MetricInfeasible):
    pass


class NoUsableBins(MetricInfeasible):
    pass


class WrongCurveKind(MetricInfeasible):
    pass


class UnreachableTarget(MetricInfeasible):
    pass


class MissingAccuracy(MetricInfeasible):
    pass


class MissingMetric(MetricInfeasible):
    pass


# Exit code 4: output

class OutputError(MetricsmithError):
    exit_code = 4
