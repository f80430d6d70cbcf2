"""Exception types shared across the pipeline.

Each class carries the process exit code the CLI maps it to.
"""


class RhythmError(Exception):
    exit_code = 2


class ConfigError(RhythmError):
    exit_code = 1


class ParameterError(RhythmError):
    """Invalid numeric parameter, e.g. a component count out of range."""

    exit_code = 1


class InvalidWindowError(ConfigError):
    pass


class FormatError(RhythmError):
    exit_code = 2


class DomainError(RhythmError):
    """Input data outside the admissible domain (negative entries, ...)."""

    exit_code = 2


class DimensionError(RhythmError):
    exit_code = 2


class EmptyInputError(RhythmError):
    exit_code = 2


class AlignmentError(RhythmError):
    exit_code = 2


class DegenerateError(RhythmError):
    """Numerical degeneracy: zero variance, all-zero weight rows, ..."""

    exit_code = 3
