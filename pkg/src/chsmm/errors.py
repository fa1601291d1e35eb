"""Exception taxonomy shared by all chsmm modules.

The CLI maps these onto exit codes: data-shaped problems (parsing,
alignment, infeasible requests, bad arguments) exit 3, model-file
problems exit 4.
"""


class ChsmmError(Exception):
    """Base class for all library errors."""


class InputError(ChsmmError):
    """Caller supplied an argument that violates an operation's contract."""


class ParseError(InputError):
    """A data file could not be parsed; the message names the offending row."""


class EmptyInputError(ParseError):
    """A data file contained no usable rows."""


class AlignmentError(InputError):
    """Exogenous data does not cover the series, or a coverage gap exceeds the limit."""


class InfeasibleKError(InputError):
    """More clusters requested than distinct power values available."""


class InsufficientDataError(InputError):
    """Too little data to fit the requested model."""


class UndefinedNormalizerError(ChsmmError):
    """NRMSE normalizer is zero: all evaluation windows have the same aggregate sum."""


class ModelLoadError(ChsmmError):
    """Model file is unreadable or structurally invalid."""


class ModelVersionError(ModelLoadError):
    """Model file has an incompatible format version."""
