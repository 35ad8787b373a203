"""Exception hierarchy shared by all modules."""


class TsqpdeError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(TsqpdeError, ValueError):
    """Operands have incompatible extents or lengths."""


class ContractShapeError(ShapeError):
    pass


class DegenerateSpectrumError(TsqpdeError, ValueError):
    """A decomposition was requested on an all-zero tensor."""


class PolarDegenerateError(TsqpdeError, ValueError):
    """The polar factor of a rank-deficient matrix is not unique."""


class ResourceError(TsqpdeError, RuntimeError):
    """A dimension or bond-dimension budget was exceeded."""


class DegenerateBranchError(TsqpdeError, ValueError):
    """The ancilla branch weight is 0 or 1, so no interference signal exists."""


class InsufficientDataError(TsqpdeError, ValueError):
    pass


class NoSignalError(TsqpdeError, ValueError):
    pass


class AlignmentError(TsqpdeError, ValueError):
    """Variant measurements are not on a common (theta, t) grid."""


class ConfigError(TsqpdeError, ValueError):
    """Run configuration failed validation.

    ``fields`` lists the offending keys.
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)
