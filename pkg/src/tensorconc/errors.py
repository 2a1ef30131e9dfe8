class TensorConcError(ValueError):
    """Base class for all library errors."""


class InvalidParameterError(TensorConcError):
    pass


class UnsupportedError(TensorConcError):
    """Requested computation is outside the supported (exact) regime."""


class MomentDoesNotExistError(TensorConcError):
    pass


class NotSubGaussianError(TensorConcError):
    pass


class NotInOrliczSpaceError(TensorConcError):
    pass
