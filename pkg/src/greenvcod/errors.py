class GvcodError(ValueError):
    """Base error. ``code`` is the short machine-readable tag used by the CLI."""

    code = "invalid"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ShapeError(GvcodError):
    code = "shape"


class ModelFormatError(GvcodError):
    code = "model_format"


class DataError(GvcodError):
    code = "data"
