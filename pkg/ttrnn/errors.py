class TTRNNError(Exception):
    """
    Base class of every error raised by ttrnn.
    The CLI maps each subclass to its process exit code.
    """

    exit_code = 1


class ConfigError(TTRNNError):
    exit_code = 2


class ShapeError(TTRNNError, ValueError):
    exit_code = 2


class ArgumentError(TTRNNError, ValueError):
    exit_code = 2


class FormatError(TTRNNError):
    exit_code = 3


class NumericsError(TTRNNError, ArithmeticError):
    exit_code = 4


class DivergedError(NumericsError):
    """
    Raised by the training loop when the loss stops being finite.
    `checkpoint` holds the path of the last good checkpoint, if any.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class UndefinedMetricError(TTRNNError, ValueError):
    exit_code = 3
