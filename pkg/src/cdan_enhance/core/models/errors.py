from typing import Any, Dict, Optional


class UserInputError(Exception):
    def __init__(self, msg: str):
        super().__init__(msg)
        self.msg = msg


class ServiceError(Exception):
    def __init__(self, msg: str):
        super().__init__(msg)
        self.msg = msg


class CdanError(Exception):
    def __init__(self, msg: str):
        super().__init__(msg)
        self.msg = msg


class ShapeError(CdanError, ValueError):
    pass


class NonFiniteError(CdanError, ArithmeticError):
    pass


class GraphError(CdanError, RuntimeError):
    pass


class ImageFormatError(CdanError, ValueError):
    pass


class DatasetError(CdanError):
    pass


class CheckpointError(CdanError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class UnknownTensorError(CheckpointError, KeyError):
    def __str__(self):
        return self.msg


class ExtractorNotInitializedError(CdanError, RuntimeError):
    pass


class MissingGradientError(CdanError, RuntimeError):
    pass


class NonFiniteLossError(CdanError, ArithmeticError):
    def __init__(
        self, msg: str, step: int, terms: Optional[Dict[str, Any]] = None
    ):
        super().__init__(msg)
        self.step = step
        self.terms = terms or {}
