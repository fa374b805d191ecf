class MelasegError(Exception):
    """Base class for all errors raised by this package."""


class ImageDecodeError(MelasegError):
    pass


class FormatError(MelasegError):
    """A file decoded but does not have the expected layout."""


class InconsistentLabelError(FormatError):
    pass


class DegenerateMarkersError(MelasegError):
    """Lesion and skin markers are too close to separate the two regions."""


class NoLesionError(MelasegError):
    pass


class NoPairsError(MelasegError):
    pass


class SvmConvergenceError(MelasegError):
    def __init__(self, message: str, max_violation: float):
        super().__init__(message)
        self.max_violation = max_violation


class ModelFormatError(MelasegError):
    pass
