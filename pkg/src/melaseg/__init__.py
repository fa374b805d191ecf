"""Dermoscopy lesion segmentation, descriptor extraction and one-vs-all SVM scoring."""

from melaseg.errors import (
    DegenerateMarkersError,
    FormatError,
    ImageDecodeError,
    InconsistentLabelError,
    MelasegError,
    ModelFormatError,
    NoLesionError,
    NoPairsError,
    SvmConvergenceError,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateMarkersError",
    "FormatError",
    "ImageDecodeError",
    "InconsistentLabelError",
    "MelasegError",
    "ModelFormatError",
    "NoLesionError",
    "NoPairsError",
    "SvmConvergenceError",
]
