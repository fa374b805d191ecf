"""Fixed-order 42-element lesion descriptor and its CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from melaseg.color_features import (
    DEFAULT_GLCM_LEVELS,
    GLCM_FEATURES,
    color_glcm,
    color_stats,
    stat_names,
)
from melaseg.colorspace import srgb_to_lab
from melaseg.errors import FormatError, NoLesionError
from melaseg.shape_features import compute_shape_features
from melaseg.texture_features import (
    DEFAULT_DELTA,
    DEFAULT_NGTDM_LEVELS,
    busyness,
    fuzzy_texture_spectrum,
    gray,
)

# contour_moment_1 is identically zero, and hull area/perimeter equal
# area / solidity and perimeter * convexity, so they stay out of the vector.
SHAPE_NAMES = (
    "area",
    "perimeter",
    "compactness",
    "asymmetry",
    "aspect_ratio",
    "eccentricity",
    "bending_energy",
    "contour_moment_2",
    "contour_moment_3",
    "hu_1",
    "hu_2",
    "hu_3",
    "convexity",
    "solidity",
)
TEXTURE_NAMES = ("fts_mean", "fts_variance", "fts_energy", "fts_entropy", "busyness")
COLOR_NAMES = tuple(stat_names()) + tuple(f"glcm_{name}" for name in GLCM_FEATURES)
FEATURE_NAMES = SHAPE_NAMES + TEXTURE_NAMES + COLOR_NAMES
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 42

CSV_COLUMNS = tuple(f"f{k:02d}" for k in range(1, N_FEATURES + 1))


@dataclass(frozen=True)
class FeatureVector:
    image_id: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} entries, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite feature for {self.image_id}")
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def extract_features(
    img: np.ndarray,
    mask: np.ndarray,
    image_id: str = "",
    delta: float = DEFAULT_DELTA,
    ngtdm_levels: int = DEFAULT_NGTDM_LEVELS,
    glcm_levels: int = DEFAULT_GLCM_LEVELS,
) -> FeatureVector:
    img = np.asarray(img)
    mask = np.asarray(mask, dtype=bool)
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} differ in size")
    if not mask.any():
        raise NoLesionError(f"mask for {image_id or 'image'} has no lesion pixels")

    shape = compute_shape_features(mask).as_dict()
    g = gray(img)
    fts = fuzzy_texture_spectrum(g, mask, delta)
    texture = (fts.mean, fts.variance, fts.energy, fts.entropy, busyness(g, mask, ngtdm_levels))
    stats = color_stats(img, srgb_to_lab(img), mask)
    glcm = color_glcm(img, mask, glcm_levels)

    values = (
        [shape[name] for name in SHAPE_NAMES]
        + list(texture)
        + list(stats.values())
        + [getattr(glcm, name) for name in GLCM_FEATURES]
    )
    return FeatureVector(image_id, np.array(values, dtype=np.float64))


def _fmt(x: float) -> str:
    s = f"{x:.9g}"
    return "0" if s == "-0" else s


def write_features_csv(vectors, path) -> None:
    """``image_id,f01,...,f42`` with 9 significant digits, rows sorted by id."""
    lines = [",".join(("image_id",) + CSV_COLUMNS)]
    for fv in sorted(vectors, key=lambda v: v.image_id):
        lines.append(",".join([fv.image_id] + [_fmt(x) for x in fv.values.tolist()]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_features_csv(path) -> list[FeatureVector]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty features file")
        header = [h.strip() for h in header]
        if header[0] != "image_id" or tuple(header[1:]) != CSV_COLUMNS:
            raise FormatError(
                f"{path}: feature columns do not match the expected order "
                f"image_id,{CSV_COLUMNS[0]},...,{CSV_COLUMNS[-1]}"
            )
        out = []
        for row in reader:
            if not row:
                continue
            if len(row) != N_FEATURES + 1:
                raise FormatError(f"{path}: row for {row[0]} has {len(row) - 1} features")
            values = [float(v) for v in row[1:]]
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"{path}: non-finite feature for {row[0]}")
            out.append(FeatureVector(row[0], np.array(values)))
    return out
