"""Lesion/skin segmentation by nearest color marker in the (a*, b*) plane."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import ndimage

from melaseg.colorspace import srgb_to_lab
from melaseg.errors import DegenerateMarkersError

AUTO_DISK_FRACTION = 0.15
AUTO_BAND_FRACTION = 0.05
MIN_MARKER_DISTANCE = 1e-3
DEFAULT_SE_RADIUS = 3

EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ColorMarker:
    a_star: float
    b_star: float
    source: Literal["auto-center", "auto-border", "manual"] = "manual"

    def __post_init__(self):
        if not (np.isfinite(self.a_star) and np.isfinite(self.b_star)):
            raise ValueError("color marker must be finite")

    def distance(self, other: "ColorMarker") -> float:
        return float(np.hypot(self.a_star - other.a_star, self.b_star - other.b_star))


@dataclass(frozen=True)
class SeedSpec:
    """Where to sample the two color markers.

    ``auto`` samples a centered disk for the lesion and a border frame for
    skin. ``manual`` takes the lesion disk as ``(cx, cy, radius)`` in pixels.
    ``skin_band`` is the frame width as a fraction of the shorter side.
    """

    mode: Literal["auto", "manual"] = "auto"
    lesion_disk: tuple[float, float, float] | None = None
    skin_band: float | None = None

    def __post_init__(self):
        if self.mode not in ("auto", "manual"):
            raise ValueError(f"unknown seed mode {self.mode!r}")
        if self.mode == "manual" and self.lesion_disk is None:
            raise ValueError("manual seed mode requires a lesion disk")
        if self.mode == "auto" and self.lesion_disk is not None:
            raise ValueError("a lesion disk is only accepted in manual seed mode")
        if self.lesion_disk is not None and self.lesion_disk[2] < 1:
            raise ValueError("lesion disk radius must be >= 1")
        if self.skin_band is not None and not 0 < self.skin_band < 0.5:
            raise ValueError("skin band fraction must be in (0, 0.5)")


def disk_region(shape: tuple[int, int], cx: float, cy: float, radius: float) -> np.ndarray:
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2


def border_band(shape: tuple[int, int], width: int) -> np.ndarray:
    h, w = shape
    band = np.zeros(shape, dtype=bool)
    band[:width, :] = True
    band[h - width :, :] = True
    band[:, :width] = True
    band[:, w - width :] = True
    return band


def seed_regions(shape: tuple[int, int], seeds: SeedSpec) -> tuple[np.ndarray, np.ndarray]:
    """Boolean sample regions ``(lesion, skin)`` for an image of ``shape``."""
    h, w = shape
    side = min(h, w)
    band_fraction = AUTO_BAND_FRACTION if seeds.skin_band is None else seeds.skin_band
    band_width = max(1, int(round(band_fraction * side)))
    skin = border_band(shape, band_width)
    if seeds.mode == "auto":
        lesion = disk_region(shape, (w - 1) / 2.0, (h - 1) / 2.0, AUTO_DISK_FRACTION * side)
    else:
        cx, cy, r = seeds.lesion_disk
        if cx - r < 0 or cy - r < 0 or cx + r > w - 1 or cy + r > h - 1:
            raise ValueError(
                f"lesion seed disk ({cx}, {cy}, r={r}) leaves the {w}x{h} image"
            )
        lesion = disk_region(shape, cx, cy, r)
    return lesion, skin


def region_marker(lab: np.ndarray, region: np.ndarray, source="manual") -> ColorMarker:
    """Mean (a*, b*) over a boolean region."""
    n = int(np.count_nonzero(region))
    if n == 0:
        raise ValueError("seed region is empty")
    ab = lab[region][:, 1:3]
    a, b = ab.mean(axis=0)
    return ColorMarker(float(a), float(b), source)


def estimate_markers(lab: np.ndarray, seeds: SeedSpec = SeedSpec()) -> tuple[ColorMarker, ColorMarker]:
    lesion_region, skin_region = seed_regions(lab.shape[:2], seeds)
    lesion_src, skin_src = ("auto-center", "auto-border") if seeds.mode == "auto" else ("manual", "manual")
    lesion = region_marker(lab, lesion_region, lesion_src)
    skin = region_marker(lab, skin_region, skin_src)
    if lesion.distance(skin) < MIN_MARKER_DISTANCE:
        raise DegenerateMarkersError(
            f"lesion and skin markers are {lesion.distance(skin):.3g} apart in (a*, b*)"
        )
    return lesion, skin


def classify_pixels(lab: np.ndarray, lesion: ColorMarker, skin: ColorMarker) -> np.ndarray:
    """Label each pixel lesion iff it is strictly closer to the lesion marker.

    Squared distances are compared; the ordering is the same as for the
    Euclidean distances. Exact ties go to skin.
    """
    a = lab[..., 1]
    b = lab[..., 2]
    d_lesion = (a - lesion.a_star) ** 2 + (b - lesion.b_star) ** 2
    d_skin = (a - skin.a_star) ** 2 + (b - skin.b_star) ** 2
    return d_lesion < d_skin


def disk_footprint(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return xx**2 + yy**2 <= r * r


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest 8-connected component; the first in raster order wins ties."""
    labels, n = ndimage.label(mask, structure=EIGHT)
    if n <= 1:
        return labels > 0
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    # Default structure is 4-connected for the background.
    return ndimage.binary_fill_holes(mask)


def reconstruct(marker: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Binary reconstruction: 8-connected components of ``mask`` hit by ``marker``."""
    labels, _ = ndimage.label(mask, structure=EIGHT)
    hit = np.unique(labels[marker & mask])
    hit = hit[hit > 0]
    return np.isin(labels, hit)


def _open_close(mask: np.ndarray, radius: int) -> np.ndarray:
    """Opening then closing, both by reconstruction.

    Lesion components that cannot hold the disk are dropped and skin
    components that cannot hold it are filled, while every surviving
    boundary is kept pixel-exact.
    """
    if radius <= 0:
        return mask.copy()
    fp = disk_footprint(radius)
    # Edge padding treats the canvas as continuing outward.
    pad = radius + 1
    m = np.pad(mask, pad, mode="edge")
    m = reconstruct(ndimage.binary_erosion(m, fp), m)
    m = ~reconstruct(ndimage.binary_erosion(~m, fp), ~m)
    return m[pad:-pad, pad:-pad]


def postprocess(mask: np.ndarray, se_radius: int = DEFAULT_SE_RADIUS) -> np.ndarray:
    """Open, close, keep the largest 8-connected lesion and fill its holes."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    smoothed = _open_close(mask, se_radius)
    if not smoothed.any():
        return largest_component(mask)
    return fill_holes(largest_component(smoothed))


def segment(
    img: np.ndarray,
    seeds: SeedSpec = SeedSpec(),
    se_radius: int = DEFAULT_SE_RADIUS,
) -> np.ndarray:
    lab = srgb_to_lab(img)
    lesion, skin = estimate_markers(lab, seeds)
    return postprocess(classify_pixels(lab, lesion, skin), se_radius)
