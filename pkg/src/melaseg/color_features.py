"""Colour statistics and colour-index co-occurrence over the lesion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from melaseg.errors import NoLesionError, NoPairsError

CHANNELS = ("R", "G", "B", "L", "a", "b")
STATS = ("mean", "std", "skew")
GLCM_FEATURES = ("contrast", "correlation", "energy", "entropy", "homogeneity")
DEFAULT_GLCM_LEVELS = 4
# (dy, dx) pairs at distance 1.
DEFAULT_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


@dataclass(frozen=True)
class GlcmFeatures:
    contrast: float
    correlation: float
    energy: float
    entropy: float
    homogeneity: float


def stat_names() -> list[str]:
    return [f"{stat}_{ch}" for ch in CHANNELS for stat in STATS]


def _moments(values: np.ndarray, mean: float) -> tuple[float, float]:
    d = values - mean
    var = float(np.mean(d * d))
    std = var**0.5
    skew = float(np.mean(d**3)) / std**3 if std >= 1e-9 else 0.0
    return std, skew


def color_stats(img: np.ndarray, lab: np.ndarray, mask: np.ndarray) -> dict[str, float]:
    """Mean, population std and skewness per channel of RGB and L*a*b*."""
    mask = np.asarray(mask, dtype=bool)
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise NoLesionError("mask has no lesion pixels")
    out: dict[str, float] = {}
    rgb = np.asarray(img)[mask].astype(np.int64)
    for k, ch in enumerate("RGB"):
        values = rgb[:, k]
        mean = int(values.sum()) / n
        std, skew = _moments(values.astype(np.float64), mean)
        out[f"mean_{ch}"], out[f"std_{ch}"], out[f"skew_{ch}"] = mean, std, skew
    lab_px = np.asarray(lab)[mask]
    for k, ch in enumerate("Lab"):
        values = lab_px[:, k]
        mean = float(values.mean())
        std, skew = _moments(values, mean)
        out[f"mean_{ch}"], out[f"std_{ch}"], out[f"skew_{ch}"] = mean, std, skew
    return {name: out[name] for name in stat_names()}


def color_index(img: np.ndarray, levels: int = DEFAULT_GLCM_LEVELS) -> np.ndarray:
    """Joint RGB quantisation ``i = qR * L^2 + qG * L + qB``, ``q = floor(L * v / 256)``."""
    q = (np.asarray(img, dtype=np.int64) * levels) // 256
    return (q[..., 0] * levels + q[..., 1]) * levels + q[..., 2]


def cooccurrence(
    index: np.ndarray,
    mask: np.ndarray,
    n_indices: int,
    offsets=DEFAULT_OFFSETS,
) -> np.ndarray:
    """Symmetric co-occurrence counts over all offsets, both pixels in the mask."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    counts = np.zeros((n_indices, n_indices), dtype=np.int64)
    for dy, dx in offsets:
        y0, y1 = max(0, -dy), min(h, h - dy)
        x0, x1 = max(0, -dx), min(w, w - dx)
        a_idx = index[y0:y1, x0:x1]
        b_idx = index[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        both = mask[y0:y1, x0:x1] & mask[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        flat = a_idx[both] * n_indices + b_idx[both]
        counts += np.bincount(flat, minlength=n_indices * n_indices).reshape(n_indices, n_indices)
    return counts + counts.T


def glcm_features(p: np.ndarray) -> GlcmFeatures:
    n = p.shape[0]
    i, j = np.indices((n, n), dtype=np.float64)
    mu_i = float(np.sum(i * p))
    mu_j = float(np.sum(j * p))
    sd_i = float(np.sqrt(np.sum((i - mu_i) ** 2 * p)))
    sd_j = float(np.sqrt(np.sum((j - mu_j) ** 2 * p)))
    if sd_i < 1e-12 or sd_j < 1e-12:
        correlation = 0.0
    else:
        correlation = float(np.sum((i - mu_i) * (j - mu_j) * p)) / (sd_i * sd_j)
    nz = p[p > 0]
    return GlcmFeatures(
        contrast=float(np.sum((i - j) ** 2 * p)),
        correlation=correlation,
        energy=float(np.sum(p * p)),
        entropy=float(-np.sum(nz * np.log(nz))),
        homogeneity=float(np.sum(p / (1.0 + np.abs(i - j)))),
    )


def color_glcm(
    img: np.ndarray,
    mask: np.ndarray,
    levels_per_channel: int = DEFAULT_GLCM_LEVELS,
    offsets=DEFAULT_OFFSETS,
) -> GlcmFeatures:
    n_indices = levels_per_channel**3
    counts = cooccurrence(color_index(img, levels_per_channel), mask, n_indices, offsets)
    total = int(counts.sum())
    if total == 0:
        raise NoPairsError("no pair of adjacent lesion pixels for the co-occurrence matrix")
    return glcm_features(counts / total)
