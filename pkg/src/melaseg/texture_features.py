"""Texture over the lesion: fuzzy texture spectrum and NGTDM busyness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from melaseg.errors import NoLesionError

FTU_MAX = 6560  # 2 * sum(3**i for i in range(8))
FTS_BINS = 64
DEFAULT_DELTA = 10.0
DEFAULT_NGTDM_LEVELS = 32

# (dy, dx) of V1..V8, clockwise from the top-left neighbour.
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
_WEIGHTS = 3 ** np.arange(8)


@dataclass(frozen=True)
class FuzzySpectrum:
    histogram: np.ndarray
    mean: float
    variance: float
    energy: float
    entropy: float
    empty: bool = False


@dataclass(frozen=True)
class TextureFeatures:
    fts_mean: float
    fts_variance: float
    fts_energy: float
    fts_entropy: float
    busyness: float


def gray(img: np.ndarray) -> np.ndarray:
    """Rounded Rec. 601 luma as an int64 grid in [0, 255]."""
    rgb = np.asarray(img, dtype=np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.floor(luma + 0.5).astype(np.int64)


def _shifted(a: np.ndarray, dy: int, dx: int, fill=0) -> np.ndarray:
    """``out[y, x] = a[y + dy, x + dx]``, ``fill`` outside the grid."""
    out = np.full_like(a, fill)
    h, w = a.shape
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    yt = slice(max(0, dy), min(h, h + dy))
    xt = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[yt, xt]
    return out


def _interior(mask: np.ndarray) -> np.ndarray:
    inner = mask.copy()
    for dy, dx in NEIGHBOURS:
        inner &= _shifted(mask, dy, dx, False)
    return inner


def entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def fuzzy_texture_units(g: np.ndarray, mask: np.ndarray, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Fuzzy texture unit of every pixel whose 3x3 neighbourhood is in the mask."""
    g = np.asarray(g, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    inner = _interior(mask)
    center = g[inner].astype(np.float64)
    ftu = np.zeros(center.shape)
    for weight, (dy, dx) in zip(_WEIGHTS, NEIGHBOURS):
        v = _shifted(g, dy, dx)[inner]
        e = np.clip(1.0 + (v - center) / (2.0 * delta), 0.0, 2.0)
        ftu += weight * e
    return ftu


def fuzzy_texture_spectrum(g: np.ndarray, mask: np.ndarray, delta: float = DEFAULT_DELTA) -> FuzzySpectrum:
    if not np.asarray(mask, dtype=bool).any():
        raise NoLesionError("mask has no lesion pixels")
    if delta <= 0:
        raise ValueError("delta must be positive")
    ftu = fuzzy_texture_units(g, mask, delta)
    if ftu.size == 0:
        return FuzzySpectrum(np.zeros(FTS_BINS), 0.0, 0.0, 0.0, 0.0, empty=True)
    scaled = ftu / FTU_MAX
    bins = np.minimum((scaled * FTS_BINS).astype(np.int64), FTS_BINS - 1)
    hist = np.bincount(bins, minlength=FTS_BINS) / ftu.size
    return FuzzySpectrum(
        histogram=hist,
        mean=float(scaled.mean()),
        variance=float(scaled.var()),
        energy=float(np.sum(hist**2)),
        entropy=entropy(hist),
    )


def quantize(g: np.ndarray, levels: int) -> np.ndarray:
    return (np.asarray(g, dtype=np.int64) * levels) // 256


def busyness(g: np.ndarray, mask: np.ndarray, levels: int = DEFAULT_NGTDM_LEVELS) -> float:
    """Amadasun-King busyness with an absolute-value denominator.

    Levels are 0-based bins of width ``256 / levels``. Each masked pixel with
    at least one masked neighbour contributes ``|i - A|`` where ``A`` is the
    mean level of its masked 8-neighbours.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise NoLesionError("mask has no lesion pixels")
    q = np.where(mask, quantize(g, levels), 0)
    total = np.zeros(q.shape, dtype=np.int64)
    count = np.zeros(q.shape, dtype=np.int64)
    for dy, dx in NEIGHBOURS:
        total += _shifted(q, dy, dx)
        count += _shifted(mask, dy, dx, False)
    has_nb = mask & (count > 0)
    levels_here = q[has_nb]
    diff = np.abs(levels_here - total[has_nb] / count[has_nb])
    s = np.bincount(levels_here, weights=diff, minlength=levels)
    p = np.bincount(q[mask], minlength=levels) / np.count_nonzero(mask)

    present = np.flatnonzero(p > 0)
    ip = present * p[present]
    denominator = float(np.abs(ip[:, None] - ip[None, :]).sum())
    if denominator == 0.0:
        return 0.0
    return float(np.sum(p * s)) / denominator


def compute_texture_features(
    img: np.ndarray,
    mask: np.ndarray,
    delta: float = DEFAULT_DELTA,
    levels: int = DEFAULT_NGTDM_LEVELS,
) -> TextureFeatures:
    g = gray(img)
    fts = fuzzy_texture_spectrum(g, mask, delta)
    return TextureFeatures(fts.mean, fts.variance, fts.energy, fts.entropy, busyness(g, mask, levels))
