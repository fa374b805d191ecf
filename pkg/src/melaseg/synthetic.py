"""Generated lesion images with planted ground truth.

Used by the test-suite and by ``melaseg synth`` to build small corpora with
known masks and known classes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from melaseg import dataset

SKIN_RGB = (232, 196, 178)
LESION_RGB = (104, 42, 30)

# Base lesion colour and texture per class. Melanoma is dark with blue-gray
# blotches, seborrheic keratosis light tan with coarse speckle, nevus a
# uniform mid brown.
CLASS_STYLE = {
    dataset.MELANOMA: dict(rgb=(70, 40, 45), blotch=(90, 100, 130), speckle=0.0),
    dataset.SEBORRHEIC_KERATOSIS: dict(rgb=(150, 110, 75), blotch=None, speckle=40.0),
    dataset.NEVUS: dict(rgb=(120, 75, 50), blotch=None, speckle=0.0),
}


def ellipse_mask(
    shape: tuple[int, int],
    center: tuple[float, float],
    axes: tuple[float, float],
    angle: float = 0.0,
) -> np.ndarray:
    """Pixels whose centers fall inside an ellipse; ``angle`` in radians."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - center[0]
    dy = yy - center[1]
    c, s = np.cos(angle), np.sin(angle)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (u / axes[0]) ** 2 + (v / axes[1]) ** 2 <= 1.0


def blob_mask(
    shape: tuple[int, int],
    center: tuple[float, float],
    radius: float,
    rng: np.random.Generator,
    harmonics: int = 3,
    amplitude: float = 0.15,
) -> np.ndarray:
    """Star-shaped blob: a disk with a smooth random radial wobble."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - center[0]
    dy = yy - center[1]
    theta = np.arctan2(dy, dx)
    rho = np.ones_like(theta)
    for k in range(2, 2 + harmonics):
        rho += amplitude / k * rng.uniform(-1, 1) * np.cos(k * theta + rng.uniform(0, 2 * np.pi))
    return np.hypot(dx, dy) <= radius * rho


def paint(mask: np.ndarray, lesion_rgb=LESION_RGB, skin_rgb=SKIN_RGB) -> np.ndarray:
    img = np.empty(mask.shape + (3,), dtype=np.uint8)
    img[...] = np.asarray(skin_rgb, dtype=np.uint8)
    img[mask] = np.asarray(lesion_rgb, dtype=np.uint8)
    return img


def add_noise(img: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, img.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def random_lesion(
    rng: np.random.Generator,
    size: int = 160,
    kind: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """A centered ellipse or blob on skin; returns ``(image, truth_mask)``."""
    shape = (size, size)
    kind = kind or ("ellipse" if rng.random() < 0.5 else "blob")
    center = ((size - 1) / 2 + rng.uniform(-8, 8), (size - 1) / 2 + rng.uniform(-8, 8))
    if kind == "ellipse":
        a = rng.uniform(0.22, 0.32) * size
        b = a * rng.uniform(0.6, 1.0)
        mask = ellipse_mask(shape, center, (a, b), rng.uniform(0, np.pi))
    elif kind == "blob":
        mask = blob_mask(shape, center, rng.uniform(0.22, 0.3) * size, rng)
    else:
        raise ValueError(f"unknown lesion kind {kind!r}")
    return paint(mask), mask


def class_lesion(
    rng: np.random.Generator,
    cls: str,
    size: int = 128,
    noise: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Lesion whose colour and texture depend on the diagnostic class."""
    style = CLASS_STYLE[cls]
    shape = (size, size)
    center = ((size - 1) / 2 + rng.uniform(-5, 5), (size - 1) / 2 + rng.uniform(-5, 5))
    if cls == dataset.MELANOMA:
        mask = blob_mask(shape, center, rng.uniform(0.25, 0.32) * size, rng, amplitude=0.35)
    elif cls == dataset.SEBORRHEIC_KERATOSIS:
        a = rng.uniform(0.24, 0.3) * size
        mask = ellipse_mask(shape, center, (a, a * rng.uniform(0.55, 0.7)), rng.uniform(0, np.pi))
    else:
        r = rng.uniform(0.2, 0.26) * size
        mask = ellipse_mask(shape, center, (r, r * rng.uniform(0.9, 1.0)), rng.uniform(0, np.pi))

    img = paint(mask, style["rgb"]).astype(np.float64)
    if style["blotch"] is not None:
        blotch = blob_mask(shape, center, rng.uniform(0.08, 0.12) * size, rng) & mask
        img[blotch] = style["blotch"]
    if style["speckle"]:
        speckle = rng.normal(0.0, style["speckle"], shape)
        img[mask] += speckle[mask][:, None]
    img += rng.normal(0.0, noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), mask


def write_corpus(
    directory,
    n_per_class: int = 20,
    seed: int = 0,
    size: int = 128,
) -> dict[str, str]:
    """Write a 3-class corpus in ISIC layout; returns the label table.

    Files: ``ISIC_<n>.png``, ``ISIC_<n>_segmentation.png`` and
    ``labels.csv`` under ``directory``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    labels: dict[str, str] = {}
    order = [c for c in dataset.CLASSES for _ in range(n_per_class)]
    order = [order[i] for i in rng.permutation(len(order))]
    for k, cls in enumerate(order):
        image_id = f"ISIC_{k:07d}"
        img, mask = class_lesion(rng, cls, size=size)
        dataset.save_image(img, directory / f"{image_id}.png")
        dataset.save_mask(mask, dataset.mask_path(directory, image_id))
        labels[image_id] = cls
    dataset.write_labels(labels, directory / "labels.csv")
    return labels
