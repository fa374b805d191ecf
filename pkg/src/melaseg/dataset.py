"""ISIC-style file I/O: images, ground-truth masks, label tables, submissions.

Images are handled as ``uint8`` arrays of shape ``(H, W, 3)`` and masks as
``bool`` arrays of shape ``(H, W)`` where ``True`` marks lesion pixels.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image, UnidentifiedImageError

from melaseg.errors import FormatError, ImageDecodeError, InconsistentLabelError

MELANOMA = "melanoma"
SEBORRHEIC_KERATOSIS = "seborrheic_keratosis"
NEVUS = "nevus"
CLASSES = (MELANOMA, SEBORRHEIC_KERATOSIS, NEVUS)

LABEL_HEADER = ("image_id", "melanoma", "seborrheic_keratosis")
SUBMISSION_HEADER = LABEL_HEADER

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
MASK_SUFFIX = "_segmentation.png"

_SIXTEEN_BIT_MODES = ("I;16", "I;16B", "I;16L", "I;16N", "I")


def _open(path: Path) -> Image.Image:
    try:
        im = Image.open(path)
        im.load()
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image {path}: {exc}") from exc
    return im


def _sixteen_to_eight(arr: np.ndarray) -> np.ndarray:
    arr = arr.astype(np.int64)
    return np.clip((arr + 128) // 257, 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Decode a JPEG/PNG into an ``(H, W, 3)`` uint8 RGB array.

    Grayscale inputs are replicated to three channels, alpha is dropped and
    16-bit sources are rescaled to 8 bits.
    """
    path = Path(path)
    im = _open(path)
    if im.mode in _SIXTEEN_BIT_MODES:
        gray = _sixteen_to_eight(np.asarray(im))
        return np.repeat(gray[:, :, None], 3, axis=2)
    rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return np.ascontiguousarray(rgb)


def load_mask(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG mask; values >= 128 are lesion."""
    path = Path(path)
    im = _open(path)
    if im.mode == "1":
        return np.asarray(im, dtype=bool).copy()
    if im.mode in _SIXTEEN_BIT_MODES:
        return _sixteen_to_eight(np.asarray(im)) >= 128
    if im.mode != "L":
        raise FormatError(f"mask {path} is not grayscale (mode {im.mode})")
    return np.asarray(im, dtype=np.uint8) >= 128


def save_mask(mask: np.ndarray, path) -> None:
    """Write a mask as 8-bit PNG, 0 = skin and 255 = lesion."""
    out = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(out, mode="L").save(Path(path), format="PNG")


def save_image(img: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(Path(path))


def _class_from_flags(image_id: str, mel: float, sk: float) -> str:
    for value in (mel, sk):
        if value not in (0.0, 1.0):
            raise FormatError(f"label for {image_id} must be 0 or 1, got {value}")
    if mel == 1.0 and sk == 1.0:
        raise InconsistentLabelError(
            f"{image_id} is labeled both melanoma and seborrheic keratosis"
        )
    if mel == 1.0:
        return MELANOMA
    if sk == 1.0:
        return SEBORRHEIC_KERATOSIS
    return NEVUS


def load_labels(path) -> dict[str, str]:
    """Read a ground-truth CSV into ``{image_id: class}`` (insertion-ordered)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in LABEL_HEADER if c not in fields]
        if missing:
            raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
        table: dict[str, str] = {}
        for row in reader:
            image_id = row["image_id"].strip()
            if image_id in table:
                raise FormatError(f"{path}: duplicate image_id {image_id}")
            try:
                mel = float(row["melanoma"])
                sk = float(row["seborrheic_keratosis"])
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad value in row for {image_id}") from exc
            table[image_id] = _class_from_flags(image_id, mel, sk)
    return table


def write_labels(labels: dict[str, str], path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(LABEL_HEADER) + "\n")
        for image_id, cls in labels.items():
            if cls not in CLASSES:
                raise ValueError(f"unknown class {cls!r}")
            mel = 1.0 if cls == MELANOMA else 0.0
            sk = 1.0 if cls == SEBORRHEIC_KERATOSIS else 0.0
            fh.write(f"{image_id},{mel:.1f},{sk:.1f}\n")


def write_submission(scores: Iterable[tuple[str, float, float]], path) -> None:
    """Write the challenge submission CSV, scores with 6 decimals, input order."""
    lines = [",".join(SUBMISSION_HEADER)]
    for image_id, mel, sk in scores:
        for value in (mel, sk):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score {value} for {image_id} outside [0, 1]")
        lines.append(f"{image_id},{mel:.6f},{sk:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_submission(path) -> list[tuple[str, float, float]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SUBMISSION_HEADER:
            raise FormatError(f"{path}: expected header {','.join(SUBMISSION_HEADER)}")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}: malformed row {row}")
            rows.append((row[0], float(row[1]), float(row[2])))
    return rows


def image_id_of(path) -> str:
    return Path(path).stem


def list_images(directory) -> list[Path]:
    """Image files of an ISIC directory sorted by image id; masks are skipped."""
    directory = Path(directory)
    found = [
        p
        for p in directory.iterdir()
        if p.is_file()
        and p.suffix.lower() in IMAGE_SUFFIXES
        and not p.name.endswith(MASK_SUFFIX)
    ]
    return sorted(found, key=lambda p: (p.stem, p.suffix))


def mask_path(directory, image_id: str) -> Path:
    return Path(directory) / f"{image_id}{MASK_SUFFIX}"


def list_masks(directory) -> dict[str, Path]:
    directory = Path(directory)
    out = {}
    for p in sorted(directory.glob(f"*{MASK_SUFFIX}")):
        out[p.name[: -len(MASK_SUFFIX)]] = p
    return out
