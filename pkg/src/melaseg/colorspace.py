"""sRGB (8-bit) to CIE L*a*b* under the D65 white point."""

from __future__ import annotations

import numpy as np

D65_WHITE = np.array([0.95047, 1.0, 1.08883])

# Linear sRGB -> XYZ. The 0.0721749 entry keeps the middle row summing to
# exactly 1.0 so that sRGB white lands on D65_WHITE and grays have a* = b* = 0.
SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721749],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

_EPS = (6.0 / 29.0) ** 3
_KAPPA_SLOPE = (29.0 / 6.0) ** 2 / 3.0


def srgb_to_linear(v: np.ndarray) -> np.ndarray:
    """Undo the sRGB transfer curve; ``v`` in [0, 1]."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _EPS, np.cbrt(t), _KAPPA_SLOPE * t + 4.0 / 29.0)


def srgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Convert ``(..., 3)`` uint8 sRGB values to float64 L*a*b*.

    The output has the input's leading shape; L* lies in [0, 100].
    """
    rgb = np.asarray(img)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected a trailing channel axis of 3, got shape {rgb.shape}")
    lin = srgb_to_linear(rgb.astype(np.float64) / 255.0)
    # Row-normalised matrix: XYZ divided by the white point in one product.
    xyz_n = lin @ (SRGB_TO_XYZ / D65_WHITE[:, None]).T
    fx, fy, fz = (_f(xyz_n[..., k]) for k in range(3))
    lab = np.empty(lin.shape, dtype=np.float64)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab
