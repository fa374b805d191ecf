"""Shape descriptors of a single-component lesion mask.

All computations run on the mask's bounding-box crop so every descriptor is
exactly invariant to whole-pixel translation.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.ndimage import gaussian_filter1d

from melaseg.errors import NoLesionError

BENDING_SAMPLES = 128
BENDING_SIGMA = 2.0

# Moore neighbourhood in image coordinates (dx, dy), clockwise on screen
# starting from the west neighbour.
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIR_INDEX = {d: k for k, d in enumerate(_DIRS)}


@dataclass(frozen=True)
class ShapeFeatures:
    area: float
    perimeter: float
    compactness: float
    asymmetry: float
    aspect_ratio: float
    eccentricity: float
    bending_energy: float
    contour_moment_1: float
    contour_moment_2: float
    contour_moment_3: float
    hu_1: float
    hu_2: float
    hu_3: float
    hull_area: float
    hull_perimeter: float
    convexity: float
    solidity: float

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names(), astuple(self)))


def _crop(mask: np.ndarray) -> tuple[np.ndarray, int, int]:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or not mask.any():
        raise NoLesionError("mask has no lesion pixels")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0, x0 = int(rows[0]), int(cols[0])
    return mask[y0 : rows[-1] + 1, x0 : cols[-1] + 1], x0, y0


def _trace(local: np.ndarray) -> np.ndarray:
    """Moore tracing on a cropped mask; returns (N, 2) integer (x, y) points."""
    padded = np.pad(local, 1)
    ys, xs = np.nonzero(padded)
    # First foreground pixel in raster order; its west neighbour is background.
    start = (int(xs[0]), int(ys[0]))
    p = start
    back = 0
    points = [start]
    first_move = None
    while True:
        for k in range(1, 9):
            d = (back + k) % 8
            cx, cy = p[0] + _DIRS[d][0], p[1] + _DIRS[d][1]
            if padded[cy, cx]:
                break
        else:
            return np.array(points) - 1  # isolated pixel
        c = (cx, cy)
        if first_move is None:
            first_move = c
        elif p == start and c == first_move:
            break
        prev = _DIRS[(back + k - 1) % 8]
        q = (p[0] + prev[0], p[1] + prev[1])
        back = _DIR_INDEX[(q[0] - c[0], q[1] - c[1])]
        points.append(c)
        p = c
    # The walk ends on the start pixel; drop the repeat.
    if len(points) > 1 and points[-1] == start:
        points.pop()
    return np.array(points) - 1


def trace_contour(mask: np.ndarray) -> np.ndarray:
    """Outer boundary of the lesion by Moore tracing (8-connected).

    Returns an ``(N, 2)`` array of integer ``(x, y)`` pixel coordinates in
    the mask's frame, starting at the first lesion pixel in raster order.
    The walk has positive signed area in ``(x, y)``, which is clockwise as
    displayed with ``y`` pointing down.
    """
    local, x0, y0 = _crop(mask)
    return _trace(local) + np.array([x0, y0])


def chain_length(points: np.ndarray) -> float:
    """Closed-chain length: 1 per axis step, sqrt(2) per diagonal step."""
    if len(points) < 2:
        return 0.0
    steps = np.abs(np.diff(np.vstack([points, points[:1]]), axis=0))
    diagonal = int(np.count_nonzero((steps[:, 0] == 1) & (steps[:, 1] == 1)))
    axis = len(steps) - diagonal
    return axis + diagonal * math.sqrt(2.0)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; counterclockwise hull vertices."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(vertices: np.ndarray) -> float:
    if len(vertices) < 3:
        return 0.0
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def polygon_perimeter(vertices: np.ndarray) -> float:
    if len(vertices) < 2:
        return 0.0
    closed = np.vstack([vertices, vertices[:1]])
    return float(np.hypot(*np.diff(closed, axis=0).T).sum())


def bending_energy(points: np.ndarray, samples: int = BENDING_SAMPLES, sigma: float = BENDING_SIGMA) -> float:
    """Mean squared curvature of the smoothed, arc-length resampled contour."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        return 0.0
    closed = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    t = np.arange(samples) * (total / samples)
    x = gaussian_filter1d(np.interp(t, s, closed[:, 0]), sigma, mode="wrap")
    y = gaussian_filter1d(np.interp(t, s, closed[:, 1]), sigma, mode="wrap")
    dx = (np.roll(x, -1) - np.roll(x, 1)) / 2.0
    dy = (np.roll(y, -1) - np.roll(y, 1)) / 2.0
    ddx = np.roll(x, -1) - 2.0 * x + np.roll(x, 1)
    ddy = np.roll(y, -1) - 2.0 * y + np.roll(y, 1)
    speed2 = dx * dx + dy * dy
    ok = speed2 > 1e-18
    kappa = np.zeros(samples)
    kappa[ok] = (dx[ok] * ddy[ok] - dy[ok] * ddx[ok]) / speed2[ok] ** 1.5
    return float(np.mean(kappa**2))


def _central_moment(dx: np.ndarray, dy: np.ndarray, p: int, q: int) -> float:
    return float(np.sum(dx**p * dy**q))


def _hu(dx: np.ndarray, dy: np.ndarray, area: int) -> tuple[float, float, float]:
    def eta(p, q):
        return _central_moment(dx, dy, p, q) / area ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    phi1 = n20 + n02
    phi2 = (n20 - n02) ** 2 + 4.0 * n11**2
    phi3 = (n30 - 3.0 * n12) ** 2 + (3.0 * n21 - n03) ** 2
    return phi1, phi2, phi3


def _reflection_asymmetry(
    xs: np.ndarray,
    ys: np.ndarray,
    centroid: np.ndarray,
    axis: np.ndarray,
    bounds: tuple[int, int, int, int],
) -> int:
    """Symmetric-difference pixel count between the set and its mirror image."""
    u = axis / np.linalg.norm(axis)
    reflect = 2.0 * np.outer(u, u) - np.eye(2)
    d = np.stack([xs - centroid[0], ys - centroid[1]])
    mirrored = reflect @ d + centroid[:, None]
    mx = np.floor(mirrored[0] + 0.5).astype(np.int64)
    my = np.floor(mirrored[1] + 0.5).astype(np.int64)
    xmin, ymin, xmax, ymax = bounds
    inside = (mx >= xmin) & (mx < xmax) & (my >= ymin) & (my < ymax)
    mx, my = mx[inside], my[inside]
    original = set(zip(xs.astype(np.int64).tolist(), ys.astype(np.int64).tolist()))
    mirror = set(zip(mx.tolist(), my.tolist()))
    return len(original ^ mirror)


def compute_shape_features(mask: np.ndarray) -> ShapeFeatures:
    mask = np.asarray(mask, dtype=bool)
    local, x0, y0 = _crop(mask)
    H, W = mask.shape
    ys, xs = np.nonzero(local)
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    area = len(xs)

    contour = _trace(local)
    perimeter = chain_length(contour)
    compactness = perimeter**2 / (4.0 * math.pi * area)

    centroid = np.array([xs.mean(), ys.mean()])
    dx = xs - centroid[0]
    dy = ys - centroid[1]
    mu20 = float(np.dot(dx, dx)) / area
    mu02 = float(np.dot(dy, dy)) / area
    mu11 = float(np.dot(dx, dy)) / area
    evals, evecs = np.linalg.eigh(np.array([[mu20, mu11], [mu11, mu02]]))
    lam_minus, lam_plus = float(evals[0]), float(evals[1])
    if lam_plus <= 1e-12 or lam_minus <= 1e-12 * lam_plus:
        aspect_ratio, eccentricity = 1.0, 0.0
    else:
        aspect_ratio = math.sqrt(lam_plus / lam_minus)
        eccentricity = math.sqrt(max(0.0, 1.0 - lam_minus / lam_plus))

    # Canvas bounds in the crop's frame; mirror pixels off the canvas are dropped.
    bounds = (-x0, -y0, W - x0, H - y0)
    asym = [
        _reflection_asymmetry(xs, ys, centroid, evecs[:, k], bounds) / (2.0 * area)
        for k in (0, 1)
    ]
    asymmetry = float(np.mean(asym))

    radial = np.hypot(contour[:, 0] - centroid[0], contour[:, 1] - centroid[1])
    mean_radial = float(radial.mean())
    if mean_radial > 0:
        cm = [float(np.mean((radial - mean_radial) ** k)) / mean_radial**k for k in (1, 2, 3)]
    else:
        cm = [0.0, 0.0, 0.0]

    hu1, hu2, hu3 = _hu(dx, dy, area)

    corners = (contour[:, None, :] + np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])).reshape(-1, 2)
    hull = convex_hull(corners)
    hull_area = polygon_area(hull)
    hull_perimeter = polygon_perimeter(hull)
    convexity = hull_perimeter / perimeter if perimeter > 0 else 1.0
    solidity = area / hull_area

    return ShapeFeatures(
        area=float(area),
        perimeter=perimeter,
        compactness=compactness,
        asymmetry=asymmetry,
        aspect_ratio=aspect_ratio,
        eccentricity=eccentricity,
        bending_energy=bending_energy(contour),
        contour_moment_1=cm[0],
        contour_moment_2=cm[1],
        contour_moment_3=cm[2],
        hu_1=hu1,
        hu_2=hu2,
        hu_3=hu3,
        hull_area=hull_area,
        hull_perimeter=hull_perimeter,
        convexity=convexity,
        solidity=solidity,
    )
