"""Soft-margin kernel SVM trained by SMO, and the one-vs-all lesion classifier.

The binary problem is the usual C-SVC dual::

    min_a  1/2 a^T Q a - e^T a,   Q_ij = y_i y_j K(x_i, x_j)
    s.t.   y^T a = 0,  0 <= a_i <= C

solved two variables at a time. The working pair is the maximal violating
pair ``i = argmax_{I_up} -y_t G_t``, ``j = argmin_{I_low} -y_t G_t`` and the
solver stops once ``m(a) - M(a) <= tol``.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from melaseg import dataset
from melaseg.errors import ModelFormatError, SvmConvergenceError
from melaseg.features import FEATURE_NAMES, FeatureVector

SCHEMA_VERSION = "melaseg-svm-1"
DEFAULT_C = 1.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10**6
DEFAULT_CACHE_BYTES = 2 * 1024**3
SV_THRESHOLD = 1e-8
_TAU = 1e-12


def kernel(x, z, degree: int = 2, coef0: float = 1.0) -> float:
    """Polynomial kernel ``(coef0 + <x, z>) ** degree``; defaults to ``(1 + x.z)^2``."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValueError(f"kernel arguments differ in shape: {x.shape} vs {z.shape}")
    return float((coef0 + np.dot(x, z)) ** degree)


def kernel_matrix(A: np.ndarray, B: np.ndarray, degree: int = 2, coef0: float = 1.0) -> np.ndarray:
    return (coef0 + np.asarray(A, dtype=np.float64) @ np.asarray(B, dtype=np.float64).T) ** degree


# -- standardisation -------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std < 1e-12

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scale = np.where(self.constant, 1.0, self.std)
        Z = (X - self.mean) / scale
        return np.where(self.constant, 0.0, Z)


def fit_standardizer(X) -> Standardizer:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("cannot fit a standardizer on zero rows")
    return Standardizer(mean=X.mean(axis=0), std=X.std(axis=0))


def apply_standardizer(s: Standardizer, x) -> np.ndarray:
    return s.apply(x)


# -- SMO -------------------------------------------------------------------


class _QRows:
    """Rows of ``Q = (y y^T) * K``, from a full Gram matrix when it fits."""

    def __init__(self, X: np.ndarray, y: np.ndarray, kern: Callable, cache_bytes: int):
        self.X = X
        self.y = y
        self.kern = kern
        l = len(y)
        if l * l * 8 <= cache_bytes:
            self.full = (y[:, None] * y[None, :]) * kern(X, X)
            self.diag = np.diag(self.full).copy()
        else:
            self.full = None
            self.diag = np.array([kern(X[t : t + 1], X[t : t + 1])[0, 0] for t in range(l)])
            self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
            self._max_rows = max(2, cache_bytes // max(1, 8 * l))

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        r = self.y[i] * self.y * self.kern(self.X[i : i + 1], self.X)[0]
        self._rows[i] = r
        if len(self._rows) > self._max_rows:
            self._rows.popitem(last=False)
        return r


@dataclass
class DualSolution:
    alpha: np.ndarray
    gradient: np.ndarray
    rho: float
    iterations: int
    max_violation: float


def _violating_pair(alpha, G, y, C) -> tuple[int, int, float]:
    minus_yG = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    up_vals = np.where(up, minus_yG, -np.inf)
    low_vals = np.where(low, minus_yG, np.inf)
    i = int(np.argmax(up_vals))
    j = int(np.argmin(low_vals))
    return i, j, float(up_vals[i] - low_vals[j])


def _rho(alpha, G, y, C) -> float:
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(yG[free].mean())
    ub, lb = np.inf, -np.inf
    ub_set = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_set = (at_upper & (y > 0)) | (at_lower & (y < 0))
    if ub_set.any():
        ub = float(yG[ub_set].min())
    if lb_set.any():
        lb = float(yG[lb_set].max())
    return (ub + lb) / 2.0


def smo_solve(
    X: np.ndarray,
    y: np.ndarray,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
    kern: Callable | None = None,
) -> DualSolution:
    """Solve the C-SVC dual; ``rho`` is the negated bias."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    kern = kern or kernel_matrix
    Q = _QRows(X, y, kern, cache_bytes)
    l = len(y)
    alpha = np.zeros(l)
    G = -np.ones(l)
    it = 0
    while True:
        i, j, gap = _violating_pair(alpha, G, y, C)
        if i < 0 or gap <= tol:
            break
        if it >= max_iter:
            raise SvmConvergenceError(
                f"SMO did not converge after {max_iter} pair updates; max KKT violation {gap:.3g}",
                gap,
            )
        it += 1
        Qi, Qj = Q.row(i), Q.row(j)
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = Q.diag[i] + Q.diag[j] + 2.0 * Qi[j]
            quad = quad if quad > 0 else _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = Q.diag[i] + Q.diag[j] - 2.0 * Qi[j]
            quad = quad if quad > 0 else _TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        G += Qi * (alpha[i] - ai) + Qj * (alpha[j] - aj)
    return DualSolution(alpha, G, _rho(alpha, G, y, C), it, max(gap, 0.0))


def dual_objective(alpha, y, K) -> float:
    """Maximisation form ``sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij``."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(K) @ ay)


# -- binary model ----------------------------------------------------------


@dataclass
class BinarySvmModel:
    support_vectors: np.ndarray
    coef: np.ndarray  # alpha_i * y_i
    bias: float
    C: float
    degree: int = 2
    coef0: float = 1.0

    def __post_init__(self):
        self.support_vectors = np.atleast_2d(np.asarray(self.support_vectors, dtype=np.float64))
        self.coef = np.asarray(self.coef, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.C <= 0:
            raise ModelFormatError(f"C must be positive, got {self.C}")
        if len(self.coef) == 0 or len(self.coef) != len(self.support_vectors):
            raise ModelFormatError("model needs at least one support vector with a coefficient")
        if np.any(np.abs(self.coef) > self.C * (1 + 1e-12)):
            raise ModelFormatError(f"dual coefficient exceeds C = {self.C}")
        if abs(float(self.coef.sum())) > 1e-6:
            raise ModelFormatError(f"dual coefficients sum to {self.coef.sum():.3g}, not 0")
        if not (np.all(np.isfinite(self.support_vectors)) and math.isfinite(self.bias)):
            raise ModelFormatError("model contains non-finite numbers")

    def decision(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        K = kernel_matrix(np.atleast_2d(X), self.support_vectors, self.degree, self.coef0)
        f = K @ self.coef + self.bias
        return float(f[0]) if single else f


def _check_binary(X: np.ndarray, y: np.ndarray, C: float) -> None:
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("training vectors and labels must align")
    if len(y) < 2:
        raise ValueError("need at least two training points")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training data contains a single class")


def train_binary(
    X,
    y,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> BinarySvmModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_binary(X, y, C)
    sol = smo_solve(X, y, C, tol, max_iter, cache_bytes)
    keep = sol.alpha > SV_THRESHOLD
    return BinarySvmModel(X[keep], sol.alpha[keep] * y[keep], -sol.rho, float(C))


def decision(m: BinarySvmModel, x) -> float | np.ndarray:
    return m.decision(x)


def score(f):
    """Logistic map of a decision value to (0, 1)."""
    f = np.asarray(f, dtype=np.float64)
    out = np.empty_like(f)
    pos = f >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-f[pos]))
    e = np.exp(f[~pos])
    out[~pos] = e / (1.0 + e)
    return float(out) if out.ndim == 0 else out


# -- one-vs-all ------------------------------------------------------------


@dataclass
class OvaSvmModel:
    melanoma_vs_rest: BinarySvmModel
    sk_vs_rest: BinarySvmModel
    standardizer: Standardizer
    feature_order: list[str] = field(default_factory=lambda: list(FEATURE_NAMES))

    def decisions(self, X) -> tuple[np.ndarray, np.ndarray]:
        Z = self.standardizer.apply(np.atleast_2d(X))
        return self.melanoma_vs_rest.decision(Z), self.sk_vs_rest.decision(Z)


def class_from_decisions(f_mel: float, f_sk: float) -> str:
    if f_mel > 0 and f_mel >= f_sk:
        return dataset.MELANOMA
    if f_sk > 0 and f_sk > f_mel:
        return dataset.SEBORRHEIC_KERATOSIS
    return dataset.NEVUS


def _matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([fv.values for fv in features], dtype=np.float64).reshape(len(features), -1)


def train_ova(
    features: Sequence[FeatureVector],
    labels: dict[str, str],
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> OvaSvmModel:
    missing = [fv.image_id for fv in features if fv.image_id not in labels]
    if missing:
        raise KeyError(f"no label for image(s): {', '.join(missing)}")
    classes = [labels[fv.image_id] for fv in features]
    absent = [c for c in dataset.CLASSES if c not in classes]
    if absent:
        raise ValueError(f"class(es) absent from training data: {', '.join(absent)}")
    X = _matrix(features)
    std = fit_standardizer(X)
    Z = std.apply(X)
    y_mel = np.array([1.0 if c == dataset.MELANOMA else -1.0 for c in classes])
    y_sk = np.array([1.0 if c == dataset.SEBORRHEIC_KERATOSIS else -1.0 for c in classes])
    return OvaSvmModel(
        train_binary(Z, y_mel, C, tol, max_iter, cache_bytes),
        train_binary(Z, y_sk, C, tol, max_iter, cache_bytes),
        std,
    )


def predict(m: OvaSvmModel, x) -> tuple[float, float, str]:
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    f_mel, f_sk = (float(v[0]) for v in m.decisions(values))
    return score(f_mel), score(f_sk), class_from_decisions(f_mel, f_sk)


def predict_many(m: OvaSvmModel, features: Sequence[FeatureVector]) -> list[tuple[str, float, float, str]]:
    if not features:
        return []
    f_mel, f_sk = m.decisions(_matrix(features))
    s_mel, s_sk = score(f_mel), score(f_sk)
    return [
        (fv.image_id, float(a), float(b), class_from_decisions(float(fm), float(fs)))
        for fv, a, b, fm, fs in zip(features, s_mel, s_sk, f_mel, f_sk)
    ]


# -- persistence -----------------------------------------------------------


def _dump(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_dump(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_dump(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _dump(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    x = float(obj)
    if not math.isfinite(x):
        raise ValueError("cannot serialise a non-finite number")
    return f"{x:.16e}"


def _binary_to_dict(m: BinarySvmModel) -> dict:
    return {
        "C": m.C,
        "kernel": {"type": "polynomial", "degree": m.degree, "coef0": m.coef0},
        "bias": m.bias,
        "coefficients": m.coef.tolist(),
        "support_vectors": m.support_vectors.tolist(),
    }


def _binary_from_dict(d: dict) -> BinarySvmModel:
    k = d["kernel"]
    if k.get("type") != "polynomial":
        raise ModelFormatError(f"unsupported kernel {k.get('type')!r}")
    return BinarySvmModel(
        support_vectors=np.array(d["support_vectors"], dtype=np.float64),
        coef=np.array(d["coefficients"], dtype=np.float64),
        bias=float(d["bias"]),
        C=float(d["C"]),
        degree=int(k["degree"]),
        coef0=float(k["coef0"]),
    )


def save_model(m: OvaSvmModel, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "feature_order": list(m.feature_order),
        "standardizer": {"means": m.standardizer.mean.tolist(), "stds": m.standardizer.std.tolist()},
        "melanoma_vs_rest": _binary_to_dict(m.melanoma_vs_rest),
        "sk_vs_rest": _binary_to_dict(m.sk_vs_rest),
    }
    Path(path).write_text(_dump(doc) + "\n")


def load_model(path) -> OvaSvmModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        found = doc.get("schema_version") if isinstance(doc, dict) else None
        raise ModelFormatError(f"{path}: schema_version {found!r}, expected {SCHEMA_VERSION!r}")
    try:
        order = [str(n) for n in doc["feature_order"]]
        std = Standardizer(
            np.array(doc["standardizer"]["means"], dtype=np.float64),
            np.array(doc["standardizer"]["stds"], dtype=np.float64),
        )
        mel = _binary_from_dict(doc["melanoma_vs_rest"])
        sk = _binary_from_dict(doc["sk_vs_rest"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model: {exc}") from exc
    d = len(order)
    if std.mean.shape != (d,) or std.std.shape != (d,) or np.any(std.std < 0):
        raise ModelFormatError(f"{path}: standardizer does not match {d} features")
    for sub in (mel, sk):
        if sub.support_vectors.shape[1] != d:
            raise ModelFormatError(f"{path}: support vectors do not have {d} features")
    return OvaSvmModel(mel, sk, std, order)
