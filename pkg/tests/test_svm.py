import json
import math

import numpy as np
import pytest

from melaseg import dataset
from melaseg.errors import ModelFormatError, SvmConvergenceError
from melaseg.features import FEATURE_NAMES, FeatureVector
from melaseg.svm import (
    SCHEMA_VERSION,
    BinarySvmModel,
    Standardizer,
    class_from_decisions,
    dual_objective,
    fit_standardizer,
    kernel,
    kernel_matrix,
    load_model,
    predict,
    predict_many,
    save_model,
    score,
    smo_solve,
    train_binary,
    train_ova,
)


# -- independent oracle: projected gradient on the dual -----------------------


def _project(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0}.

    s(lam) = y . clip(v - lam y, 0, C) is piecewise linear and non-increasing;
    evaluate it at every breakpoint and interpolate the root.
    """
    knots = np.unique(np.concatenate([v * y, (v - C) * y]))
    s = (np.clip(v[None, :] - knots[:, None] * y[None, :], 0.0, C) * y).sum(axis=1)
    k = int(np.searchsorted(-s, 0.0))  # first knot with s <= 0
    if k == 0 or s[k] == 0.0:
        lam = knots[min(k, len(knots) - 1)]
    else:
        lam = knots[k - 1] + s[k - 1] * (knots[k] - knots[k - 1]) / (s[k - 1] - s[k])
    return np.clip(v - lam * y, 0.0, C)


def pg_dual(X, y, C, iters=4000):
    K = (1.0 + X @ X.T) ** 2
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    for _ in range(iters):  # FISTA
        a_new = _project(z - step * (Q @ z - 1.0), y, C)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = a_new + (t - 1) / t_new * (a_new - a)
        a, t = a_new, t_new
    return a, K


def random_problem(rng, n):
    X = rng.normal(size=(n, 2))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


# -- kernel / standardizer ---------------------------------------------------


def test_kernel_examples():
    assert kernel([1, 2], [3, 4]) == 144.0
    assert kernel([0, 0], [5, 5]) == 1.0
    assert kernel([1, -1], [1, 1]) == 1.0
    A = np.array([[1.0, 2.0], [0.0, 0.0]])
    np.testing.assert_array_equal(kernel_matrix(A, A), [[36.0, 1.0], [1.0, 1.0]])


def test_standardizer_examples():
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    s = fit_standardizer(X)
    np.testing.assert_array_equal(s.mean, [2.0, 5.0])
    np.testing.assert_array_equal(s.std, [1.0, 0.0])
    np.testing.assert_array_equal(s.apply(X), [[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(s.apply([[7.0, 9.0]]), [[5.0, 0.0]])


def test_standardized_columns(rng):
    X = rng.normal(3.0, 7.0, size=(50, 4))
    Z = fit_standardizer(X).apply(X)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Z.std(axis=0), 1.0, atol=1e-12)


# -- solver ------------------------------------------------------------------


def test_two_point_analytic():
    X = np.array([[1.0], [-1.0]])
    y = np.array([1.0, -1.0])
    m = train_binary(X, y, C=10.0)
    # K = [[4,0],[0,4]]; the optimum has alpha = 1/4 and zero bias.
    np.testing.assert_allclose(np.abs(m.coef), [0.25, 0.25], atol=1e-9)
    assert abs(m.bias) < 1e-9
    np.testing.assert_allclose(m.decision(X), [1.0, -1.0], atol=1e-9)


def test_xor_separated():
    X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    m = train_binary(X, y, C=100.0)
    assert np.all(np.sign(m.decision(X)) == y)


def test_small_c_gives_bounded_vectors(rng):
    X = np.concatenate([rng.normal(-0.5, 1, 20), rng.normal(0.5, 1, 20)])[:, None]
    y = np.repeat([-1.0, 1.0], 20)
    C = 0.01
    sol = smo_solve(X, y, C)
    assert np.sum(np.isclose(sol.alpha, C)) > 0
    assert np.all(sol.alpha >= 0) and np.all(sol.alpha <= C + 1e-15)


@pytest.mark.parametrize("seed", range(8))
def test_objective_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    X, y = random_problem(rng, n)
    C = float(rng.choice([0.1, 1.0, 10.0]))
    sol = smo_solve(X, y, C, tol=1e-8)
    ref, K = pg_dual(X, y, C)
    assert dual_objective(sol.alpha, y, K) >= dual_objective(ref, y, K) - 1e-4
    assert abs(dual_objective(sol.alpha, y, K) - dual_objective(ref, y, K)) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_kkt_and_feasibility(seed):
    rng = np.random.default_rng(100 + seed)
    X, y = random_problem(rng, 30)
    C, tol = 1.0, 1e-3
    sol = smo_solve(X, y, C, tol=tol)
    a = sol.alpha
    assert abs(a @ y) < 1e-10
    assert np.all(a >= 0) and np.all(a <= C)
    f = (a * y) @ kernel_matrix(X, X) - sol.rho
    margin = y * f
    free = (a > 1e-8) & (a < C - 1e-8)
    assert np.all(margin[a <= 1e-8] >= 1 - 2 * tol)
    assert np.all(margin[a >= C - 1e-8] <= 1 + 2 * tol)
    assert np.all(np.abs(margin[free] - 1) <= 2 * tol)


def test_duplicated_points_keep_decision(rng):
    # Separable data, so no bound is active and duplication only splits weights.
    X = np.concatenate([rng.normal(-3, 0.5, (10, 2)), rng.normal(3, 0.5, (10, 2))])
    y = np.repeat([-1.0, 1.0], 10)
    m1 = train_binary(X, y, C=100.0, tol=1e-9)
    m2 = train_binary(np.vstack([X, X]), np.concatenate([y, y]), C=100.0, tol=1e-9)
    grid = rng.normal(0, 3, (50, 2))
    np.testing.assert_allclose(m1.decision(grid), m2.decision(grid), atol=1e-6)


def test_permutation_invariance(rng):
    X, y = random_problem(rng, 40)
    perm = rng.permutation(40)
    m1 = train_binary(X, y, C=1.0, tol=1e-9)
    m2 = train_binary(X[perm], y[perm], C=1.0, tol=1e-9)
    grid = rng.normal(size=(50, 2))
    np.testing.assert_allclose(m1.decision(grid), m2.decision(grid), atol=1e-6)


def test_convergence_error():
    rng = np.random.default_rng(3)
    X, y = random_problem(rng, 30)
    with pytest.raises(SvmConvergenceError) as info:
        smo_solve(X, y, 1.0, max_iter=2)
    assert info.value.max_violation > 1e-3


def test_row_cache_path_matches_full_gram(rng):
    X, y = random_problem(rng, 40)
    full = smo_solve(X, y, 1.0, tol=1e-6)
    rows = smo_solve(X, y, 1.0, tol=1e-6, cache_bytes=5 * 40 * 8)
    # Row-wise kernel products round differently from the full Gram matrix.
    np.testing.assert_allclose(rows.alpha, full.alpha, atol=1e-5)
    assert abs(rows.rho - full.rho) < 1e-5


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train_binary(np.zeros((3, 2)), np.ones(3))
    with pytest.raises(ValueError):
        train_binary(np.zeros((2, 2)), np.array([1.0, -1.0]), C=0.0)


# -- scores and three-class rule ---------------------------------------------


def test_score_examples():
    assert score(0.0) == 0.5
    assert score(math.log(3)) == pytest.approx(0.75, abs=1e-15)
    assert score(2.0) == pytest.approx(0.8807970779778823, abs=1e-15)
    assert score(-2.0) == pytest.approx(1 - 0.8807970779778823, abs=1e-15)
    s = score(np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(s)) and s[0] >= 0 and s[1] <= 1


def test_class_rule_examples():
    assert class_from_decisions(2.0, -1.0) == dataset.MELANOMA
    assert class_from_decisions(1.0, 1.0) == dataset.MELANOMA
    assert class_from_decisions(0.5, 1.5) == dataset.SEBORRHEIC_KERATOSIS
    assert class_from_decisions(-0.1, -2.0) == dataset.NEVUS
    assert class_from_decisions(0.0, 0.0) == dataset.NEVUS


def _clusters(rng, n=20):
    centers = {dataset.MELANOMA: 0.0, dataset.SEBORRHEIC_KERATOSIS: 4.0, dataset.NEVUS: -4.0}
    feats, labels = [], {}
    k = 0
    for cls, c in centers.items():
        for _ in range(n):
            v = rng.normal(0, 1, 42)
            v[:3] += [c, -c, c / 2]
            feats.append(FeatureVector(f"ISIC_{k:07d}", v))
            labels[f"ISIC_{k:07d}"] = cls
            k += 1
    return feats, labels


def test_ova_on_clusters(rng):
    feats, labels = _clusters(rng)
    m = train_ova(feats, labels, C=1.0)
    preds = predict_many(m, feats)
    acc = np.mean([p[3] == labels[p[0]] for p in preds])
    assert acc >= 0.95
    s_mel, s_sk, cls = predict(m, feats[0])
    assert (s_mel, s_sk) == pytest.approx(preds[0][1:3], abs=1e-15) and cls == preds[0][3]


def test_ova_errors(rng):
    feats, labels = _clusters(rng, 3)
    with pytest.raises(ValueError):
        train_ova(feats, {k: dataset.NEVUS for k in labels})
    with pytest.raises(KeyError):
        train_ova(feats, dict(list(labels.items())[1:]))


# -- persistence -------------------------------------------------------------


def test_save_load_round_trip(tmp_path, rng):
    feats, labels = _clusters(rng, 5)
    m = train_ova(feats, labels)
    p = tmp_path / "model.json"
    save_model(m, p)
    back = load_model(p)
    assert back.feature_order == list(FEATURE_NAMES)
    X = np.array([f.values for f in feats])
    for a, b in zip(m.decisions(X), back.decisions(X)):
        assert a.tobytes() == b.tobytes()
    q = tmp_path / "again.json"
    save_model(back, q)
    assert p.read_bytes() == q.read_bytes()


def _saved(tmp_path, rng):
    feats, labels = _clusters(rng, 5)
    p = tmp_path / "model.json"
    save_model(train_ova(feats, labels), p)
    return p, json.loads(p.read_text())


def test_wrong_version(tmp_path, rng):
    p, doc = _saved(tmp_path, rng)
    assert doc["schema_version"] == SCHEMA_VERSION
    doc["schema_version"] = "melaseg-svm-0"
    p.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_alpha_above_c(tmp_path, rng):
    p, doc = _saved(tmp_path, rng)
    doc["melanoma_vs_rest"]["coefficients"][0] = 10 * doc["melanoma_vs_rest"]["C"]
    p.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_malformed_and_dimension_mismatch(tmp_path, rng):
    p, doc = _saved(tmp_path, rng)
    p.write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(p)
    doc["standardizer"]["means"] = doc["standardizer"]["means"][:-1]
    p.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_binary_validate():
    with pytest.raises(ModelFormatError):
        BinarySvmModel(np.zeros((2, 1)), np.array([0.5, 0.4]), 0.0, 1.0)  # sum != 0
    m = BinarySvmModel(np.zeros((2, 1)), np.array([0.5, -0.5]), 0.0, 1.0)
    assert m.decision(np.zeros((1, 1)))[0] == 0.0
