import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cl_landscape._rng import make_rng
from cl_landscape.errors import ParameterError
from cl_landscape.model import MixtureModel
from cl_landscape.sketch import draw_frequencies, empirical_sketch
from cl_landscape.tasks import (
    SUCCESS_RATIO,
    EvaluationReport,
    detect_failure,
    dirac_truth,
    evaluate,
    gmm_loglik,
    gmm_success,
    kmeans_success,
    lloyd_kmeans,
    loglik_ratio,
    relative_sse,
    sse,
)


def test_lloyd_exact_clusters():
    res = lloyd_kmeans(np.array([[0.0], [0.0], [10.0], [10.0]]), 2, seed=0)
    np.testing.assert_array_equal(np.sort(res.centroids[:, 0]), [0.0, 10.0])
    assert res.sse == 0.0


def test_lloyd_k_equals_n():
    X = make_rng(0).normal(size=(6, 2))
    assert lloyd_kmeans(X, 6, seed=1).sse == 0.0


def test_lloyd_single_cluster_mean():
    res = lloyd_kmeans(np.array([[0.0], [2.0]]), 1)
    assert res.centroids[0, 0] == 1.0 and res.sse == 2.0


def test_lloyd_rejects_bad_k():
    with pytest.raises(ParameterError):
        lloyd_kmeans(np.zeros((3, 1)), 4)


def test_lloyd_sse_nonincreasing_and_deterministic():
    X = make_rng(1).normal(size=(500, 3))
    a = lloyd_kmeans(X, 5, restarts=3, seed=2)
    b = lloyd_kmeans(X, 5, restarts=3, seed=2)
    assert np.all(np.diff(a.sse_history) <= 1e-9)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    assert relative_sse(X, a.centroids, a.sse) == 1.0


def test_sse_examples():
    X = np.array([[0.0], [2.0]])
    assert sse(X, [[1.0]]) == 2.0
    assert sse(X, X) == 0.0
    assert sse(X, [[1.0], [1.0]]) == 2.0
    with pytest.raises(ParameterError):
        sse(X, np.empty((0, 1)))


@given(st.integers(0, 2 ** 32))
def test_sse_permutation_invariance(seed):
    rng = make_rng(seed)
    X = rng.normal(size=(40, 2))
    C = rng.normal(size=(4, 2))
    base = sse(X, C)
    assert sse(X[rng.permutation(40)], C[rng.permutation(4)]) == pytest.approx(base, rel=1e-12)
    assert sse(X, np.vstack([C, C[:1]])) == pytest.approx(base, rel=1e-12)


def test_relative_sse_worse_and_zero_baseline():
    X = np.array([[0.0], [2.0]])
    assert relative_sse(X, [[5.0]], 2.0) > 1.0
    assert relative_sse(X, [[0.0], [2.0]], 0.0) == 0.0
    assert relative_sse(X, [[1.0]], 0.0) == pytest.approx(2.0 / np.finfo(float).eps)


def test_success_thresholds_inclusive():
    assert kmeans_success(1.3) and not kmeans_success(1.3000001)
    assert gmm_success(1 / 1.3) and not gmm_success(1 / 1.3 - 1e-9)
    assert SUCCESS_RATIO == 1.3


def test_gmm_loglik_standard_normal_at_zero():
    theta = MixtureModel("gaussian", [1.0], [[0.0]], [[1.0]])
    assert gmm_loglik(np.array([[0.0]]), theta) == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)
    assert gmm_loglik(np.array([[0.0]]), theta) == pytest.approx(-0.91894, abs=1e-5)


def test_gmm_loglik_properties():
    rng = make_rng(3)
    X = rng.normal(size=(50, 2))
    theta = MixtureModel("gaussian", [0.3, 0.7], [[0, 0], [1, 1]], [[1, 2], [0.5, 1]])
    swapped = MixtureModel("gaussian", [0.7, 0.3], [[1, 1], [0, 0]], [[0.5, 1], [1, 2]])
    ll = gmm_loglik(X, theta)
    assert gmm_loglik(np.vstack([X, X]), theta) == pytest.approx(2 * ll, rel=1e-12)
    assert gmm_loglik(X, swapped) == pytest.approx(ll, rel=1e-12)
    scaled = MixtureModel("gaussian", [0.6, 1.4], theta.centers, theta.variances)
    assert gmm_loglik(X, scaled) == pytest.approx(ll, rel=1e-12)


def test_gmm_loglik_penalizes_extreme_variances():
    X = make_rng(4).normal(size=(200, 2))
    fit = MixtureModel("gaussian", [1.0], [X.mean(0)], [X.var(0)])
    wide = MixtureModel("gaussian", [1.0], [X.mean(0)], [X.var(0) * 1e6])
    narrow = MixtureModel("gaussian", [1.0], [X.mean(0) + 0.5], [X.var(0) * 1e-6])
    assert gmm_loglik(X, wide) < gmm_loglik(X, fit)
    assert gmm_loglik(X, narrow) < gmm_loglik(X, fit)
    with pytest.raises(ParameterError):
        gmm_loglik(X, MixtureModel("dirac", [1.0], [[0, 0]]))


def test_loglik_ratio_is_per_sample():
    X = make_rng(5).normal(size=(100, 1))
    a = MixtureModel("gaussian", [1.0], [[0.0]], [[1.0]])
    b = MixtureModel("gaussian", [1.0], [[0.3]], [[1.0]])
    expected = np.exp((gmm_loglik(X, b) - gmm_loglik(X, a)) / 100)
    assert loglik_ratio(X, b, a) == pytest.approx(expected, rel=1e-12)
    assert loglik_ratio(X, a, a) == 1.0


def test_detect_failure_is_strict():
    assert detect_failure(0.5, 0.4)
    assert not detect_failure(0.4, 0.4)


@given(st.floats(0, 5), st.floats(0.1, 2), st.floats(0, 10), st.floats(0, 10))
def test_report_biconditionals(rsse, ratio, c_dec, c_true):
    r = EvaluationReport.build(rsse, ratio, c_dec, c_true)
    assert r.kmeans_success == (r.rsse <= 1.3)
    assert r.gmm_success == (r.loglik_ratio >= 1 / 1.3)
    assert r.failure_detected == (r.cost_decoded > r.cost_ground_truth)


def test_report_missing_fields_are_none():
    r = EvaluationReport.build(rsse=1.0)
    assert r.loglik_ratio is None and r.gmm_success is None and r.failure_detected is None
    assert set(r.to_dict()) >= {"rsse", "kmeans_success", "failure_detected"}


def test_evaluate_combines_metrics():
    rng = make_rng(6)
    truth = MixtureModel("gaussian", [0.5, 0.5], [[-3, 0], [3, 0]], [[1, 1], [1, 1]])
    X = np.vstack([rng.normal(size=(200, 2)) + [-3, 0], rng.normal(size=(200, 2)) + [3, 0]])
    freqs = draw_frequencies(20, 2, "fg", 1.0, 0)
    z = empirical_sketch(X, freqs)
    base = lloyd_kmeans(X, 2).sse
    rep = evaluate(X, dirac_truth(truth), baseline_sse=base, truth=truth, z=z, freqs=freqs)
    assert rep.rsse == pytest.approx(1.0, abs=0.02)
    assert rep.loglik_ratio is None
    assert rep.failure_detected is False
    rep = evaluate(X, truth, truth=truth)
    assert rep.loglik_ratio == 1.0 and rep.gmm_success


def test_dirac_truth_uniform_weights():
    truth = MixtureModel("gaussian", [0.1, 0.9], [[0.0], [1.0]], [[1.0], [1.0]])
    dt = dirac_truth(truth)
    assert dt.kind.value == "dirac"
    np.testing.assert_array_equal(dt.weights, [0.5, 0.5])
    np.testing.assert_array_equal(dt.centers, truth.centers)
