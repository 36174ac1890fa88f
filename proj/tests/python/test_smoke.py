import json

import numpy as np
import pytest

import nestcov


def decay_truth(rows=10, cols=10, c=30.0, alpha=0.002):
    lam = nestcov.laplace_eigenvalues(rows, cols)
    return lam, nestcov.decay_diagonal(lam, c1=c, alpha=alpha)


def test_laplace_spectrum_is_sorted_and_negative():
    lam = nestcov.laplace_eigenvalues(6, 4)
    assert lam.shape == (24,)
    assert np.all(lam < 0)
    assert np.all(np.diff(lam) <= 0)


def test_sampling_is_seeded():
    _, d = decay_truth(4, 4)
    a = nestcov.gaussian_sample(np.diag(d), 12, 5)
    b = nestcov.gaussian_sample(np.diag(d), 12, 5)
    assert a.shape == (16, 12)
    np.testing.assert_array_equal(a, b)
    s = nestcov.sample_covariance(a)
    np.testing.assert_allclose(s, a @ a.T / 12, rtol=1e-12)


def test_decay_fits_recover_large_sample_truth():
    lam, d = decay_truth()
    x = nestcov.gaussian_sample(np.diag(d), 4000, 1)
    two = nestcov.fit_decay2(x, lam)
    three = nestcov.fit_decay3(x, lam)
    assert two["converged"] and three["converged"]
    assert two["residual_norm"] <= 1e-8 and three["residual_norm"] <= 1e-8
    c, alpha = two["params"]
    assert abs(c - 30.0) < 1.5
    assert abs(alpha - 0.002) < 2e-4
    assert three["params"].shape == (3,)


def test_gmrf_fit_on_population_covariance():
    theta = np.array([5.0, -0.2, 0.5])
    p = nestcov.precision_matrix(theta, 6, 5)
    fit = nestcov.fit_gmrf(np.linalg.inv(p), 6, 5, "N4")
    np.testing.assert_allclose(fit["params"], theta, rtol=1e-7)


def test_shrinkage_estimators():
    _, d = decay_truth(5, 4)
    x = nestcov.gaussian_sample(np.diag(d), 8, 3)
    est, gamma, mu = nestcov.ledoit_wolf(x)
    assert 0.0 <= gamma <= 1.0
    assert np.all(np.linalg.eigvalsh(est) > 0)
    clipped = nestcov.cond_reg(x, 10.0)
    w = np.linalg.eigvalsh(clipped)
    assert w.max() / w.min() <= 10.0 * (1 + 1e-8)
    _, kappa = nestcov.cond_reg_cv(x, [2.0, 10.0, 100.0], folds=4, seed=0)
    assert kappa in (2.0, 10.0, 100.0)


def test_nested_covariances_are_ordered():
    lam, _ = decay_truth()
    q = nestcov.nested_decay_covariances(lam, 30.0, 0.002)
    assert np.trace(q["decay2"]) <= np.trace(q["decay3"]) <= np.trace(q["diag"])
    assert np.linalg.eigvalsh(q["decay3"] - q["decay2"]).min() >= -1e-8


def test_experiment_from_json():
    config = {"kind": "DiagDecay", "sample_sizes": [5, 10], "replications": 4, "seed": 2}
    rows = nestcov.run_experiment(json.dumps(config), threads=1)
    assert len(rows) == 10
    again = nestcov.run_experiment(json.dumps(config), threads=2)
    assert rows == again
    trace = nestcov.fisher_trace(json.dumps(config))
    assert {r[0] for r in trace} == {"diag", "decay3", "decay2"}


def test_errors_carry_their_kind():
    with pytest.raises(nestcov.NestcovError) as info:
        nestcov.run_experiment(json.dumps({"kind": "DiagDecay", "replications": 0}))
    assert info.value.kind == "ValidationError"
    with pytest.raises(nestcov.NestcovError) as info:
        nestcov.fit_gmrf(np.eye(4), 2, 2)
    assert info.value.kind == "GridTooSmall"
