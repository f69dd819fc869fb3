import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2lab.optim import FitError, FitResult, ParamSpec, fit_least_squares, numeric_jacobian
from v2lab.photophysics import lorentzian_response


def line(x, a, b):
    return a * x + b


def decay(x, a, t):
    return a * np.exp(-x / t)


def test_linear_exact_points():
    res = fit_least_squares(line, [ParamSpec("a", 0.5), ParamSpec("b", 0.0)], [0, 1, 2], [1, 3, 5])
    assert res.converged
    assert res.value("a") == pytest.approx(2.0, abs=1e-9)
    assert res.value("b") == pytest.approx(1.0, abs=1e-9)
    assert res.chi2_reduced == pytest.approx(0.0, abs=1e-15)


def test_all_frozen_evaluates_once():
    calls = []

    def model(x, a, b):
        calls.append(1)
        return line(x, a, b)

    specs = [ParamSpec("a", 2.0, frozen=True), ParamSpec("b", 1.0, frozen=True)]
    res = fit_least_squares(model, specs, [0, 1, 2], [1, 3, 5])
    assert len(calls) == 1
    assert res.n_iterations == 0
    assert np.all(res.covariance == 0)
    assert res.params == {"a": (2.0, 0.0), "b": (1.0, 0.0)}


def test_frozen_parameter_unchanged_with_zero_sigma():
    x = np.linspace(0, 5, 20)
    y = decay(x, 1.3, 2.0)
    res = fit_least_squares(decay, [ParamSpec("a", 1.3, frozen=True), ParamSpec("t", 1.0, 0.0)], x, y)
    assert res.params["a"] == (1.3, 0.0)
    assert res.value("t") == pytest.approx(2.0, rel=1e-8)


def test_bounds_are_respected():
    x = np.linspace(0, 1, 10)
    y = line(x, -1.0, 0.0)
    res = fit_least_squares(line, [ParamSpec("a", 1.0, 0.0, 5.0), ParamSpec("b", 0.0)], x, y)
    assert res.value("a") == 0.0
    assert 0.0 <= res.value("a") <= 5.0


def test_initial_outside_bounds_rejected():
    with pytest.raises(ValueError):
        ParamSpec("a", 2.0, 0.0, 1.0)


def test_too_few_points():
    with pytest.raises(ValueError):
        fit_least_squares(line, [ParamSpec("a", 1.0), ParamSpec("b", 0.0)], [0.0], [1.0])


def test_nonpositive_sigma_rejected():
    with pytest.raises(ValueError):
        fit_least_squares(line, [ParamSpec("a", 1.0), ParamSpec("b", 0.0)], [0, 1, 2], [1, 2, 3], [1, 0, 1])


def test_singular_hessian_flagged():
    # a and b enter only through their sum
    def model(x, a, b):
        return (a + b) * x

    res = fit_least_squares(model, [ParamSpec("a", 1.0), ParamSpec("b", 1.0)], [0, 1, 2, 3], [0, 3, 6, 9])
    assert not res.converged
    assert "singular_hessian" in res.warnings
    assert math.isinf(res.sigma("a")) and math.isinf(res.sigma("b"))


def test_non_finite_model_raises_with_parameters():
    def model(x, a):
        return np.full_like(x, np.nan)

    with pytest.raises(FitError, match="a"):
        fit_least_squares(model, [ParamSpec("a", 1.0)], [0, 1, 2], [1, 2, 3])


def test_jacobian_square():
    jac = numeric_jacobian(lambda p: p ** 2, [3.0], 1e-6)
    assert jac.shape == (1, 1)
    assert jac[0, 0] == pytest.approx(6.0, abs=1e-6)


def test_jacobian_constant_model():
    jac = numeric_jacobian(lambda p: np.array([4.0, 5.0, 6.0]), [1.0, -2.0], 1e-6)
    assert np.all(jac == 0)


def test_jacobian_rejects_bad_step_and_nan():
    with pytest.raises(ValueError):
        numeric_jacobian(lambda p: p, [1.0], 0.0)
    with pytest.raises(FitError, match="gamma"):
        numeric_jacobian(lambda p: np.where(p < 1.0, np.nan, p), [1.0], 1e-6, names=["gamma"])


def test_jacobian_lorentzian_half_width():
    gamma, c0 = 39.0, 7.42
    f = gamma / 2

    def model(p):
        return np.atleast_1d(lorentzian_response(f, p[0], p[1]))

    jac = numeric_jacobian(model, [gamma, c0], 1e-6)
    h = gamma / 2
    denom = f * f + h * h
    d_gamma = c0 * h * f * f / denom ** 2
    d_c0 = h * h / denom
    assert jac[0, 0] == pytest.approx(d_gamma, rel=1e-5)
    assert jac[0, 1] == pytest.approx(d_c0, rel=1e-5)


def test_central_matches_forward_difference():
    p0 = np.array([1.2, 0.7])
    x = np.linspace(0, 4, 9)
    step = 1e-6

    def model(p):
        return decay(x, *p)

    central = numeric_jacobian(model, p0, step)
    forward = np.empty_like(central)
    for k in range(p0.size):
        h = max(step * abs(p0[k]), step)
        q = p0.copy()
        q[k] += h
        forward[:, k] = (model(q) - model(p0)) / h
    assert np.max(np.abs(central - forward)) < 10 * step


def test_json_round_trip():
    x = np.linspace(0, 5, 30)
    rng = np.random.default_rng(1)
    y = decay(x, 1.0, 2.0) + rng.normal(0, 0.01, x.size)
    res = fit_least_squares(decay, [ParamSpec("a", 0.8), ParamSpec("t", 1.5, 0.0)], x, y, name="decay")
    doc = json.loads(res.to_json())
    assert set(doc) >= {"model", "params", "chi2_reduced", "converged", "covariance"}
    assert doc["model"] == "decay"
    back = FitResult.from_dict(doc)
    assert back.params == res.params
    np.testing.assert_array_equal(back.covariance, res.covariance)
    assert back.converged == res.converged


def test_json_infinite_sigma_round_trip():
    res = FitResult({"a": (1.0, math.inf)}, np.full((1, 1), np.inf), 0.0, 3, 1, False)
    back = FitResult.from_dict(json.loads(res.to_json()))
    assert math.isinf(back.sigma("a"))


def test_reordering_permutes_covariance():
    x = np.linspace(0, 5, 25)
    rng = np.random.default_rng(3)
    y = decay(x, 1.0, 2.0) + rng.normal(0, 0.02, x.size)
    fwd = fit_least_squares(decay, [ParamSpec("a", 0.9), ParamSpec("t", 1.8)], x, y)
    rev = fit_least_squares(lambda xx, t, a: decay(xx, a, t), [ParamSpec("t", 1.8), ParamSpec("a", 0.9)], x, y)
    assert rev.value("a") == pytest.approx(fwd.value("a"), rel=1e-8)
    assert rev.value("t") == pytest.approx(fwd.value("t"), rel=1e-8)
    np.testing.assert_allclose(rev.covariance[::-1, ::-1], fwd.covariance, rtol=1e-6)


def test_deterministic():
    x = np.linspace(0, 5, 25)
    y = decay(x, 1.0, 2.0) + np.sin(7 * x) * 0.01
    a = fit_least_squares(decay, [ParamSpec("a", 0.5), ParamSpec("t", 1.0)], x, y)
    b = fit_least_squares(decay, [ParamSpec("a", 0.5), ParamSpec("t", 1.0)], x, y)
    assert a.to_json() == b.to_json()


def test_exponential_recovery_over_seeds():
    x = np.arange(6.0)
    ts = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = decay(x, 1.0, 2.0) + rng.normal(0, 0.01, x.size)
        res = fit_least_squares(decay, [ParamSpec("a", 1.2), ParamSpec("t", 1.6, 0.0)], x, y)
        assert res.converged
        ts.append(res.value("t"))
    ts = np.array(ts)
    sem = ts.std(ddof=1) / math.sqrt(ts.size)
    assert abs(ts.mean() - 2.0) < 3 * sem


def test_weighted_covariance_is_absolute():
    x = np.linspace(0, 1, 11)
    y = line(x, 2.0, 1.0)
    sigma = np.full(x.size, 0.1)
    res = fit_least_squares(line, [ParamSpec("a", 1.0), ParamSpec("b", 0.0)], x, y, sigma)
    X = np.column_stack([x, np.ones_like(x)]) / 0.1
    np.testing.assert_allclose(res.covariance, np.linalg.inv(X.T @ X), rtol=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0.2, 5.0),
    t=st.floats(0.5, 4.0),
    da=st.floats(-0.2, 0.2),
    dt=st.floats(-0.2, 0.2),
)
def test_noiseless_round_trip_from_perturbed_start(a, t, da, dt):
    x = np.linspace(0, 10, 40)
    y = decay(x, a, t)
    res = fit_least_squares(decay, [ParamSpec("a", a * (1 + da)), ParamSpec("t", t * (1 + dt), 0.0)], x, y)
    assert res.value("a") == pytest.approx(a, rel=1e-6)
    assert res.value("t") == pytest.approx(t, rel=1e-6)
    assert res.chi2_reduced >= 0
    assert np.all(np.diag(res.covariance) >= 0)


def test_jacobian_stays_inside_bounds():
    def model(p):
        if p[0] < 0:
            raise AssertionError("probed outside the box")
        return np.array([p[0] ** 2 + p[0], 3.0 * p[1]])

    jac = numeric_jacobian(model, [0.0, 1.0], 1e-6, bounds=([0.0, -np.inf], [np.inf, np.inf]))
    assert jac[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert jac[1, 1] == pytest.approx(3.0, abs=1e-9)


def test_fit_with_parameter_on_bound_whose_model_rejects_outside():
    def model(x, a, b):
        if a < 0:
            raise ValueError("negative rate")
        return b / (1.0 + a * x)

    x = np.linspace(0, 5, 20)
    res = fit_least_squares(model, [ParamSpec("a", 0.5, 0.0), ParamSpec("b", 1.0)], x, np.full(x.size, 2.0))
    assert res.value("a") == pytest.approx(0.0, abs=1e-9)
    assert res.value("b") == pytest.approx(2.0, rel=1e-9)
