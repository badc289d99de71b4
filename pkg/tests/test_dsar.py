import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsesense.core import ConfigError, InputDomainError, InsufficientHistoryError, NumericalError
from sparsesense.dsar import (
    DsarConfig,
    DsarModel,
    estimate_noise,
    fit,
    predict_next,
    regressor,
    stabilize,
    variance_of_residuals,
)
from sparsesense.simulate import SyntheticSpec, generate_synthetic
from sparsesense.weights import SpatialWeightSet


def ident(S, p=1):
    return SpatialWeightSet.identity(S, p)


def history(panel):
    return [panel.values[:, t].copy() for t in range(panel.T)]


def test_config_validation():
    with pytest.raises(ConfigError):
        DsarConfig(p=0)
    with pytest.raises(ConfigError):
        DsarConfig(ridge=-1.0)
    with pytest.raises(ConfigError):
        DsarConfig(p=3, window=3)


# --- regressor


def test_regressor_examples():
    hist = [np.array([2.0, 4.0])]
    np.testing.assert_array_equal(regressor(ident(2), hist, 1, 1), [2.0, 4.0])
    half = SpatialWeightSet((np.full((2, 2), 0.5),))
    np.testing.assert_array_equal(regressor(half, hist, 1, 1), [3.0, 3.0])
    np.testing.assert_array_equal(regressor(half, [np.zeros(2)], 1, 1), [0.0, 0.0])


def test_regressor_lag_out_of_range():
    with pytest.raises(InputDomainError):
        regressor(ident(2), [np.zeros(2)], 0, 1)
    with pytest.raises(InputDomainError):
        regressor(ident(2), [np.zeros(2)] * 3, 3, 2)


# --- fit


def test_fit_persistence():
    rng = np.random.default_rng(0)
    level = rng.uniform(1, 5, size=4)
    hist = [level.copy() for _ in range(12)]
    model = fit(hist, ident(4), DsarConfig(p=1, ridge=0.0, window=10))
    np.testing.assert_allclose(model.phi[:, 0], 1.0, atol=1e-9)


def test_fit_geometric_decay():
    # oracle: x(t) = 0.5 x(t-1), x(0) = 1, generated by hand
    hist = [np.array([0.5**t]) for t in range(50)]
    model = fit(hist, ident(1), DsarConfig(p=1, ridge=0.0, window=10))
    assert model.phi[0, 0] == pytest.approx(0.5, abs=1e-9)


def test_fit_huge_ridge_shrinks_to_zero():
    rng = np.random.default_rng(1)
    hist = list(rng.normal(size=(40, 3)))
    model = fit(hist, ident(3, 2), DsarConfig(p=2, ridge=1e12, window=10))
    assert np.abs(model.phi).max() < 1e-6


def test_fit_needs_3p_history():
    with pytest.raises(InsufficientHistoryError):
        fit([np.ones(2)] * 5, ident(2, 2), DsarConfig(p=2, window=10))


def test_fit_singular_without_ridge():
    hist = [np.ones(2)] * 10  # constant series: both lag regressors identical
    with pytest.raises(NumericalError, match="ridge"):
        fit(hist, ident(2, 2), DsarConfig(p=2, ridge=0.0, window=10))


# --- predict


def test_predict_examples():
    m = DsarModel(np.ones((3, 1)), ident(3), np.zeros(3))
    np.testing.assert_array_equal(predict_next(m, [np.array([1.0, 2.0, 3.0])], 1), [1.0, 2.0, 3.0])
    m = DsarModel(np.array([[0.5]]), ident(1), np.zeros(1))
    assert predict_next(m, [np.array([4.0])], 1)[0] == pytest.approx(2.0, abs=1e-12)
    half = SpatialWeightSet((np.full((2, 2), 0.5),))
    m = DsarModel(np.ones((2, 1)), half, np.zeros(2))
    np.testing.assert_allclose(predict_next(m, [np.array([2.0, 4.0])], 1), [3.0, 3.0], atol=1e-12)


def test_predict_needs_history():
    m = DsarModel(np.ones((1, 2)), ident(1, 2), np.zeros(1))
    with pytest.raises(InsufficientHistoryError):
        predict_next(m, [np.ones(1)], 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50, allow_nan=False))
def test_predict_linear_in_history(seed, c):
    rng = np.random.default_rng(seed)
    W = SpatialWeightSet(tuple(rng.dirichlet(np.ones(4), size=4) for _ in range(2)))
    m = DsarModel(rng.uniform(-1, 1, size=(4, 2)), W, np.zeros(4))
    hist = list(rng.normal(size=(3, 4)))
    base = predict_next(m, hist, 3)
    scaled = predict_next(m, [c * h for h in hist], 3)
    np.testing.assert_allclose(scaled, c * base, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("S,p", [(1, 1), (4, 2), (6, 3)])
def test_fit_predict_round_trip(S, p):
    phi = np.full((S, p), 0.9 / p)
    phi[:, 0] += np.linspace(0, 0.05, S)
    spec = SyntheticSpec(S=S, T=40, p=p, true_phi=phi, noise_sigma=0.0, seed=S + p)
    panel, truth = generate_synthetic(spec)
    hist = history(panel)
    model = fit(hist[:30], truth.weights, DsarConfig(p=p, ridge=0.0, window=10))
    for t in range(30, 40):
        assert np.abs(predict_next(model, hist, t) - hist[t]).max() < 1e-6


def test_ridge_path_continuity():
    spec = SyntheticSpec(S=5, T=120, p=2, noise_sigma=0.1, seed=7)
    panel, truth = generate_synthetic(spec)
    hist = history(panel)
    a = fit(hist[:100], truth.weights, DsarConfig(p=2, ridge=0.0, window=10))
    b = fit(hist[:100], truth.weights, DsarConfig(p=2, ridge=1e-9, window=10))
    assert np.abs(predict_next(a, hist, 100) - predict_next(b, hist, 100)).max() < 1e-6


# --- noise


def test_noise_zero_on_exact_data():
    hist = [np.array([0.5**t, 0.25 * 0.5**t]) for t in range(30)]
    model = fit(hist, ident(2), DsarConfig(p=1, ridge=0.0, window=10))
    assert model.noise_cov_diag.max() < 1e-12


def test_noise_population_variance():
    assert variance_of_residuals([1.0, -1.0])[0] == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=20), st.floats(-100, 100))
def test_noise_shift_invariant(res, c):
    a = variance_of_residuals(res)
    b = variance_of_residuals([r + c for r in res])
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_estimate_noise_needs_two_residuals():
    m = DsarModel(np.ones((1, 1)), ident(1), np.zeros(1))
    with pytest.raises(InsufficientHistoryError):
        estimate_noise(m, [np.ones(1), np.ones(1)])


def test_estimate_noise_returns_copy():
    m = DsarModel(np.array([[0.5]]), ident(1), np.zeros(1))
    hist = [np.array([1.0]), np.array([1.5]), np.array([-0.25]), np.array([0.875])]
    m2 = estimate_noise(m, hist)
    # residuals: 1.5 - 0.5, -0.25 - 0.75, 0.875 + 0.125 = [1, -1, 1]
    assert m2.noise_cov_diag[0] == pytest.approx(np.var([1.0, -1.0, 1.0]), abs=1e-12)
    assert m.noise_cov_diag[0] == 0.0


def test_stabilize_caps_lag_sum():
    m = DsarModel(np.array([[0.9, 0.3], [0.2, 0.1]]), ident(2, 2), np.zeros(2))
    s = stabilize(m)
    assert np.abs(s.phi).sum(axis=1).max() <= 1 + 1e-15
    np.testing.assert_array_equal(s.phi[1], [0.2, 0.1])
    np.testing.assert_allclose(s.phi[0], [0.75, 0.25])
