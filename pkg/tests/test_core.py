import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparsesense.core import (
    InputDomainError,
    Location,
    MeasurementPanel,
    fuse_observations,
    rmse,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.parametrize(
    "obs, expected",
    [({}, [1, 2, 3]), ({0: 9, 1: 8, 2: 7}, [9, 8, 7]), ({1: 5}, [1, 5, 3])],
)
def test_fuse_examples(obs, expected):
    np.testing.assert_array_equal(fuse_observations([1, 2, 3], obs), expected)


def test_fuse_rejects_bad_id():
    with pytest.raises(InputDomainError):
        fuse_observations([1, 2, 3], {3: 1.0})
    with pytest.raises(InputDomainError):
        fuse_observations([1, 2, 3], {-1: 1.0})


@given(st.lists(finite, min_size=1, max_size=8), st.data())
def test_fuse_idempotent(pred, data):
    obs = data.draw(st.dictionaries(st.integers(0, len(pred) - 1), finite))
    once = fuse_observations(pred, obs)
    np.testing.assert_array_equal(fuse_observations(once, obs), once)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0], {0, 1}) == 0.0
    assert rmse([0, 0], [3, 4], {0, 1}) == pytest.approx(math.sqrt((9 + 16) / 2), abs=1e-12)
    assert rmse([0, 0], [3, 4], {1}) == pytest.approx(4.0, abs=1e-12)


def test_rmse_empty_subset():
    with pytest.raises(InputDomainError):
        rmse([0.0], [1.0], set())


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=10), st.floats(-100, 100, allow_nan=False))
def test_rmse_symmetry_and_scaling(pairs, c):
    p = np.array([a for a, _ in pairs])
    a = np.array([b for _, b in pairs])
    sub = set(range(len(pairs)))
    base = rmse(p, a, sub)
    assert rmse(a, p, sub) == base
    assert rmse(c * p, c * a, sub) == pytest.approx(abs(c) * base, rel=1e-9, abs=1e-9)


@given(st.lists(finite, min_size=2, max_size=6), st.data())
def test_rmse_singleton_is_abs_error(vals, data):
    s = data.draw(st.integers(0, len(vals) - 1))
    actual = np.zeros(len(vals))
    assert rmse(vals, actual, {s}) == pytest.approx(abs(vals[s]))


def test_panel_sentinel_and_invariants():
    panel = MeasurementPanel.from_array([[1.0, 2.0], [3.0, 4.0]], mask=[[True, False], [True, True]])
    assert panel.S == 2 and panel.T == 2
    assert np.isnan(panel.values[0, 1])
    with pytest.raises(ValueError):
        panel.values[0, 0] = 5.0  # read-only


def test_panel_rejects_bad_shapes_and_ids():
    with pytest.raises(InputDomainError):
        MeasurementPanel((Location(1),), np.ones((1, 3)), np.ones((1, 3), bool))
    with pytest.raises(InputDomainError):
        MeasurementPanel.from_array(np.ones((2, 3)), mask=np.ones((3, 2), bool))
    with pytest.raises(InputDomainError):
        MeasurementPanel((Location(0, coords=(0, 0)), Location(1)), np.ones((2, 2)), np.ones((2, 2), bool))
    with pytest.raises(InputDomainError):
        MeasurementPanel.from_array([[np.inf, 1.0]])
