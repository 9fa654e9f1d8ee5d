import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slenat.core import (KAPPA0, DrivingPath, MCAccumulator, make_params, mean_stderr, n_steps_for, sample_driving,
                         sample_increments, seed_stream)
from slenat.errors import ParameterError


def test_params_examples():
    p = make_params(8 / 3)
    assert p.d == pytest.approx(4 / 3, abs=1e-15)
    assert p.a == pytest.approx(3 / 4, abs=1e-15)
    p = make_params(2.0)
    assert (p.d, p.a, p.zeta_lt4) == (1.25, 1.0, 0.5)
    assert make_params(5.0).is_good and not make_params(5.1).is_good
    assert KAPPA0 == pytest.approx(5.02175, abs=1e-5)


@pytest.mark.parametrize("k", [0.0, -1.0, 8.0, 9.0, math.nan, math.inf])
def test_params_reject(k):
    with pytest.raises(ParameterError, match="kappa"):
        make_params(k)


@given(st.floats(0.01, 7.99))
def test_params_invariants(k):
    p = make_params(k)
    assert 1 < p.d < 2
    assert p.a * p.kappa == pytest.approx(2.0)
    if p.is_good:
        assert 16 / k + k / 16 > 3.5


def test_driving_frozen_and_deterministic():
    a = sample_driving(1.0, 1e-3, 42)
    b = sample_driving(1.0, 1e-3, 42)
    assert np.array_equal(a.values, b.values)
    assert a.values[0] == 0.0 and a.n_steps == 1000
    np.testing.assert_allclose(a.values[1:4], [0.034924179391423525, 0.028943423417466224, 0.02748874632188275],
                               rtol=0, atol=1e-15)


def test_driving_variance():
    inc = sample_driving(100.0, 1e-3, 7).increments
    v = inc.var(ddof=1)
    se = v * math.sqrt(2 / (len(inc) - 1))
    assert abs(v - 1e-3) < 3 * se


def test_driving_endpoint_mean():
    ends = sample_increments(1.0, 0.01, seed_stream(0, 10_000)).sum(axis=1)
    m, se = mean_stderr(ends)
    assert abs(m) < 3 * se


def test_increments_match_paths():
    inc = sample_increments(0.5, 0.01, [3, 4])
    for row, s in zip(inc, (3, 4)):
        assert np.array_equal(row, np.diff(sample_driving(0.5, 0.01, s).values)) or \
            np.allclose(row, np.diff(sample_driving(0.5, 0.01, s).values), atol=1e-15)


def test_n_steps_errors():
    with pytest.raises(ParameterError):
        n_steps_for(1.0, 0.3)
    with pytest.raises(ParameterError):
        n_steps_for(1.0, 0.0)
    with pytest.raises(ParameterError):
        n_steps_for(0.1, 1.0)


def test_driving_path_helpers():
    p = DrivingPath.from_values([1.0, 2.0, 0.5], 0.5)
    assert p.values.tolist() == [0.0, 1.0, -0.5]
    assert p.value_at(1.0) == -0.5
    assert p.negated().values.tolist() == [-0.0, -1.0, 0.5]
    with pytest.raises(ParameterError):
        p.step_index(0.3)


def test_seed_stream():
    assert seed_stream(10, 3) == [10, 11, 12]


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_accumulator_matches_numpy(xs):
    acc = MCAccumulator()
    for x in xs:
        acc = acc.add(x)
    assert acc.mean == pytest.approx(np.mean(xs), abs=1e-9)
    assert acc.stderr == pytest.approx(np.std(xs, ddof=1) / math.sqrt(len(xs)), abs=1e-9)
    assert MCAccumulator.from_values(xs).mean == pytest.approx(acc.mean, abs=1e-9)
