import math

import numpy as np
import pytest

from slenat import DomainBox, make_params
from slenat.io import read_csv
from slenat.moments import (F_samples, estimate_F, estimate_I, loglog_slope, martingale_N, n0, n_exponents,
                            pair_envelope, sample_reverse, trimmed_mean, two_point_N, two_point_n0,
                            write_manifest, write_moments_csv)
from slenat.errors import DomainError, ParameterError

# max of F / envelope over five point pairs (4000 seeds, t = 1, D = [-1,1]x[1,2]), rounded up
PAIR_ENVELOPE_C = 0.3


@pytest.mark.parametrize("k", [2.0, 8 / 3, 5.0])
def test_exponents(k):
    p = make_params(k)
    lam, q = n_exponents(1.0, p)
    assert lam == pytest.approx(p.d) and q == pytest.approx(k / 8)
    lam, _ = n_exponents(4 / k + 0.5, p)
    assert lam == pytest.approx(2 / k + 3 * k / 32 + 1)
    assert n0(1j, 1.0, p) == 1.0


def test_martingale_at_zero_time():
    p = make_params(8 / 3)
    smp = sample_reverse([1j, 2j], [0.0, 0.5], 1e-3, range(5), p)
    np.testing.assert_allclose(martingale_N(smp, 1.0, p, 0.0, 0), 1.0)
    k = p.kappa
    want = 2 ** (1 - k / 8) * 3 ** (-k / 4)
    assert two_point_n0(1j, 2j, 1.0, p) == pytest.approx(want, rel=1e-12)
    np.testing.assert_allclose(two_point_N(smp, 1.0, p, 0.0), want, rtol=1e-12)
    np.testing.assert_allclose(two_point_N(smp, 1.0, p, 0.5), two_point_N(smp, 1.0, p, 0.5, (1, 0)), rtol=1e-12)
    assert two_point_n0(2j, 1j, 1.0, p) == pytest.approx(want, rel=1e-12)


def test_reverse_errors():
    p = make_params(2.0)
    with pytest.raises(DomainError):
        sample_reverse([1.0], [0.5], 1e-3, [0], p)
    with pytest.raises(ParameterError):
        sample_reverse([1j], [0.5005], 1e-3, [0], p)
    smp = sample_reverse([1j, 1j], [0.5], 1e-3, [0], p)
    with pytest.raises(DomainError):
        two_point_N(smp, 1.0, p)
    with pytest.raises(ParameterError):
        smp.time_index(0.3)


def test_estimate_I_nonnegative_and_empty(small_table2):
    p = make_params(2.0)
    m, se, vals = estimate_I(1.0, None, small_table2, 10, p, 0, 1e-3, return_samples=True)
    assert np.all(vals >= 0) and m > 0
    far = DomainBox(-1.0, 1.0, 5.0, 6.0)  # y_min^2 > 2a(1 + s) bounds every image
    m, se = estimate_I(1.0, far, small_table2, 10, p, 0, 1e-3)
    assert m == 0.0 and se == 0.0
    with pytest.raises(ParameterError):
        estimate_I(1.0005, None, small_table2, 10, p)


def test_F_symmetric_and_cauchy_schwarz():
    p = make_params(8 / 3)
    D = DomainBox(-1, 1, 1, 2)
    a = estimate_F(1j, 1 + 1j, 1.0, D, 2000, p, 5)
    b = estimate_F(1 + 1j, 1j, 1.0, D, 2000, p, 5)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    fs = F_samples(1j, 1 + 1j, 1.0, D, range(2000), p)
    mz = fs.marginal("z").mean()
    mw = fs.marginal("w").mean()
    sz = fs.marginal("z").std(ddof=1) / math.sqrt(2000)
    sw = fs.marginal("w").std(ddof=1) / math.sqrt(2000)
    f, sf = a
    assert f * f <= mz * mw + 4 * math.hypot(2 * f * sf, math.hypot(mw * sz, mz * sw))


@pytest.mark.parametrize("z,w", [(1j, 1 + 1j), (0.5 + 0.5j, -0.5 + 0.5j), (1j, 0.2 + 1.1j), (0.3 + 1.5j, -0.4 + 1.2j)])
def test_F_envelope_guard(z, w):
    p = make_params(8 / 3)
    m, se = estimate_F(z, w, 1.0, DomainBox(-1, 1, 1, 2), 2000, p, 10**6)
    assert m <= PAIR_ENVELOPE_C * pair_envelope(z, w, p) + 4 * se


def test_helpers(tmp_path):
    assert loglog_slope([1, 2, 4], [1, 0.5, 0.25]) == pytest.approx(-1.0)
    x = np.r_[np.zeros(998), 1e9, -1e9]
    assert trimmed_mean(x, 0.001) == 0.0
    write_moments_csv(tmp_path / "m.csv", [(1.0, "I_H", 0.5, 0.1, 10)])
    assert read_csv(tmp_path / "m.csv", ("s_or_t", "statistic", "mean", "stderr", "n"))[0]["n"] == "10"
    write_manifest(tmp_path / "man.json", 2.0, 1e-3, 0, 10, note="x")
    import json

    assert json.loads((tmp_path / "man.json").read_text())["note"] == "x"
