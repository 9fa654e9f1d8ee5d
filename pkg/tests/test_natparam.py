import math

import numpy as np
import pytest

from slenat import DomainBox, ThetaPlan, build_chain, d_variation, make_params, minkowski_content, sample_driving
from slenat import theta_estimate
from slenat.core import sample_increments
from slenat.errors import CoverageError, ParameterError
from slenat.green import box_grid, green_g, psi_batch
from slenat.hitting import PhiTable
from slenat.io import read_csv
from slenat.loewner import fhat_points, full_trace
from slenat.natparam import (THETA_CSV_HEADER, conformal_minkowski, dyadic_diagnostics, neighborhood_areas,
                             theta_increment, vanishing_time, write_table_csv, write_theta_csv)

D0 = DomainBox(-1.0, 1.0, 0.5, 1.5)


@pytest.fixture(scope="module")
def chains2():
    p = make_params(2.0)
    return [build_chain(sample_driving(1.0, 2.0**-10, s), p) for s in range(100)]


def test_theta_structure(small_table2, chains2):
    p = make_params(2.0)
    plan = ThetaPlan(small_table2, p)
    tv = vanishing_time(D0, p)
    assert tv == pytest.approx(1 / (2 * p.a * 4))
    for ch in chains2[:20]:
        est = theta_estimate(ch, 1.0, 5, D0, small_table2, p, plan)
        assert np.all(est.increments >= 0)
        assert np.all(np.diff(est.theta) >= 0)
        assert np.all(est.theta[est.times < tv] == 0)
        assert est.at(1.0) == est.value


def test_theta_determinism(small_table2, chains2):
    p = make_params(2.0)
    a = theta_estimate(chains2[3], 1.0, 6, D0, small_table2, p)
    b = theta_estimate(build_chain(sample_driving(1.0, 2.0**-10, 3), p), 1.0, 6, D0, small_table2, p)
    assert np.array_equal(a.theta, b.theta)


def test_first_increment_empty_for_high_box(small_table2, chains2):
    p = make_params(2.0)
    D = DomainBox(-1.0, 1.0, 1.0, 2.0)
    # support of phi(. 2^(n/2)) G stops at sqrt(2a) 2^(-n/2) < 1
    assert theta_increment(chains2[0], 1, 4, D, small_table2, p) == 0.0


def test_scaled_form_matches_quadrature(small_table2):
    p = make_params(2.0)
    ch = build_chain(sample_driving(1.0, 2.0**-10, 7), p)
    n, j = 4, 6
    tau = (j - 1) * 2.0**-n
    val = theta_increment(ch, j, n, D0, small_table2, p)
    assert val > 0
    s = 2.0 ** (-n / 2)
    # integrate |fhat'(z)|^d 1{fhat(z) in D} d mu_delta(z) directly in z
    box = DomainBox(-small_table2.x_max * s, small_table2.x_max * s, 1e-9, small_table2.y_top * s)
    g = box_grid(box, 600, 150)
    F, L = fhat_points(ch, tau, g.nodes)
    dens = green_g(g.nodes, p) * small_table2.query(g.nodes / s)
    ref = g.integrate(np.exp(p.d * L) * D0.contains(F) * dens)
    assert val == pytest.approx(ref, rel=0.05)


def test_conditional_expectation(p83, table83):
    dt = 2.0**-12
    n, j = 4, 5
    pre = sample_driving(0.25, dt, 7)
    ch = build_chain(pre, p83)
    inc = ThetaPlan(table83, p83).increments(ch, n, D0, [j])[0]
    g = box_grid(D0, 80, 40)
    cont = sample_increments(1 / 16, dt, range(1000, 2000))
    full = np.hstack([np.tile(pre.increments, (1000, 1)), cont])
    ps = psi_batch(full, dt, [1024, 1280], g, p83)
    d = ps[:, 0] - ps[:, 1]
    assert abs(d.mean() - inc) <= 4 * d.std(ddof=1) / math.sqrt(len(d))


def test_dyadic_kappa2(small_table2, chains2):
    rep = dyadic_diagnostics(chains2, D0, [4, 5, 6], small_table2, make_params(2.0))
    (n4, m4, _), (n5, m5, _) = rep.rows()
    assert m4 / m5 >= 1.2


def test_coverage_error(p83):
    xs = np.array([0.25, 0.75])
    ys = np.array([0.3, 0.9])
    vals = np.full((2, 2), 0.5)
    tab = PhiTable(p83.kappa, xs, ys, vals, vals * 0.01, np.full((2, 2), 100), x_max=1.0, y_top=1.2247448713915889)
    ch = build_chain(sample_driving(1.0, 2.0**-10, 0), p83)
    with pytest.raises(CoverageError, match="node"):
        theta_estimate(ch, 1.0, 3, D0, tab, p83)


def test_theta_needs_grid_times(small_table2):
    p = make_params(2.0)
    ch = build_chain(sample_driving(1.0, 1e-3, 0), p)
    with pytest.raises(ParameterError):
        theta_estimate(ch, 1.0, 4, D0, small_table2, p)


def test_minkowski_segment():
    L = 1.0
    seg = np.linspace(0, L, 20001) + 0.5j
    eps = np.geomspace(1e-2, 1e-3, 5)
    fit = minkowski_content(seg, eps, 1.0)
    np.testing.assert_allclose(fit.content, 2 * L, rtol=0.05)
    fit_d = minkowski_content(seg, eps, 4 / 3)
    assert np.all(np.diff(fit_d.content) < 0)


def test_neighborhood_disk():
    # single point: area pi eps^2
    a = neighborhood_areas(np.array([0.3 + 0.3j]), np.array([0.1, 0.05]), 0.001)
    np.testing.assert_allclose(a, math.pi * np.array([0.01, 0.0025]), rtol=0.01)


def test_minkowski_errors():
    with pytest.raises(ParameterError):
        minkowski_content(np.array([0j, 1j]), [0.1, 0.2], 1.0)
    with pytest.raises(ParameterError):
        minkowski_content(np.array([], complex), [0.1], 1.0)


def test_conformal_minkowski(p83):
    ch = build_chain(sample_driving(1.0, 1e-3, 3), p83)
    g = box_grid(DomainBox(-2.0, 2.0, 1e-3, 2.0), 800, 400)
    eps = 0.05
    strip = g.weights[g.nodes.imag <= eps].sum()
    assert conformal_minkowski(ch, 0.0, eps, g, p83) == pytest.approx(eps ** (p83.d - 2) * strip)
    vals = [conformal_minkowski(ch, t, eps, g, p83) for t in (0.25, 0.5, 1.0)]
    assert np.all(np.diff(vals) >= 0)
    r = conformal_minkowski(ch, 1.0, 0.025, g, p83) / vals[-1]
    assert abs(r - 1) <= 0.3


def test_d_variation_segment():
    seg = np.linspace(0, 2.0, 1025) * (1 + 1j) / math.sqrt(2)
    v = d_variation(seg, 1.0, [1, 4, 1024])
    np.testing.assert_allclose(v, 2.0, rtol=1e-12)
    vd = d_variation(seg, 1.25, [4, 64, 1024])
    assert np.all(np.diff(vd) < 0)
    with pytest.raises(ParameterError):
        d_variation(seg, 1.0, [3])


def test_d_variation_sle_stable(p83):
    ch = build_chain(sample_driving(1.0, 2.0**-12, 0), p83)
    v = d_variation(full_trace(ch)[1], p83.d, [2**k for k in range(8, 13)])
    assert v.max() / v.min() < 1.5


def test_csv_outputs(tmp_path, small_table2, chains2):
    p = make_params(2.0)
    est = theta_estimate(chains2[0], 1.0, 3, D0, small_table2, p)
    write_theta_csv(tmp_path / "t.csv", [est])
    rows = read_csv(tmp_path / "t.csv", THETA_CSV_HEADER)
    assert len(rows) == 9 and rows[-1]["chain_seed"] == "0"
    assert float(rows[-1]["theta"]) == est.value
    write_table_csv(tmp_path / "m.csv", [10, 20], [1.5, 2.5])
    assert read_csv(tmp_path / "m.csv", ("eps_or_mesh", "value"))[1] == {"eps_or_mesh": "20", "value": "2.5"}
