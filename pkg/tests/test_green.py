import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slenat import DomainBox, build_chain, forward_state, green_g, integrate_G, make_params, psi, sample_driving
from slenat.core import DrivingPath, mean_stderr
from slenat.errors import DomainError, ParameterError
from slenat.green import (box_grid, forward_seeds, green_g_total, green_integral_exact, half_disk_grid, local_mart_M,
                          mart_M, one_point_ratio, psi_batch, psi_image, upsilon_samples)

# closed form K^d/d * int_0^pi sin^(4/3) at K = 1, kappa = 8/3
INTEGRAL_G_REF = 1.3661159894367643

D0 = DomainBox(-1.0, 1.0, 0.5, 1.5)


def test_green_values():
    p = make_params(8 / 3)
    assert green_g(1j, p) == pytest.approx(1.0, abs=1e-15)
    assert green_g(2j, p) == pytest.approx(2 ** (p.d - 2), abs=1e-15)
    # |1+i|^(-2/3) * (1/sqrt 2)^(4/3) = 2^(-1/3) 2^(-2/3)
    assert green_g(1 + 1j, p) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        green_g(1.0, p)
    assert green_g_total(np.array([1j, 1.0, -1j]), p).tolist() == [1.0, 0.0, 0.0]


@given(st.floats(0.5, 7.5), st.floats(-5, 5), st.floats(0.05, 5), st.floats(0.1, 10))
def test_green_scaling_and_symmetry(k, x, y, r):
    p = make_params(k)
    z = complex(x, y)
    assert green_g(r * z, p) == pytest.approx(r ** (p.d - 2) * green_g(z, p), rel=1e-10)
    assert green_g(-z.conjugate(), p) == pytest.approx(green_g(z, p), rel=1e-12)


def test_local_mart_at_zero():
    p = make_params(2.0)
    ch = build_chain(sample_driving(1.0, 1e-3, 0), p)
    assert local_mart_M(forward_state(ch, 0.0, 1 + 2j), p) == pytest.approx(green_g(1 + 2j, p))


def test_mart_M_swallowed_is_zero():
    p = make_params(2.0)
    out = mart_M(np.array([1j, 1j]), np.array([0.0, 0.0]), np.array([True, False]), p)
    assert out.tolist() == [1.0, 0.0]


@pytest.fixture(scope="module")
def m_paths():
    p = make_params(8 / 3)
    times = np.arange(1, 1001) * 1e-3
    Z, L, A, _ = forward_seeds(1j, times, 1e-3, range(10_000), p)
    return p, mart_M(Z, L, A, p)


def test_stopped_mean(m_paths):
    _, M = m_paths
    M = M[:, :500]
    hit = M >= 50.0
    first = np.where(hit.any(axis=1), hit.argmax(axis=1), M.shape[1] - 1)
    stopped = M[np.arange(len(M)), first]
    m, se = mean_stderr(stopped)
    assert abs(m - 1.0) <= 4 * se


def test_strict_supermartingale(m_paths):
    _, M = m_paths
    m, se = mean_stderr(M[:, -1])
    assert m < 1 - 4 * se


def test_psi_at_zero():
    p = make_params(8 / 3)
    ch = build_chain(sample_driving(1.0, 1e-3, 0), p)
    g = box_grid(D0, 40, 20)
    assert psi(ch, 0.0, D0, g, p) == pytest.approx(g.integrate(green_g(g.nodes, p)), rel=1e-12)


def test_psi_supermartingale_in_mean():
    p = make_params(8 / 3)
    g = box_grid(D0, 40, 20)
    from slenat.core import sample_increments

    inc = sample_increments(1.0, 1e-3, range(300))
    ps = psi_batch(inc, 1e-3, [0, 1000], g, p)
    m, se = mean_stderr(ps[:, 1])
    assert m <= ps[0, 0] + 4 * se
    assert m < ps[0, 0]


def test_psi_domain_vs_image():
    p = make_params(8 / 3)
    ch = build_chain(DrivingPath.zero(0.1, 1e-4), p)
    dom = psi(ch, 0.1, D0, box_grid(D0, 200, 100), p)
    img = psi_image(ch, 0.1, D0, p, 400)
    assert dom == pytest.approx(img, rel=1e-2)


@pytest.mark.parametrize("k", [2.0, 8 / 3, 5.0])
def test_integrate_G(k):
    p = make_params(k)
    assert integrate_G(2.0, 64, p) / integrate_G(1.0, 64, p) == pytest.approx(2 ** p.d, rel=1e-2)
    # stable under refinement
    assert integrate_G(1.0, 128, p) == pytest.approx(integrate_G(1.0, 64, p), rel=1e-2)
    assert integrate_G(1.0, 128, p) == pytest.approx(green_integral_exact(1.0, p), rel=1e-4)


def test_integrate_G_frozen():
    assert integrate_G(1.0, 128, make_params(8 / 3)) == pytest.approx(INTEGRAL_G_REF, rel=1e-4)


def test_half_disk_area():
    g = half_disk_grid(2.0, 16, 32)
    assert g.area == pytest.approx(2 * math.pi, rel=1e-12)
    assert np.all(g.nodes.imag > 0) and np.all(np.abs(g.nodes) < 2)


def test_domain_box():
    assert D0.m == 2 and D0.area == 2.0
    assert D0.scaled(2.0).as_tuple() == (-2.0, 2.0, 1.0, 3.0)
    with pytest.raises(ParameterError):
        DomainBox(0, 1, 0, 1)
    with pytest.raises(ParameterError):
        DomainBox(1, 0, 1, 2)


def test_upsilon_and_one_point():
    p = make_params(8 / 3)
    ups = upsilon_samples([1j, 1 + 1j], [0.5, 1.0], 1e-3, range(500), p)
    assert ups.shape == (500, 2, 2)
    assert np.all(ups[:, :, 1] <= ups[:, :, 0] + 1e-15)
    pr, se, scaled = one_point_ratio(ups[:, :, -1], 0.05, p)
    assert np.all((0 <= pr) & (pr <= 1)) and np.allclose(scaled, pr / 0.05 ** (2 - p.d))


def test_forward_seeds_matches_state():
    p = make_params(2.0)
    Z, L, A, V = forward_seeds(1 + 1j, [0.5], 1e-3, [4], p)
    s = forward_state(build_chain(sample_driving(1.0, 1e-3, 4), p), 0.5, 1 + 1j)
    assert abs(Z[0, 0] + V[0, 0] - s.image) < 1e-12
    assert L[0, 0] == pytest.approx(s.log_abs_deriv, abs=1e-12)
