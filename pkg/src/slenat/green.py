"""Green's function, the forward local martingale ``M_t`` and ``Psi_t(D)``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .core import KappaParams
from .errors import DomainError, ParameterError
from .loewner import EPS_SWALLOW, LoewnerChain, FlowState, fhat_points, forward_flow


@dataclass(frozen=True)
class DomainBox:
    """Open rectangle ``(x_min, x_max) x (y_min, y_max)`` bounded away from the real line."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    m: int = field(init=False)

    def __post_init__(self):
        if not (self.x_min < self.x_max):
            raise ParameterError("need x_min < x_max")
        if not (0.0 < self.y_min < self.y_max):
            raise ParameterError("need 0 < y_min < y_max")
        m = math.ceil(max(abs(self.x_min), abs(self.x_max), self.y_max, 1.0 / self.y_min, 1.0))
        object.__setattr__(self, "m", m)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, z):
        z = np.asarray(z)
        return (self.x_min < z.real) & (z.real < self.x_max) & (self.y_min < z.imag) & (z.imag < self.y_max)

    def scaled(self, r: float) -> "DomainBox":
        return DomainBox(r * self.x_min, r * self.x_max, r * self.y_min, r * self.y_max)

    def as_tuple(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max)


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    scheme: str
    resolution: tuple

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ParameterError("nodes and weights must have the same shape")
        if np.any(self.weights <= 0):
            raise ParameterError("quadrature weights must be positive")

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def box_grid(D: DomainBox, nx: int, ny: int | None = None) -> QuadratureGrid:
    """Midpoint rule on an ``nx x ny`` tensor grid."""
    ny = nx if ny is None else ny
    if nx < 1 or ny < 1:
        raise ParameterError("grid resolution must be positive")
    dx = (D.x_max - D.x_min) / nx
    dy = (D.y_max - D.y_min) / ny
    xs = D.x_min + dx * (np.arange(nx) + 0.5)
    ys = D.y_min + dy * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = (X + 1j * Y).ravel()
    return QuadratureGrid(nodes, np.full(nodes.shape, dx * dy), "midpoint-box", (nx, ny))


def _graded_edges(n: int, power: float) -> np.ndarray:
    """Edges ``(i/n)^power`` on ``[0, 1]``: fine near 0, every cell shrinks as ``n`` grows."""
    return (np.arange(n + 1) / n) ** power


def half_disk_grid(K: float, n_r: int = 64, n_theta: int = 128, grading: float = 2.0) -> QuadratureGrid:
    """Polar midpoint grid on ``{|z| <= K, y > 0}``, graded toward the origin and the real axis.

    Weights are exact cell areas, so they sum to ``pi K^2 / 2``.
    """
    if K <= 0:
        raise ParameterError("K must be positive")
    re = K * _graded_edges(n_r, grading)
    half = _graded_edges(n_theta // 2, grading) * (math.pi / 2)
    te = np.concatenate([half, math.pi - half[-2::-1]])
    rm = 0.5 * (re[1:] + re[:-1])
    tm = 0.5 * (te[1:] + te[:-1])
    ra = 0.5 * (re[1:] ** 2 - re[:-1] ** 2)
    dth = np.diff(te)
    R, TH = np.meshgrid(rm, tm, indexing="ij")
    W = np.outer(ra, dth)
    nodes = (R * np.exp(1j * TH)).ravel()
    return QuadratureGrid(nodes, W.ravel(), "graded-polar-half-disk", (n_r, n_theta, grading))


def green_g(z, params: KappaParams):
    """``G(z) = |z|^(d-2) sin(arg z)^(kappa/8 + 8/kappa - 2)``; vectorized."""
    z = np.asarray(z, dtype=complex)
    if np.any(~(z.imag > 0)):
        raise DomainError("Green's function needs Im z > 0")
    r = np.abs(z)
    out = r ** (params.d - 2.0) * (z.imag / r) ** params.green_exponent
    return float(out) if out.ndim == 0 else out


def green_g_total(z, params: KappaParams) -> np.ndarray:
    """Like :func:`green_g` but returns 0 off the upper half-plane."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape)
    ok = z.imag > 0
    out[ok] = green_g(z[ok], params)
    return out


def green_integral_exact(K: float, params: KappaParams) -> float:
    """Closed form ``K^d/d * int_0^pi sin^e`` used as an independent check."""
    e = params.green_exponent
    ang = math.sqrt(math.pi) * math.exp(gammaln((e + 1) / 2) - gammaln(e / 2 + 1))
    return K**params.d / params.d * ang


def mart_M(Z, log_abs_gprime, alive, params: KappaParams):
    """Vectorized ``M_t = |g_t'|^(2-d) G(Z_t)``, zero on swallowed points."""
    Z = np.asarray(Z, dtype=complex)
    alive = np.asarray(alive, dtype=bool) & (Z.imag > 0)
    out = np.zeros(Z.shape)
    out[alive] = np.exp((2.0 - params.d) * np.asarray(log_abs_gprime)[alive]) * green_g(Z[alive], params)
    return out


def local_mart_M(state: FlowState, params: KappaParams) -> float:
    if not state.alive or not state.Z.imag > 0:
        return 0.0
    return math.exp((2.0 - params.d) * state.log_abs_deriv) * green_g(state.Z, params)


def psi_batch(increments, dt: float, steps, grid: QuadratureGrid, params: KappaParams) -> np.ndarray:
    """``Psi`` at each requested step for each row of increments; shape ``(S, R)``."""
    if len(grid) == 0:
        raise ParameterError("empty quadrature grid")
    Z, L, A = forward_flow(increments, params.a, dt, grid.nodes, steps)
    return mart_M(Z, L, A, params) @ grid.weights


def psi(chain: LoewnerChain, t: float, D: DomainBox, grid: QuadratureGrid, params: KappaParams) -> float:
    """``Psi_t(D) = int_D M_t dA`` by quadrature on the nodes of ``grid`` inside ``D``."""
    if len(grid) == 0:
        raise ParameterError("empty quadrature grid")
    inside = D.contains(grid.nodes)
    if not np.any(inside):
        raise ParameterError("quadrature grid has no node inside D")
    sub = QuadratureGrid(grid.nodes[inside], grid.weights[inside], grid.scheme, grid.resolution)
    return float(psi_batch(chain.increments, chain.dt, [chain.steps(t)], sub, params)[0, 0])


def psi_image(chain: LoewnerChain, t: float, D: DomainBox, params: KappaParams, n: int = 400) -> float:
    """Image-side form ``int |fhat_t'|^d G 1{fhat_t in D} dA`` over a box covering ``Z_t(D)``."""
    # bound the image of D by flowing its boundary forward
    s = np.linspace(0.0, 1.0, 200)
    edge = np.concatenate([
        D.x_min + (D.x_max - D.x_min) * s + 1j * D.y_min,
        D.x_min + (D.x_max - D.x_min) * s + 1j * D.y_max,
        D.x_min + 1j * (D.y_min + (D.y_max - D.y_min) * s),
        D.x_max + 1j * (D.y_min + (D.y_max - D.y_min) * s),
    ])
    Z, _, A = forward_flow(chain.increments, params.a, chain.dt, edge, [chain.steps(t)])
    Z = Z[0, 0][A[0, 0]]
    pad = 0.05 * (np.ptp(Z.real) + np.ptp(Z.imag)) + 1e-3
    box = DomainBox(Z.real.min() - pad, Z.real.max() + pad, max(Z.imag.min() - pad, 1e-6), Z.imag.max() + pad)
    g = box_grid(box, n, n)
    F, L = fhat_points(chain, t, g.nodes)
    ind = D.contains(F)
    vals = np.zeros(len(g))
    vals[ind] = np.exp(params.d * L[ind]) * green_g(g.nodes[ind], params)
    return g.integrate(vals)


def integrate_G(K: float, resolution: int, params: KappaParams, grading: float = 2.0) -> float:
    """``int_{|z|<=K, y>0} G dA`` on a graded polar grid with ``resolution`` radial cells."""
    grid = half_disk_grid(K, resolution, 2 * resolution, grading)
    return grid.integrate(green_g(grid.nodes, params))


def forward_seeds(z: complex, times, dt: float, seeds, params: KappaParams, chunk: int = 256):
    """Forward flow of one point on one path per seed.

    Returns ``(Z, log|g'|, alive, V)``, each of shape ``(S, R)``, so that
    ``g_t(z) = Z + V``.  Seeds are processed in chunks so memory stays at
    ``chunk * N`` floats.
    """
    from . import _kernels as K
    from .core import sample_increments

    z = complex(z)
    if not z.imag > 0:
        raise DomainError("forward flow needs a point in the upper half-plane")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    rec = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(rec * dt - times) > 1e-9 * max(1.0, times.max())) or np.any(np.diff(rec) < 0):
        raise ParameterError("times must be nondecreasing multiples of dt")
    seeds = list(seeds)
    S, R = len(seeds), len(rec)
    Z = np.empty((S, R), dtype=complex)
    L = np.empty((S, R))
    A = np.empty((S, R), dtype=bool)
    V = np.empty((S, R))
    c = 2.0 * params.a * dt
    horizon = float(rec[-1]) * dt
    for lo in range(0, S, chunk):
        inc = sample_increments(horizon, dt, seeds[lo:lo + chunk])
        hi = lo + len(inc)
        Z[lo:hi], L[lo:hi], A[lo:hi] = K.forward_columns(inc, c, z, rec, EPS_SWALLOW)
        csum = np.concatenate([np.zeros((hi - lo, 1)), np.cumsum(inc, axis=1)], axis=1)
        V[lo:hi] = csum[:, rec]
    return Z, L, A, V


def upsilon_samples(z, times, dt: float, seeds, params: KappaParams, chunk: int = 256) -> np.ndarray:
    """``Upsilon_t(z) = Y_t / |g_t'(z)|`` per seed, point and time; shape ``(S, M, R)``.

    Swallowed points keep their frozen (tiny) value.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = []
    for zz in z:
        Z, L, _, _ = forward_seeds(zz, times, dt, seeds, params, chunk)
        out.append(np.maximum(Z.imag, 0.0) * np.exp(-L))
    return np.stack(out, axis=1)


def one_point_ratio(ups: np.ndarray, eps: float, params: KappaParams):
    """Per-point ``P{Upsilon <= eps}`` with stderr, and ``P / eps^(2-d)``.

    ``ups`` holds one row per seed (e.g. ``upsilon_samples(...)[:, :, -1]``).
    """
    hit = (ups <= eps).astype(float)
    n = hit.shape[0]
    p = hit.mean(axis=0)
    se = np.sqrt(p * (1 - p) / max(n - 1, 1))
    return p, se, p / eps ** (2.0 - params.d)


GREEN_CSV_HEADER = ("re", "im", "g", "m", "t", "seed")


def write_green_csv(path, z, g, m, t, seed) -> None:
    from .io import write_csv

    z = np.atleast_1d(z)
    g = np.broadcast_to(g, z.shape)
    m = np.broadcast_to(m, z.shape)
    rows = [(float(zz.real), float(zz.imag), float(gg), float(mm), float(t), int(seed)) for zz, gg, mm in zip(z, g, m)]
    write_csv(path, GREEN_CSV_HEADER, rows)
