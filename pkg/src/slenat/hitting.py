"""Hitting time of two-sided radial SLE and the distribution function ``phi``.

Two independent samplers produce the time ``T`` at which the weighted flow

    dX = (1 - 3a) X / (X^2 + Y^2) dt + dW,     dY/dt = -a Y / (X^2 + Y^2)

reaches its target:

* ``direct``: Euler-Maruyama on ``(X, Y)`` with substeps that shrink as the
  target is approached;
* ``functional``: ``T = int_0^inf exp(-2as) cosh^2 J_s ds`` for the
  positive-recurrent diffusion ``dJ = (1/2 - 2a) tanh J ds + dW``,
  ``sinh J_0 = x``.

``phi(z; t) = P{T_z <= t}`` and, by scaling, ``phi(x+iy; t) = P{T_{x/y+i} <= t/y^2}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .core import KappaParams, MCAccumulator, rng_for
from .errors import CoverageError, ParameterError
from .green import QuadratureGrid, green_g

DIRECT_H = 0.005
DIRECT_EPS_HIT = 1e-4
FUNCTIONAL_H = 0.005
FUNCTIONAL_TAIL_TOL = 1e-8
FUNCTIONAL_BLOCK = 1024
TABLE_TAIL = 1e-3


@dataclass(frozen=True)
class HittingSample:
    T: float
    truncated: bool
    sampler: str
    seed: int
    tail: float = 0.0
    T_alt: float = math.nan


def _check_a(params: KappaParams):
    if not params.a > 0.25:
        raise ParameterError("hitting samplers need a > 1/4 (kappa < 8)")


def sample_T_direct(
    z: complex,
    params: KappaParams,
    seed: int,
    h: float = DIRECT_H,
    eps_hit: float = DIRECT_EPS_HIT,
    max_steps: int = 2_000_000,
    noise: bool = True,
) -> HittingSample:
    """One hitting time from the ``(X, Y)`` flow started at ``z``.

    ``Y`` shrinks by ``exp(-a h)`` per substep, so the substep count needed to
    reach ``eps_hit * y`` is known in advance; if it exceeds ``max_steps`` the
    sample is flagged truncated.
    """
    _check_a(params)
    z = complex(z)
    if not z.imag > 0:
        raise ParameterError("z must lie in the upper half-plane")
    a = params.a
    n = int(math.ceil(math.log(1.0 / eps_hit) / (a * h))) + 1
    truncated = n > max_steps
    n = min(n, max_steps)
    xi = rng_for(seed).standard_normal(n) if noise else np.zeros(n)
    # mirrored seeds: the path from -x driven by -xi is the reflection of the
    # path from x driven by xi, so both starts share one simulation
    T, _, _ = K.direct_hitting(abs(z.real), z.imag, a, h, eps_hit, xi)
    return HittingSample(float(T), truncated, "direct", int(seed))


def _functional_weights(a: float, h: float):
    e = math.exp(-2.0 * a * h)
    wA = (1.0 - e) / (2.0 * a)
    wB = (1.0 - e * (1.0 + 2.0 * a * h)) / (4.0 * a * a)
    return wA, wB


def _functional_run(x, a, h, rng, tail_tol, s_cap, t_stop, noise=True):
    wA, wB = _functional_weights(a, h)
    J0 = math.asinh(x)
    st = np.array([J0, 0.0, 0.0, abs(J0), 0.0, 0.0])
    while st[5] == 0.0:
        xi = rng.standard_normal(FUNCTIONAL_BLOCK) if noise else np.zeros(FUNCTIONAL_BLOCK)
        st = K.functional_step_block(st, a, h, wA, wB, xi, tail_tol, s_cap, t_stop)
    return st


def sample_T_functional(
    x: float,
    params: KappaParams,
    seed: int,
    h: float = FUNCTIONAL_H,
    tail_tol: float = FUNCTIONAL_TAIL_TOL,
    s_cap: float | None = None,
    noise: bool = True,
) -> HittingSample:
    """One hitting time for the start ``x + i`` from the ``J``-functional.

    The integral is truncated at the first grid time ``S`` where
    ``exp(-2aS) cosh^2(J_max) / (2a) <= tail_tol`` (``J_max`` the running
    maximum of ``|J|``) and the remainder is estimated with ``J`` frozen at
    ``J_S``.  ``T_alt`` is ``1/(4a) + (1/2) int exp(-2as) cosh(2J) ds`` with
    the same rule.
    """
    _check_a(params)
    a = params.a
    if s_cap is None:
        s_cap = 200.0 / a
    # cosh^2 is even, so -x with mirrored noise reproduces x exactly
    st = _functional_run(abs(x), a, h, rng_for(seed), tail_tol, s_cap, math.inf, noise)
    J, s = st[0], st[1]
    tail = math.exp(-2.0 * a * s + 2.0 * math.log(math.cosh(J))) / (2.0 * a)
    tail_c = math.exp(-2.0 * a * s) / (4.0 * a)
    tail_alt = math.exp(-2.0 * a * s) * math.cosh(2.0 * J) / (4.0 * a)
    T = st[2] + tail
    # constant part integrated exactly: (1 - e^{-2aS})/(4a) + tail_c = 1/(4a)
    T_alt = (1.0 - math.exp(-2.0 * a * s)) / (4.0 * a) + tail_c + 0.5 * st[4] + tail_alt
    bound = math.exp(-2.0 * a * s + 2.0 * math.log(math.cosh(st[3]))) / (2.0 * a)
    return HittingSample(float(T), bool(st[5] == 2.0 or bound > tail_tol), "functional", int(seed), float(tail), float(T_alt))


def hitting_times(
    z: complex,
    n_samples: int,
    params: KappaParams,
    base_seed: int,
    sampler: str = "functional",
    t_stop: float | None = None,
    **kw,
) -> np.ndarray:
    """``n_samples`` hitting times for the start ``z``; sample ``i`` uses seed ``base_seed + i``.

    With ``t_stop`` the functional sampler may stop once the partial
    integral exceeds ``t_stop``; such entries are lower bounds that still
    compare correctly against any ``t <= t_stop``.
    """
    z = complex(z)
    if not z.imag > 0:
        raise ParameterError("z must lie in the upper half-plane")
    y = z.imag
    R = z.real / y
    out = np.empty(n_samples)
    if sampler == "direct":
        for i in range(n_samples):
            out[i] = sample_T_direct(complex(R, 1.0), params, base_seed + i, **kw).T
    elif sampler == "functional":
        _check_a(params)
        a = params.a
        h = kw.get("h", FUNCTIONAL_H)
        tail_tol = kw.get("tail_tol", FUNCTIONAL_TAIL_TOL)
        s_cap = kw.get("s_cap", 200.0 / a)
        ts = math.inf if t_stop is None else t_stop / (y * y)
        for i in range(n_samples):
            st = _functional_run(abs(R), a, h, rng_for(base_seed + i), tail_tol, s_cap, ts, True)
            if st[5] == 3.0:
                out[i] = st[2]
            else:
                out[i] = st[2] + math.exp(-2.0 * a * st[1] + 2.0 * math.log(math.cosh(st[0]))) / (2.0 * a)
    else:
        raise ParameterError(f"unknown sampler {sampler!r}")
    return out * (y * y)


def support_top(params: KappaParams, t: float = 1.0) -> float:
    """``phi(x+iy; t) = 0`` for ``y > sqrt(2 a t)`` (imaginary part decays at most that fast)."""
    return math.sqrt(2.0 * params.a * t)


def phi(z: complex, t: float, n_samples: int, params: KappaParams, seed: int = 0, sampler: str = "functional"):
    """Monte Carlo ``(estimate, stderr)`` of ``phi(z; t)``."""
    if n_samples < 100:
        raise ParameterError("n_samples must be at least 100")
    if not t > 0:
        raise ParameterError("t must be positive")
    z = complex(z)
    if not z.imag > 0:
        raise ParameterError("z must lie in the upper half-plane")
    if z.imag > support_top(params, t):
        return 0.0, 0.0
    T = hitting_times(z, n_samples, params, seed, sampler, t_stop=t if sampler == "functional" else None)
    hit = (T <= t).astype(float)
    acc = MCAccumulator.from_values(hit)
    return acc.mean, acc.stderr


def phi_curve(z: complex, ts: Sequence[float], n_samples: int, params: KappaParams, seed: int = 0,
              sampler: str = "functional") -> tuple[np.ndarray, np.ndarray]:
    """``phi(z; t)`` on a grid of ``t`` from one shared sample set."""
    ts = np.asarray(ts, dtype=float)
    T = hitting_times(complex(z), n_samples, params, seed, sampler)
    hits = (T[None, :] <= ts[:, None]).astype(float)
    est = hits.mean(axis=1)
    se = np.sqrt(est * (1 - est) / max(n_samples - 1, 1))
    return est, se


PHI_CSV_HEADER = ("x", "y", "phi", "stderr", "n")


@dataclass(frozen=True)
class PhiTable:
    """``phi = phi(.; 1)`` at cell midpoints of ``[0, x_max] x (0, sqrt(2a)]``.

    ``values[i, j]`` is at ``xs[i] + 1j*ys[j]``; the table is even in ``x``.
    """

    kappa: float
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)
    x_max: float = 0.0
    y_top: float = 0.0

    def __post_init__(self):
        for arr in (self.xs, self.ys, self.values, self.stderr, self.n):
            arr.setflags(write=False)
        if self.values.shape != (len(self.xs), len(self.ys)):
            raise ParameterError("table values do not match grid")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ParameterError("phi values must lie in [0, 1]")

    @property
    def dx(self) -> float:
        return self.x_max / len(self.xs)

    @property
    def dy(self) -> float:
        return self.y_top / len(self.ys)

    def _locate(self, z):
        z = np.asarray(z, dtype=complex)
        x = np.abs(z.real)
        y = z.imag
        fx = np.clip((x - self.xs[0]) / self.dx, 0.0, len(self.xs) - 1.0)
        fy = np.clip((y - self.ys[0]) / self.dy, 0.0, len(self.ys) - 1.0)
        i0 = np.minimum(np.floor(fx).astype(int), len(self.xs) - 2)
        j0 = np.minimum(np.floor(fy).astype(int), len(self.ys) - 2)
        return x, y, i0, j0, fx - i0, fy - j0

    def query(self, z):
        """Bilinear interpolation; 0 above ``sqrt(2a)`` and beyond ``x_max``."""
        x, y, i0, j0, tx, ty = self._locate(z)
        v = self.values
        out = ((1 - tx) * (1 - ty) * v[i0, j0] + tx * (1 - ty) * v[i0 + 1, j0]
               + (1 - tx) * ty * v[i0, j0 + 1] + tx * ty * v[i0 + 1, j0 + 1])
        out = np.where((y > self.y_top) | (x > self.x_max) | ~(y > 0), 0.0, out)
        return float(out) if np.ndim(out) == 0 else out

    def query_stderr(self, z):
        """Node stderr, doubled for queries that fall between nodes."""
        x, y, i0, j0, tx, ty = self._locate(z)
        s = self.stderr
        base = np.maximum.reduce([s[i0, j0], s[i0 + 1, j0], s[i0, j0 + 1], s[i0 + 1, j0 + 1]])
        on_node = (np.isclose(tx, 0) | np.isclose(tx, 1)) & (np.isclose(ty, 0) | np.isclose(ty, 1))
        out = np.where(on_node, base, 2.0 * base)
        out = np.where((y > self.y_top) | (x > self.x_max), 0.0, out)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def tail_value(self) -> float:
        return float(self.values[-1].max())

    def save_csv(self, path) -> None:
        from .io import write_csv

        rows = []
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                rows.append((float(x), float(y), float(self.values[i, j]), float(self.stderr[i, j]), int(self.n[i, j])))
        write_csv(path, PHI_CSV_HEADER, rows)

    @classmethod
    def load_csv(cls, path, params: KappaParams) -> "PhiTable":
        from .io import read_csv

        recs = read_csv(path, PHI_CSV_HEADER)
        if not recs:
            raise ParameterError(f"{path}: no rows")
        xs = np.unique([float(r["x"]) for r in recs])
        ys = np.unique([float(r["y"]) for r in recs])
        if len(recs) != len(xs) * len(ys):
            raise ParameterError(f"{path}: rows do not form a full grid")
        vals = np.empty((len(xs), len(ys)))
        se = np.empty_like(vals)
        nn = np.empty(vals.shape, dtype=int)
        for r in recs:
            i = np.searchsorted(xs, float(r["x"]))
            j = np.searchsorted(ys, float(r["y"]))
            vals[i, j] = float(r["phi"])
            se[i, j] = float(r["stderr"])
            nn[i, j] = int(r["n"])
        if np.any(xs < 0):
            raise ParameterError(f"{path}: table must be stored for x >= 0")
        dx = xs[1] - xs[0] if len(xs) > 1 else 2 * xs[0]
        dy = ys[1] - ys[0] if len(ys) > 1 else 2 * ys[0]
        top = support_top(params)
        if ys[-1] > top + 1e-9:
            raise ParameterError(f"{path}: node above the support bound y = sqrt(2a)")
        return cls(params.kappa, xs, ys, vals, se, nn, x_max=float(xs[-1] + dx / 2), y_top=float(ys[-1] + dy / 2))


def _phi_node(x, y, n_samples, params, seed):
    """``phi(x+iy)`` at one node with early stopping at ``t = 1/y^2`` in scaled time."""
    T = hitting_times(complex(x, y), n_samples, params, seed, "functional", t_stop=1.0)
    k = int(np.sum(T <= 1.0))
    p = k / n_samples
    return p, math.sqrt(p * (1 - p) / (n_samples - 1))


def build_phi_table(nx: int, ny: int, n_samples: int, params: KappaParams, seed: int = 0,
                    x_max: float | None = None, tail: float = TABLE_TAIL, max_extensions: int = 8) -> PhiTable:
    """Monte Carlo table of ``phi`` with cell width fixed by the initial ``x_max``.

    Columns are appended until every node of the last column is below
    ``tail``.  Node ``k`` (row-major over ``(x, y)``) uses seeds
    ``seed + k*n_samples + i``.
    """
    if nx < 8 or ny < 8:
        raise ParameterError("resolution must be at least 8 nodes per axis")
    if n_samples < 100:
        raise ParameterError("n_samples must be at least 100")
    top = support_top(params)
    if x_max is None:
        x_max = 1.5 * top
    dx = x_max / nx
    dy = top / ny
    ys = dy * (np.arange(ny) + 0.5)
    cols, ses = [], []
    i = 0
    while True:
        x = dx * (i + 0.5)
        col = [_phi_node(x, y, n_samples, params, seed + (i * ny + j) * n_samples) for j, y in enumerate(ys)]
        cols.append([c[0] for c in col])
        ses.append([c[1] for c in col])
        i += 1
        if i >= nx and max(cols[-1]) < tail:
            break
        if i >= nx + max_extensions * nx:
            break
    xs = dx * (np.arange(i) + 0.5)
    vals = np.array(cols)
    return PhiTable(params.kappa, xs, ys, vals, np.array(ses), np.full(vals.shape, n_samples),
                    x_max=float(i * dx), y_top=float(top))


def mu_density(z, table: PhiTable, params: KappaParams):
    """Density of ``d mu = phi G dA``; zero above ``y = sqrt(2a)``."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape)
    ok = (z.imag > 0) & (z.imag <= support_top(params))
    if np.any(ok):
        out[ok] = np.asarray(table.query(z[ok])) * green_g(z[ok], params)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MuGrid:
    """Quadrature for ``d mu``: cell-midpoint nodes and masses ``phi G area``."""

    grid: QuadratureGrid
    mass: np.ndarray = field(repr=False)

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def total(self) -> float:
        return float(self.mass.sum())


def mu_grid(table: PhiTable, params: KappaParams) -> MuGrid:
    """Nodes are the table nodes mirrored to ``x < 0`` (no interpolation)."""
    X, Y = np.meshgrid(table.xs, table.ys, indexing="ij")
    nodes = np.concatenate([(X + 1j * Y).ravel(), (-X + 1j * Y).ravel()])
    vals = np.concatenate([table.values.ravel(), table.values.ravel()])
    area = table.dx * table.dy
    g = QuadratureGrid(nodes, np.full(nodes.shape, area), "phi-table-midpoint", (len(table.xs), len(table.ys)))
    return MuGrid(g, area * vals * green_g(nodes, params))


def check_coverage(table: PhiTable, w, params: KappaParams) -> None:
    """Raise :class:`CoverageError` for a node the table cannot answer."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    top = support_top(params)
    bad = (np.abs(w.real) > table.x_max) & (w.imag <= top)
    if np.any(bad):
        z = w[np.argmax(bad)]
        raise CoverageError(f"phi table (x_max={table.x_max:.4g}) does not cover node {z:.4g}")
    if table.y_top < top * (1 - 1e-9):
        raise CoverageError(f"phi table stops at y={table.y_top:.4g} below the support top {top:.4g}")
