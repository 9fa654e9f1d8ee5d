"""Dyadic estimator ``Theta_{t,n}(D)`` and rival candidates for the natural time.

``I_{j,n}(D)`` is evaluated in the scaled form

    I_{j,n}(D) = 2^{-nd/2} int |fhat_tau'(w 2^{-n/2})|^d 1{fhat_tau(w 2^{-n/2}) in D} dmu(w),

``tau = (j-1) 2^{-n}``, with ``dmu = phi G dA`` discretized once on the
phi-table nodes.  The same node set serves every ``(j, n)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import _kernels as K
from .core import KappaParams, MCAccumulator
from .errors import CoverageError, ParameterError
from .green import DomainBox, QuadratureGrid
from .hitting import TABLE_TAIL, MuGrid, PhiTable, mu_grid, support_top
from .loewner import EPS_SWALLOW, LoewnerChain, forward_flow


@dataclass(frozen=True)
class ThetaEstimate:
    """``Theta_{t,n}(D)`` on the dyadic grid ``t_j = j 2^-n``, ``j = 0..J``."""

    D: DomainBox
    level: int
    times: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    increments: np.ndarray = field(repr=False)
    seed: int | None = None
    tail_bound: float = 0.0

    @property
    def value(self) -> float:
        return float(self.theta[-1])

    def at(self, t: float) -> float:
        j = int(math.floor(t * 2**self.level + 1e-9))
        return float(self.theta[min(j, len(self.theta) - 1)])


def _check_table(table: PhiTable, params: KappaParams):
    if not math.isclose(table.kappa, params.kappa, rel_tol=1e-12):
        raise ParameterError(f"phi table built for kappa={table.kappa}, not {params.kappa}")
    top = support_top(params)
    if table.y_top < top * (1 - 1e-9):
        raise CoverageError(f"phi table stops at y={table.y_top:.4g}; node {complex(0, top):.4g} is not covered")
    col = table.values[-1]
    if col.max() >= TABLE_TAIL:
        j = int(np.argmax(col))
        z = complex(table.xs[-1], table.ys[j])
        raise CoverageError(f"phi table tail node {z:.4g} has phi={col[j]:.3g} >= {TABLE_TAIL}; extend x_max")


class ThetaPlan:
    """Reusable ``mu`` quadrature for one ``(table, params)`` pair.

    ``mass_tol`` drops the lightest nodes as long as their total mass stays
    below that fraction of ``mu(H)``; the dropped fraction is kept in
    ``dropped``.
    """

    def __init__(self, table: PhiTable, params: KappaParams, mass_tol: float = 0.0):
        _check_table(table, params)
        mg: MuGrid = mu_grid(table, params)
        mass = mg.mass
        keep = mass > 0
        total = float(mass.sum())
        if mass_tol > 0:
            order = np.argsort(mass)
            cum = np.cumsum(mass[order])
            drop = order[cum <= mass_tol * total]
            keep[drop] = False
        self.params = params
        self.table = table
        self.total = total
        self.dropped = float(mass[~keep].sum()) / total if total > 0 else 0.0
        self.nodes = np.ascontiguousarray(mg.nodes[keep])
        self.mass = np.ascontiguousarray(mass[keep])
        # phi beyond x_max is below the tail value; bound the omitted mass
        self.tail_bound = table.tail_value

    def __len__(self):
        return len(self.nodes)

    def increments(self, chain: LoewnerChain, n: int, D: DomainBox, js: Sequence[int]) -> np.ndarray:
        """``I_{j,n}(D)`` for every ``j`` in ``js`` (1-based)."""
        p = self.params
        if not math.isclose(chain.params.kappa, p.kappa, rel_tol=1e-12):
            raise ParameterError("chain and phi table use different kappa")
        js = np.asarray(js, dtype=np.int64)
        if js.size == 0:
            return np.zeros(0)
        if np.any(js < 1):
            raise ParameterError("j must be at least 1")
        taus = (js - 1) * 2.0**-n
        if taus.max() > chain.horizon * (1 + 1e-12):
            raise ParameterError(f"(j-1) 2^-n = {taus.max()} exceeds the horizon {chain.horizon}")
        ks = np.array([chain.steps(t) for t in taus], dtype=np.int64)
        scale = 2.0 ** (-n / 2.0)
        w = self.nodes * scale
        sums = K.theta_increments(chain.increments, chain.c, ks, w, self.mass, p.d,
                                  D.x_min, D.x_max, D.y_min, D.y_max)
        return sums * 2.0 ** (-n * p.d / 2.0)


def theta_increment(chain: LoewnerChain, j: int, n: int, D: DomainBox, table: PhiTable,
                    params: KappaParams, plan: ThetaPlan | None = None) -> float:
    """One dyadic increment ``I_{j,n}(D)``."""
    plan = plan or ThetaPlan(table, params)
    return float(plan.increments(chain, n, D, [j])[0])


def theta_estimate(chain: LoewnerChain, t: float, n: int, D: DomainBox, table: PhiTable,
                   params: KappaParams, plan: ThetaPlan | None = None) -> ThetaEstimate:
    """``Theta_{t,n}(D) = sum_{j <= t 2^n} I_{j,n}(D)`` with all partial sums.

    ``t`` may go up to the chain horizon, which is how ``r^-d Theta_{r^2 t}(rD)``
    is formed for the scaling check.
    """
    if n < 0:
        raise ParameterError("level n must be nonnegative")
    if not 0 <= t <= chain.horizon * (1 + 1e-12):
        raise ParameterError(f"t={t} outside [0, horizon]")
    plan = plan or ThetaPlan(table, params)
    J = int(math.floor(t * 2**n + 1e-9))
    inc = plan.increments(chain, n, D, np.arange(1, J + 1))
    theta = np.concatenate([[0.0], np.cumsum(inc)])
    times = np.arange(J + 1) * 2.0**-n
    return ThetaEstimate(D, n, times, theta, inc, chain.driving.seed, plan.tail_bound)


def vanishing_time(D: DomainBox, params: KappaParams) -> float:
    """``Theta_t(D) = 0`` for ``t < 1/(2 a m^2)``."""
    return 1.0 / (2.0 * params.a * D.m**2)


@dataclass(frozen=True)
class DyadicReport:
    levels: np.ndarray
    theta: np.ndarray = field(repr=False)  # (n_chains, n_levels)
    diff2_mean: np.ndarray = field(repr=False)  # E[(Theta_{n+1} - Theta_n)^2] for levels[:-1]
    diff2_stderr: np.ndarray = field(repr=False)
    decreasing: bool = False
    inversions: int = 0

    def rows(self):
        for n, m, s in zip(self.levels[:-1], self.diff2_mean, self.diff2_stderr):
            yield int(n), float(m), float(s)


def _count_inversions(m, s):
    """Increases that are not explained by ``2`` combined stderr."""
    bad = 0
    soft = 0
    for i in range(len(m) - 1):
        if m[i + 1] > m[i]:
            if m[i + 1] - m[i] > 2.0 * math.hypot(s[i], s[i + 1]):
                bad += 1
            else:
                soft += 1
    return bad, soft


def dyadic_diagnostics(chains: Sequence[LoewnerChain], D: DomainBox, n_range: Sequence[int], table: PhiTable,
                       params: KappaParams, t: float = 1.0, plan: ThetaPlan | None = None) -> DyadicReport:
    """Second moments of successive level differences of ``Theta_{t,n}(D)``.

    The sequence counts as decreasing when at most one increase occurs and
    no increase exceeds two combined standard errors.
    """
    levels = np.asarray(n_range, dtype=int)
    if len(levels) < 2 or np.any(np.diff(levels) <= 0):
        raise ParameterError("n_range must be ascending with at least two levels")
    plan = plan or ThetaPlan(table, params)
    th = np.array([[theta_estimate(c, t, int(n), D, table, params, plan).value for n in levels] for c in chains])
    dif = np.diff(th, axis=1) ** 2
    accs = [MCAccumulator.from_values(dif[:, i]) for i in range(dif.shape[1])]
    m = np.array([a.mean for a in accs])
    s = np.array([a.stderr for a in accs])
    bad, soft = _count_inversions(m, s)
    return DyadicReport(levels, th, m, s, decreasing=(bad == 0 and soft <= 1), inversions=bad + soft)


# --- Minkowski content ----------------------------------------------------


@dataclass(frozen=True)
class ContentFit:
    eps: np.ndarray
    area: np.ndarray
    content: np.ndarray
    slope: float
    coarse_raster: bool = False


def _densify(curve: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.abs(np.diff(curve))
    reps = np.maximum(1, np.ceil(seg / spacing).astype(int))
    out = [curve[:1]]
    for p, q, r in zip(curve[:-1], curve[1:], reps):
        s = np.arange(1, r + 1) / r
        out.append(p + (q - p) * s)
    return np.concatenate(out)


def neighborhood_areas(curve, eps_list, cell: float | None = None) -> np.ndarray:
    """Area of ``{z : dist(z, curve) <= eps}`` for each ``eps`` on a raster.

    The polyline is densified to a quarter cell, and each pixel stores one
    curve point, so the distance of a pixel center is measured to an actual
    point rather than to a pixel.
    """
    curve = np.asarray(curve, dtype=complex).ravel()
    eps = np.asarray(eps_list, dtype=float)
    if cell is None:
        cell = eps.min() / 4.0
    emax = eps.max()
    pts = _densify(curve, cell / 4.0) if len(curve) > 1 else curve
    x0 = pts.real.min() - emax - 2 * cell
    y0 = pts.imag.min() - emax - 2 * cell
    nx = int(math.ceil((pts.real.max() + emax + 2 * cell - x0) / cell))
    ny = int(math.ceil((pts.imag.max() + emax + 2 * cell - y0) / cell))
    ix = ((pts.real - x0) / cell).astype(np.int64)
    iy = ((pts.imag - y0) / cell).astype(np.int64)
    occ = np.ones((nx, ny), dtype=bool)
    occ[ix, iy] = False
    rep = np.zeros((nx, ny), dtype=complex)
    rep[ix, iy] = pts
    _, (jx, jy) = ndimage.distance_transform_edt(occ, return_distances=True, return_indices=True)
    cx = x0 + (np.arange(nx) + 0.5) * cell
    cy = y0 + (np.arange(ny) + 0.5) * cell
    centers = cx[:, None] + 1j * cy[None, :]
    dist = np.abs(centers - rep[jx, jy])
    del jx, jy, centers
    flat = np.sort(dist.ravel())
    return np.searchsorted(flat, eps, side="right") * cell * cell


def minkowski_content(curve, eps_list, exponent: float, cell: float | None = None) -> ContentFit:
    """``eps^(exponent-2) * area(eps-neighborhood)`` and the log-log area slope."""
    curve = np.asarray(curve, dtype=complex).ravel()
    if curve.size == 0:
        raise ParameterError("curve is empty")
    eps = np.asarray(eps_list, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ParameterError("eps_list must be positive and decreasing")
    if cell is None:
        cell = eps.min() / 4.0
    gaps = np.abs(np.diff(curve))
    coarse = bool(gaps.size and cell < np.median(gaps) / 4.0)
    if coarse:
        warnings.warn("raster finer than the curve sampling; neighborhoods follow the polyline", stacklevel=2)
    area = neighborhood_areas(curve, eps, cell)
    slope = float(np.polyfit(np.log(eps), np.log(area), 1)[0]) if len(eps) > 1 else math.nan
    return ContentFit(eps, area, area * eps ** (exponent - 2.0), slope, coarse)


def conformal_minkowski(chain: LoewnerChain, t: float, eps: float, grid: QuadratureGrid,
                        params: KappaParams) -> float:
    """``eps^(d-2) * area{z in grid : Upsilon_t(z) <= eps}``.

    Swallowed nodes keep the value of ``Upsilon`` at the moment they were
    frozen, which is below ``EPS_SWALLOW``; they therefore count.
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    Z, L, _ = forward_flow(chain.increments, params.a, chain.dt, grid.nodes, [chain.steps(t)])
    ups = np.maximum(Z[0, 0].imag, 0.0) * np.exp(-L[0, 0])
    hit = ups <= eps
    return float(eps ** (params.d - 2.0) * grid.weights[hit].sum())


def d_variation(curve, exponent: float, meshes: Sequence[int]) -> np.ndarray:
    """``sum |gamma(t_j) - gamma(t_{j-1})|^exponent`` for partitions into ``m`` equal pieces.

    ``curve`` is sampled on a uniform grid; each ``m`` must divide ``len(curve) - 1``.
    """
    curve = np.asarray(curve, dtype=complex).ravel()
    N = len(curve) - 1
    out = []
    for m in meshes:
        if m < 1 or N % m:
            raise ParameterError(f"mesh {m} does not divide the {N} curve intervals")
        pts = curve[:: N // m]
        out.append(float(np.sum(np.abs(np.diff(pts)) ** exponent)))
    return np.array(out)


# --- outputs ----------------------------------------------------------------

THETA_CSV_HEADER = ("t", "theta", "level", "chain_seed")
TABLE_CSV_HEADER = ("eps_or_mesh", "value")


def write_theta_csv(path, estimates: Sequence[ThetaEstimate]) -> None:
    from .io import write_csv

    rows = []
    for est in estimates:
        seed = -1 if est.seed is None else int(est.seed)
        rows.extend((float(t), float(v), int(est.level), seed) for t, v in zip(est.times, est.theta))
    write_csv(path, THETA_CSV_HEADER, rows)


def write_table_csv(path, keys, values) -> None:
    from .io import write_csv

    write_csv(path, TABLE_CSV_HEADER, [(k if isinstance(k, int) else float(k), float(v)) for k, v in zip(keys, values)])


__all__ = [
    "ThetaEstimate", "ThetaPlan", "theta_increment", "theta_estimate", "vanishing_time",
    "DyadicReport", "dyadic_diagnostics", "ContentFit", "neighborhood_areas", "minkowski_content",
    "conformal_minkowski", "d_variation", "write_theta_csv", "write_table_csv", "EPS_SWALLOW",
]
