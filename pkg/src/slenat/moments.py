"""Reverse-flow martingales and moment functionals.

The reverse flow ``dh_t = a / (U_t - h_t) dt`` is driven by a standard
Brownian ``U``; ``Z_t = h_t - U_t = X_t + i Y_t``.  Along it

    N_{t,r}(z) = |h_t'(z)|^lam  Y_t^(-kappa r^2 / 8)  |Z_t|^r,
    lam = r (1 + kappa/4) - kappa r^2 / 8,

is a martingale, and the product over two points times
``(|Z(z) - Z(w)| |Z(z) - conj Z(w)|)^(-kappa r^2 / 4)`` is one as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .core import KappaParams, MCAccumulator, mean_stderr, sample_increments
from .errors import DomainError, ParameterError
from .green import DomainBox
from .hitting import PhiTable
from .loewner import reverse_flow
from .natparam import ThetaPlan
from . import _kernels as K


@dataclass(frozen=True)
class ReverseSample:
    """Reverse flow of a few points under a batch of driving paths.

    Arrays are indexed ``[seed, time, point]``; ``U`` holds ``U_t`` per
    ``[seed, time]``.
    """

    z: np.ndarray
    times: np.ndarray
    Z: np.ndarray = field(repr=False)
    log_hprime: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    seeds: np.ndarray = field(repr=False)
    dt: float = 0.0

    @property
    def h(self) -> np.ndarray:
        return self.Z + self.U[:, :, None]

    @property
    def abs_hprime(self) -> np.ndarray:
        return np.exp(self.log_hprime)

    @property
    def Y(self) -> np.ndarray:
        return self.Z.imag

    def time_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ParameterError(f"t={t} was not recorded")
        return i


def sample_reverse(z: Sequence[complex], times: Sequence[float], dt: float, seeds: Sequence[int],
                   params: KappaParams) -> ReverseSample:
    """Reverse flow of the points ``z`` on one path per seed (common random numbers)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(~(z.imag > 0)):
        raise DomainError("reverse flow needs points in the upper half-plane")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ParameterError("times must be nonnegative and nondecreasing")
    horizon = max(float(times.max()), dt)
    steps = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - times) > 1e-9 * max(1.0, horizon)):
        raise ParameterError("times must be multiples of dt")
    seeds = np.asarray(list(seeds), dtype=np.int64)
    n = int(steps.max())
    inc = sample_increments(max(n, 1) * dt, dt, seeds)[:, :max(n, 1)]
    Z, L = reverse_flow(inc, params.a, dt, z, steps)
    csum = np.concatenate([np.zeros((len(seeds), 1)), np.cumsum(inc, axis=1)], axis=1)
    U = csum[:, steps]
    return ReverseSample(z, times, Z, L, U, seeds, dt)


def n_exponents(r: float, params: KappaParams) -> tuple[float, float]:
    """``(lam, kappa r^2 / 8)``."""
    k = params.kappa
    return r * (1.0 + k / 4.0) - k * r * r / 8.0, k * r * r / 8.0


def martingale_N(sample: ReverseSample, r: float, params: KappaParams, t: float | None = None,
                 point: int = 0) -> np.ndarray:
    """``N_{t,r}`` per seed, evaluated in log space and exponentiated at the end."""
    lam, q = n_exponents(r, params)
    ti = -1 if t is None else sample.time_index(t)
    Z = sample.Z[:, ti, point]
    L = sample.log_hprime[:, ti, point]
    return np.exp(lam * L - q * np.log(Z.imag) + r * np.log(np.abs(Z)))


def n0(z: complex, r: float, params: KappaParams) -> float:
    z = complex(z)
    _, q = n_exponents(r, params)
    return z.imag ** (-q) * abs(z) ** r


def _pair_factor(Zz, Zw, r, params):
    d1 = np.abs(Zz - Zw)
    d2 = np.abs(Zz - np.conj(Zw))
    return np.exp(-params.kappa * r * r / 4.0 * (np.log(d1) + np.log(d2)))


def two_point_N(sample: ReverseSample, r: float, params: KappaParams, t: float | None = None,
                points: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Two-point martingale for points ``points`` of one :class:`ReverseSample`."""
    i, j = points
    if i == j or sample.z[i] == sample.z[j]:
        raise DomainError("two-point martingale needs distinct points")
    ti = -1 if t is None else sample.time_index(t)
    Nz = martingale_N(sample, r, params, t, i)
    Nw = martingale_N(sample, r, params, t, j)
    return Nz * Nw * _pair_factor(sample.Z[:, ti, i], sample.Z[:, ti, j], r, params)


def two_point_n0(z: complex, w: complex, r: float, params: KappaParams) -> float:
    z, w = complex(z), complex(w)
    if z == w:
        raise DomainError("two-point martingale needs distinct points")
    return n0(z, r, params) * n0(w, r, params) * float(_pair_factor(np.array(z), np.array(w), r, params))


def trimmed_mean(values, cut: float = 0.001) -> float:
    """Diagnostic only: mean with ``cut`` trimmed from each tail."""
    return float(stats.trim_mean(np.asarray(values), cut))


def estimate_I(s: float, D: DomainBox | None, table: PhiTable, n_chains: int, params: KappaParams,
               base_seed: int = 0, dt: float = 1e-3, plan: ThetaPlan | None = None,
               return_samples: bool = False):
    """``I_{s,D} = int |fhat_s'(w)|^d 1{fhat_s(w) in D} dmu(w)`` averaged over chains.

    ``D = None`` means the whole half-plane.  Chain ``i`` uses seed
    ``base_seed + i``.
    """
    if n_chains < 2:
        raise ParameterError("n_chains must be at least 2")
    plan = plan or ThetaPlan(table, params)
    k = int(round(s / dt))
    if k < 0 or abs(k * dt - s) > 1e-9 * max(1.0, s):
        raise ParameterError("s must be a nonnegative multiple of dt")
    # finite stand-ins for the half-plane: the kernel is compiled without inf support
    box = (-1e300, 1e300, 0.0, 1e300) if D is None else D.as_tuple()
    c = 2.0 * params.a * dt
    vals = np.empty(n_chains)
    ks = np.array([k], dtype=np.int64)
    for i in range(n_chains):
        inc = sample_increments(max(k, 1) * dt, dt, [base_seed + i])[0, :k]
        vals[i] = K.theta_increments(np.ascontiguousarray(inc), c, ks, plan.nodes, plan.mass, params.d, *box)[0]
    m, se = mean_stderr(vals)
    return (m, se, vals) if return_samples else (m, se)


@dataclass(frozen=True)
class FSamples:
    """Per-seed ``|h'(z)|^d``, ``|h'(w)|^d`` and the indicators ``Z_t in D``."""

    pz: np.ndarray
    pw: np.ndarray
    in_z: np.ndarray
    in_w: np.ndarray

    @property
    def F(self) -> np.ndarray:
        return self.pz * self.pw * (self.in_z & self.in_w)

    def marginal(self, which: str) -> np.ndarray:
        if which == "z":
            return self.pz**2 * self.in_z
        return self.pw**2 * self.in_w


def F_samples(z: complex, w: complex, t: float, D: DomainBox, seeds: Sequence[int], params: KappaParams,
              dt: float = 1e-3) -> FSamples:
    z, w = complex(z), complex(w)
    if not (z.imag > 0 and w.imag > 0):
        raise DomainError("F needs points in the upper half-plane")
    smp = sample_reverse([z, w], [t], dt, seeds, params)
    Zz, Zw = smp.Z[:, 0, 0], smp.Z[:, 0, 1]
    pz = np.exp(params.d * smp.log_hprime[:, 0, 0])
    pw = np.exp(params.d * smp.log_hprime[:, 0, 1])
    return FSamples(pz, pw, D.contains(Zz), D.contains(Zw))


def estimate_F(z: complex, w: complex, t: float, D: DomainBox, n_seeds: int, params: KappaParams,
               base_seed: int = 0, dt: float = 1e-3) -> tuple[float, float]:
    """Monte Carlo ``F_D(z, w; t) = E[|h_t'(z)|^d |h_t'(w)|^d 1{Z_t(z), Z_t(w) in D}]``."""
    fs = F_samples(z, w, t, D, range(base_seed, base_seed + n_seeds), params, dt)
    return mean_stderr(fs.F)


def pair_envelope(z: complex, w: complex, params: KappaParams) -> float:
    """``y_z^(-k/8) |z| y_w^(-k/8) |w| |z - w|^(-k/4) |z - conj w|^(-k/4)`` (constant not included)."""
    z, w = complex(z), complex(w)
    k = params.kappa
    return (z.imag ** (-k / 8) * abs(z) * w.imag ** (-k / 8) * abs(w)
            * abs(z - w) ** (-k / 4) * abs(z - w.conjugate()) ** (-k / 4))


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


MOMENTS_CSV_HEADER = ("s_or_t", "statistic", "mean", "stderr", "n")


def write_moments_csv(path, rows) -> None:
    """Rows of ``(s_or_t, statistic, mean, stderr, n)``."""
    from .io import write_csv

    write_csv(path, MOMENTS_CSV_HEADER, [(float(a), str(b), float(c), float(d), int(e)) for a, b, c, d, e in rows])


def write_manifest(path, kappa: float, dt: float, base_seed: int, n_seeds: int, **extra) -> None:
    from .io import write_json

    write_json(path, {"kappa": kappa, "dt": dt, "base_seed": base_seed, "n_seeds": n_seeds, **extra})


__all__ = [
    "ReverseSample", "sample_reverse", "n_exponents", "martingale_N", "n0", "two_point_N", "two_point_n0",
    "trimmed_mean", "estimate_I", "FSamples", "F_samples", "estimate_F", "pair_envelope", "loglog_slope",
    "write_moments_csv", "write_manifest", "MCAccumulator",
]
