"""Parameters, driving functions and the Monte Carlo accumulator.

Conventions used throughout the package: ``a = 2/kappa``, the half-plane
capacity of the curve at time ``t`` is ``a*t``, and the driving function is a
*standard* Brownian motion (increments of variance ``dt``), not
``sqrt(kappa)`` times one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError

KAPPA0 = 4.0 * (7.0 - math.sqrt(33.0))


def rng_for(seed: int) -> np.random.Generator:
    """Counter-based generator for one stream; distinct seeds give independent streams."""
    if seed < 0 or seed >= 2**64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class KappaParams:
    kappa: float
    a: float
    d: float
    kappa0: float
    zeta_lt4: float
    zeta_main: float
    is_good: bool

    @property
    def green_exponent(self) -> float:
        """Exponent of ``sin(theta)`` in the Green's function."""
        return self.kappa / 8.0 + 8.0 / self.kappa - 2.0


def make_params(kappa: float) -> KappaParams:
    kappa = float(kappa)
    if not (0.0 < kappa < 8.0) or not math.isfinite(kappa):
        raise ParameterError(f"kappa must satisfy 0 < kappa < 8, got {kappa}")
    return KappaParams(
        kappa=kappa,
        a=2.0 / kappa,
        d=1.0 + kappa / 8.0,
        kappa0=KAPPA0,
        zeta_lt4=2.0 - 3.0 * kappa / 4.0,
        zeta_main=4.0 / kappa - 3.0 * kappa / 16.0 - 1.0,
        is_good=kappa < KAPPA0,
    )


def n_steps_for(horizon: float, dt: float) -> int:
    if not (dt > 0.0) or not math.isfinite(dt):
        raise ParameterError(f"dt must be positive, got {dt}")
    if not (horizon > 0.0):
        raise ParameterError(f"horizon must be positive, got {horizon}")
    if dt > horizon * (1 + 1e-12):
        raise ParameterError(f"dt={dt} exceeds horizon={horizon}")
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9 * horizon:
        raise ParameterError(f"horizon={horizon} is not a whole number of steps dt={dt}")
    return n


@dataclass(frozen=True)
class DrivingPath:
    """Driving function ``V`` sampled on the grid ``k*dt``, ``V[0] == 0``."""

    dt: float
    values: np.ndarray = field(repr=False)
    seed: int
    horizon: float

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def step_index(self, t: float) -> int:
        """Grid index of time ``t``; ``t`` must lie on the grid."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(k * self.dt - t) > 1e-9 * max(1.0, t):
            raise ParameterError(f"t={t} is not a grid time in [0, {self.horizon}] (dt={self.dt})")
        return k

    def value_at(self, t: float) -> float:
        return float(self.values[self.step_index(t)])

    def negated(self) -> "DrivingPath":
        return DrivingPath(self.dt, -self.values, self.seed, self.horizon)

    @classmethod
    def zero(cls, horizon: float, dt: float) -> "DrivingPath":
        n = n_steps_for(horizon, dt)
        return cls(dt, np.zeros(n + 1), seed=0, horizon=n * dt)

    @classmethod
    def from_values(cls, values, dt: float, seed: int = 0) -> "DrivingPath":
        values = np.array(values, dtype=float)
        if values.ndim != 1 or len(values) < 2:
            raise ParameterError("driving values must be a 1-d sequence of length >= 2")
        return cls(dt, values - values[0], seed, (len(values) - 1) * dt)


def _increments(rng: np.random.Generator, n: int, dt: float) -> np.ndarray:
    # V = -B, so increments are -sqrt(dt)*xi
    return -math.sqrt(dt) * rng.standard_normal(n)


def sample_driving(horizon: float, dt: float, seed: int) -> DrivingPath:
    n = n_steps_for(horizon, dt)
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(_increments(rng_for(seed), n, dt), out=values[1:])
    return DrivingPath(dt, values, int(seed), n * dt)


def sample_increments(horizon: float, dt: float, seeds: Sequence[int]) -> np.ndarray:
    """Increment array of shape ``(len(seeds), n_steps)``.

    Row ``i`` holds exactly ``np.diff(sample_driving(horizon, dt, seeds[i]).values)``
    up to cumulative-sum rounding; the increments themselves are bit-identical.
    """
    n = n_steps_for(horizon, dt)
    out = np.empty((len(seeds), n))
    for i, s in enumerate(seeds):
        out[i] = _increments(rng_for(s), n, dt)
    return out


def seed_stream(base_seed: int, count: int) -> list[int]:
    """Seed policy: stream ``i`` uses ``base_seed + i``."""
    if count < 0:
        raise ParameterError("count must be nonnegative")
    return [int(base_seed) + i for i in range(count)]


@dataclass(frozen=True)
class MCAccumulator:
    """Running mean/variance (Welford form), mergeable in a fixed order."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n >= 2 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.m2 / (self.n * (self.n - 1))) if self.n >= 2 else math.nan

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MCAccumulator":
        x = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mean = float(np.mean(x))
        return cls(int(x.size), mean, float(np.sum((x - mean) ** 2)))

    def add(self, value: float) -> "MCAccumulator":
        n = self.n + 1
        delta = value - self.mean
        mean = self.mean + delta / n
        return MCAccumulator(n, mean, self.m2 + delta * (value - mean))

    def merge(self, other: "MCAccumulator") -> "MCAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return MCAccumulator(n, mean, m2)

    @staticmethod
    def reduce(parts: Sequence["MCAccumulator"]) -> "MCAccumulator":
        """Pairwise tree reduction in list order (reproducible for a fixed partition)."""
        parts = list(parts)
        if not parts:
            return MCAccumulator()
        while len(parts) > 1:
            nxt = [parts[i].merge(parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
            if len(parts) % 2:
                nxt.append(parts[-1])
            parts = nxt
        return parts[0]


def mean_stderr(values) -> tuple[float, float]:
    acc = MCAccumulator.from_values(np.asarray(values, dtype=float))
    return acc.mean, acc.stderr
