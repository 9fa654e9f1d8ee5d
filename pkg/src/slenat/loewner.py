"""Discretized forward and reverse Loewner flows.

The chain is a composition of vertical-slit maps.  Step ``k`` (``k = 1..N``)
is

    g_k(z) = V_k + sqrt((z - V_k)**2 + 2*a*dt),

which adds exactly ``a*dt`` of half-plane capacity.  Using the driving value
at the *end* of the step makes ``fhat_t(w) = f_t(w + V_t)`` coincide with the
discrete reverse flow ``h_t(w) - U_t`` for ``U_r = V_{t-r} - V_t``, and puts
the trace tip at ``fhat_t(0+)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .core import DrivingPath, KappaParams
from .errors import DomainError, ParameterError

EPS_SWALLOW = 1e-9


@dataclass(frozen=True)
class LoewnerChain:
    driving: DrivingPath
    params: KappaParams
    slit_height: float = field(init=False)
    increments: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "slit_height", math.sqrt(2.0 * self.params.a * self.driving.dt))
        inc = np.ascontiguousarray(self.driving.increments)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def dt(self) -> float:
        return self.driving.dt

    @property
    def horizon(self) -> float:
        return self.driving.horizon

    @property
    def c(self) -> float:
        """Squared slit height ``2*a*dt``."""
        return 2.0 * self.params.a * self.driving.dt

    def steps(self, t: float) -> int:
        return self.driving.step_index(t)

    def hcap(self, t: float) -> float:
        return self.params.a * self.steps(t) * self.dt


@dataclass(frozen=True)
class FlowState:
    """Flow of one point ``z0`` up to time ``t``.

    For the forward flow ``image = g_t(z0)`` and ``Z = g_t(z0) - V_t``; for the
    reverse flow ``image = h_t(z0)`` and ``Z = h_t(z0) - U_t``.
    ``log_abs_deriv`` is ``log|g_t'(z0)|`` (resp. ``log|h_t'(z0)|``).
    """

    z0: complex
    t: float
    Z: complex
    log_abs_deriv: float
    alive: bool
    image: complex

    @property
    def abs_gprime(self) -> float:
        return math.exp(self.log_abs_deriv)

    @property
    def X(self) -> float:
        return self.Z.real

    @property
    def Y(self) -> float:
        return self.Z.imag

    @property
    def R(self) -> float:
        return self.Z.real / self.Z.imag

    @property
    def upsilon(self) -> float:
        return self.Z.imag * math.exp(-self.log_abs_deriv)


def build_chain(driving: DrivingPath, params: KappaParams) -> LoewnerChain:
    if driving.n_steps < 1:
        raise ParameterError("driving path needs at least one step")
    if not np.all(np.isfinite(driving.values)):
        raise ParameterError("driving path has non-finite values")
    return LoewnerChain(driving, params)


def _check_upper(z, what="z"):
    z = np.asarray(z, dtype=complex)
    if np.any(~(z.imag > 0)):
        raise DomainError(f"{what} must lie in the upper half-plane")
    return z


def _as_rows(increments) -> np.ndarray:
    inc = np.asarray(increments, dtype=float)
    if inc.ndim == 1:
        inc = inc[None, :]
    return np.ascontiguousarray(inc)


def forward_flow(increments, a: float, dt: float, z, steps: Sequence[int]):
    """Batched forward flow.

    ``increments`` has shape ``(S, N)`` (or ``(N,)``); ``z`` shape ``(M,)``.
    Returns ``(Z, log|g'|, alive)``, each of shape ``(S, len(steps), M)``.
    """
    z = _check_upper(np.atleast_1d(z))
    rec = np.asarray(steps, dtype=np.int64)
    if np.any(np.diff(rec) < 0):
        raise ParameterError("steps must be nondecreasing")
    inc = _as_rows(increments)
    if rec.size and (rec[0] < 0 or rec[-1] > inc.shape[1]):
        raise ParameterError("requested step outside the driving horizon")
    return K.forward_batch(inc, 2.0 * a * dt, z, rec, EPS_SWALLOW)


def reverse_flow(increments, a: float, dt: float, z, steps: Sequence[int]):
    """Batched reverse flow; returns ``(Z, log|h'|)`` of shape ``(S, R, M)``."""
    z = _check_upper(np.atleast_1d(z))
    rec = np.asarray(steps, dtype=np.int64)
    if np.any(np.diff(rec) < 0):
        raise ParameterError("steps must be nondecreasing")
    inc = _as_rows(increments)
    if rec.size and (rec[0] < 0 or rec[-1] > inc.shape[1]):
        raise ParameterError("requested step outside the driving horizon")
    return K.reverse_batch(inc, 2.0 * a * dt, z, rec)


def forward_state(chain: LoewnerChain, t: float, z: complex) -> FlowState:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"z={z} is not in the upper half-plane")
    if t > chain.horizon * (1 + 1e-12):
        raise ParameterError(f"t={t} exceeds horizon {chain.horizon}")
    k = chain.steps(t)
    Z, L, A = forward_flow(chain.increments, chain.params.a, chain.dt, [z], [k])
    Zk = complex(Z[0, 0, 0])
    return FlowState(z, t, Zk, float(L[0, 0, 0]), bool(A[0, 0, 0]), Zk + chain.driving.values[k])


def fhat_points(chain: LoewnerChain, t: float, w):
    """Vectorized ``(fhat_t(w), log|fhat_t'(w)|)``."""
    w = _check_upper(np.atleast_1d(w), "w")
    k = chain.steps(t)
    F, L = K.fhat_multi(chain.increments, chain.c, w, np.array([k], dtype=np.int64))
    return F[0], L[0]


def fhat_deriv(chain: LoewnerChain, t: float, z: complex) -> tuple[complex, float]:
    F, L = fhat_points(chain, t, [complex(z)])
    if not F[0].imag > 0:
        raise DomainError(f"fhat_t({z}) left the upper half-plane numerically")
    return complex(F[0]), math.exp(float(L[0]))


def inverse_point(chain: LoewnerChain, t: float, w: complex) -> complex:
    """``f_t(w) = g_t^{-1}(w)``."""
    w = complex(w)
    if not w.imag > 0:
        raise DomainError(f"w={w} is not in the upper half-plane")
    Vt = chain.driving.value_at(t)
    F, _ = fhat_points(chain, t, [w - Vt])
    if not F[0].imag > 0:
        raise DomainError(f"f_t({w}) left the upper half-plane numerically")
    return complex(F[0])


def default_trace_eps(dt: float) -> float:
    return math.sqrt(dt) / 10.0


def trace(chain: LoewnerChain, times: Sequence[float], eps: float | None = None) -> np.ndarray:
    """``gamma(t_k) ~ fhat_{t_k}(i*eps)``; ``eps = 0`` returns the slit tips."""
    if eps is None:
        eps = default_trace_eps(chain.dt)
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    ks = np.array([chain.steps(t) for t in times], dtype=np.int64)
    return K.trace_points(chain.increments, chain.c, ks, float(eps))


def full_trace(chain: LoewnerChain, eps: float = 0.0, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Trace at every ``stride``-th grid time including ``t = 0``."""
    ks = np.arange(0, chain.driving.n_steps + 1, stride, dtype=np.int64)
    pts = K.trace_points(chain.increments, chain.c, ks, float(eps))
    pts[0] = complex(0.0, eps)
    return ks * chain.dt, pts


def reverse_state(driving: DrivingPath, t: float, z: complex, params: KappaParams) -> FlowState:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"z={z} is not in the upper half-plane")
    k = driving.step_index(t)
    Z, L = reverse_flow(driving.increments, params.a, driving.dt, [z], [k])
    Zk = complex(Z[0, 0, 0])
    return FlowState(z, t, Zk, float(L[0, 0, 0]), True, Zk + driving.values[k])


def hcap_estimate(chain: LoewnerChain, t: float, radius: float = 1e3, n_points: int = 8) -> float:
    """Fitted capacity from ``z (g_t(z) - z)`` on a large semicircle."""
    theta = np.linspace(0.2, math.pi - 0.2, n_points)
    z = radius * np.exp(1j * theta)
    k = chain.steps(t)
    Z, _, _ = forward_flow(chain.increments, chain.params.a, chain.dt, z, [k])
    g = Z[0, 0] + chain.driving.values[k]
    return float(np.mean((z * (g - z)).real))


def write_curve_ndjson(path, times, points) -> None:
    from .io import atomic_write_text

    lines = [json.dumps({"t": float(t), "re": float(p.real), "im": float(p.imag)}) for t, p in zip(times, points)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_curve_ndjson(path) -> tuple[np.ndarray, np.ndarray]:
    ts, ps = [], []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                ts.append(rec["t"])
                ps.append(complex(rec["re"], rec["im"]))
    return np.array(ts), np.array(ps)
