"""Compiled inner loops.

Every kernel works with *relative* coordinates ``Z = g - V`` so that an
elementary vertical-slit step is a shift followed by a square root.  Square
roots always take the branch with nonnegative imaginary part.
"""
import math

import numpy as np
from numba import njit

_CACHE = True


@njit(cache=_CACHE, nogil=True, inline="always")
def upper_sqrt(u):
    s = np.sqrt(u)
    if s.imag < 0.0:
        s = -s
    return s


@njit(cache=_CACHE, nogil=True, fastmath=True)
def _forward_sweep(X, Y, P, L, A, dV, c, k0, k1, eps_swallow):
    """Forward steps ``k0 .. k1-1`` for all nodes in lockstep (branch-free).

    ``P`` collects ``|w|^2 / |w^2 + c|`` and is folded into ``L``
    (``log|g'|``) every 32 steps.
    """
    n = X.shape[0]
    k = k0
    while k < k1:
        stop = min(k + 32, k1)
        while k < stop:
            dv = dV[k]
            for m in range(n):
                x = X[m] - dv
                y = Y[m]
                live = A[m] and y >= eps_swallow
                ux = x * x - y * y + c
                uy = 2.0 * x * y
                r = math.sqrt(ux * ux + uy * uy)
                t = math.sqrt(0.5 * (r + abs(ux)))
                b = uy / (2.0 * t)
                pos = ux >= 0.0
                xn = math.copysign(t, b) if pos else b
                yn = abs(b) if pos else t
                f = (x * x + y * y) / r
                X[m] = xn if live else X[m]
                Y[m] = yn if live else Y[m]
                P[m] = P[m] * f if live else P[m]
                A[m] = live
            k += 1
        for m in range(n):
            L[m] += 0.5 * math.log(P[m])
            P[m] = 1.0


@njit(cache=_CACHE, nogil=True)
def forward_batch(dV, c, z, rec, eps_swallow):
    """Forward flow of points ``z`` under each row of increments ``dV``.

    Step ``k`` uses the driving value at the end of the step:
    ``Z <- sqrt((Z - dV[k])**2 + c)``, ``c = 2*a*dt``.

    Returns ``Z``, ``log|g'|`` and ``alive`` recorded after ``rec[r]`` steps,
    each of shape ``(S, R, M)``.  A point whose imaginary part is below
    ``eps_swallow`` before a step is swallowed and stays frozen at that state.
    """
    S, N = dV.shape
    M = z.shape[0]
    R = rec.shape[0]
    Zout = np.empty((S, R, M), dtype=np.complex128)
    Lout = np.empty((S, R, M))
    Aout = np.empty((S, R, M), dtype=np.bool_)
    X = np.empty(M)
    Y = np.empty(M)
    P = np.empty(M)
    L = np.empty(M)
    A = np.empty(M, dtype=np.bool_)
    for s in range(S):
        for m in range(M):
            X[m] = z[m].real
            Y[m] = z[m].imag
            P[m] = 1.0
            L[m] = 0.0
            A[m] = True
        k = 0
        for r in range(R):
            _forward_sweep(X, Y, P, L, A, dV[s], c, k, rec[r], eps_swallow)
            k = rec[r]
            for m in range(M):
                Zout[s, r, m] = complex(X[m], Y[m])
                Lout[s, r, m] = L[m]
                Aout[s, r, m] = A[m]
    return Zout, Lout, Aout


@njit(cache=_CACHE, nogil=True, fastmath=True)
def _reverse_columns(X, Y, L, dUT, c, k0, k1):
    """Reverse steps ``k0 .. k1-1`` for one point across all seeds (columns of ``dUT``)."""
    S = X.shape[0]
    P = np.ones(S)
    k = k0
    while k < k1:
        stop = min(k + 32, k1)
        while k < stop:
            du = dUT[k]
            for s in range(S):
                x = X[s]
                y = Y[s]
                ux = x * x - y * y - c
                uy = 2.0 * x * y
                r = math.sqrt(ux * ux + uy * uy)
                t = math.sqrt(0.5 * (r + abs(ux)))
                b = uy / (2.0 * t)
                pos = ux >= 0.0
                X[s] = (math.copysign(t, b) if pos else b) - du[s]
                Y[s] = abs(b) if pos else t
                P[s] *= (x * x + y * y) / r
            k += 1
        for s in range(S):
            L[s] += 0.5 * math.log(P[s])
            P[s] = 1.0


@njit(cache=_CACHE, nogil=True, fastmath=True)
def forward_columns(dV, c, z, rec, eps_swallow):
    """Forward flow of a single point ``z`` vectorized over seeds.

    ``dV`` has shape ``(S, N)``; returns ``Z``, ``log|g'|`` and ``alive`` of
    shape ``(S, R)`` after ``rec[r]`` steps.  Same step and swallowing rule
    as :func:`forward_batch`.
    """
    S, N = dV.shape
    R = rec.shape[0]
    dVT = np.ascontiguousarray(dV.T)
    X = np.full(S, z.real)
    Y = np.full(S, z.imag)
    L = np.zeros(S)
    P = np.ones(S)
    A = np.ones(S, dtype=np.bool_)
    Zout = np.empty((S, R), dtype=np.complex128)
    Lout = np.empty((S, R))
    Aout = np.empty((S, R), dtype=np.bool_)
    k = 0
    for r in range(R):
        k1 = rec[r]
        while k < k1:
            stop = min(k + 32, k1)
            while k < stop:
                dv = dVT[k]
                for s in range(S):
                    x = X[s] - dv[s]
                    y = Y[s]
                    live = A[s] and y >= eps_swallow
                    ux = x * x - y * y + c
                    uy = 2.0 * x * y
                    rr = math.sqrt(ux * ux + uy * uy)
                    t = math.sqrt(0.5 * (rr + abs(ux)))
                    b = uy / (2.0 * t)
                    pos = ux >= 0.0
                    xn = math.copysign(t, b) if pos else b
                    yn = abs(b) if pos else t
                    f = (x * x + y * y) / rr
                    X[s] = xn if live else X[s]
                    Y[s] = yn if live else Y[s]
                    P[s] = P[s] * f if live else P[s]
                    A[s] = live
                k += 1
            for s in range(S):
                L[s] += 0.5 * math.log(P[s])
                P[s] = 1.0
        for s in range(S):
            Zout[s, r] = complex(X[s], Y[s])
            Lout[s, r] = L[s]
            Aout[s, r] = A[s]
    return Zout, Lout, Aout


@njit(cache=_CACHE, nogil=True)
def reverse_batch(dU, c, z, rec):
    """Reverse flow ``dh = a/(U - h) dt`` with left-endpoint driving.

    ``Z <- sqrt(Z**2 - c) - dU[k]``; ``log|h'|`` accumulates
    ``log|Z| - log|sqrt(Z**2 - c)|``.  Output shapes ``(S, R, M)``.
    """
    S, N = dU.shape
    M = z.shape[0]
    R = rec.shape[0]
    Zout = np.empty((S, R, M), dtype=np.complex128)
    Lout = np.empty((S, R, M))
    dUT = np.ascontiguousarray(dU.T)
    X = np.empty(S)
    Y = np.empty(S)
    L = np.empty(S)
    for m in range(M):
        X[:] = z[m].real
        Y[:] = z[m].imag
        L[:] = 0.0
        k = 0
        for r in range(R):
            _reverse_columns(X, Y, L, dUT, c, k, rec[r])
            k = rec[r]
            for s in range(S):
                Zout[s, r, m] = complex(X[s], Y[s])
                Lout[s, r, m] = L[s]
    return Zout, Lout


@njit(cache=_CACHE, nogil=True)
def fhat_multi(dV, c, w, ks):
    """``fhat_{k dt}(w)`` and ``log|fhat'|`` for every ``k`` in ``ks``.

    ``fhat_t(w) = f_t(w + V_t)`` is the reverse flow driven by
    ``U_r = V_{t-r} - V_t``; output shape ``(J, M)``.
    """
    J = ks.shape[0]
    M = w.shape[0]
    F = np.empty((J, M), dtype=np.complex128)
    L = np.empty((J, M))
    for j in range(J):
        k = ks[j]
        for m in range(M):
            Z = w[m]
            lg = 0.0
            for i in range(k - 1, -1, -1):
                q = upper_sqrt(Z * Z - c)
                lg += math.log(abs(Z)) - math.log(abs(q))
                Z = q + dV[i]
            F[j, m] = Z
            L[j, m] = lg
    return F, L


@njit(cache=_CACHE, nogil=True, fastmath=True)
def _trace_sweep(X, Y, dV, c, ks_sorted):
    """Lockstep reverse sweep for trace points sorted by ``k``.

    At step ``i`` the points with ``k > i`` form a suffix of the sorted
    array, so the inner loop is contiguous and branch-free.
    """
    J = ks_sorted.shape[0]
    lo = J
    N = ks_sorted[J - 1] if J > 0 else 0
    for i in range(N - 1, -1, -1):
        while lo > 0 and ks_sorted[lo - 1] > i:
            lo -= 1
        dv = dV[i]
        for j in range(lo, J):
            x = X[j]
            y = Y[j]
            ux = x * x - y * y - c
            uy = 2.0 * x * y
            r = math.sqrt(ux * ux + uy * uy)
            t = math.sqrt(0.5 * (r + abs(ux)))
            # at a slit tip u = -c exactly and t > 0, so b is finite
            b = uy / (2.0 * t)
            pos = ux >= 0.0
            X[j] = (math.copysign(t, b) if pos else b) + dv
            Y[j] = abs(b) if pos else t


@njit(cache=_CACHE, nogil=True)
def trace_points(dV, c, ks, eps):
    """``fhat_{k dt}(i*eps)`` for each ``k``; ``eps = 0`` gives slit tips exactly."""
    J = ks.shape[0]
    order = np.argsort(ks, kind="mergesort")
    ks_sorted = ks[order]
    X = np.zeros(J)
    Y = np.full(J, eps)
    _trace_sweep(X, Y, dV, c, ks_sorted)
    out = np.empty(J, dtype=np.complex128)
    for j in range(J):
        out[order[j]] = complex(X[j], Y[j])
    return out


@njit(cache=_CACHE, nogil=True, inline="always")
def _upper_sqrt_parts(x, y, r):
    """Root of ``x + iy`` with nonnegative imaginary part, given ``r = |x + iy|``."""
    if x >= 0.0:
        s = math.sqrt(0.5 * (r + x))
        if s == 0.0:
            return 0.0, 0.0
        if y < 0.0:
            return -s, -y / (2.0 * s)
        return s, y / (2.0 * s)
    s = math.sqrt(0.5 * (r - x))
    return y / (2.0 * s), s


@njit(cache=_CACHE, nogil=True, fastmath=True)
def _reverse_sweep(X, Y, P, dV, c, k, y_max, y_min2):
    """Advance nodes ``(X, Y)`` through steps ``k-1 .. 0`` in lockstep.

    The inner loop over nodes is branch-free so it vectorizes; pruned nodes
    get ``P = 0`` and are compacted away every 32 steps.  Returns the number
    of surviving nodes, which occupy the front of the arrays.
    """
    n = X.shape[0]
    i = k - 1
    while i >= 0 and n > 0:
        stop = max(i - 32, -1)
        while i > stop:
            dv = dV[i]
            lim = y_min2 - c * i
            for m in range(n):
                x = X[m]
                y = Y[m]
                ux = x * x - y * y - c
                uy = 2.0 * x * y
                r = math.sqrt(ux * ux + uy * uy)
                t = math.sqrt(0.5 * (r + abs(ux)))
                b = uy / (2.0 * t)
                pos = ux >= 0.0
                xn = math.copysign(t, b) if pos else b
                yn = abs(b) if pos else t
                P[m] *= (x * x + y * y) / r
                X[m] = xn + dv
                Y[m] = yn
                if yn > y_max or yn * yn < lim:
                    P[m] = 0.0
            i -= 1
        # compact
        w = 0
        for m in range(n):
            if P[m] > 0.0:
                X[w] = X[m]
                Y[w] = Y[m]
                P[w] = P[m]
                w += 1
        n = w
    return n


@njit(cache=_CACHE, nogil=True)
def theta_increments(dV, c, ks, w, mu_w, d, x_min, x_max, y_min, y_max):
    """Per-``k`` sums ``sum_m mu_w[m] |fhat_k'(w[m])|^d 1{fhat_k(w[m]) in box}``.

    The reverse flow has nondecreasing imaginary part and
    ``Y_k^2 <= Y_{k-1}^2 + c``, so a node is dropped as soon as it can no
    longer end inside the box (both tests are exact).  ``|fhat'|^2`` is the
    product of ``|Z|^2 / |Z^2 - c|`` over the steps; a node whose product
    underflows to zero is dropped with it, which changes the sum by less
    than ``1e-300``.
    """
    J = ks.shape[0]
    M = w.shape[0]
    out = np.zeros(J)
    y_min2 = y_min * y_min
    X = np.empty(M)
    Y = np.empty(M)
    P = np.empty(M)
    for j in range(J):
        k = ks[j]
        # the node weight rides along as mu^(2/d) in the derivative product;
        # |fhat'| <= Y_k / Im w keeps it finite
        n = 0
        for m in range(M):
            if mu_w[m] > 0.0:
                X[n] = w[m].real
                Y[n] = w[m].imag
                P[n] = mu_w[m] ** (2.0 / d)
                n += 1
        n = _reverse_sweep(X, Y, P, dV, c, k, y_max, y_min2)
        acc = 0.0
        for m in range(n):
            if x_min < X[m] < x_max and y_min < Y[m] < y_max:
                acc += P[m] ** (0.5 * d)
        out[j] = acc
    return out


@njit(cache=_CACHE, nogil=True)
def direct_hitting(x0, y0, a, h, eps_hit, xi):
    """Two-sided radial flow with substeps that shrink ``Y`` by ``exp(-a*h)``.

    Each substep lasts ``X^2 h + Y^2 (1 - exp(-2ah))/(2a)``, the exact time
    for that decrease of ``Y`` when ``X`` is held fixed, so the substep length
    scales like ``|Z|^2`` as the point is approached.

    ``xi`` holds one normal per substep (length fixes the substep count).
    Returns ``(T, X, Y)`` with ``T`` extrapolated linearly in ``Y^2`` once
    ``Y <= eps_hit*y0``.
    """
    X = x0
    Y = y0
    t = 0.0
    decay = math.exp(-a * h)
    q = (1.0 - decay * decay) / (2.0 * a)
    target = eps_hit * y0
    n = xi.shape[0]
    for k in range(n):
        if Y <= target:
            break
        # exact duration of Y -> Y*decay with X frozen
        dt = X * X * h + Y * Y * q
        t += dt
        X = X + (1.0 - 3.0 * a) * X / (X * X + Y * Y) * dt + math.sqrt(dt) * xi[k]
        Y = Y * decay
    r2 = X * X + Y * Y
    return t + r2 / (2.0 * a), X, Y


@njit(cache=_CACHE, nogil=True, inline="always")
def _log_cosh2(J):
    aj = abs(J)
    return 2.0 * (aj + math.log1p(math.exp(-2.0 * aj)) - math.log(2.0))


@njit(cache=_CACHE, nogil=True)
def functional_step_block(state, a, h, wA, wB, xi, tail_tol, s_cap, t_stop):
    """Advance the ``J`` diffusion through one block of normals.

    ``state = [J, s, T, Jmax, Talt, done_flag]``.  ``T`` integrates
    ``exp(-2as) cosh^2 J`` with ``cosh^2 J`` linear between nodes and the
    exponential weight integrated exactly; ``Talt`` integrates
    ``exp(-2as) cosh(2J)`` with the same rule.  ``done_flag``: 0 running,
    1 converged, 2 hit ``s_cap`` (truncated), 3 partial integral passed
    ``t_stop``.
    """
    J = state[0]
    s = state[1]
    T = state[2]
    Jmax = state[3]
    Talt = state[4]
    flag = 0.0
    sqh = math.sqrt(h)
    mu = 0.5 - 2.0 * a
    f0 = math.exp(_log_cosh2(J))
    g0 = math.cosh(2.0 * J)
    for k in range(xi.shape[0]):
        Jn = J + mu * math.tanh(J) * h + sqh * xi[k]
        f1 = math.exp(_log_cosh2(Jn))
        g1 = math.cosh(2.0 * Jn)
        e = math.exp(-2.0 * a * s)
        T += e * (f0 * wA + (f1 - f0) * wB)
        Talt += e * (g0 * wA + (g1 - g0) * wB)
        J = Jn
        s += h
        f0 = f1
        g0 = g1
        if abs(J) > Jmax:
            Jmax = abs(J)
        if T > t_stop:
            flag = 3.0
            break
        if math.exp(-2.0 * a * s + _log_cosh2(Jmax)) / (2.0 * a) <= tail_tol:
            flag = 1.0
            break
        if s >= s_cap:
            flag = 2.0
            break
    state[0] = J
    state[1] = s
    state[2] = T
    state[3] = Jmax
    state[4] = Talt
    state[5] = flag
    return state
