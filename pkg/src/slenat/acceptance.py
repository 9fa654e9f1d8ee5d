"""Desk-scale acceptance checks.

Each ``check_*`` function runs one criterion at its stated sample size
(``scale`` shrinks the counts for quick runs) and returns
:class:`CheckResult` records.  Seeds are fixed, so every result is
reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .core import DrivingPath, make_params, mean_stderr, sample_driving
from .green import (DomainBox, box_grid, forward_seeds, green_g, integrate_G, mart_M, one_point_ratio,
                    psi_batch, upsilon_samples)
from .hitting import PhiTable, build_phi_table, hitting_times
from .loewner import build_chain, forward_state, full_trace, inverse_point, reverse_state
from .moments import estimate_I, loglog_slope, martingale_N, n0, sample_reverse, two_point_N, two_point_n0
from .natparam import ThetaPlan, _count_inversions, minkowski_content, theta_estimate, vanishing_time


@dataclass(frozen=True)
class CheckResult:
    cid: str
    name: str
    passed: bool | None  # None: reported, not asserted
    detail: str

    @property
    def status(self) -> str:
        return "REPORT" if self.passed is None else ("PASS" if self.passed else "FAIL")

    def line(self) -> str:
        return f"criterion {self.cid} [{self.status}] {self.name}: {self.detail}"


def _n(full: int, scale: float, floor: int = 100) -> int:
    return max(floor, int(round(full * scale)))


def _z(mean, ref, se):
    return (mean - ref) / se if se > 0 else (0.0 if mean == ref else math.inf)


# 1 -------------------------------------------------------------------------


def check_flow_oracle(dt: float = 1e-4, kappas=(2.0, 8.0 / 3.0)) -> list[CheckResult]:
    """Zero driving: ``g_t(z) = sqrt(z^2 + 2at)``, ``f_t(w) = sqrt(w^2 - 2at)``, ``h_t = f_t``."""
    pts = [3j, 1 + 1j, -0.5 + 0.2j, 2 + 3j, 0.01 + 0.05j]
    worst = 0.0
    for k in kappas:
        p = make_params(k)
        ch = build_chain(DrivingPath.zero(1.0, dt), p)
        for t in (0.25, 1.0):
            c = 2 * p.a * t
            for z in pts:
                s = _usqrt(z * z + c)
                st = forward_state(ch, t, z)
                worst = max(worst, abs(st.image - s), abs(st.abs_gprime - abs(z / s)),
                            abs(st.upsilon - s.imag / abs(z / s)))
                w = s  # f_t(g_t(z)) = z
                worst = max(worst, abs(inverse_point(ch, t, w) - z))
                hz = _usqrt(z * z - c)
                rs = reverse_state(ch.driving, t, z, p)
                worst = max(worst, abs(rs.image - hz), abs(rs.abs_gprime - abs(z / hz)))
    return [CheckResult("1", "closed-form flow oracle", worst <= 1e-6, f"max abs error {worst:.2e} (tol 1e-6)")]


def _usqrt(u: complex) -> complex:
    s = complex(np.sqrt(complex(u)))
    return -s if s.imag < 0 else s


# 2 -------------------------------------------------------------------------


def check_scaling(n: int = 10_000, dt: float = 1e-3, r: float = 2.0, t: float = 0.25) -> list[CheckResult]:
    """KS of ``g_{t r^2}(r z)/r`` against ``g_t(z)`` at ``z = i`` on independent seeds."""
    p = make_params(8.0 / 3.0)
    z = 1j
    Za, _, _, Va = forward_seeds(z, [t], dt, range(0, n), p)
    Zb, _, _, Vb = forward_seeds(r * z, [t * r * r], dt, range(10**6, 10**6 + n), p)
    ga = (Za + Va)[:, 0]
    gb = (Zb + Vb)[:, 0] / r
    pr = stats.ks_2samp(ga.real, gb.real).pvalue
    pi = stats.ks_2samp(ga.imag, gb.imag).pvalue
    ok = pr > 0.01 and pi > 0.01
    return [CheckResult("2", "scaling law", ok, f"KS p(Re)={pr:.3f} p(Im)={pi:.3f} (need > 0.01), {n} seeds")]


# 3 -------------------------------------------------------------------------


def check_reverse_martingales(n: int = 10_000, dt: float = 1e-3) -> list[CheckResult]:
    worst = 0.0
    parts = []
    for k in (2.0, 8.0 / 3.0, 5.0):
        p = make_params(k)
        smp = sample_reverse([1j, 1 + 1j], [0.5, 1.0], dt, range(n), p)
        for r in (1.0, 4.0 / k + 0.5):
            for m, z in enumerate((1j, 1 + 1j)):
                mu, se = mean_stderr(martingale_N(smp, r, p, 1.0, m))
                zz = _z(mu, n0(z, r, p), se)
                worst = max(worst, abs(zz))
                parts.append(f"k={k:.3g},r={r:.3g},z={z}:{zz:+.2f}")
        if math.isclose(k, 8 / 3):
            mu, se = mean_stderr(two_point_N(smp, 1.0, p, 0.5))
            z2 = _z(mu, two_point_n0(1j, 1 + 1j, 1.0, p), se)
    res = [CheckResult("3", "reverse martingale means", worst <= 4.0,
                       f"max |z| = {worst:.2f} over 12 cases (need <= 4); " + " ".join(parts)),
           CheckResult("3", "two-point martingale mean", abs(z2) <= 4.0,
                       f"z={z2:+.2f} at t=0.5, z=i, w=1+i, kappa=8/3, r=1")]
    return res


# 4 -------------------------------------------------------------------------


def check_derivative_bound(n: int = 1000, dt: float = 1e-3, horizon: float = 4.0) -> list[CheckResult]:
    times = np.arange(0, int(round(horizon / 0.05)) + 1) * 0.05
    worst = 0.0
    total = 0
    for k in (2.0, 8.0 / 3.0, 5.0):
        p = make_params(k)
        smp = sample_reverse([0j + 1j, 1 + 1j, 3 + 1j], times, dt, range(n), p)
        bound = np.sqrt(2 * p.a * times + 1.0)[None, :, None]
        ratio = np.exp(smp.log_hprime) / bound
        worst = max(worst, float(ratio.max()))
        total += ratio.size
    # one ulp of slack for the final exponentiation
    ok = worst <= 1.0 + 1e-12
    return [CheckResult("4", "derivative bound", ok, f"max |h'|/sqrt(2at+1) = {worst:.6f} over {total} samples")]


# 5 -------------------------------------------------------------------------


def check_phi_samplers(n: int = 10_000) -> list[CheckResult]:
    pv = []
    for k in (2.0, 8.0 / 3.0, 4.0):
        p = make_params(k)
        for x in (0.0, 1.0, 2.0):
            A = hitting_times(complex(x, 1.0), n, p, 0, "direct")
            B = hitting_times(complex(x, 1.0), n, p, 10**7, "functional")
            pv.append((k, x, stats.ks_2samp(A, B).pvalue))
    ok = all(v > 0.01 for _, _, v in pv)
    det = " ".join(f"k={k:.3g},x={x:g}:p={v:.3f}" for k, x, v in pv)
    return [CheckResult("5", "phi sampler cross-oracle", ok, f"{n} samples each; " + det)]


# 6 -------------------------------------------------------------------------


def check_forward_hitting(n: int = 10_000, dt: float = 1e-4) -> list[CheckResult]:
    out = []
    for k in (2.0, 8.0 / 3.0):
        p = make_params(k)
        Z, L, A, _ = forward_seeds(1j, [1.0], dt, range(n), p)
        M = mart_M(Z[:, 0], L[:, 0], A[:, 0], p)
        mM, sM = mean_stderr(M)
        T = hitting_times(1j, n, p, 2 * 10**7, "functional")
        h1 = (T <= 1.0).astype(float)
        h12 = ((T > 1.0) & (T <= 2.0)).astype(float)
        G = green_g(1j, p)
        m1, s1 = mean_stderr(h1)
        zz = (mM - G * (1 - m1)) / math.hypot(sM, G * s1)
        out.append(CheckResult("6", f"E[M_1(i)] = G(i)(1 - phi(i;1)), kappa={k:.3g}", abs(zz) <= 4.0,
                               f"mean M={mM:.4f}+-{sM:.4f}, G(1-phi)={G * (1 - m1):.4f}+-{G * s1:.4f}, z={zz:+.2f}"))
        # E[M_1 phi(Z_1; 1)]: one fresh hitting time per seed started from Z_1
        hit = np.zeros(n)
        for i in range(n):
            if M[i] > 0:
                hit[i] = hitting_times(Z[i, 0], 1, p, 3 * 10**7 + i, t_stop=1.0)[0] <= 1.0
        mL, sL = mean_stderr(M * hit)
        m2, s2 = mean_stderr(h12)
        zz = (mL - G * m2) / math.hypot(sL, G * s2)
        out.append(CheckResult("6", f"E[M_1 phi(Z_1;1)] = G(phi(i;2)-phi(i;1)), kappa={k:.3g}", abs(zz) <= 4.0,
                               f"lhs={mL:.4f}+-{sL:.4f}, rhs={G * m2:.4f}+-{G * s2:.4f}, z={zz:+.2f}"))
    return out


# 7 -------------------------------------------------------------------------


def check_green_integral(resolution: int = 64) -> list[CheckResult]:
    worst = 0.0
    det = []
    for k in (2.0, 8.0 / 3.0, 5.0):
        p = make_params(k)
        ratio = integrate_G(2.0, resolution, p) / integrate_G(1.0, resolution, p)
        rel = abs(ratio / 2**p.d - 1)
        worst = max(worst, rel)
        det.append(f"k={k:.3g}:{ratio:.5f} vs {2**p.d:.5f}")
    return [CheckResult("7", "Green integral scaling", worst <= 0.01, f"max rel dev {worst:.2e}; " + " ".join(det))]


# 8 -------------------------------------------------------------------------


def check_one_point(n: int = 100_000, dt: float = 1e-4, horizon: float = 8.0, eps: float = 0.05) -> list[CheckResult]:
    p = make_params(8.0 / 3.0)
    z1, z2 = 1j, 1 + 1j
    ups = upsilon_samples([z1, z2], [horizon / 2, horizon], dt, range(n), p)
    pr, se, _ = one_point_ratio(ups[:, :, -1], eps, p)
    ph, _, _ = one_point_ratio(ups[:, :, 0], eps, p)
    target = green_g(z1, p) / green_g(z2, p)
    ratio = pr[0] / pr[1]
    ok = abs(ratio / target - 1) <= 0.25
    drift = float(np.max(np.abs(pr - ph) / np.maximum(pr, 1e-300)))
    return [CheckResult("8", "one-point estimate", ok,
                        f"P=({pr[0]:.4f}+-{se[0]:.4f}, {pr[1]:.4f}+-{se[1]:.4f}), ratio {ratio:.3f} vs G ratio "
                        f"{target:.3f} (tol 25%); probability change from T={horizon / 2:g} to T={horizon:g}: "
                        f"{100 * drift:.2f}%")]


# 9, 10 ---------------------------------------------------------------------


@dataclass
class ThetaRuns:
    levels: np.ndarray
    theta: np.ndarray  # (chains, levels)
    psi0: float
    psi1: np.ndarray
    increments: list  # per chain, increments at the structure level
    level: int
    seeds: list


def theta_runs(table: PhiTable, n_chains: int = 500, levels=(3, 4, 5, 6, 7), level: int = 6,
               dt: float = 2.0**-12, D: DomainBox | None = None, base_seed: int = 50_000,
               mass_tol: float = 1e-3, progress: Callable[[str], None] | None = None) -> ThetaRuns:
    """``Theta_{1,n}(D)`` at every level plus ``Psi_0``, ``Psi_1`` on shared chains."""
    p = make_params(table.kappa)
    D = D or DomainBox(-1.0, 1.0, 0.5, 1.5)
    plan = ThetaPlan(table, p, mass_tol)
    g = box_grid(D, 80, 40)
    levels = np.asarray(sorted(set(levels) | {level}))
    th = np.empty((n_chains, len(levels)))
    psi1 = np.empty(n_chains)
    incs = []
    psi0 = None
    for i in range(n_chains):
        ch = build_chain(sample_driving(1.0, dt, base_seed + i), p)
        for li, n in enumerate(levels):
            est = theta_estimate(ch, 1.0, int(n), D, table, p, plan)
            th[i, li] = est.value
            if n == level:
                incs.append(est.increments)
        ps = psi_batch(ch.increments, dt, [0, ch.driving.n_steps], g, p)[0]
        psi0 = ps[0]
        psi1[i] = ps[1]
        if progress and (i + 1) % 50 == 0:
            progress(f"theta chains {i + 1}/{n_chains}")
    return ThetaRuns(levels, th, float(psi0), psi1, incs, level, list(range(base_seed, base_seed + n_chains)))


def check_theta_structure(runs: ThetaRuns, table: PhiTable, n_scaling: int = 300,
                          D: DomainBox | None = None) -> list[CheckResult]:
    p = make_params(table.kappa)
    D = D or DomainBox(-1.0, 1.0, 0.5, 1.5)
    n = runs.level
    inc = np.array(runs.increments)
    out = [CheckResult("9", "nonnegative increments", bool(np.all(inc >= 0)), f"min increment {inc.min():.3e}")]
    partial = np.cumsum(inc, axis=1)
    out.append(CheckResult("9", "monotone in t", bool(np.all(np.diff(partial, axis=1) >= 0)),
                           f"{partial.shape[0]} chains x {partial.shape[1]} dyadic times"))
    tv = vanishing_time(D, p)
    J = np.arange(1, inc.shape[1] + 1)
    early = partial[:, J * 2.0**-n < tv]
    out.append(CheckResult("9", "zero before 1/(2 a m^2)", bool(np.all(early == 0)),
                           f"{early.shape[1]} dyadic times below {tv:.4f}, max value {early.max(initial=0):.2e}"))
    # scaling: r^-d Theta_{r^2, n}(rD) on horizon-4 chains vs Theta_{1, n+2}(D)
    plan = ThetaPlan(table, p, 1e-3)
    dt = 2.0**-10
    a_vals, b_vals = [], []
    for i in range(n_scaling):
        cb = build_chain(sample_driving(4.0, 4 * dt, 70_000 + i), p)
        b_vals.append(theta_estimate(cb, 4.0, 3, D.scaled(2.0), table, p, plan).value * 2.0**-p.d)
        ca = build_chain(sample_driving(1.0, dt, 80_000 + i), p)
        a_vals.append(theta_estimate(ca, 1.0, 5, D, table, p, plan).value)
    pv = stats.ks_2samp(a_vals, b_vals).pvalue
    out.append(CheckResult("9", "scaling in distribution (r=2)", pv > 0.01,
                           f"KS p={pv:.3f} ({n_scaling} chains per side)"))
    li = int(np.where(runs.levels == n)[0][0])
    th = runs.theta[:, li]
    diff = th - (runs.psi0 - runs.psi1)
    md, sd = mean_stderr(diff)
    mt, st = mean_stderr(th)
    mp, sp = mean_stderr(runs.psi0 - runs.psi1)
    out.append(CheckResult("9", "mean identity E Theta_1 = Psi_0 - E Psi_1", abs(md) <= 4 * sd,
                           f"Theta={mt:.4f}+-{st:.4f}, Psi0-Psi1={mp:.4f}+-{sp:.4f}, paired diff {md:+.4f}+-{sd:.4f}"))
    intG = runs.psi0
    out.append(CheckResult("9", "mean bound E Theta_1 <= int_D G", mt <= intG + 4 * st,
                           f"Theta={mt:.4f}, int_D G={intG:.4f}"))
    return out


def check_dyadic(runs: ThetaRuns, levels=(3, 4, 5, 6, 7)) -> list[CheckResult]:
    idx = [int(np.where(runs.levels == n)[0][0]) for n in levels]
    th = runs.theta[:, idx]
    dif = np.diff(th, axis=1) ** 2
    m = dif.mean(axis=0)
    s = dif.std(axis=0, ddof=1) / math.sqrt(dif.shape[0])
    bad, soft = _count_inversions(m, s)
    ok = bad == 0 and soft <= 1
    det = " ".join(f"n={n}:{mm:.3e}+-{ss:.1e}" for n, mm, ss in zip(levels[:-1], m, s))
    return [CheckResult("10", "dyadic Cauchy trend", ok, f"E[(Theta_(n+1)-Theta_n)^2]: {det}; increases {bad + soft}")]


# 11 ------------------------------------------------------------------------


def minkowski_window(slit_height: float, count: int = 7) -> np.ndarray:
    """Decreasing eps from ``9h`` to ``1.1h`` (``h`` the slit height): above the
    discretization scale and well below the curve diameter."""
    return np.geomspace(9.0 * slit_height, 1.1 * slit_height, count)


def check_minkowski(steps: int = 100_000, seed: int = 1) -> list[CheckResult]:
    p = make_params(2.0)
    ch = build_chain(sample_driving(1.0, 1.0 / steps, seed), p)
    _, pts = full_trace(ch)
    eps = minkowski_window(ch.slit_height)
    fit = minkowski_content(pts, eps, p.d)
    ok = abs(fit.slope - (2 - p.d)) <= 0.1
    return [CheckResult("11", "Minkowski area slope (kappa=2)", ok,
                        f"slope {fit.slope:.3f} vs 2-d={2 - p.d:.3f} (tol 0.1), eps in [{eps[-1]:.4f}, {eps[0]:.4f}]")]


def check_first_moment(table: PhiTable, n_chains: int = 200, dt: float = 1e-3,
                       s_values=(2.0, 4.0, 8.0, 16.0)) -> list[CheckResult]:
    p = make_params(table.kappa)
    plan = ThetaPlan(table, p, 1e-3)
    ms, ses = [], []
    for s in s_values:
        m, se = estimate_I(s, None, table, n_chains, p, 90_000, dt, plan)
        ms.append(m)
        ses.append(se)
    slope = loglog_slope(s_values, ms)
    det = " ".join(f"s={s:g}:{m:.4f}+-{se:.4f}" for s, m, se in zip(s_values, ms, ses))
    return [CheckResult("11", "first-moment slope of E I_(s,H) = d-2", abs(slope - (p.d - 2)) <= 0.15,
                        f"slope {slope:.3f} vs d-2={p.d - 2:.3f} (tol 0.15); {det}"),
            CheckResult("11", "first-moment slope vs scaling exponent (d-2)/2", None,
                        f"slope {slope:.3f} vs (d-2)/2={(p.d - 2) / 2:.3f}")]


# 12 ------------------------------------------------------------------------


def report_constants(table: PhiTable) -> list[CheckResult]:
    """Fitted quantities that are reported, never asserted."""
    p = make_params(table.kappa)
    j = int(np.argmin(np.abs(table.ys - 0.5 * table.y_top)))
    col = table.values[:, j]
    ok = col > 0.01
    beta = math.nan
    if ok.sum() >= 3:
        beta = -float(np.polyfit(table.xs[ok] ** 2, np.log(col[ok]), 1)[0])
    return [CheckResult("12", "Gaussian tail rate beta of phi", None,
                        f"fitted beta={beta:.3f} at y={table.ys[j]:.3f} (kappa={p.kappa:.3g})")]


def default_table(kappa: float = 8.0 / 3.0, n_samples: int = 600, seed: int = 0) -> PhiTable:
    return build_phi_table(16, 16, n_samples, make_params(kappa), seed)


def run_all(scale: float = 1.0, criteria: Sequence[str] | None = None, table: PhiTable | None = None,
            progress: Callable[[str], None] | None = None) -> list[CheckResult]:
    """Every criterion at ``scale`` times its stated sample counts."""
    want = set(criteria) if criteria else {str(i) for i in range(1, 13)}
    res: list[CheckResult] = []

    def note(msg):
        if progress:
            progress(msg)

    if "1" in want:
        res += check_flow_oracle()
    if "2" in want:
        res += check_scaling(_n(10_000, scale))
    if "3" in want:
        res += check_reverse_martingales(_n(10_000, scale))
    if "4" in want:
        res += check_derivative_bound(_n(1000, scale))
    if "5" in want:
        res += check_phi_samplers(_n(10_000, scale))
    if "6" in want:
        res += check_forward_hitting(_n(10_000, scale))
    if "7" in want:
        res += check_green_integral()
    if "8" in want:
        res += check_one_point(_n(100_000, scale, 1000))
    if want & {"9", "10", "11", "12"}:
        if table is None:
            note("building phi table")
            table = default_table(n_samples=_n(600, scale))
    if want & {"9", "10"}:
        runs = theta_runs(table, _n(500, scale, 20), progress=note)
        if "9" in want:
            res += check_theta_structure(runs, table, _n(300, scale, 20))
        if "10" in want:
            res += check_dyadic(runs)
    if "11" in want:
        res += check_minkowski()
        res += check_first_moment(table, _n(200, scale, 20))
    if "12" in want:
        res += report_constants(table)
    return res
