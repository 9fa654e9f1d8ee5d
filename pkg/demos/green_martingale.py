"""The forward martingale M_t(z) = |g_t'(z)|^(2-d) G(Z_t) against hitting times.

Run: python3 demos/green_martingale.py   (about a minute)

E[M_t(z)] equals G(z) times the probability that the two-sided radial flow
has not reached z by time t, which ties the forward Loewner flow to the
hitting-time samplers.
"""
from slenat import green_g, hitting_times, make_params, mart_M, mean_stderr
from slenat.green import forward_seeds

n, t = 4000, 1.0
for kappa in (2.0, 8.0 / 3.0):
    p = make_params(kappa)
    Z, L, A, _ = forward_seeds(1j, [t], 1e-3, range(n), p)
    m, s = mean_stderr(mart_M(Z[:, 0], L[:, 0], A[:, 0], p))
    T = hitting_times(1j, n, p, 10**7, "functional")
    q, sq = mean_stderr((T > t).astype(float))
    G = float(green_g(1j, p))
    print(f"kappa={kappa:.3g}: E M_1(i) = {m:.4f} +- {s:.4f}, "
          f"G(i) P(T > 1) = {G * q:.4f} +- {G * sq:.4f}")
