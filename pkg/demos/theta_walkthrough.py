"""Build a phi table and estimate Theta_{1,n}(D) on a few chains.

Run: python3 demos/theta_walkthrough.py   (a few minutes)

Theta is a sum of dyadic increments, each an integral of |fhat'|^d against
the measure phi G dA.  Its mean should match Psi_0(D) - E Psi_1(D), the
expected loss of the Green's function mass of D.
"""
import numpy as np

from slenat import (DomainBox, ThetaPlan, box_grid, build_chain, build_phi_table, make_params, mean_stderr, psi,
                    sample_driving, theta_estimate)

p = make_params(8.0 / 3.0)
table = build_phi_table(16, 16, 400, p, seed=0)
print(f"phi table: {len(table.xs)} x {len(table.ys)} nodes, x_max={table.x_max:.3f}, y_top={table.y_top:.3f}")
plan = ThetaPlan(table, p, mass_tol=1e-3)
D = DomainBox(-1.0, 1.0, 0.5, 1.5)
grid = box_grid(D, 48)
dt = 2.0**-12

theta, loss = [], []
for seed in range(20):
    chain = build_chain(sample_driving(1.0, dt, seed), p)
    est = theta_estimate(chain, 1.0, 6, D, table, p, plan)
    theta.append(est.value)
    loss.append(psi(chain, 0.0, D, grid, p) - psi(chain, 1.0, D, grid, p))
    print(f"seed {seed:2d}: Theta_1,6 = {est.value:.4f}, Psi_0 - Psi_1 = {loss[-1]:.4f}")

mt, st = mean_stderr(np.array(theta))
ml, sl = mean_stderr(np.array(loss))
print(f"mean Theta {mt:.4f} +- {st:.4f}, mean Psi loss {ml:.4f} +- {sl:.4f}")
