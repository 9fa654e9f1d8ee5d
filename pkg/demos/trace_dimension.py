"""Sample an SLE_2 trace and read its dimension off three rival contents.

Run: python3 demos/trace_dimension.py   (about a minute)

The neighborhood area of a d-dimensional curve scales like eps^(2-d), so a
log-log fit of area against eps recovers 2 - d.  The d-variation is printed
for a few mesh sizes; it should settle as the partition is refined.
"""
from slenat import build_chain, d_variation, make_params, minkowski_content, sample_driving
from slenat.loewner import full_trace
from slenat.acceptance import minkowski_window

p = make_params(2.0)
dt = 1e-5
chain = build_chain(sample_driving(1.0, dt, seed=7), p)
_, curve = full_trace(chain)
print(f"kappa=2: d={p.d:.4f}, {len(curve) - 1} steps, tip {curve[-1]:.4f}")

eps = minkowski_window(chain.slit_height)
fit = minkowski_content(curve, eps, p.d)
print(f"area slope {fit.slope:.4f} (2 - d = {2 - p.d:.4f})")
for e, c in zip(fit.eps, fit.content):
    print(f"  eps={e:.2e}  eps^(d-2) area = {c:.4f}")

meshes = [100, 1000, 10000]
for m, v in zip(meshes, d_variation(curve, p.d, meshes)):
    print(f"d-variation, {m:>5} pieces: {v:.4f}")
