"""Operation-count estimates for coupled versus global models.

Prints the online speedup of the coupled model over a global sparse
model for the 1D Burgers split and for a 2D example, then how the
speedup falls as the full-order region grows.

Run with ``python demos/cost_estimates.py``.
"""

import numpy as np

from romfom.costmodel import CostParams, offline_ratios, online_speedup, speedup_grid

burgers = CostParams(n=500, n_F=250, r=10, s=3, k=2, n_I=2, n_T=360)
print(f"Burgers split: online speedup {online_speedup(burgers):.2f}")
for name, value in offline_ratios(burgers).items():
    print(f"  offline cost ratio {name}: {value:.3f}")

# A 2D five-point-stencil grid with a square full-order patch; the
# interface size is estimated from the patch size.
plate = CostParams(n=10_000, n_F=1000, r=10, s=9, k=1, d=2)
print(f"2D example: n_I = {plate.n_I}, online speedup {online_speedup(plate):.2f}")

print("\nspeedup versus n_F / n (Burgers sizes)")
for frac, value in speedup_grid(burgers, "n_F/n", np.linspace(0.1, 1.0, 10)):
    print(f"  {frac:4.1f}  {value:6.3f}")
