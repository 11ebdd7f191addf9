"""Effect of the diagonal (Gershgorin) weight on a learned stencil operator.

The sparse full-order block of the Burgers model is refit with the
Tikhonov weight held fixed while the diagonal weight grows. Each value
shifts the disk centers of the assembled linear operator to the left;
the printed table tracks the rightmost eigenvalue and the rightmost
disk edge. A stable linear block does not by itself guarantee a stable
coupled run: the quadratic terms and the reduced/full-order coupling
also shape the trajectory, and too large a weight degrades the fit.

Run with ``python demos/stability_regularization.py``.
"""

import copy

import numpy as np

from romfom import pipeline
from romfom.burgers import BurgersConfig, simulate_reference
from romfom.diagnostics import gershgorin_disks

bc = BurgersConfig()
S = simulate_reference(bc)
g = bc.graph()
cfg = pipeline.merge_config()
dd = pipeline.build_decomposition(cfg, g, bc)

M = pipeline.train(cfg, S, g, dd, seed=0)
eta1 = M.fom.fit_info["eta1"]
print(f"L-curve choice for the stencil block: eta1 = {eta1:.3g}")
print(f"{'eta2':>10} {'max Re(lambda)':>16} {'max disk edge':>15} {'test error':>11}")
for ratio in (0.0, 1.0, 10.0, 50.0, 200.0):
    run = copy.deepcopy(cfg)
    run["regularization"]["fom"] = {"eta1": eta1, "eta2": ratio * eta1,
                                    "scales": cfg["regularization"]["fom"]["scales"]}
    Mk = pipeline.train(run, S, g, dd, seed=0)
    disks = gershgorin_disks(Mk.fom.assemble_linear())
    edge = np.max(disks.centers + disks.radii)
    _, res = pipeline.evaluate(run, Mk, S)
    err = res["test_error"]
    err = f"{err:11.4f}" if np.isfinite(err) else f"{'diverged':>11}"
    print(f"{ratio * eta1:10.3g} {np.max(disks.eigenvalues.real):16.4e} {edge:15.4e} {err}")
