"""
Normalizing constants far from the origin (d = 4)
=================================================

For x = diag(a, 2a, 3a, 4a, 5a) and y = (1.5, 1.2, 0.9, 0.6, 0.3) the series
alone is useless once a grows.  The series is summed at a rescaled point on
the unit sphere and the holonomic system in r carries the state out.
"""
import time

from fbhgm.cli import table1_params
from fbhgm.hgm import eval_diag_state, perturbed_ensemble

published = {0.5: 189.243, 1.0: 985.529, 2.0: 39075.8, 5.0: 1.52663e10, 10.0: 2.41579e20}

print("  a        value                published      rel.err    sd/value   ODE steps")
for a, ref in published.items():
    p = table1_params(a)
    t = time.time()
    state, info = eval_diag_state(p)
    est = perturbed_ensemble(p, replicas=50, seed=1)
    print(f"{a:4.1f}  {state.value:22.10g}  {ref:12.6g}  {abs(state.value / ref - 1):9.2e}"
          f"  {est.sd / est.value:9.2e}  {info.steps:5d}   ({time.time() - t:.2f} s)")

# The error estimate comes from perturbing the initial series state by
# Gaussian noise of size eps/2 (default eps = 1e-5) and re-running the ODE.
