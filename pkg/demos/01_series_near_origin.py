"""
Series evaluation near the origin
=================================

Z(x, y, r) is the integral of exp(sum_{i<=j} x_ij t_i t_j + y.t) over the
sphere of radius r.  For diagonal x and small parameters the power series
converges fast and comes with a rigorous tail bound.
"""
import math

import numpy as np

from fbhgm.model import DiagParams
from fbhgm.series import choose_order, series_state, series_value, truncation_bound

# Two closed forms to start with: a pure linear term on S^2 and an isotropic
# quadratic term on the circle.
p = DiagParams([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
print("S^2, y = e3     :", series_value(p, 30), " exact", 4 * math.pi * math.sinh(1.0))
p = DiagParams([0.3, 0.3], [0.0, 0.0])
print("S^1, x = 0.3 I  :", series_value(p, 30), " exact", 2 * math.pi * math.exp(0.3))

# The truncation error of order N is bounded in terms of
# L = r^2 sum(|x_i| + y_i^2).  The bound is honest and not far from the truth.
p = DiagParams([0.4, -0.2, 0.1], [0.3, 0.1, -0.2])
exact = series_value(p, 60)
print(f"\nL = {p.L:.3f}")
print(" N   actual tail   bound")
for order in (2, 4, 6, 8, 10):
    tail = abs(exact - series_value(p, order))
    print(f"{order:2d}   {tail:.3e}   {truncation_bound(p, order + 1):.3e}")
print("order chosen for 1e-14 absolute:", choose_order(p, 1e-14))

# The same sum also gives the state (dZ/dy_i, d2Z/dy_i^2).  Since t.t = r^2
# on the sphere, the second derivatives add up to r^2 Z.
res = series_state(p, 40)
print("\nstate             :", np.round(res.state.entries, 10))
print("sum of d2Z / r^2  :", res.state.value, " Z:", res.value)
