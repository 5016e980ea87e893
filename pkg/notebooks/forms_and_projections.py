"""
Forms, basepoints and the two projections
=========================================

Build the form of signature (2, 2), pick a timelike basepoint, and compare
the two scalar projections of group elements with their explicit
factorizations.
"""
# %%
import numpy as np
from scipy.linalg import expm

from pqlab import pseudometric as pm
from pqlab.qlinalg import QSpace, form_residual, lie_algebra_element

sp = QSpace(2, 2)
frame = pm.make_frame(sp, sp.basis(3))
print("reflection fixing o:\n", frame.Jo)

# %%
# A random group element: the exponential of a Lie algebra element.
rng = np.random.default_rng(0)
g = expm(lie_algebra_element(sp, rng.standard_normal((4, 4))))
print("form residual", form_residual(sp, g))
print("class of (o, g.o):", pm.classify_pair(frame, g @ frame.o_hat).value)

# %%
# The two projections. The operator-norm one always dominates.
bo, bt = pm.b_o(frame, g), pm.b_tau(frame, g)
print(f"b_o = {bo:.6f}   b_tau = {bt:.6f}   orbit length = {pm.orbit_length(frame, g):.6f}")

# %%
# Factorizations recover the same scalars.
K, s, H = pm.decompose_KBH(frame, g)
print("KBH s =", s, " residual", np.linalg.norm(K @ frame.boost(s) @ H - g))
H1, s, H2 = pm.decompose_HBH(frame, g)
print("HBH s =", s, " residual", np.linalg.norm(H1 @ frame.boost(s) @ H2 - g))

# %%
# The symmetric-space distance reached by sampling the stabilizer of o
# approaches b_tau from above.
for n in (1, 16, 256, 2048):
    print(n, pm.min_dist_sampling_check(frame, g, n))
