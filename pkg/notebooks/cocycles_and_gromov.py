"""
Cocycles, periods and Gromov products on the boundary
=====================================================

Boundary points are eventually periodic reduced words.  Evaluate the two
cocycles, their periods, and the Gromov product identities.
"""
# %%
from pqlab import dynsys as ds
from pqlab import pseudometric as pm
from pqlab import wordgroup as wg
from pqlab.qlinalg import QSpace, lambda1
from pqlab.repbuilder import deform, reference_representation

sp = QSpace(2, 2)
rep = deform(reference_representation(sp), 0.05, seed=1)
frame = pm.make_frame(sp, sp.basis(3))

x = ds.boundary_point(rep, prefix=wg.parse("bA"), core=wg.parse("ab"))
print(x, "lies on an isotropic line:", abs(x.unit @ sp.form @ x.unit) < 1e-12)

# %%
# Cocycle law along a product.
g0, g1 = wg.parse("abB"), wg.parse("bbA")
g1x, _ = ds.translate(rep, g1, x)
lhs = ds.cocycle_c_o(frame, rep, wg.multiply(g0, g1), x)
rhs = ds.cocycle_c_o(frame, rep, g0, g1x) + ds.cocycle_c_o(frame, rep, g1, x)
print("cocycle law:", lhs, rhs)

# %%
# Periods at the attracting fixed point equal the top Lyapunov exponent.
for w in ("a", "ab", "aBB", "abAB"):
    g = wg.parse(w)
    xp = ds.attracting_point(rep, g)
    print(w, lambda1(rep.evaluate(g)), ds.cocycle_c_o(frame, rep, g, xp),
          ds.cocycle_c_tau(frame, rep, g, xp))

# %%
# Gromov product of the two fixed points against the fixed-point cross ratio.
g = wg.parse("aB")
xm, xp = ds.repelling_point(rep, g), ds.attracting_point(rep, g)
print(ds.gromov_o(frame, rep, xm, xp), -0.5 * ds.fixed_point_cross_ratio(frame, rep, g))

# %%
# Residuals comparing the projections of g^n with lambda_1 shrink with n.
for n in range(1, 7):
    print(n, ds.benoist_residuals(frame, rep, g * n))
