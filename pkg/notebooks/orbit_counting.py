"""
Orbit counting and the growth exponent
======================================

Count group elements by both projections on the reference Schottky group,
fit N(t) ~ e^{ht}/M over the certified range, and compare h with the
growth rate of the length spectrum.
"""
# %%
import numpy as np

from pqlab import counting as ct
from pqlab import pseudometric as pm
from pqlab.qlinalg import QSpace
from pqlab.repbuilder import reference_representation

sp = QSpace(2, 2)
rep = reference_representation(sp)
frame = pm.make_frame(sp, sp.basis(3))

so = ct.count_series_b_o(frame, rep, 12)
st = ct.count_series_b_tau(frame, rep, 12)
print("certified for t <", so.t_certified, " exceptional elements:", so.exceptional)

# %%
fo, ft = ct.fit_asymptotic(so), ct.fit_asymptotic(st)
print(f"b_o:   h = {fo.h:.4f}  M = {fo.M:.4f}  tail CV = {fo.residual:.3f}")
print(f"b_tau: h = {ft.h:.4f}  M = {ft.M:.4f}  tail CV = {ft.residual:.3f}")

# %%
e = ct.entropy_from_periods(rep, 12)
print(f"length spectrum growth h = {e.h:.4f} from {e.classes} classes")

# %%
# Tail statistic N(t) M e^{-ht} across the fit window.
sel = (so.tGrid >= fo.window[0]) & (so.tGrid <= fo.window[1])
ratio = so.counts[sel] * fo.M * np.exp(-fo.h * so.tGrid[sel])
print(np.round(ratio[::20], 3))
