"""
Equidistribution, weak triangle inequality and the length spectrum
==================================================================

Weighted orbit sums with test functions, the weak triangle bound, and the
check that translation lengths do not lie on a lattice.
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
series = ct.count_series_b_o(frame, rep, 11)
fit = ct.fit_asymptotic(series)

# %%
t = np.linspace(fit.window[0], fit.window[1], 10)
tab = ct.equidistribution_stat(frame, rep, list(ct.BUILTIN_TESTS), "b_o", fit.h, fit.M, t, 11)
print("t, " + ", ".join(ct.BUILTIN_TESTS))
print(np.round(tab, 4))

# %%
for f in ((1,), (2,), (1, 2)):
    r = ct.weak_triangle_check(frame, rep, f, 10, min_length=0)
    print(f, "empirical", round(r.empirical, 6), "bound", round(r.bound, 6), r.holds)

# %%
print(ct.spectrum_lattice_test(rep, 8))
print(ct.spectrum_lattice_test([1.0, 2.0, 3.0], min_values=3))
