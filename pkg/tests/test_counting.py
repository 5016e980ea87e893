import json
import math

import numpy as np
import pytest

from pqlab import counting as ct
from pqlab import pseudometric as pm
from pqlab import wordgroup as wg
from pqlab.qlinalg import QSpace, lambda1
from pqlab.repbuilder import Representation, embed_block, perpendicular_axes, schottky_so_m1


@pytest.fixture(scope="module")
def rep44(space22):
    return embed_block(schottky_so_m1(2, perpendicular_axes(), [4.0, 4.0]), space22)


@pytest.fixture(scope="module")
def ref_series(ref_frame, ref_rep):
    return ct.count_series_b_o(ref_frame, ref_rep, 10)


# ------------------------------------------------------------ counts


def test_identity_counted(ref_frame, ref_rep):
    for fn in (ct.count_series_b_o, ct.count_series_b_tau):
        s = fn(ref_frame, ref_rep, 4, [0.0])
        assert s.counts[0] == 1


def test_small_t_exhaustive_oracle(ref_frame, rep44):
    grid = np.array([0.0, 1.0, 3.9, 3.999, 4.0 + 1e-9, 5.0, 7.9])
    for mode, b in (("b_o", pm.b_o), ("b_tau", pm.b_tau)):
        s = ct.count_series(ref_frame, rep44, 3, grid, mode)
        vals = [b(ref_frame, rep44.evaluate(w)) for w in wg.ball(2, 3)]
        oracle = [sum(v <= t for v in vals) for t in grid]
        assert list(s.counts) == oracle
        # below the generator length only the identity; at 4 the four generators join
        assert list(s.counts[:4]) == [1, 1, 1, 1] and s.counts[4] == 5
        assert s.complete[:4].all()


def test_tau_counts_below_o_counts(ref_frame, bent_rep):
    grid = np.linspace(0, 30, 121)
    so = ct.count_series_b_o(ref_frame, bent_rep, 8, grid)
    st = ct.count_series_b_tau(ref_frame, bent_rep, 8, grid)
    assert np.all(st.counts <= so.counts)
    assert np.any(st.counts < so.counts)
    assert so.exceptional == 0


def test_monotone_and_complete_prefix(ref_series):
    assert np.all(np.diff(ref_series.counts) >= 0)
    c = ref_series.complete
    # completeness is a prefix of the grid
    assert not np.any(c[1:] & ~c[:-1])
    assert ref_series.t_certified == pytest.approx(40.0)


def test_completeness_stable_under_deeper_enumeration(ref_frame, bent_rep):
    grid = np.linspace(0, 40, 161)
    prev = ct.count_series_b_o(ref_frame, bent_rep, 4, grid)
    for L in range(5, 9):
        cur = ct.count_series_b_o(ref_frame, bent_rep, L, grid)
        assert np.array_equal(cur.counts[prev.complete], prev.counts[prev.complete])
        assert np.all(cur.complete >= prev.complete)
        prev = cur


def test_certificate_rule():
    assert ct._certificate([], 5) == 0.0
    assert ct._certificate([(1, 4.0), (2, 8.0), (3, 12.0)], 3) == 12.0
    # minima decreasing over the last three spheres: nothing certified
    assert ct._certificate([(1, 4.0), (2, 8.0), (3, 6.0), (4, 9.0)], 4) == 0.0
    assert ct._certificate([(1, 4.0), (2, 3.0)], 2) == 3.0


def test_threads_and_cache_do_not_change_counts(ref_frame, ref_rep):
    grid = np.linspace(0, 30, 50)
    a = ct.count_series_b_o(ref_frame, ref_rep, 8, grid)
    b = ct.count_series_b_o(ref_frame, ref_rep, 8, grid, threads=4)
    assert np.array_equal(a.counts, b.counts)

    class Mem:
        def __init__(self):
            self.d = {}

        def load(self, mode, L):
            return self.d.get((mode, L))

        def store(self, mode, L, v, e):
            self.d[(mode, L)] = (v, e)

    m = Mem()
    c1 = ct.count_series_b_o(ref_frame, ref_rep, 8, grid, cache=m)
    c2 = ct.count_series_b_o(ref_frame, ref_rep, 8, grid, cache=m)
    assert len(m.d) == 9
    assert np.array_equal(c1.counts, a.counts) and np.array_equal(c2.counts, a.counts)


def test_margin_violation(space22, ref_rep):
    f4 = pm.make_frame(space22, space22.basis(4))
    with pytest.raises(ValueError):
        ct.count_series_b_o(f4, ref_rep, 4)
    # the tau count is total
    ct.count_series_b_tau(f4, ref_rep, 4)


def test_exceptional_bucket_constant(ref_frame, bent_rep):
    ex = [ct.count_series_b_o(ref_frame, bent_rep, L, [0.0]).exceptional for L in range(2, 8)]
    assert len(set(ex)) == 1


# ------------------------------------------------------------ fitting


def _synthetic(h=0.7, M=3.0, tmax=20.0, n=400):
    t = np.linspace(0, tmax, n)
    N = np.ceil(np.exp(h * t) / M)
    return ct.CountSeries(t, N, np.ones(n, bool), 0, 0)


def test_fit_synthetic():
    fit = ct.fit_asymptotic(_synthetic())
    assert abs(fit.h - 0.7) < 0.05 * 0.7
    assert abs(fit.M - 3.0) < 0.05 * 3.0
    fit2 = ct.fit_asymptotic(_synthetic(), h=0.7)
    assert abs(fit2.M - 3.0) < 0.05 * 3.0
    assert fit2.residual < 0.01
    assert fit.window[1] == pytest.approx(20.0)


def test_fit_errors():
    t = np.linspace(0, 10, 50)
    const = ct.CountSeries(t, np.full(50, 7), np.ones(50, bool), 0, 0)
    with pytest.raises(ct.InsufficientDataError):
        ct.fit_asymptotic(const)
    incomplete = ct.CountSeries(t, np.arange(50) + 1, np.zeros(50, bool), 0, 0)
    with pytest.raises(ct.InsufficientDataError):
        ct.fit_asymptotic(incomplete)
    few = ct.CountSeries(t[:5], np.arange(5) + 1, np.ones(5, bool), 0, 0)
    with pytest.raises(ct.InsufficientDataError):
        ct.fit_asymptotic(few)


def test_fit_excludes_incomplete_points():
    s = _synthetic()
    s.complete[300:] = False
    s.counts[300:] = 1  # garbage beyond the certified range must be ignored
    fit = ct.fit_asymptotic(s)
    assert abs(fit.h - 0.7) < 0.05 * 0.7
    assert fit.window[1] <= s.tGrid[299]


def test_reference_fit_residual_improves_to_the_right(ref_frame, ref_rep):
    s = ct.count_series_b_o(ref_frame, ref_rep, 12)
    fit = ct.fit_asymptotic(s)
    assert 0.2 < fit.h < 0.3
    left = ct.CountSeries(s.tGrid, s.counts, s.complete & (s.tGrid < 0.6 * s.t_certified), 12, 0)
    fl = ct.fit_asymptotic(left, h=fit.h)
    assert fit.residual < fl.residual


# ------------------------------------------------------------ entropy


def test_entropy_reference(ref_rep):
    e = ct.entropy_from_periods(ref_rep, 10)
    assert e.h > 0 and not e.degenerate
    assert np.all(np.diff(e.counts) >= 0)
    with pytest.raises(ValueError):
        ct.entropy_from_periods(ref_rep, 3)


def test_entropy_single_generator_degenerate(ref_rep):
    one = Representation(ref_rep.space, ref_rep.generators[:1])
    e = ct.entropy_from_periods(one, 10)
    assert e.degenerate
    # classes a^n and a^-n: two per cyclic length
    assert e.classes == 20


def test_entropy_conjugation_invariant(ref_rep, rng, group_element):
    u = group_element(ref_rep.space, rng, 0.5)
    a = ct.entropy_from_periods(ref_rep, 10).h
    b = ct.entropy_from_periods(ref_rep.conjugate(u), 10).h
    assert abs(a - b) <= 0.02 * a


def test_class_spectrum_weights(ref_rep):
    # weights sum to the number of conjugacy classes of each cyclic length
    for L, lam, w in ct.class_spectrum(ref_rep, 6):
        n = sum(1 for c in wg.conjugacy_classes(2, L) if len(c.letters) == L)
        assert round(w.sum()) == n
    for L, lam, w in ct.class_spectrum(ref_rep, 6, primitive_only=True):
        n = sum(1 for c in wg.conjugacy_classes(2, L) if len(c.letters) == L and c.primitive)
        assert round(w.sum()) == n


# ------------------------------------------------------------ weak triangle


def test_weak_triangle(ref_frame, ref_rep, bent_rep):
    r = ct.weak_triangle_check(ref_frame, ref_rep, (), 8)
    assert r.empirical == 0 and r.holds
    for f in ((1,), (2,), (1, 2), (-2, 1, 1)):
        r = ct.weak_triangle_check(ref_frame, bent_rep, f, 8)
        assert r.holds
        assert r.empirical > 0


def test_weak_triangle_bound_stabilizes(ref_frame, bent_rep):
    b = [ct.weak_triangle_check(ref_frame, bent_rep, (1,), L).bound for L in (6, 8, 10)]
    assert abs(b[2] - b[1]) < 0.05 * b[1]


# ------------------------------------------------------------ equidistribution


def test_equidistribution(ref_frame, ref_rep, ref_series):
    fit = ct.fit_asymptotic(ref_series)
    t = np.linspace(0.6, 1.0, 20) * ref_series.t_certified * 0.999
    tab = ct.equidistribution_stat(ref_frame, ref_rep, ["one", "point_e1_sq", "hyperplane_e2_sq"],
                                   "b_o", fit.h, fit.M, t, 10)
    assert tab.shape == (20, 4)
    # f = 1 reproduces the count times M e^{-ht}
    N = ct.count_series_b_o(ref_frame, ref_rep, 10, t).counts
    assert np.allclose(tab[:, 1], N * fit.M * np.exp(-fit.h * t))
    assert abs(np.mean(tab[:, 1]) - 1) < 0.1
    for col in (2, 3):
        assert np.std(tab[:, col]) / np.mean(tab[:, col]) < 0.2
    assert abs(np.mean(tab[:, 2]) - np.mean(tab[:, 3])) > 0.03


# ------------------------------------------------------------ lattice test


def test_lattice_synthetic():
    v = ct.spectrum_lattice_test([1.0, 2.0, 3.0], min_values=3)
    assert v.lattice and v.best_a == pytest.approx(1.0)
    v = ct.spectrum_lattice_test([1.0, math.sqrt(2)], min_values=2)
    assert not v.lattice
    with pytest.raises(ct.InsufficientDataError):
        ct.spectrum_lattice_test([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ct.spectrum_lattice_test(Representation(QSpace(2, 2), [np.eye(4)]))


def test_lattice_brute_force_agrees():
    rng = np.random.default_rng(3)
    vals = 0.37 * rng.integers(1, 40, 30)
    v = ct.spectrum_lattice_test(vals)
    assert v.lattice
    # the largest lattice spacing is 0.37 times the gcd of the multipliers
    g = np.gcd.reduce(np.round(vals / 0.37).astype(int))
    assert v.best_a == pytest.approx(0.37 * g)


def test_lattice_reference_and_commensurable(ref_rep, rep44):
    assert not ct.spectrum_lattice_test(ref_rep, 8).lattice
    # lengths (4, 4) give a spectrum that is not in 4Z either (products mix), still non-lattice
    v = ct.spectrum_lattice_test(rep44, 8)
    assert not v.lattice


# ------------------------------------------------------------ output


def test_writers(tmp_path):
    s = ct.CountSeries([0.0, 0.5], [1, 3], [True, False], 4, 0)
    fit = ct.AsymptoticFit(0.5, 2.0, (0.0, 0.5), 0.1, 2)
    p = tmp_path / "s.csv"
    ct.write_series_csv(p, s, fit)
    raw = p.read_bytes()
    assert raw == (b"t,N,complete,Mehat\r\n0.0,1,1,2.0\r\n"
                   + f"0.5,3,0,{3 * 2.0 * math.exp(-0.25)!r}\r\n".encode())
    ct.write_series_csv(p, s)
    assert p.read_bytes().splitlines()[1] == b"0.0,1,1,"
    j = tmp_path / "s.json"
    ct.write_json(j, ct.fit_summary(s, fit, extra=1))
    d = json.loads(j.read_text())
    assert d["h"] == 0.5 and d["extra"] == 1 and d["window"] == [0.0, 0.5]
    assert list(d) == sorted(d)
