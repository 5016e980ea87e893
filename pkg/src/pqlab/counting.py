"""Orbit counting, entropy, asymptotic fits and related diagnostics.

The counting functions are

    N_o(t)   = #{gamma : b_o(rho(gamma)) <= t}
    N_tau(t) = #{gamma : b_tau(rho(gamma)) <= t}

over the ball of radius Lmax in F_k.  Elements whose orbit point is not
space-like from o enter N_o at value 0 and are also counted separately.
A count at t is flagged complete when every element of the outermost sphere
has value > t and the per-sphere minima did not decrease over the last three
spheres, an empirical stand-in for the linear growth of b along words.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import wordgroup as wg
from .pseudometric import BasepointFrame, orbit_values, omega_margin
from .repbuilder import Representation, limit_set_sample

DEFAULT_WINDOW = 0.4
MIN_FIT_POINTS = 10


class InsufficientDataError(ValueError):
    pass


@dataclass
class CountSeries:
    tGrid: np.ndarray
    counts: np.ndarray
    complete: np.ndarray
    depth: int                      # enumeration depth Lmax
    exceptional: int
    mode: str = "b_o"
    sphere_minima: list = field(default_factory=list)
    t_certified: float = 0.0

    def __post_init__(self):
        self.tGrid = np.asarray(self.tGrid, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.complete = np.asarray(self.complete, dtype=bool)


@dataclass
class AsymptoticFit:
    h: float
    M: float
    window: tuple
    residual: float
    npoints: int = 0


# ------------------------------------------------------------ enumeration


def _values(frame, M, mode, threads):
    if threads <= 1 or len(M) < 4096:
        return orbit_values(frame, M, mode)
    chunks = np.array_split(np.arange(len(M)), threads)
    with ThreadPoolExecutor(threads) as ex:
        parts = list(ex.map(lambda idx: orbit_values(frame, M[idx], mode), chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sphere_values(frame: BasepointFrame, rep: Representation, Lmax: int, mode: str,
                  threads: int = 1):
    """Yield (L, words, values, exceptional mask) for each sphere up to Lmax."""
    for L, W, M in rep.spheres(Lmax):
        vals, exc = _values(frame, M, mode, threads)
        yield L, W, vals, exc


def _certificate(minima: list, Lmax: int) -> float:
    if not minima:
        return 0.0
    last = [m for L, m in minima if L >= Lmax - 2 and L >= 1]
    if len(last) < 3 or any(b < a for a, b in zip(last, last[1:])):
        return 0.0 if Lmax > 2 else float(minima[-1][1])
    return float(last[-1])


def _check_margin(frame, rep, L=6, tol=1e-9):
    try:
        sample = limit_set_sample(rep, L, frame.tau)
    except ValueError:
        return
    m = omega_margin(frame, sample)
    if m <= tol:
        raise ValueError(f"basepoint is outside the domain of discontinuity (margin {m:.2e})")


def count_series(frame: BasepointFrame, rep: Representation, Lmax: int, tGrid=None,
                 mode: str = "b_o", threads: int = 1, check_margin: bool = True,
                 cache=None, npoints: int = 400) -> CountSeries:
    """N(t) on ``tGrid``; with tGrid None, ``npoints`` points spanning the certified range.

    ``cache`` is an optional object with ``load(mode, L)`` returning
    (values, exceptional mask) or None, and ``store(mode, L, values, mask)``.
    """
    if mode == "b_o" and check_margin:
        _check_margin(frame, rep)
    per = None
    if cache is not None:
        per = [cache.load(mode, L) for L in range(Lmax + 1)]
        if any(x is None for x in per):
            per = None
    if per is None:
        per = []
        for L, _, vals, exc in sphere_values(frame, rep, Lmax, mode, threads):
            per.append((vals, exc))
            if cache is not None:
                cache.store(mode, L, vals, exc)
    minima = [(L, float(v.min())) for L, (v, _) in enumerate(per) if L >= 1]
    exc_total = int(sum(int(e.sum()) for _, e in per))
    v = np.sort(np.concatenate([v for v, _ in per]))
    tc = _certificate(minima, Lmax)
    if tGrid is None:
        tGrid = np.linspace(0.0, tc, npoints + 1)[:-1]
    tGrid = np.asarray(tGrid, dtype=float)
    counts = np.searchsorted(v, tGrid, side="right")
    return CountSeries(tGrid, counts, tGrid < tc, Lmax, exc_total, mode, minima, tc)


def count_series_b_o(frame, rep, Lmax, tGrid=None, **kw) -> CountSeries:
    return count_series(frame, rep, Lmax, tGrid, "b_o", **kw)


def count_series_b_tau(frame, rep, Lmax, tGrid=None, **kw) -> CountSeries:
    return count_series(frame, rep, Lmax, tGrid, "b_tau", **kw)


# ------------------------------------------------------------ fitting


def fit_asymptotic(series: CountSeries, h: Optional[float] = None,
                   window: float = DEFAULT_WINDOW) -> AsymptoticFit:
    """Fit N(t) ~ e^{ht} / M over the top ``window`` fraction of the certified range."""
    t, N, ok = series.tGrid, series.counts.astype(float), series.complete & (series.counts > 0)
    if not ok.any():
        raise InsufficientDataError("no complete counts")
    tHi = float(t[ok].max())
    tLo = tHi - window * (tHi - float(t[ok].min()))
    sel = ok & (t >= tLo) & (t <= tHi)
    if sel.sum() < MIN_FIT_POINTS:
        raise InsufficientDataError(f"only {int(sel.sum())} complete points in the fit window")
    ts, Ns = t[sel], N[sel]
    if h is None:
        if np.ptp(Ns) == 0:
            raise InsufficientDataError("count is constant over the fit window")
        slope, icpt = np.polyfit(ts, np.log(Ns), 1)
        h = float(slope)
        if h <= 0:
            raise InsufficientDataError(f"fitted exponent {h:.3g} is not positive")
        M = float(np.exp(-icpt))
    else:
        M = float(np.mean(np.exp(h * ts) / Ns))
    ratio = Ns * M * np.exp(-h * ts)
    return AsymptoticFit(float(h), M, (float(ts.min()), float(ts.max())),
                         float(np.std(ratio) / np.mean(ratio)), int(sel.sum()))


# ------------------------------------------------------------ periods


def _period_weights(W: np.ndarray) -> np.ndarray:
    """1 / (number of distinct rotations) for each row of cyclic words."""
    n = W.shape[1]
    period = np.full(len(W), n)
    for s in sorted(s for s in range(1, n) if n % s == 0):
        hit = np.all(W == np.roll(W, s, axis=1), axis=1) & (period == n)
        period[hit] = s
    return 1.0 / period


def class_spectrum(rep: Representation, Lmax: int, primitive_only: bool = False):
    """Yield (n, lambda_1 values, class weights) per cyclic length n = 1..Lmax.

    Every cyclically reduced word of length n is listed; weights add up to one
    per conjugacy class.
    """
    for L, W, M in rep.spheres(Lmax, start=1):
        keep = np.ones(len(W), bool) if L == 1 else W[:, 0] != -W[:, -1]
        W, M = W[keep], M[keep]
        lam = np.log(np.max(np.abs(np.linalg.eigvals(M)), axis=1))
        w = _period_weights(W)
        if primitive_only:
            w = np.where(w == 1.0 / L, w, 0.0)
        yield L, lam, w


@dataclass
class EntropyEstimate:
    h: float
    window: tuple
    t_certified: float
    tGrid: np.ndarray
    counts: np.ndarray
    degenerate: bool
    classes: int

    def __float__(self):
        return self.h


def entropy_from_periods(rep: Representation, Lmax: int, window: float = DEFAULT_WINDOW,
                         npoints: int = 200, prime_correction: bool = True) -> EntropyEstimate:
    """Growth rate h of #{[gamma] : lambda_1(rho(gamma)) <= t}.

    With ``prime_correction`` the fit is of log(t N(t)) against t, which
    removes the 1/t prefactor of the prime orbit asymptotic N ~ e^{ht}/(ht);
    otherwise log N(t) is fitted directly.
    """
    if Lmax < 4:
        raise ValueError("Lmax must be >= 4")
    lams, wts, minima = [], [], []
    for L, lam, w in class_spectrum(rep, Lmax):
        lams.append(lam)
        wts.append(w)
        minima.append((L, float(lam.min())))
    lam = np.concatenate(lams)
    w = np.concatenate(wts)
    order = np.argsort(lam)
    lam, cw = lam[order], np.cumsum(w[order])
    tc = _certificate(minima, Lmax)
    classes = int(round(cw[-1]))
    t = np.linspace(0.0, tc, npoints, endpoint=False)[1:]
    idx = np.searchsorted(lam, t, side="right")
    N = np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)
    N = np.round(N).astype(np.int64)
    degenerate = rep.k < 2
    tLo = (1 - window) * tc
    sel = (t >= tLo) & (N > 0)
    if sel.sum() < MIN_FIT_POINTS:
        raise InsufficientDataError("too few classes in the certified window")
    y = np.log(N[sel]) + (np.log(t[sel]) if prime_correction else 0.0)
    h = float(np.polyfit(t[sel], y, 1)[0])
    if h <= 1e-6:
        degenerate = True
    return EntropyEstimate(h, (float(t[sel].min()), float(t[sel].max())), tc, t, N,
                           degenerate, classes)


# ------------------------------------------------------------ diagnostics


@dataclass
class WeakTriangle:
    empirical: float
    bound: float
    D_f: float
    c: float

    @property
    def holds(self) -> bool:
        return self.empirical <= self.bound + 1e-9 * max(1.0, abs(self.bound))


def weak_triangle_check(frame: BasepointFrame, rep: Representation, f, Lmax: int,
                        min_length: Optional[int] = None) -> WeakTriangle:
    """max of b_o(rho(f gamma)) - b_o(rho(gamma)) over gamma with min_length <= |gamma| <= Lmax.

    The bound is D_f + c with D_f = 1/2 log|rho(f)|_tau + 1/2 log|rho(f^-1)|_tau
    and c the largest b_tau - b_o over the same gammas.
    """
    f = wg.reduce(f)
    F = rep.evaluate(f)
    Fi = rep.evaluate(wg.inverse(f))
    D = 0.5 * np.log(frame.tau.op_norm(F)) + 0.5 * np.log(frame.tau.op_norm(Fi))
    lo = Lmax // 2 if min_length is None else min_length
    emp, c = -np.inf, 0.0
    for L, W, M in rep.spheres(Lmax, start=lo):
        bo, exc = orbit_values(frame, M, "b_o")
        bt, _ = orbit_values(frame, M, "b_tau")
        bf, excf = orbit_values(frame, F @ M, "b_o")
        ok = ~exc & ~excf
        if ok.any():
            emp = max(emp, float(np.max(bf[ok] - bo[ok])))
            c = max(c, float(np.max(bt[ok] - bo[ok])))
    return WeakTriangle(float(emp), float(D + c), float(D), float(c))


def _unit_rows(X):
    return X / np.linalg.norm(X, axis=1, keepdims=True)


BUILTIN_TESTS: dict = {
    "one": lambda th, v: np.ones(len(v)),
    "point_e1_sq": lambda th, v: v[:, 0] ** 2,
    "hyperplane_e2_sq": lambda th, v: th[:, 1] ** 2,
}


def equidistribution_stat(frame: BasepointFrame, rep: Representation, testFns, mode: str,
                          h: float, M: float, tGrid, Lmax: int):
    """Rows (t, M e^{-ht} sum f(rho(g^-1) . o-perp, rho(g) . o)) for each test function.

    Test functions take (theta, v): stacked unit covectors of the hyperplanes
    rho(g^-1) . o-perp and unit representatives of the points rho(g) . o.
    """
    fns = [BUILTIN_TESTS[f] if isinstance(f, str) else f for f in testFns]
    Q = frame.space.form
    b_all, F_all = [], []
    for L, W, Mats in rep.spheres(Lmax):
        vals, _ = orbit_values(frame, Mats, mode)
        v = _unit_rows(Mats @ frame.o_hat)
        th = _unit_rows(np.einsum("nji,j->ni", Mats, Q @ frame.o_hat))
        b_all.append(vals)
        F_all.append(np.column_stack([fn(th, v) for fn in fns]))
    b = np.concatenate(b_all)
    Fv = np.concatenate(F_all)
    order = np.argsort(b)
    b, cs = b[order], np.cumsum(Fv[order], axis=0)
    tGrid = np.asarray(tGrid, dtype=float)
    idx = np.searchsorted(b, tGrid, side="right")
    sums = np.where(idx[:, None] > 0, cs[np.maximum(idx - 1, 0)], 0.0)
    return np.column_stack([tGrid, M * np.exp(-h * tGrid)[:, None] * sums])


@dataclass
class LatticeVerdict:
    lattice: bool
    best_a: float
    best_distance: float
    tested: int


def spectrum_lattice_test(spectrum, Lmax: Optional[int] = None, aGrid=None, tol: float = 1e-6,
                          aMin: float = 0.05, min_values: int = 20) -> LatticeVerdict:
    """Decide whether the values lie in a Z for some a >= aMin.

    ``spectrum`` is a Representation (primitive-class lambda_1 up to cyclic
    length Lmax) or an explicit list of values.  Any lattice a containing the
    values divides the smallest one, so the candidates lambda_min / m are
    always tested in addition to ``aGrid``.
    """
    if isinstance(spectrum, Representation):
        if Lmax is None:
            raise ValueError("Lmax is required for a representation")
        vals = np.concatenate([lam[w > 0] for _, lam, w in class_spectrum(spectrum, Lmax, True)])
    else:
        vals = np.asarray(spectrum, dtype=float)
    vals = np.unique(np.round(vals, 12))
    vals = vals[vals > 0]
    if len(vals) < min_values:
        raise InsufficientDataError(f"{len(vals)} distinct values, need {min_values}")
    lo = vals.min()
    cands = [lo / m for m in range(1, int(math.floor(lo / aMin)) + 1)]
    grid = np.asarray(aGrid if aGrid is not None else [], dtype=float)
    a = np.unique(np.r_[grid, cands])
    a = a[a >= aMin]
    dist = np.empty(len(a))
    for i in range(0, len(a), 512):
        aa = a[i:i + 512, None]
        r = vals[None, :] / aa
        dist[i:i + 512] = np.max(np.abs(r - np.round(r)) * aa, axis=1)
    passing = dist <= tol
    if passing.any():
        j = int(np.flatnonzero(passing)[np.argmax(a[passing])])
    else:
        j = int(np.argmin(dist))
    return LatticeVerdict(bool(passing.any()), float(a[j]), float(dist[j]), len(a))


# ------------------------------------------------------------ output


def _num(x) -> str:
    return repr(float(x))


def write_series_csv(path, series: CountSeries, fit: Optional[AsymptoticFit] = None) -> None:
    """Columns t, N, complete, Mehat (N M e^{-ht}, empty without a fit)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["t", "N", "complete", "Mehat"])
        for t, n, c in zip(series.tGrid, series.counts, series.complete):
            me = _num(n * fit.M * math.exp(-fit.h * t)) if fit is not None else ""
            w.writerow([_num(t), int(n), int(bool(c)), me])


def fit_summary(series: CountSeries, fit: Optional[AsymptoticFit], **extra) -> dict:
    out = {
        "mode": series.mode,
        "depth": series.depth,
        "t_certified": series.t_certified,
        "exceptional": series.exceptional,
    }
    if fit is not None:
        out.update(h=fit.h, M=fit.M, window=list(fit.window), residual=fit.residual,
                   npoints=fit.npoints)
    out.update(extra)
    return out


def write_json(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
