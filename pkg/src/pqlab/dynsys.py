"""Cocycles, Gromov products and period identities on the boundary of F_k.

Boundary points are attracting fixed points of hyperbolic elements and their
translates: the infinite reduced word ``prefix . core . core . ...``.  Each
point carries the vector V_x = rho(prefix) v_core, with v_core the unit top
eigenvector of rho(core), and its covector theta_x = <V_x, .>.

Points are kept in a normal form where prefix . core^infinity is reduced, so
that V_x is a product of expanding factors and is computed without
cancellation.  Translating by a word, or comparing two points sharing a long
common prefix, is done symbolically: letters that cancel are absorbed into a
scalar whose logarithm is tracked separately.  This keeps the identities
accurate to ~1e-12 even when the matrices involved have entries near e^70.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import wordgroup as wg
from .qlinalg import (ProjPoint, ProjHyperplane, TransversalityError, PAIRING_TOL,
                      act_hyperplane, cross_ratio, gscript, lambda1, proximal_data)
from .pseudometric import BasepointFrame, b_o, b_tau
from .repbuilder import Representation

_MAX_STEPS = 10_000


def _core_cache(rep: Representation) -> dict:
    return rep.__dict__.setdefault("_core_eigen", {})


def core_eigen(rep: Representation, core) -> tuple:
    """(unit top eigenvector with canonical sign, signed top eigenvalue)."""
    core = tuple(core)
    cache = _core_cache(rep)
    hit = cache.get(core)
    if hit is None:
        g = rep.evaluate(core)
        data = proximal_data(g)
        if data is None:
            raise ValueError(f"rho({wg.fmt(core)}) is not proximal")
        v = data[0].rep
        mu = float((g @ v) @ v)
        hit = cache[core] = (v, mu)
    return hit


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    prefix: tuple
    core: tuple
    unit: np.ndarray          # V_x / |V_x|
    lognorm: float            # log |V_x|
    theta: np.ndarray         # Q V_x / |V_x|, so theta_x(w) = <V_x, w>
    xi: ProjPoint
    eta: ProjHyperplane       # ker theta_x, the form-orthogonal of xi

    def __repr__(self):
        return f"BoundaryPoint({wg.fmt(self.prefix)} . ({wg.fmt(self.core)})^inf)"


def _make_point(rep: Representation, prefix, core) -> BoundaryPoint:
    v, _ = core_eigen(rep, core)
    V = rep.evaluate(prefix) @ v
    n = np.linalg.norm(V)
    unit = V / n
    theta = rep.space.form @ unit
    return BoundaryPoint(tuple(prefix), tuple(core), unit, float(np.log(n)), theta,
                         ProjPoint(unit), ProjHyperplane(theta))


def _normalize(rep: Representation, prefix: tuple, core: tuple):
    """Rewrite rho(prefix) v_core = e^{logf} (+-) rho(p) v_c with p . c^inf reduced."""
    logf = 0.0
    p, c = prefix, core
    while p and p[-1] == -c[0]:
        # rho(c0^-1) v_c = rho(c[1:]) v_c / mu_c, which is parallel to v_{rotated c}
        v, mu = core_eigen(rep, c)
        rest = c[1:]
        c2 = rest + c[:1]
        u = rep.evaluate(rest) @ v if rest else v
        v2, _ = core_eigen(rep, c2)
        logf += np.log(abs(u @ v2)) - np.log(abs(mu))
        p, c = p[:-1], c2
    return p, c, logf


def boundary_point(rep: Representation, prefix=(), core=(1,)) -> BoundaryPoint:
    """The point prefix . core^infinity of the boundary of F_k."""
    core = tuple(core)
    if not core or not wg.is_cyclically_reduced(core):
        raise ValueError("core must be a nonempty cyclically reduced word")
    p, c, _ = _normalize(rep, wg.reduce(prefix), core)
    return _make_point(rep, p, c)


def translate(rep: Representation, gamma, x: BoundaryPoint):
    """(gamma . x, logf) with rho(gamma) V_x = +- e^{logf} V_{gamma x}."""
    p1 = wg.multiply(wg.reduce(gamma), x.prefix)
    p, c, logf = _normalize(rep, p1, x.core)
    y = _make_point(rep, p, c)
    # rho(p1) v_core = e^{logf} rho(p) v_c exactly; V_x itself is rho(x.prefix) v_core
    return y, float(logf)


# ------------------------------------------------------------ pairings


def _log_abs(val: float, what: str) -> float:
    if abs(val) < PAIRING_TOL:
        raise TransversalityError(f"{what} below tolerance: {abs(val):.2e}")
    return float(np.log(abs(val)))


def _log_selfJ(frame: BasepointFrame, x: BoundaryPoint) -> float:
    """log |theta_x(J v_x)| for the representative V_x."""
    u = x.unit
    val = u @ frame.space.form @ (frame.Jo @ u)
    return _log_abs(val, "theta_x(J v_x) (basepoint margin)") + 2 * x.lognorm


def _log_tau_norms(frame: BasepointFrame, x: BoundaryPoint):
    """(log |v_x|_tau, log |theta_x|_tau) for the representative V_x."""
    u = x.unit
    return (np.log(frame.tau.norm(u)) + x.lognorm,
            np.log(frame.tau.dual_norm(frame.space.form @ u)) + x.lognorm)


def _unroll(rep: Representation, core: tuple):
    """v_core = e^{s} rho(core[0]) v_{rotated core}; returns (rotated core, s)."""
    c2 = core[1:] + core[:1]
    v, _ = core_eigen(rep, core)
    v2, _ = core_eigen(rep, c2)
    t = rep.letter(core[0]) @ v2
    return c2, -float(np.log(abs(t @ v)))


def _first_letters(x: BoundaryPoint, n: int) -> tuple:
    reps = max(0, n - len(x.prefix)) // len(x.core) + 1
    return (x.prefix + x.core * reps)[:n]


def same_point(x: BoundaryPoint, y: BoundaryPoint) -> bool:
    """Whether the infinite words prefix . core^inf of x and y coincide.

    Two eventually periodic words agree iff they agree on their first
    max(prefix lengths) + lcm(core lengths) letters.
    """
    n = max(len(x.prefix), len(y.prefix)) + np.lcm(len(x.core), len(y.core))
    return _first_letters(x, n) == _first_letters(y, n)


def log_pairing(rep: Representation, x: BoundaryPoint, y: BoundaryPoint) -> float:
    """log |<V_x, V_y>|, stripping the common prefix of the two infinite words."""
    if same_point(x, y):
        raise TransversalityError("x and y are the same boundary point")
    px, cx, py, cy = x.prefix, x.core, y.prefix, y.core
    scale = 0.0
    for _ in range(_MAX_STEPS):
        fx = px[0] if px else cx[0]
        fy = py[0] if py else cy[0]
        if fx != fy:
            break
        if not px:
            cx, s = _unroll(rep, cx)
            px, scale = (fx,), scale + s
        if not py:
            cy, s = _unroll(rep, cy)
            py, scale = (fy,), scale + s
        px, py = px[1:], py[1:]
    else:
        raise TransversalityError("x and y are the same boundary point")
    vx, _ = core_eigen(rep, cx)
    vy, _ = core_eigen(rep, cy)
    Vx = rep.evaluate(px) @ vx
    Vy = rep.evaluate(py) @ vy
    nx, ny = np.linalg.norm(Vx), np.linalg.norm(Vy)
    val = (Vx / nx) @ rep.space.form @ (Vy / ny)
    return scale + _log_abs(val, "theta_x(v_y)") + np.log(nx) + np.log(ny)


# ------------------------------------------------------------ cocycles


def cocycle_c_o(frame: BasepointFrame, rep: Representation, gamma, x: BoundaryPoint) -> float:
    """1/2 log |theta_x(rho(g^-1) J rho(g) v_x) / theta_x(J v_x)|.

    By invariance of the form, the numerator is theta'(J v') for v' = rho(g) v_x.
    """
    y, logf = translate(rep, gamma, x)
    return 0.5 * (2 * logf + _log_selfJ(frame, y) - _log_selfJ(frame, x))


def cocycle_c_tau(frame: BasepointFrame, rep: Representation, gamma, x: BoundaryPoint,
                  tol: float = 1e-9) -> float:
    """1/2 log (|g.theta_x| |g v_x| / (|theta_x| |v_x|)) in the tau norms.

    Also evaluates log(|g v_x| / |v_x|) and raises if the two disagree.
    """
    y, logf = translate(rep, gamma, x)
    nv_x, nt_x = _log_tau_norms(frame, x)
    nv_y, nt_y = _log_tau_norms(frame, y)
    # g . theta_x = theta_x o rho(g)^-1 = e^{logf} theta_{gx}
    both = 0.5 * ((logf + nt_y) + (logf + nv_y) - nt_x - nv_x)
    vec_only = logf + nv_y - nv_x
    if abs(both - vec_only) > tol * max(1.0, abs(both)):
        raise ArithmeticError(f"c_tau formulas disagree: {both} vs {vec_only}")
    return float(both)


def cocycle_c_o_dense(frame: BasepointFrame, rep: Representation, gamma, v: np.ndarray) -> float:
    """The c_o formula evaluated literally with dense matrices (short words only)."""
    Q, J = rep.space.form, frame.Jo
    g = rep.evaluate(gamma)
    gi = rep.evaluate(wg.inverse(wg.reduce(gamma)))
    th = Q @ v
    return 0.5 * float(np.log(abs(th @ gi @ J @ g @ v)) - np.log(abs(th @ J @ v)))


def gromov_o(frame: BasepointFrame, rep: Representation, x: BoundaryPoint, y: BoundaryPoint) -> float:
    lp = log_pairing(rep, x, y)
    return -0.5 * (_log_selfJ(frame, x) + _log_selfJ(frame, y) - 2 * lp)


def gromov_tau(frame: BasepointFrame, rep: Representation, x: BoundaryPoint, y: BoundaryPoint) -> float:
    lp = log_pairing(rep, x, y)
    nv_y, nt_y = _log_tau_norms(frame, y)
    return 0.5 * (2 * lp - _log_selfJ(frame, x) - nt_y - nv_y)


def cohomology_U(frame: BasepointFrame, rep: Representation, x: BoundaryPoint) -> float:
    nv, nt = _log_tau_norms(frame, x)
    return 0.5 * (nv + nt - _log_selfJ(frame, x))


def gromov_formula_o(J, Q, vx, vy) -> float:
    """[x, y]_o from arbitrary representatives v_x, v_y (theta = <v, .>)."""
    tx, ty = Q @ vx, Q @ vy
    return -0.5 * float(np.log(abs((tx @ J @ vx) * (ty @ J @ vy) / ((tx @ vy) * (ty @ vx)))))


# ------------------------------------------------------------ fixed points


def attracting_point(rep: Representation, gamma) -> BoundaryPoint:
    return boundary_point(rep, (), tuple(gamma))


def repelling_point(rep: Representation, gamma) -> BoundaryPoint:
    return boundary_point(rep, (), wg.inverse(tuple(gamma)))


def _primitive_root(w: tuple) -> tuple:
    n = len(w)
    for s in range(1, n + 1):
        if n % s == 0 and w == w[:s] * (n // s):
            return w[:s]
    return w


def _fixed_data(frame: BasepointFrame, rep: Representation, gamma):
    """Eigen data of rho(gamma) and rho(gamma^-1), from the primitive root."""
    gamma = tuple(gamma.letters if isinstance(gamma, wg.CyclicWord) else gamma)
    root = _primitive_root(gamma)
    d1 = proximal_data(rep.evaluate(root))
    d2 = proximal_data(rep.evaluate(wg.inverse(root)))
    if d1 is None or d2 is None:
        raise ValueError("rho(gamma) is not proximal")
    J = frame.Jo
    g_plus, g_minus, _ = d1
    i_plus, i_minus, _ = d2
    Jm = act_hyperplane(J, g_minus, J)
    Jp = ProjPoint(J @ g_plus.rep)
    return gamma, Jm, Jp, i_minus, i_plus


def fixed_point_cross_ratio(frame: BasepointFrame, rep: Representation, gamma) -> float:
    """B(J . rho(g)_-, J . rho(g)_+, rho(g^-1)_-, rho(g^-1)_+)."""
    _, Jm, Jp, i_minus, i_plus = _fixed_data(frame, rep, gamma)
    return cross_ratio(Jm, Jp, i_minus, i_plus)


def fixed_point_gscript(frame: BasepointFrame, rep: Representation, gamma) -> float:
    """G_tau(rho(g^-1)_-, J . rho(g)_+)."""
    _, _, Jp, i_minus, _ = _fixed_data(frame, rep, gamma)
    return gscript(i_minus, Jp, frame.tau)


def benoist_residuals(frame: BasepointFrame, rep: Representation, gamma):
    """(delta_4, delta_5) comparing b_o, b_tau with lambda_1 and the fixed-point data."""
    gamma, Jm, Jp, i_minus, i_plus = _fixed_data(frame, rep, gamma)
    g = rep.evaluate(gamma)
    lam = lambda1(g)
    B = cross_ratio(Jm, Jp, i_minus, i_plus)
    G = gscript(i_minus, Jp, frame.tau)
    d4 = abs(b_o(frame, g) - lam - 0.5 * B)
    d5 = abs(b_tau(frame, g) - lam - 0.5 * B + 0.5 * G)
    return float(d4), float(d5)
