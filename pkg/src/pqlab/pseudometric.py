"""Basepoint geometry in H^{p,q-1} and the projections b_o, b_tau.

A frame is a timelike point o together with a negative-definite q-plane tau
containing it.  Each frame carries a form-preserving change of basis ``C``
sending the model frame (o = e_d, tau = span{e_{p+1}, ..., e_d}) to it; in
the model frame J^o = diag(-1, ..., -1, 1), the boost X_s has entries s at
(1, d) and (d, 1), H^o fixes e_d and K^tau is O(p) x O(q).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.linalg import expm, qr, null_space
from scipy.stats import qmc

from .qlinalg import (QSpace, TauFrame, ProjPoint, form_eval, form_inverse, lie_algebra_element,
                      lambda1, singular_values_tau, _vec)

LIGHTLIKE_TOL = 1e-9
RESIDUAL_TOL = 1e-8


class GeodesicClass(str, Enum):
    spacelike = "spacelike"
    timelike = "timelike"
    lightlike = "lightlike"


class NotSpacelikeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BasepointFrame:
    space: QSpace
    o: ProjPoint
    o_hat: np.ndarray        # representative with <o,o> = -1
    Jo: np.ndarray
    tau: TauFrame
    C: np.ndarray            # model frame -> this frame
    Cinv: np.ndarray

    def to_model(self, g: np.ndarray) -> np.ndarray:
        return self.Cinv @ g @ self.C

    def from_model(self, g: np.ndarray) -> np.ndarray:
        return self.C @ g @ self.Cinv

    def boost(self, s: float) -> np.ndarray:
        return self.from_model(model_boost(self.space, s))


def model_boost(space: QSpace, s: float) -> np.ndarray:
    d = space.d
    B = np.eye(d)
    B[0, 0] = B[-1, -1] = np.cosh(s)
    B[0, -1] = B[-1, 0] = np.sinh(s)
    return B


def _orthonormal(space: QSpace, B: np.ndarray, k: int, sign: int) -> np.ndarray:
    # pick k well-conditioned columns, then Gram-Schmidt for sign * form
    _, _, piv = qr(B, pivoting=True, mode="economic")
    B = B[:, np.sort(piv[:k])]
    G = sign * (B.T @ space.form @ B)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    F = B @ np.linalg.inv(L).T
    for j in range(F.shape[1]):
        i = np.flatnonzero(np.abs(F[:, j]) > 1e-12)[0]
        if F[i, j] < 0:
            F[:, j] = -F[:, j]
    return F


def reflection(space: QSpace, o_hat: np.ndarray) -> np.ndarray:
    """J^o = id on the line o and -id on its orthogonal."""
    c = form_eval(space, o_hat, o_hat)
    return -np.eye(space.d) + 2.0 * np.outer(o_hat, space.form @ o_hat) / c


def make_frame(space: QSpace, oRep, tauBasis=None) -> BasepointFrame:
    Q = space.form
    v = np.asarray(_vec(oRep), dtype=float)
    c = form_eval(space, v, v)
    if c >= -1e-12 * (v @ v):
        raise ValueError("basepoint o must be timelike (<o,o> < 0)")
    o = ProjPoint(v)
    o_hat = o.rep / np.sqrt(-form_eval(space, o.rep, o.rep))
    if tauBasis is None:
        perp = null_space((Q @ o_hat)[None, :])
        # negative part of the form on o-perp, deterministic via eigen-decomposition
        G = perp.T @ Q @ perp
        w, V = np.linalg.eigh(0.5 * (G + G.T))
        neg = perp @ V[:, w < 0]
        T = np.c_[o_hat, neg] if space.q > 1 else o_hat[:, None]
    else:
        T = np.asarray(tauBasis, dtype=float)
        if T.ndim == 1:
            T = T[:, None]
        if T.shape[0] != space.d:
            T = T.T
    tau = TauFrame(space, T)
    if not tau.contains(o_hat):
        raise ValueError("tau must contain o")
    # tau-perp, then tau inside o-perp, then o itself
    Tp = np.eye(space.d) - T @ np.linalg.solve(T.T @ Q @ T, T.T @ Q)
    F1 = _orthonormal(space, Tp, space.p, +1)
    if space.q > 1:
        Po = T + np.outer(o_hat, (Q @ o_hat) @ T)
        F2 = _orthonormal(space, Po, space.q - 1, -1)
    else:
        F2 = np.zeros((space.d, 0))
    C = np.c_[F1, F2, o_hat]
    Cinv = form_inverse(space, C)
    return BasepointFrame(space, o, o_hat, reflection(space, o_hat), tau, C, Cinv)


# ------------------------------------------------------------ point pairs


def _timelike_rep(frame: BasepointFrame, x) -> np.ndarray:
    v = np.asarray(_vec(x), dtype=float)
    c = form_eval(frame.space, v, v)
    if c >= 0:
        raise ValueError("point is not timelike")
    return v / np.sqrt(-c)


def _same_line(a, b, tol=1e-12) -> bool:
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b)) < tol


def classify_pair(frame: BasepointFrame, o2) -> GeodesicClass:
    v = _timelike_rep(frame, o2)
    if _same_line(v, frame.o_hat):
        raise ValueError("o' = o has no geodesic type")
    c = abs(form_eval(frame.space, frame.o_hat, v))
    # Gram matrix [[-1, c], [c, -1]] has determinant 1 - c^2
    if c > 1 + LIGHTLIKE_TOL:
        return GeodesicClass.spacelike
    if c < 1 - LIGHTLIKE_TOL:
        return GeodesicClass.timelike
    return GeodesicClass.lightlike


def length_spacelike(frame: BasepointFrame, o2) -> float:
    v = _timelike_rep(frame, o2)
    if _same_line(v, frame.o_hat):
        return 0.0
    kind = classify_pair(frame, v)
    if kind is not GeodesicClass.spacelike:
        raise NotSpacelikeError(f"pair is {kind.value}")
    return float(np.arccosh(abs(form_eval(frame.space, frame.o_hat, v))))


def omega_margin(frame: BasepointFrame, limitSample) -> float:
    pts = []
    for x in limitSample:
        x = getattr(x, "xi", x)
        v = np.asarray(_vec(x), dtype=float)
        pts.append(v / np.linalg.norm(v))
    if not pts:
        raise ValueError("empty limit sample")
    P = np.array(pts)
    return float(np.min(np.abs(P @ (frame.space.form @ frame.o_hat))))


# ------------------------------------------------------------ projections


def orbit_length(frame: BasepointFrame, g: np.ndarray) -> float:
    """Length of the space-like geodesic from o to g.o.

    Uses the representative g o_hat, which has <v, v> = -1 exactly by
    invariance, so no renormalization of a possibly huge vector is needed.
    """
    c = abs(_orbit_pairing(frame, g))
    if _fixes_o(frame, g):
        return 0.0
    if c <= 1 + LIGHTLIKE_TOL:
        raise NotSpacelikeError("g.o is not space-like from o")
    return float(np.arccosh(c))


def _orbit_pairing(frame: BasepointFrame, g: np.ndarray) -> float:
    return form_eval(frame.space, frame.o_hat, g @ frame.o_hat)


def _fixes_o(frame, g) -> bool:
    return _same_line(g @ frame.o_hat, frame.o_hat, 1e-10)


def b_o(frame: BasepointFrame, g: np.ndarray) -> float:
    """Half the top eigenvalue-log of J g J g^{-1}; needs g.o spacelike from o."""
    if not _fixes_o(frame, g):
        c = abs(_orbit_pairing(frame, g))
        if c <= 1 + LIGHTLIKE_TOL:
            kind = "timelike" if c < 1 - LIGHTLIKE_TOL else "lightlike"
            raise NotSpacelikeError(f"g.o is {kind} from o")
    J = frame.Jo
    return max(0.0, 0.5 * lambda1(J @ g @ J @ form_inverse(frame.space, g)))


def b_tau(frame: BasepointFrame, g: np.ndarray) -> float:
    J = frame.Jo
    return max(0.0, 0.5 * np.log(frame.tau.op_norm(J @ g @ J @ form_inverse(frame.space, g))))


def orbit_values(frame: BasepointFrame, M: np.ndarray, mode: str):
    """Closed-form b-values for a stack of matrices.

    mode 'b_o': arccosh |<o, g o>| (the space-like length), with non-space-like
    orbit points reported in the returned mask and given value 0.
    mode 'b_tau': arcsinh of the tau-perp part of g o in the model frame.
    """
    w = M @ frame.o_hat
    if mode == "b_o":
        c = np.abs(w @ (frame.space.form @ frame.o_hat))
        space_like = c > 1 + LIGHTLIKE_TOL
        vals = np.zeros(len(c))
        vals[space_like] = np.arccosh(c[space_like])
        wn = w / np.linalg.norm(w, axis=-1, keepdims=True)
        same = np.minimum(np.linalg.norm(wn - frame.o.rep, axis=-1),
                          np.linalg.norm(wn + frame.o.rep, axis=-1)) < 1e-10
        return vals, ~space_like & ~same
    if mode == "b_tau":
        wm = w @ frame.Cinv.T
        return np.arcsinh(np.linalg.norm(wm[:, : frame.space.p], axis=-1)), np.zeros(len(w), bool)
    raise ValueError(f"unknown mode {mode!r}")


# ------------------------------------------------------------ decompositions


def _map_e1_to(space: QSpace, n: np.ndarray) -> np.ndarray:
    """An element of the model stabilizer of e_d, det 1, sending e_1 to the unit spacelike n."""
    Q = space.form
    d = space.d
    e1 = np.zeros(d)
    e1[0] = 1.0

    def refl(v):
        return np.eye(d) - 2.0 * np.outer(v, Q @ v) / (v @ Q @ v)

    if n[0] > -0.5:
        # R_{n+e1} swaps e1 and -n; R_{e1} negates e1
        return refl(n + e1) @ refl(e1)
    other = np.zeros(d)
    other[1] = 1.0
    return refl(n - e1) @ refl(other)


def _residual(g, rec) -> float:
    return float(np.linalg.norm(rec - g) / np.linalg.norm(g))


def decompose_HBH(frame: BasepointFrame, g: np.ndarray):
    """g = h exp(X_s) h' with h, h' fixing o."""
    sp = frame.space
    gm = frame.to_model(g)
    w = gm[:, -1]
    if _same_line(w, np.eye(sp.d)[-1], 1e-10):
        s, h = 0.0, np.eye(sp.d)
    else:
        c = abs(w[-1])
        if c <= 1 + LIGHTLIKE_TOL:
            raise NotSpacelikeError("g.o is not spacelike from o")
        s = float(np.arccosh(c))
        sig = np.sign(w[-1])
        n = sig * w.copy()
        n[-1] -= np.cosh(s)
        n /= np.sinh(s)
        n[-1] = 0.0
        h = _map_e1_to(sp, n)
    B = model_boost(sp, s)
    h2 = model_boost(sp, -s) @ form_inverse(sp, h) @ gm
    H, H2 = frame.from_model(h), frame.from_model(h2)
    res = _residual(g, H @ frame.boost(s) @ H2)
    if res > RESIDUAL_TOL or not _fixes_o(frame, H2 / np.linalg.norm(H2)):
        raise ArithmeticError(f"HBH reconstruction residual {res:.2e}")
    return H, s, H2


def random_decomposable(frame: BasepointFrame, rng: np.random.Generator, kind: str = "KBH",
                        s_max: float = 6.0, scale: float = 0.5):
    """A random (g, s) with g = k exp(X_s) h ("KBH") or h exp(X_s) h' ("HBH").

    Factors are exponentials of Gaussian Lie algebra elements of size
    ``scale``.  The residual of either decomposition grows like eps e^{2s},
    so ``s_max`` bounds the attainable accuracy.
    """
    sp = frame.space
    p, d = sp.p, sp.d

    def stab():
        Y = lie_algebra_element(sp, rng.standard_normal((d, d)))
        Y[-1, :] = 0.0
        Y[:, -1] = 0.0
        return expm(scale * Y)

    s = float(rng.uniform(0.0, s_max))
    if kind == "KBH":
        A = rng.standard_normal((d, d))
        K = np.zeros((d, d))
        K[:p, :p] = A[:p, :p] - A[:p, :p].T
        K[p:, p:] = A[p:, p:] - A[p:, p:].T
        left = expm(scale * K)
    elif kind == "HBH":
        left = stab()
    else:
        raise ValueError(f"unknown kind {kind!r}")
    g = left @ model_boost(sp, s) @ stab()
    return frame.from_model(g), s


def _householder_to(u: np.ndarray, target: int) -> np.ndarray:
    """Orthogonal matrix sending the basis vector e_target to the unit vector u."""
    m = len(u)
    e = np.zeros(m)
    e[target] = 1.0
    v = u - e
    if np.linalg.norm(v) < 1e-14:
        return np.eye(m)
    H = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
    return H


def decompose_KBH(frame: BasepointFrame, g: np.ndarray):
    """g = k exp(X_s) h with k preserving the tau inner product and h fixing o."""
    sp = frame.space
    p = sp.p
    gm = frame.to_model(g)
    w = gm[:, -1]
    wp, wq = w[:p], w[p:]
    s = float(np.arcsinh(np.linalg.norm(wp)))
    K = np.eye(sp.d)
    if np.linalg.norm(wp) > 0:
        K[:p, :p] = _householder_to(wp / np.linalg.norm(wp), 0)
    K[p:, p:] = _householder_to(wq / np.linalg.norm(wq), sp.q - 1)
    h = model_boost(sp, -s) @ K.T @ gm
    Kf, Hf = frame.from_model(K), frame.from_model(h)
    res = _residual(g, Kf @ frame.boost(s) @ Hf)
    if res > RESIDUAL_TOL or not _fixes_o(frame, Hf / np.linalg.norm(Hf)):
        raise ArithmeticError(f"KBH reconstruction residual {res:.2e}")
    return Kf, s, Hf


# ------------------------------------------------------------ X_G distances


def _graph_distance(B: np.ndarray, p: int) -> float:
    # q-plane spanned by the columns of B, seen from the model tau: graph of Z
    X, Y = B[:p], B[p:]
    Z = X @ np.linalg.inv(Y)
    t = np.clip(np.linalg.svd(Z, compute_uv=False), 0.0, 1 - 1e-16)
    return float(np.sqrt(np.sum(np.arctanh(t) ** 2)))


def xg_distance(space: QSpace, plane1, plane2) -> float:
    """Distance in X_G between two negative-definite q-planes.

    Normalized so that d(tau, exp(X) tau) = sqrt(tr(X^2) / 2) for X in the
    tau-symmetric part of so(p, q); computed from the hyperbolic principal
    angles of plane2 seen from plane1.
    """
    T1 = np.asarray(plane1, dtype=float)
    fr = make_frame(space, T1[:, -1], T1)
    return _graph_distance(fr.Cinv @ np.asarray(plane2, dtype=float), space.p)


def min_dist_sampling_check(frame: BasepointFrame, g: np.ndarray, nSamples: int = 256,
                            radius: Optional[float] = None) -> float:
    """min over sampled h in H^o of d(g^{-1} tau, h tau).

    The sample is h = exp(Y) with Y in the tau-symmetric part of the Lie algebra
    of H^o, drawn from a fixed low-discrepancy sequence in a box of half-width
    ``radius`` (default b_tau(g) + 1); the identity comes first, so the result
    is nonincreasing in ``nSamples``.
    """
    sp = frame.space
    p, q, d = sp.p, sp.q, sp.d
    gm_inv = form_inverse(sp, frame.to_model(g))
    r = b_tau(frame, g) + 1.0 if radius is None else radius
    best = _graph_distance(gm_inv[:, p:], p)
    dim = p * (q - 1)
    if dim == 0 or nSamples <= 1:
        return best
    pts = qmc.Sobol(dim, scramble=False).random(nSamples)[1:]
    for x in pts:
        Bm = ((2 * x - 1) * r).reshape(p, q - 1)
        Y = np.zeros((d, d))
        Y[:p, p:d - 1] = Bm
        Y[p:d - 1, :p] = Bm.T
        hinv = expm(-Y)
        best = min(best, _graph_distance(hinv @ gm_inv[:, p:], p))
    return best


def tau_singular_distance(frame: BasepointFrame, g: np.ndarray) -> float:
    """d(tau, g tau) from the tau-singular values: sqrt(sum a_i^2 / 2)."""
    a = singular_values_tau(g, frame.tau)
    return float(np.sqrt(np.sum(a ** 2) / 2.0))
