"""Linear algebra for a symmetric bilinear form of signature (p, q).

Matrices are lifts of elements of PSO(p, q): everything exported here is
insensitive to replacing a lift ``g`` by ``-g`` and a representative vector by
any nonzero multiple of itself.

The projective metric on lines is the chordal one,

    d([a], [b]) = min(|a - b|, |a + b|)      for unit representatives,

and the distance from a line to a hyperplane is the minimum over the lines
contained in the hyperplane.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.linalg import null_space
from scipy.stats import qmc
from scipy.special import ndtri

PAIRING_TOL = 1e-12
DEFAULT_GAP_TOL = 1e-6


class TransversalityError(ValueError):
    """A pairing that has to be nonzero vanished (to tolerance)."""


@dataclass(frozen=True)
class QSpace:
    p: int
    q: int
    strict: bool = field(default=True, compare=False, repr=False)   # require d > 2

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError(f"need p, q >= 1, got ({self.p}, {self.q})")
        if self.strict and self.p + self.q <= 2:
            raise ValueError("need d = p + q > 2 (pass strict=False for plain linear algebra)")

    @property
    def d(self) -> int:
        return self.p + self.q

    @property
    def form(self) -> np.ndarray:
        return np.diag(np.r_[np.ones(self.p), -np.ones(self.q)])

    def basis(self, i: int) -> np.ndarray:
        """Standard basis vector e_i, numbered from 1."""
        e = np.zeros(self.d)
        e[i - 1] = 1.0
        return e


def _check_dim(space: QSpace, *vs):
    for v in vs:
        if np.shape(v)[-1] != space.d:
            raise ValueError(f"expected vectors of dimension {space.d}, got shape {np.shape(v)}")


def form_eval(space: QSpace, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_dim(space, u, v)
    return float(u[: space.p] @ v[: space.p] - u[space.p:] @ v[space.p:])


def form_eval_many(space: QSpace, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Row-wise pairing of two (n, d) arrays."""
    p = space.p
    return np.einsum("ij,ij->i", U[:, :p], V[:, :p]) - np.einsum("ij,ij->i", U[:, p:], V[:, p:])


def q_complement(space: QSpace, subspace) -> np.ndarray:
    """Basis (as columns) of the form-orthogonal complement of span(subspace)."""
    B = np.atleast_2d(np.asarray(subspace, dtype=float))
    if B.shape[1] != space.d:
        B = B.T
    _check_dim(space, B)
    if np.linalg.matrix_rank(B) < B.shape[0]:
        raise ValueError("input vectors are linearly dependent")
    return null_space(B @ space.form)


def form_residual(space: QSpace, M: np.ndarray) -> float:
    """|M^T Q M - Q| / (|Q| |M|^2); zero iff M preserves the form."""
    Q = space.form
    R = M.T @ Q @ M - Q
    return float(np.linalg.norm(R) / (np.linalg.norm(Q) * max(1.0, np.linalg.norm(M, 2) ** 2)))


def form_inverse(space: QSpace, M: np.ndarray) -> np.ndarray:
    """Inverse of a form-preserving matrix, Q M^T Q."""
    Q = space.form
    return Q @ M.T @ Q


def lie_algebra_element(space: QSpace, skew: np.ndarray) -> np.ndarray:
    """Q K is in so(p, q) whenever K is skew-symmetric."""
    K = 0.5 * (skew - skew.T)
    return space.form @ K


# ---------------------------------------------------------------- projective


def _canon(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise ValueError("zero or non-finite representative")
    v = v / n
    # first coordinate that is not rounding noise decides the sign
    idx = np.flatnonzero(np.abs(v) > 1e-12)
    if v[idx[0]] < 0:
        v = -v
    return v


class ProjPoint:
    """A line in R^d, stored as a unit sign-canonical representative."""

    __slots__ = ("rep",)

    def __init__(self, v):
        object.__setattr__(self, "rep", _canon(v))

    def __setattr__(self, *a):
        raise AttributeError("ProjPoint is immutable")

    def __repr__(self):
        return f"ProjPoint({np.array2string(self.rep, precision=6)})"


class ProjHyperplane:
    """The hyperplane ker(theta), stored as a unit sign-canonical covector."""

    __slots__ = ("covector",)

    def __init__(self, theta):
        object.__setattr__(self, "covector", _canon(theta))

    def __setattr__(self, *a):
        raise AttributeError("ProjHyperplane is immutable")

    def __call__(self, v) -> float:
        return float(self.covector @ np.asarray(v, dtype=float))

    def __repr__(self):
        return f"ProjHyperplane({np.array2string(self.covector, precision=6)})"


def _vec(x) -> np.ndarray:
    if isinstance(x, ProjPoint):
        return x.rep
    if isinstance(x, ProjHyperplane):
        return x.covector
    return np.asarray(x, dtype=float)


def act_point(g: np.ndarray, x) -> ProjPoint:
    return ProjPoint(g @ _vec(x))


def act_hyperplane(g: np.ndarray, theta, g_inv: Optional[np.ndarray] = None) -> ProjHyperplane:
    """g . theta = theta o g^{-1}."""
    th = _vec(theta)
    if g_inv is None:
        return ProjHyperplane(np.linalg.solve(g.T, th))
    return ProjHyperplane(g_inv.T @ th)


def proj_dist(a, b) -> float:
    a = _canon(_vec(a))
    b = _canon(_vec(b))
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def proj_dist_to_hyp(a, H) -> float:
    # the nearest line of H makes the complementary angle with the normal;
    # the chordal distance of an angle phi is sqrt(2 - 2 cos phi)
    a = _canon(_vec(a))
    n = _canon(_vec(H))
    s = min(1.0, abs(float(a @ n)))
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * np.sqrt(1.0 - s * s))))


def _pair(theta, v, what="pairing") -> float:
    th = _canon(_vec(theta))
    w = _canon(_vec(v))
    val = float(th @ w)
    if abs(val) < PAIRING_TOL:
        raise TransversalityError(f"{what} vanishes: |theta(v)| = {abs(val):.3e}")
    return val


def cross_ratio(theta, v, phi, u) -> float:
    """log |theta(u)/theta(v) * phi(v)/phi(u)|."""
    tu = _pair(theta, u, "theta(u)")
    tv = _pair(theta, v, "theta(v)")
    pv = _pair(phi, v, "phi(v)")
    pu = _pair(phi, u, "phi(u)")
    return float(np.log(abs(tu)) - np.log(abs(tv)) + np.log(abs(pv)) - np.log(abs(pu)))


def gscript(theta, v, tau: Optional["TauFrame"] = None) -> float:
    """log |theta(v)| / (|theta| |v|), with the tau norms if ``tau`` is given."""
    th = _vec(theta)
    w = _vec(v)
    val = float(th @ w)
    if tau is None:
        nth, nw = np.linalg.norm(th), np.linalg.norm(w)
    else:
        nth, nw = tau.dual_norm(th), tau.norm(w)
    if abs(val) < PAIRING_TOL * nth * nw:
        raise TransversalityError("theta(v) vanishes")
    return float(np.log(abs(val) / (nth * nw)))


# ---------------------------------------------------------------- tau frames


class TauFrame:
    """A negative-definite q-plane tau and its inner product.

    The inner product is minus the form on tau, plus the form on its
    form-orthogonal complement, and makes the two orthogonal.
    """

    def __init__(self, space: QSpace, plane):
        T = np.asarray(plane, dtype=float)
        if T.ndim == 1:
            T = T[:, None]
        if T.shape[0] != space.d:
            T = T.T
        if T.shape != (space.d, space.q):
            raise ValueError(f"tau must be spanned by {space.q} vectors of dimension {space.d}")
        Q = space.form
        G = T.T @ Q @ T
        if np.any(np.linalg.eigvalsh(0.5 * (G + G.T)) >= -1e-12):
            raise ValueError("tau is not negative definite")
        self.space = space
        self.plane = T
        A = Q - 2.0 * Q @ T @ np.linalg.solve(G, T.T @ Q)
        self.innerMatrix = 0.5 * (A + A.T)
        L = np.linalg.cholesky(self.innerMatrix)
        self._W = L.T                  # |v|_tau = |W v|
        self._Winv = np.linalg.inv(self._W)

    @classmethod
    def standard(cls, space: QSpace) -> "TauFrame":
        return cls(space, np.eye(space.d)[:, space.p:])

    def norm(self, v) -> float:
        return float(np.linalg.norm(self._W @ np.asarray(v, dtype=float)))

    def norms(self, V: np.ndarray) -> np.ndarray:
        """Row-wise norms of an (n, d) array."""
        return np.linalg.norm(V @ self._W.T, axis=1)

    def dual_norm(self, theta) -> float:
        return float(np.linalg.norm(np.asarray(theta, dtype=float) @ self._Winv))

    def adapted(self, g: np.ndarray) -> np.ndarray:
        """The matrix of g in a tau-orthonormal basis (works on stacks too)."""
        return self._W @ g @ self._Winv

    def op_norm(self, g: np.ndarray) -> float:
        return float(np.linalg.norm(self.adapted(g), 2))

    def contains(self, v, tol=1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        c, *_ = np.linalg.lstsq(self.plane, v, rcond=None)
        return np.linalg.norm(self.plane @ c - v) <= tol * np.linalg.norm(v)


def singular_values_tau(g: np.ndarray, tau: TauFrame) -> np.ndarray:
    """Logs of the tau-singular values, decreasing."""
    s = np.linalg.svd(tau.adapted(g), compute_uv=False)
    if s[-1] <= 0 or s[-1] / s[0] < 1e-300:
        raise np.linalg.LinAlgError("matrix is numerically singular")
    return np.log(s)


def eigen_moduli(g: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(g)
    return np.sort(np.log(np.abs(ev)))[::-1]


def lambda1(g: np.ndarray) -> float:
    return float(np.log(np.max(np.abs(np.linalg.eigvals(g)))))


def _top_eigvec(M: np.ndarray):
    w, V = np.linalg.eig(M)
    order = np.argsort(-np.abs(w))
    return w[order], V[:, order]


def proximal_data(g: np.ndarray, gapTol: float = DEFAULT_GAP_TOL):
    """(g_plus, g_minus, gap) if lambda_1 is simple, else None."""
    w, V = _top_eigvec(g)
    with np.errstate(divide="ignore"):
        lam = np.log(np.abs(w))
    gap = float(lam[0] - lam[1])
    if gap <= gapTol:
        return None
    plus = np.real(V[:, 0])
    wt, Vt = _top_eigvec(g.T)
    minus = np.real(Vt[:, 0])
    return ProjPoint(plus), ProjHyperplane(minus), gap


# ------------------------------------------------------- (r, eps)-proximality


class Verdict(str, Enum):
    certified = "certified"
    refuted = "refuted"
    inconclusive = "inconclusive"


@dataclass
class ProximalityReport:
    verdict: Verdict
    separation: float = float("nan")
    image_radius: float = float("nan")
    witness: Optional[np.ndarray] = None
    reason: str = ""


def _sphere_sample(d: int, n: int, seed: int = 0) -> np.ndarray:
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)[:n]
    z = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def certify_r_eps_proximal(g: np.ndarray, r: float, eps: float, nSamples: int = 4096,
                           slack: float = 2.0) -> ProximalityReport:
    """Check d(g+, g-) >= 2r and g . B_eps(g-) in b_eps(g+) on a sample.

    B_eps(g-) is the set of lines at distance >= eps from the hyperplane g-.
    The sample consists of points on its boundary shell together with the
    sampled points lying inside it.  The inclusion is certified when every
    image lies within eps/slack of g+, refuted by any image at distance
    >= eps, and inconclusive otherwise.
    """
    if not 0 < eps <= r:
        raise ValueError("need 0 < eps <= r")
    data = proximal_data(g)
    if data is None:
        return ProximalityReport(Verdict.refuted, reason="not proximal")
    plus, minus, _ = data
    sep = proj_dist_to_hyp(plus, minus)
    if sep < 2 * r:
        return ProximalityReport(Verdict.refuted, separation=sep, witness=plus.rep,
                                 reason="attracting line too close to repelling hyperplane")
    d = g.shape[0]
    n = minus.covector
    U = _sphere_sample(d, nSamples)
    # angle phi to the hyperplane has chordal distance 2 sin(phi/2)
    phi_eps = 2.0 * np.arcsin(min(1.0, eps / 2.0))
    a = U @ n
    W = U - np.outer(a, n)
    wn = np.linalg.norm(W, axis=1)
    ok = wn > 1e-12
    sgn = np.where(a[ok] >= 0, 1.0, -1.0)
    shell = np.sin(phi_eps) * sgn[:, None] * n + np.cos(phi_eps) * W[ok] / wn[ok, None]
    inner = U[np.abs(a) >= np.sin(phi_eps)]
    pts = np.vstack([shell, inner])
    img = pts @ g.T
    img /= np.linalg.norm(img, axis=1, keepdims=True)
    v = plus.rep
    dist = np.minimum(np.linalg.norm(img - v, axis=1), np.linalg.norm(img + v, axis=1))
    worst = int(np.argmax(dist))
    rad = float(dist[worst])
    if rad >= eps:
        return ProximalityReport(Verdict.refuted, sep, rad, pts[worst], "image escapes b_eps(g+)")
    if rad * slack < eps:
        return ProximalityReport(Verdict.certified, sep, rad)
    return ProximalityReport(Verdict.inconclusive, sep, rad, reason="margin below slack")


def benoist_product_check(g1: np.ndarray, g2: np.ndarray, tau: TauFrame):
    """(delta_lambda, delta_norm) for the product g1 g2."""
    d1 = proximal_data(g1)
    d2 = proximal_data(g2)
    if d1 is None or d2 is None:
        raise TransversalityError("both factors must be proximal")
    p1, m1, _ = d1
    p2, m2, _ = d2
    B = cross_ratio(m1, p1, m2, p2)
    l1, l2 = lambda1(g1), lambda1(g2)
    prod = g1 @ g2
    dl = abs(lambda1(prod) - l1 - l2 - B)
    dn = abs(np.log(tau.op_norm(prod)) - l1 - l2 - B + gscript(m2, p1, tau))
    return float(dl), float(dn)
