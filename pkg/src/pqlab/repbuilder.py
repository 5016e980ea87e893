"""Representations of free groups into the form-preserving group.

The examples are Schottky groups in SO(m, 1), block embedded into SO(p, q)
on the coordinates e_{p-m+1}, ..., e_{p+1}, possibly deformed by a small
random element of the Lie algebra.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.linalg import expm

from . import wordgroup as wg
from .qlinalg import (QSpace, TauFrame, ProjPoint, ProjHyperplane, form_residual,
                      form_inverse, lie_algebra_element, proximal_data, _sphere_sample)

FORM_TOL = 1e-10
ALWAYS_CACHED = 6


class PingPongError(ValueError):
    pass


class Representation:
    """Free generators mapped to matrices preserving the (p, q) form.

    ``evaluate`` memoizes products of reduced words up to ``cache_max_length``
    (never below 6), filling each entry from its one-letter-shorter prefix.
    """

    def __init__(self, space: QSpace, generators, cache_max_length: int = 8,
                 check: bool = True, meta: Optional[dict] = None):
        self.space = space
        gens = [np.array(g, dtype=float) for g in generators]
        for i, g in enumerate(gens):
            if g.shape != (space.d, space.d):
                raise ValueError(f"generator {i + 1} has shape {g.shape}, expected {(space.d, space.d)}")
            if check and form_residual(space, g) > FORM_TOL:
                raise ValueError(f"generator {i + 1} does not preserve the form "
                                 f"(residual {form_residual(space, g):.2e})")
        self.generators = gens
        self._inv = [np.linalg.inv(g) for g in gens]
        self.cache_max_length = max(ALWAYS_CACHED, cache_max_length)
        self._cache: dict = {(): np.eye(space.d)}
        self._lock = threading.Lock()
        self.meta = dict(meta or {})

    @property
    def k(self) -> int:
        return len(self.generators)

    @property
    def d(self) -> int:
        return self.space.d

    def letter(self, a: int) -> np.ndarray:
        return self.generators[a - 1] if a > 0 else self._inv[-a - 1]

    def evaluate(self, w) -> np.ndarray:
        w = tuple(w)
        if not wg.is_reduced(w):
            w = wg.reduce(w)
        hit = self._cache.get(w)
        if hit is not None:
            return hit.copy()
        n = len(w)
        j = min(n, self.cache_max_length)
        while j > 0 and w[:j] not in self._cache:
            j -= 1
        M = self._cache[w[:j]]
        new = {}
        for i in range(j, n):
            M = M @ self.letter(w[i])
            if i + 1 <= self.cache_max_length:
                new[w[: i + 1]] = M
        if new:
            with self._lock:
                self._cache.update(new)
        return M.copy()

    def letter_stack(self) -> tuple:
        alph = wg.letters(self.k)
        return np.array(alph, dtype=np.int8), np.stack([self.letter(a) for a in alph])

    def spheres(self, Lmax: int, start: int = 0) -> Iterator[tuple]:
        """Yield (L, words, matrices) sphere by sphere.

        ``words`` is the (N, L) int8 array of ``wordgroup.sphere_array`` and
        ``matrices`` the matching (N, d, d) stack of products.
        """
        alph, G = self.letter_stack()
        W = np.zeros((1, 0), dtype=np.int8)
        M = np.eye(self.d)[None]
        for L in range(Lmax + 1):
            if L >= start:
                yield L, W, M
            if L == Lmax:
                break
            n = W.shape[0]
            rows = np.repeat(np.arange(n), len(alph))
            cols = np.tile(np.arange(len(alph)), n)
            if L > 0:
                ok = W[rows, -1] != -alph[cols]
                rows, cols = rows[ok], cols[ok]
            newM = np.empty((rows.size, self.d, self.d))
            for j in range(len(alph)):
                pos = np.flatnonzero(cols == j)
                newM[pos] = M[rows[pos]] @ G[j]
            W = np.hstack([W[rows], alph[cols][:, None]])
            M = newM

    def conjugate(self, u: np.ndarray) -> "Representation":
        ui = np.linalg.inv(u)
        return Representation(self.space, [u @ g @ ui for g in self.generators],
                              self.cache_max_length, check=False, meta=self.meta)

    # text form: one "key = json" line per field, matrix entries as decimal strings
    def to_text(self) -> str:
        lines = [f"p = {self.space.p}", f"q = {self.space.q}"]
        for i, g in enumerate(self.generators):
            rows = [[repr(float(x)) for x in r] for r in g]
            lines.append(f"generator_{i + 1} = {json.dumps(rows)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **kw) -> "Representation":
        vals = {}
        for ln in text.splitlines():
            if not ln.strip() or ln.lstrip().startswith("#"):
                continue
            key, _, val = ln.partition("=")
            vals[key.strip()] = json.loads(val)
        space = QSpace(int(vals["p"]), int(vals["q"]))
        gens = []
        i = 1
        while f"generator_{i}" in vals:
            gens.append(np.array([[float(x) for x in r] for r in vals[f"generator_{i}"]]))
            i += 1
        return cls(space, gens, **kw)


# ------------------------------------------------------------ constructions


def _endpoint(x, m):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if m == 2 and x.size == 1:
        x = np.array([np.cos(x[0]), np.sin(x[0])])
    if x.size != m:
        raise ValueError(f"axis endpoints must be unit vectors in R^{m}")
    return x / np.linalg.norm(x)


def hyperbolic_translation(m: int, repelling, attracting, length: float) -> np.ndarray:
    """Pure translation of H^m by ``length`` along the geodesic between two ideal points."""
    Q = QSpace(m, 1).form
    vp = np.r_[_endpoint(attracting, m), 1.0]
    vm = np.r_[_endpoint(repelling, m), 1.0]
    c = vp @ Q @ vm
    if abs(c) < 1e-12:
        raise ValueError("axis endpoints coincide")
    Pp = np.outer(vp, vm @ Q) / c
    Pm = np.outer(vm, vp @ Q) / c
    return np.exp(length) * Pp + np.exp(-length) * Pm + (np.eye(m + 1) - Pp - Pm)


@dataclass
class PingPongCertificate:
    centers: np.ndarray      # cap centers on S^{m-1}, order g1, g1^-1, g2, ...
    radii: np.ndarray        # angular radii
    margin: float            # min over pairs of (angle between centers - r_i - r_j)
    sampled_margin: float    # worst sampled slack of g(complement of cap(g^-1)) inside cap(g)

    @property
    def holds(self) -> bool:
        return self.margin > 0 and self.sampled_margin > -1e-9


def _dirichlet_cap(g: np.ndarray, m: int):
    # {y : d(y, g o) < d(y, o)} meets the boundary in the cap <(xi,1), g o - o> > 0
    o = np.zeros(m + 1)
    o[-1] = 1.0
    n = g @ o - o
    nx, nt = n[:m], n[m]
    r = np.linalg.norm(nx)
    return nx / r, float(np.arccos(np.clip(nt / r, -1.0, 1.0)))


def ping_pong_certificate(m: int, gens, nSamples: int = 4096) -> PingPongCertificate:
    mats = []
    for g in gens:
        mats += [g, np.linalg.inv(g)]
    caps = [_dirichlet_cap(g, m) for g in mats]
    C = np.array([c for c, _ in caps])
    R = np.array([r for _, r in caps])
    margin = np.inf
    for i in range(len(caps)):
        for j in range(i + 1, len(caps)):
            ang = np.arccos(np.clip(C[i] @ C[j], -1, 1))
            margin = min(margin, ang - R[i] - R[j])
    if m == 2:
        t = (np.arange(nSamples) + 0.5) * 2 * np.pi / nSamples
        S = np.c_[np.cos(t), np.sin(t)]
    else:
        S = _sphere_sample(m, nSamples)
    sampled = np.inf
    for i, g in enumerate(mats):
        j = i + 1 if i % 2 == 0 else i - 1
        outside = S @ C[j] < np.cos(R[j])
        if not outside.any():
            continue
        V = np.c_[S[outside], np.ones(outside.sum())] @ g.T
        X = V[:, :m] / V[:, m:]
        sampled = min(sampled, float(np.min(X @ C[i] - np.cos(R[i]))))
    return PingPongCertificate(C, R, float(margin), float(sampled))


def schottky_so_m1(m: int, axes, lengths, nSamples: int = 4096) -> Representation:
    """Schottky group in SO(m, 1) with prescribed axes and translation lengths.

    ``axes[i]`` is a pair (repelling, attracting) of ideal endpoints, given as
    unit vectors of R^m (or angles when m = 2).  Construction fails unless the
    Dirichlet caps of the generators and their inverses are pairwise disjoint.
    """
    if len(axes) != len(lengths):
        raise ValueError("one axis per length")
    if len(lengths) < 2:
        raise ValueError("a Schottky group needs at least two generators (non-elementary)")
    if any(ell <= 0 for ell in lengths):
        raise ValueError("translation lengths must be positive")
    gens = [hyperbolic_translation(m, a[0], a[1], ell) for a, ell in zip(axes, lengths)]
    cert = ping_pong_certificate(m, gens, nSamples)
    if not cert.holds:
        raise PingPongError(f"ping-pong fails: cap margin {cert.margin:.3g}, "
                            f"sampled margin {cert.sampled_margin:.3g}")
    return Representation(QSpace(m, 1), gens,
                          meta={"certificate": cert, "lengths": list(map(float, lengths))})


def perpendicular_axes():
    """Two axes of H^2 crossing at right angles at the basepoint."""
    return [(np.pi, 0.0), (1.5 * np.pi, 0.5 * np.pi)]


def embed_block(rep0: Representation, target: QSpace) -> Representation:
    m = rep0.space.p
    if rep0.space.q != 1:
        raise ValueError("source must be a representation into SO(m, 1)")
    if target.p < m:
        raise ValueError(f"cannot embed SO({m},1) into SO({target.p},{target.q}): p < m")
    idx = np.arange(target.p - m, target.p + 1)
    gens = []
    for g in rep0.generators:
        G = np.eye(target.d)
        G[np.ix_(idx, idx)] = g
        gens.append(G)
    return Representation(target, gens, rep0.cache_max_length, meta=dict(rep0.meta, block=idx.tolist()))


def deform(rep: Representation, eps: float, seed: int = 0) -> Representation:
    """Right-multiply each generator by exp(eps Y) with Y random in so(p, q)."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return Representation(rep.space, rep.generators, rep.cache_max_length, meta=rep.meta)
    rng = np.random.default_rng(seed)
    gens = []
    for g in rep.generators:
        Y = lie_algebra_element(rep.space, rng.standard_normal((rep.d, rep.d)))
        gens.append(g @ expm(eps * Y))
    return Representation(rep.space, gens, rep.cache_max_length,
                          meta=dict(rep.meta, deformation=(float(eps), int(seed))))


def reference_representation(space: QSpace = QSpace(2, 2), lengths=(4.0, 4.0 * np.sqrt(2.0))):
    """Rank-2 Schottky group in SO(2,1) with perpendicular axes, block embedded."""
    rep0 = schottky_so_m1(2, perpendicular_axes(), list(lengths))
    if space == rep0.space:
        return rep0
    return embed_block(rep0, space)


# ------------------------------------------------------------ diagnostics


@dataclass
class GapReport:
    perLength: list          # (L, min gap, witness word)
    alpha: float
    C: float
    anosov: bool = field(init=False)

    def __post_init__(self):
        self.anosov = self.alpha > 0


def _lower_hull(x, y):
    pts = sorted(zip(x, y))
    hull = []
    for P in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (P[1] - y1) - (y2 - y1) * (P[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(P)
    return np.array(hull)


def gap_report(rep: Representation, tau: TauFrame, Lmax: int) -> GapReport:
    if Lmax < 2:
        raise ValueError("Lmax must be >= 2")
    per = []
    for L, W, M in rep.spheres(Lmax, start=1):
        s = np.linalg.svd(tau.adapted(M), compute_uv=False)
        gaps = np.log(s[:, 0]) - np.log(s[:, 1])
        i = int(np.argmin(gaps))
        per.append((L, float(gaps[i]), tuple(int(a) for a in W[i])))
    Ls = np.array([p[0] for p in per], dtype=float)
    ms = np.array([p[1] for p in per])
    H = _lower_hull(Ls, ms)
    if len(H) >= 2:
        alpha = float(np.polyfit(H[:, 0], H[:, 1], 1)[0])
    else:
        alpha = 0.0
    if alpha <= 1e-9:
        alpha = 0.0
    C = float(max(0.0, np.max(alpha * Ls - ms)))
    return GapReport(per, alpha, C)


@dataclass
class LimitSample:
    word: tuple
    xi: ProjPoint            # U_1(rho(w))
    eta: ProjHyperplane      # S_{d-1}(rho(w^-1)), approximates the same boundary point
    plus: Optional[ProjPoint] = None
    minus: Optional[ProjHyperplane] = None    # repelling hyperplane of rho(w^-1)


def limit_set_sample(rep: Representation, L: int, tau: Optional[TauFrame] = None,
                     min_gap: float = 1.0, eigen: bool = False) -> list:
    """Points U_1(rho(w)) and hyperplanes S_{d-1}(rho(w^-1)) for |w| = L."""
    tau = tau or TauFrame.standard(rep.space)
    *_, (_, W, M) = rep.spheres(L, start=L)
    A = tau.adapted(M)
    U, s, Vt = np.linalg.svd(A)
    gap = np.log(s[:, 0]) - np.log(s[:, 1])
    if gap.min() < min_gap:
        raise ValueError(f"singular gap {gap.min():.3g} at length {L} is below {min_gap}")
    Minv = np.stack([form_inverse(rep.space, g) for g in M])
    _, _, Vt_inv = np.linalg.svd(tau.adapted(Minv))
    Winv, Wm = tau._Winv, tau._W
    out = []
    for i in range(W.shape[0]):
        xi = ProjPoint(Winv @ U[i, :, 0])
        eta = ProjHyperplane(Wm.T @ Vt_inv[i, 0])
        plus = minus = None
        if eigen:
            dp = proximal_data(M[i])
            dm = proximal_data(Minv[i])
            if dp is not None and dm is not None:
                plus, minus = dp[0], dm[1]
        out.append(LimitSample(tuple(int(a) for a in W[i]), xi, eta, plus, minus))
    return out
