"""Batch front end: ``pqlab {gap,verify,count,distribution} --config FILE``.

Config files hold one ``key = value`` pair per line, where the value is JSON.
Blank lines and lines starting with ``#`` are ignored.  Matrix entries are
written as decimal strings so that they survive round trips unchanged.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import counting as cnt
from . import dynsys as ds
from . import wordgroup as wg
from .pseudometric import (NotSpacelikeError, b_o, b_tau, decompose_HBH, decompose_KBH,
                           make_frame, omega_margin, orbit_length, random_decomposable)
from .qlinalg import QSpace, form_inverse, lambda1
from .repbuilder import (Representation, deform, embed_block, gap_report, limit_set_sample,
                         perpendicular_axes, schottky_so_m1)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
CACHE_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, fieldName: str, msg: str, line: Optional[int] = None):
        self.field, self.line = fieldName, line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}field '{fieldName}': {msg}")


# ------------------------------------------------------------ config


@dataclass
class ExperimentConfig:
    p: int = 2
    q: int = 2
    k: int = 2
    builder: str = "schottky"                 # "schottky" or "matrices"
    lengths: list = field(default_factory=lambda: [4.0, 4.0 * math.sqrt(2.0)])
    axes: Optional[list] = None               # pairs of endpoints; angles when block_dim = 2
    block_dim: int = 2                        # Schottky group lives in SO(block_dim, 1)
    deform_eps: float = 0.0
    generators: Optional[list] = None         # decimal-string matrices for "matrices"
    basepoint: Optional[list] = None          # default e_{p+1}
    tau_basis: Optional[list] = None          # list of q vectors
    Lmax: int = 12
    t_grid: Optional[list] = None             # [t0, t1, n]; None spans the certified range
    fit_window: float = 0.4
    tol_identity: float = 1e-8
    tol_period: float = 1e-7
    tol_fixed_point: float = 1e-6
    tol_benoist: float = 1e-4
    tol_margin: float = 1e-9
    tolerance: Optional[float] = None         # overrides every tol_* when set
    verify_samples: int = 1000
    seed: int = 0
    threads: int = 1
    out: str = "out"
    cache_dir: Optional[str] = None

    # -------------------------------------------------------- text form

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "generators":
                for i, g in enumerate(v or []):
                    lines.append(f"generator_{i + 1} = {json.dumps(g)}")
                continue
            lines.append(f"{f.name} = {json.dumps(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f for f in dataclasses.fields(cls)}
        vals: dict = {}
        gens: dict = {}
        lineOf: dict = {}
        for n, raw in enumerate(text.splitlines(), 1):
            ln = raw.strip()
            if not ln or ln.startswith("#"):
                continue
            key, eq, val = ln.partition("=")
            key = key.strip()
            if not eq:
                raise ConfigError(key or "?", "expected 'key = value'", n)
            try:
                parsed = json.loads(val)
            except json.JSONDecodeError as e:
                raise ConfigError(key, f"bad value ({e.msg})", n) from None
            if key.startswith("generator_") and key[10:].isdigit():
                gens[int(key[10:])] = parsed
                lineOf[key] = n
                continue
            if key not in types or key == "generators":
                raise ConfigError(key, "unknown key", n)
            if key in vals:
                raise ConfigError(key, "duplicate key", n)
            vals[key] = parsed
            lineOf[key] = n
        if gens:
            if sorted(gens) != list(range(1, len(gens) + 1)):
                raise ConfigError("generator_*", "generators must be numbered 1..k")
            vals["generators"] = [gens[i] for i in sorted(gens)]
        cfg = cls(**vals)
        cfg.validate(lineOf)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError("config", f"cannot read {path}: {e.strerror}") from None
        return cls.from_text(text)

    # -------------------------------------------------------- checks

    def validate(self, lineOf: Optional[dict] = None) -> None:
        lineOf = lineOf or {}

        def bad(name, msg):
            raise ConfigError(name, msg, lineOf.get(name))

        for name in ("p", "q", "k", "block_dim", "Lmax", "seed", "threads", "verify_samples"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                bad(name, f"expected an integer, got {v!r}")
        for name in ("deform_eps", "fit_window", "tol_identity", "tol_period", "tol_fixed_point",
                     "tol_benoist", "tol_margin"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                bad(name, f"expected a number, got {v!r}")
        if self.p < 1 or self.q < 1:
            bad("p" if self.p < 1 else "q", "signature entries must be >= 1")
        if self.k < 1:
            bad("k", "rank must be >= 1")
        if self.Lmax < 2:
            bad("Lmax", "must be >= 2")
        if not 0 < self.fit_window <= 1:
            bad("fit_window", "must lie in (0, 1]")
        if self.threads < 1:
            bad("threads", "must be >= 1")
        if self.tolerance is not None and not isinstance(self.tolerance, (int, float)):
            bad("tolerance", f"expected a number or null, got {self.tolerance!r}")
        d = self.p + self.q
        if self.builder == "schottky":
            if not isinstance(self.lengths, list) or len(self.lengths) != self.k:
                bad("lengths", f"expected a list of {self.k} translation lengths")
            if any(not isinstance(x, (int, float)) or x <= 0 for x in self.lengths):
                bad("lengths", "translation lengths must be positive numbers")
            if self.axes is not None and (not isinstance(self.axes, list) or len(self.axes) != self.k):
                bad("axes", f"expected {self.k} (repelling, attracting) pairs")
            if self.block_dim > self.p:
                bad("block_dim", f"SO({self.block_dim},1) does not embed in SO({self.p},{self.q})")
        elif self.builder == "matrices":
            if not self.generators or len(self.generators) != self.k:
                bad("generators", f"expected generator_1 .. generator_{self.k}")
            for i, g in enumerate(self.generators):
                name = f"generator_{i + 1}"
                try:
                    A = np.array([[float(x) for x in r] for r in g])
                except (TypeError, ValueError):
                    bad(name, "entries must be decimal strings or numbers")
                if A.shape != (d, d):
                    bad(name, f"expected a {d}x{d} matrix, got shape {A.shape}")
        else:
            bad("builder", f"unknown builder {self.builder!r} (schottky or matrices)")
        if self.basepoint is not None:
            if not isinstance(self.basepoint, list) or len(self.basepoint) != d:
                bad("basepoint", f"expected a vector of length {d}")
        if self.tau_basis is not None:
            T = np.asarray(self.tau_basis, dtype=float)
            if T.shape != (self.q, d):
                bad("tau_basis", f"expected {self.q} vectors of length {d}")
        if self.t_grid is not None:
            if (not isinstance(self.t_grid, list) or len(self.t_grid) != 3
                    or not self.t_grid[0] < self.t_grid[1] or int(self.t_grid[2]) < 2):
                bad("t_grid", "expected [t0, t1, n] with t0 < t1 and n >= 2")

    def tol(self, name: str) -> float:
        return float(self.tolerance) if self.tolerance is not None else float(getattr(self, name))

    def representation_hash(self) -> str:
        keys = ("p", "q", "k", "builder", "lengths", "axes", "block_dim", "deform_eps",
                "generators", "basepoint", "tau_basis", "seed")
        blob = json.dumps({k: getattr(self, k) for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -------------------------------------------------------- builders

    @property
    def space(self) -> QSpace:
        return QSpace(self.p, self.q)

    def build(self) -> Representation:
        sp = self.space
        if self.builder == "matrices":
            gens = [np.array([[float(x) for x in r] for r in g]) for g in self.generators]
            try:
                rep = Representation(sp, gens)
            except ValueError as e:
                raise ConfigError("generators", str(e)) from None
        else:
            if self.axes is not None:
                axes = self.axes
            elif self.block_dim == 2 and self.k == 2:
                axes = perpendicular_axes()
            else:
                raise ConfigError("axes", "default axes exist only for rank 2 in SO(2,1)")
            try:
                rep0 = schottky_so_m1(self.block_dim, axes, self.lengths)
            except ValueError as e:
                raise ConfigError("lengths", str(e)) from None
            rep = rep0 if rep0.space == sp else embed_block(rep0, sp)
        if self.deform_eps:
            rep = deform(rep, self.deform_eps, self.seed)
        return rep

    def frame(self):
        o = self.basepoint if self.basepoint is not None else self.space.basis(self.p + 1)
        T = None if self.tau_basis is None else np.asarray(self.tau_basis, dtype=float).T
        try:
            return make_frame(self.space, np.asarray(o, dtype=float), T)
        except ValueError as e:
            raise ConfigError("basepoint" if T is None else "tau_basis", str(e)) from None

    def grid(self):
        if self.t_grid is None:
            return None
        t0, t1, n = self.t_grid
        return np.linspace(float(t0), float(t1), int(n))


# ------------------------------------------------------------ sphere cache


class SphereCache:
    """b-values per sphere stored as .npz files keyed by (config hash, mode, L)."""

    def __init__(self, root, key: str):
        self.dir = Path(root) / key
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, mode, L):
        return self.dir / f"v{CACHE_VERSION}_{mode}_L{L:02d}.npz"

    def load(self, mode, L):
        path = self._path(mode, L)
        if not path.exists():
            return None
        try:
            with np.load(path) as z:
                if int(z["version"]) != CACHE_VERSION:
                    return None
                return z["values"], z["exceptional"]
        except (OSError, KeyError, ValueError):
            return None

    def store(self, mode, L, values, exc):
        np.savez(self._path(mode, L), version=CACHE_VERSION, values=values, exceptional=exc)


# ------------------------------------------------------------ identity suites


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        s = f"{tag} {self.name:<18} worst={self.worst:.3e} tol={self.tol:.1e}"
        return s + (f"  {self.detail}" if self.detail else "")


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def suite_omega(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_margin")
    sample = limit_set_sample(rep, min(6, cfg.Lmax), frame.tau, min_gap=0.0)
    m = omega_margin(frame, sample)
    return SuiteResult("omega_membership", m > tol, m, tol,
                       f"limit-set margin {m:.3e} at o (must exceed tol)")


def suite_b_o_formula(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_identity")
    J = frame.Jo
    worst, n = 0.0, 0
    for L, W, M in rep.spheres(min(cfg.Lmax, 8), start=1):
        for g in M:
            try:
                ell = orbit_length(frame, g)
            except NotSpacelikeError:
                continue
            if ell == 0.0:
                continue          # g fixes o
            half = 0.5 * lambda1(J @ g @ J @ form_inverse(frame.space, g))
            worst = max(worst, _rel(half, ell))
            n += 1
    return SuiteResult("b_o_formula", n > 0 and worst < tol, worst, tol, f"{n} space-like orbit points")


def suite_decompositions(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_identity")
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(cfg.verify_samples):
        for kind, dec, proj in (("KBH", decompose_KBH, b_tau), ("HBH", decompose_HBH, b_o)):
            g, s0 = random_decomposable(frame, rng, kind)
            A, s, B = dec(frame, g)
            worst = max(worst, np.linalg.norm(A @ frame.boost(s) @ B - g) / np.linalg.norm(g),
                        _rel(s, proj(frame, g)), _rel(s, s0))
    return SuiteResult("decompositions", worst < tol, float(worst), tol,
                       f"{cfg.verify_samples} constructed inputs per kind")


def _random_point(rng, rep):
    return ds.boundary_point(rep, wg.random_word(rng, rep.k, 0, 4),
                             wg.random_cyclic_word(rng, rep.k, 1, 4, primitive=False))


def suite_cocycles(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_identity")
    rng = np.random.default_rng(cfg.seed + 1)
    worst = 0.0
    for _ in range(cfg.verify_samples):
        x = _random_point(rng, rep)
        g0, g1 = (wg.random_word(rng, rep.k, 0, 6) for _ in range(2))
        g01 = wg.multiply(g0, g1)
        x1, _ = ds.translate(rep, g1, x)
        for c in (ds.cocycle_c_o, ds.cocycle_c_tau):
            worst = max(worst, abs(c(frame, rep, g01, x) - c(frame, rep, g0, x1) - c(frame, rep, g1, x)))
        gx, _ = ds.translate(rep, g0, x)
        transfer = ds.cohomology_U(frame, rep, gx) - ds.cohomology_U(frame, rep, x)
        diff = ds.cocycle_c_tau(frame, rep, g0, x) - ds.cocycle_c_o(frame, rep, g0, x)
        worst = max(worst, abs(diff - transfer))
    return SuiteResult("cocycles", worst < tol, worst, tol,
                       f"{cfg.verify_samples} triples: chain rule and transfer")


def suite_periods(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_period")
    worst, n = 0.0, 0
    for c in wg.conjugacy_classes(rep.k, 6):
        if not c.primitive:
            continue
        xp = ds.attracting_point(rep, c.letters)
        lam = lambda1(rep.evaluate(c.letters))
        for coc in (ds.cocycle_c_o, ds.cocycle_c_tau):
            worst = max(worst, abs(coc(frame, rep, c.letters, xp) - lam) / lam)
        n += 1
    return SuiteResult("periods", worst < tol, worst, tol, f"{n} primitive classes")


def suite_gromov(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_identity")
    rng = np.random.default_rng(cfg.seed + 2)
    worst, done = 0.0, 0
    while done < cfg.verify_samples:
        x, y = _random_point(rng, rep), _random_point(rng, rep)
        g = wg.random_word(rng, rep.k, 0, 6)
        # margin failures surface here, before the pairing of x with y
        co_x, co_y = ds.cocycle_c_o(frame, rep, g, x), ds.cocycle_c_o(frame, rep, g, y)
        ct_y = ds.cocycle_c_tau(frame, rep, g, y)
        if ds.same_point(x, y):
            continue
        base_o, base_t = ds.gromov_o(frame, rep, x, y), ds.gromov_tau(frame, rep, x, y)
        gx, _ = ds.translate(rep, g, x)
        gy, _ = ds.translate(rep, g, y)
        worst = max(worst, abs(ds.gromov_o(frame, rep, gx, gy) - base_o + co_x + co_y),
                    abs(ds.gromov_tau(frame, rep, gx, gy) - base_t + co_x + ct_y))
        done += 1
    return SuiteResult("gromov", worst < tol, worst, tol, f"{done} pairs")


def suite_fixed_points(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_fixed_point")
    worst, n = 0.0, 0
    for c in wg.conjugacy_classes(rep.k, 6):
        if not c.primitive:
            continue
        xm, xp = ds.repelling_point(rep, c.letters), ds.attracting_point(rep, c.letters)
        B = ds.fixed_point_cross_ratio(frame, rep, c.letters)
        G = ds.fixed_point_gscript(frame, rep, c.letters)
        worst = max(worst, abs(ds.gromov_o(frame, rep, xm, xp) + 0.5 * B),
                    abs(ds.gromov_tau(frame, rep, xm, xp) + 0.5 * B - 0.5 * G))
        n += 1
    return SuiteResult("fixed_points", worst < tol, worst, tol, f"{n} primitive classes")


def benoist_decay(frame, rep, w, nmax: int = 10):
    """Residuals for n = 1..nmax and whether they are nonincreasing from n = 3.

    Once a residual reaches rounding level further decrease cannot be
    observed, so steps are compared up to 64 ulp of lambda_1(w^n).
    """
    res = [ds.benoist_residuals(frame, rep, tuple(w) * n) for n in range(1, nmax + 1)]
    ok = True
    for n in range(3, nmax):
        floor = 64 * np.finfo(float).eps * max(1.0, lambda1(rep.evaluate(tuple(w) * (n + 1))))
        for j in (0, 1):
            if res[n][j] > res[n - 1][j] + floor:
                ok = False
    return res, ok


def suite_benoist(cfg, rep, frame) -> SuiteResult:
    tol = cfg.tol("tol_benoist")
    rng = np.random.default_rng(cfg.seed + 3)
    worst, ok = 0.0, True
    for _ in range(5):
        w = wg.random_cyclic_word(rng, rep.k, 2, 4)
        res, mono = benoist_decay(frame, rep, w)
        ok &= mono
        worst = max(worst, *res[-1])
    return SuiteResult("benoist_decay", ok and worst < tol, worst, tol,
                       "monotone from n=3" if ok else "not monotone from n=3")


SUITES = (suite_omega, suite_b_o_formula, suite_decompositions, suite_cocycles, suite_periods,
          suite_gromov, suite_fixed_points, suite_benoist)


def run_suites(cfg: ExperimentConfig, rep=None, frame=None) -> list:
    rep = rep or cfg.build()
    frame = frame or cfg.frame()
    out = []
    for fn in SUITES:
        name = fn.__name__[len("suite_"):]
        try:
            out.append(fn(cfg, rep, frame))
        except (ArithmeticError, ValueError) as e:
            out.append(SuiteResult(name, False, math.inf, math.nan, f"error: {e}"))
    return out


# ------------------------------------------------------------ commands


def _outdir(cfg) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_gap(cfg: ExperimentConfig) -> int:
    rep, frame = cfg.build(), cfg.frame()
    rpt = gap_report(rep, frame.tau, cfg.Lmax)
    out = _outdir(cfg)
    with open(out / "gap.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["L", "min_gap", "witness"])
        for L, g, word in rpt.perLength:
            w.writerow([L, repr(g), wg.fmt(word)])
    cnt.write_json(out / "gap.json", {"alpha": rpt.alpha, "C": rpt.C, "anosov": rpt.anosov,
                                      "Lmax": cfg.Lmax})
    print(f"alpha = {rpt.alpha:.6g}, C = {rpt.C:.6g}")
    return EXIT_OK if rpt.anosov else EXIT_FAIL


def cmd_verify(cfg: ExperimentConfig) -> int:
    results = run_suites(cfg)
    for r in results:
        print(r.line())
    cnt.write_json(_outdir(cfg) / "verify.json",
                   {r.name: {"passed": bool(r.passed), "worst": r.worst if math.isfinite(r.worst) else None,
                             "tol": r.tol if math.isfinite(r.tol) else None, "detail": r.detail}
                    for r in results})
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_count(cfg: ExperimentConfig, mode: str) -> int:
    rep, frame = cfg.build(), cfg.frame()
    cache = SphereCache(cfg.cache_dir, cfg.representation_hash()) if cfg.cache_dir else None
    out = _outdir(cfg)
    try:
        series = cnt.count_series(frame, rep, cfg.Lmax, cfg.grid(), mode, threads=cfg.threads,
                                  cache=cache)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    try:
        fit = cnt.fit_asymptotic(series, window=cfg.fit_window)
    except cnt.InsufficientDataError as e:
        cnt.write_series_csv(out / f"count_{mode}.csv", series)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    cnt.write_series_csv(out / f"count_{mode}.csv", series, fit)
    cnt.write_json(out / f"count_{mode}.json", cnt.fit_summary(series, fit))
    print(f"{mode}: h = {fit.h:.6g}, M = {fit.M:.6g}, residual = {fit.residual:.3g}, "
          f"certified t < {series.t_certified:.6g}")
    return EXIT_OK


def cmd_distribution(cfg: ExperimentConfig, mode: str) -> int:
    out = _outdir(cfg)
    fitPath = out / f"count_{mode}.json"
    if not fitPath.exists():
        print(f"error: no fit at {fitPath}; run 'count --mode {mode}' first", file=sys.stderr)
        return EXIT_FAIL
    fit = json.loads(fitPath.read_text())
    lo, hi = fit["window"]
    tGrid = cfg.grid() if cfg.t_grid is not None else np.linspace(lo, hi, 50)
    names = list(cnt.BUILTIN_TESTS)
    tab = cnt.equidistribution_stat(cfg.frame(), cfg.build(), names, mode, fit["h"], fit["M"],
                                    tGrid, cfg.Lmax)
    with open(out / f"distribution_{mode}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["t"] + names)
        for row in tab:
            w.writerow([repr(float(x)) for x in row])
    print("tail means: " + ", ".join(f"{n} = {tab[:, j + 1].mean():.4g}" for j, n in enumerate(names)))
    return EXIT_OK


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pqlab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("gap", "verify", "count", "distribution"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--mode", choices=("b_o", "b_tau"), default="b_o")
        sp.add_argument("--Lmax", type=int)
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        for name in ("Lmax", "out", "seed", "threads"):
            v = getattr(args, name)
            if v is not None:
                setattr(cfg, name, v)
        cfg.validate()
        if args.command == "gap":
            return cmd_gap(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "count":
            return cmd_count(cfg, args.mode)
        return cmd_distribution(cfg, args.mode)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
