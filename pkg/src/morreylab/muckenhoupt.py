"""Weights, A_p constant estimates, and doubling probes."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import integrate as _quad

from .dyadic_grid import (CubeFamily, DyadicCube, Domain, GridError, GridFunction,
                          Region, bounds_slices, region_mask)
from .report import VerificationReport


class NonIntegrableWeightError(ValueError):
    """The weight (or a power of it) is not locally integrable."""


class ApOverflowError(OverflowError):
    """A dual-exponent integral left the representable range; w is not in A_p."""


def conjugate(p: float) -> float:
    return p / (p - 1.0)


@dataclass(frozen=True)
class Weight:
    """A positive, locally integrable weight.

    kinds: ``constant`` (c), ``power`` (|x|^alpha), ``axis_power``
    (prod |x_i|^alpha_i) and ``grid`` (explicit cell values).  Power kinds are
    integrated in closed form on cells, which keeps singular cells honest.
    """

    kind: str
    n: int = 1
    c: float = 1.0
    alpha: float = 0.0
    alphas: Tuple[float, ...] = ()
    grid: Optional[GridFunction] = None
    exact_cell_integrals: bool = True

    def __post_init__(self):
        if self.kind not in ("constant", "power", "axis_power", "grid"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.n not in (1, 2):
            raise ValueError("weights are defined for n in {1, 2}")
        if self.kind == "constant" and not self.c > 0:
            raise ValueError("constant weight must be positive")
        if self.kind == "power" and not self.alpha > -self.n:
            raise NonIntegrableWeightError(
                f"|x|^{self.alpha} is not locally integrable in dimension {self.n}")
        if self.kind == "axis_power":
            object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
            if len(self.alphas) != self.n:
                raise ValueError("axis_power needs one exponent per axis")
            if any(not a > -1 for a in self.alphas):
                raise NonIntegrableWeightError("axis exponents must exceed -1")
        if self.kind == "grid":
            if self.grid is None or self.grid.domain.n != self.n:
                raise ValueError("grid weight needs a GridFunction of matching dimension")
            s = self.grid.samples
            if np.iscomplexobj(s) or not (s > 0).all():
                raise ValueError("grid weight must be real and positive on every cell")

    # constructors
    @classmethod
    def constant(cls, c: float = 1.0, n: int = 1) -> "Weight":
        return cls("constant", n=n, c=float(c))

    @classmethod
    def power(cls, alpha: float, n: int = 1, exact: bool = True) -> "Weight":
        return cls("power", n=n, alpha=float(alpha), exact_cell_integrals=exact)

    @classmethod
    def axis_power(cls, alphas, exact: bool = True) -> "Weight":
        alphas = tuple(alphas)
        return cls("axis_power", n=len(alphas), alphas=alphas, exact_cell_integrals=exact)

    @classmethod
    def from_grid(cls, g: GridFunction) -> "Weight":
        return cls("grid", n=g.domain.n, grid=g)

    def label(self) -> str:
        if self.kind == "constant":
            return f"const({self.c:g})"
        if self.kind == "power":
            return f"|x|^{self.alpha:g}"
        if self.kind == "axis_power":
            return "prod|x_i|^" + ",".join(f"{a:g}" for a in self.alphas)
        return "grid"

    def __call__(self, *xs) -> np.ndarray:
        if self.kind == "constant":
            return np.full(np.broadcast(*xs).shape, self.c)
        if self.kind == "power":
            r = np.sqrt(sum(np.asarray(x, float) ** 2 for x in xs))
            with np.errstate(divide="ignore"):
                return r ** self.alpha
        if self.kind == "axis_power":
            out = 1.0
            with np.errstate(divide="ignore"):
                for x, a in zip(xs, self.alphas):
                    out = out * np.abs(np.asarray(x, float)) ** a
            return out
        raise TypeError("grid weights are only defined on their lattice")

    def pow(self, beta: float) -> "Weight":
        """The weight w^beta; closed forms are preserved for power kinds."""
        if self.kind == "constant":
            return Weight.constant(self.c ** beta, self.n)
        if self.kind == "power":
            return Weight.power(self.alpha * beta, self.n, self.exact_cell_integrals)
        if self.kind == "axis_power":
            return Weight.axis_power([a * beta for a in self.alphas], self.exact_cell_integrals)
        with np.errstate(over="ignore", divide="ignore"):
            vals = self.grid.samples ** beta
        if not np.isfinite(vals).all():
            raise NonIntegrableWeightError(f"w^{beta:g} leaves the floating-point range")
        return Weight.from_grid(GridFunction(self.grid.domain, vals))

    def cell_integrals(self, domain: Domain) -> np.ndarray:
        if domain.n != self.n:
            raise GridError("weight and domain dimensions differ")
        return _cell_integrals(self, domain)

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "constant":
            d["c"] = self.c
        elif self.kind == "power":
            d["alpha"] = self.alpha
        elif self.kind == "axis_power":
            d["alphas"] = list(self.alphas)
        return d


def _power_antiderivative(x: np.ndarray, a: float) -> np.ndarray:
    return np.sign(x) * np.abs(x) ** (a + 1.0) / (a + 1.0)


def _power_cells_1d(domain: Domain, a: float) -> np.ndarray:
    h = domain.spacing
    edges = -domain.half_width + np.arange(domain.points_per_axis + 1) * h
    F = _power_antiderivative(edges, a)
    return np.diff(F)


@lru_cache(maxsize=64)
def _corner_constant(a: float) -> float:
    """Integral of |x|^a over the unit square [0,1]^2."""
    val, _ = _quad.quad(lambda t: np.cos(t) ** (-(a + 2.0)), 0.0, math.pi / 4)
    return 2.0 * val / (a + 2.0)


def _radial_cells_2d(domain: Domain, a: float, exact: bool) -> np.ndarray:
    h, N = domain.spacing, domain.points_per_axis
    c = domain.centers()
    if not exact:
        X, Y = np.meshgrid(c, c, indexing="ij")
        return np.hypot(X, Y) ** a * h * h
    g, wg = np.polynomial.legendre.leggauss(6)
    out = np.zeros((N, N))
    for xi, wx in zip(g, wg):
        for yj, wy in zip(g, wg):
            X, Y = np.meshgrid(c + 0.5 * h * xi, c + 0.5 * h * yj, indexing="ij")
            out += wx * wy * np.hypot(X, Y) ** a
    out *= 0.25 * h * h
    corner = np.abs(c) < h
    if corner.any():
        idx = np.nonzero(corner)[0]
        for i in idx:
            for j in idx:
                out[i, j] = _corner_constant(a) * h ** (a + 2.0)
    return out


@lru_cache(maxsize=128)
def _cell_integrals(w: Weight, domain: Domain) -> np.ndarray:
    h = domain.spacing
    if w.kind == "constant":
        out = np.full(domain.shape, w.c * domain.cell_volume)
    elif w.kind == "grid":
        if w.grid.domain != domain:
            raise GridError("grid weight lives on another domain")
        out = w.grid.samples * domain.cell_volume
    elif w.kind == "axis_power":
        parts = []
        for a in w.alphas:
            if w.exact_cell_integrals:
                parts.append(_power_cells_1d(domain, a))
            else:
                parts.append(np.abs(domain.centers()) ** a * h)
        out = parts[0] if domain.n == 1 else np.multiply.outer(parts[0], parts[1])
    elif domain.n == 1:
        if w.exact_cell_integrals:
            out = _power_cells_1d(domain, w.alpha)
        else:
            out = np.abs(domain.centers()) ** w.alpha * h
    else:
        out = _radial_cells_2d(domain, w.alpha, w.exact_cell_integrals)
    out = np.asarray(out, dtype=float)
    out.setflags(write=False)
    return out


def weight_measure(w: Weight, region: Region, domain: Domain) -> float:
    """w(region) from per-cell integrals of the cells inside ``region``."""
    mask = region_mask(domain, region)
    if not mask.any():
        raise GridError("region does not meet the domain")
    return float(w.cell_integrals(domain)[mask].sum())


def dual_weight(w: Weight, p: float) -> Weight:
    """w^{1-p'}; raises if the dual exponent breaks local integrability."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    return w.pow(1.0 - conjugate(p))


@dataclass(frozen=True)
class ApEstimate:
    """Lower estimate of [w]_{A_p} over a finite cube family."""

    p: float
    value: float
    attained_cube: DyadicCube
    family: CubeFamily
    resolution: str
    label: str = "lower estimate"


def _dual_densities(w: Weight, p: float, domain: Domain, fam: CubeFamily,
                    resolution: str) -> np.ndarray:
    """Cell averages of the dual weight w^{1-p'} under the chosen resolution."""
    beta = 1.0 - conjugate(p)
    if resolution == "grid":
        try:
            V = dual_weight(w, p).cell_integrals(domain)
        except NonIntegrableWeightError as exc:
            raise ApOverflowError(str(exc)) from exc
        return V / domain.cell_volume
    if resolution != "dyadic":
        raise ValueError("resolution must be 'dyadic' or 'grid'")
    # dual power of the dyadic averages of w at the finest family scale
    side = 2.0 ** (-fam.j_max) if fam.variant == "closed" else 2.0 ** (-fam.j_max - 1)
    side = max(side, domain.spacing)
    b = int(round(side / domain.spacing))
    offset = domain.half_width / side
    if abs(offset - round(offset)) > 1e-9 or domain.points_per_axis % b:
        raise GridError("dyadic blocks are not aligned with the lattice")
    dens = w.cell_integrals(domain) / domain.cell_volume
    k = domain.points_per_axis // b
    if domain.n == 1:
        avg = np.repeat(dens.reshape(k, b).mean(axis=1), b)
    else:
        avg = dens.reshape(k, b, k, b).mean(axis=(1, 3))
        avg = np.repeat(np.repeat(avg, b, axis=0), b, axis=1)
    with np.errstate(divide="ignore", over="ignore"):
        return avg ** beta


def ap_constant(w: Weight, p: float, fam: CubeFamily,
                resolution: str = "dyadic") -> ApEstimate:
    """max over ``fam`` of (w(Q)/|Q|) (w^{1-p'}(Q)/|Q|)^{p-1}.

    ``resolution="dyadic"`` evaluates the dual power on the dyadic averages of
    w at the finest family scale, so refining J_max sharpens the estimate;
    ``"grid"`` integrates w^{1-p'} exactly on lattice cells.
    Both are lower estimates of the true constant.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    domain = fam.domain
    # work with cell densities so that w = const yields exactly 1
    W = fam.box_sums(w.cell_integrals(domain) / domain.cell_volume)
    V = fam.box_sums(_dual_densities(w, p, domain, fam, resolution))
    size = fam.sizes().astype(float)
    ok = size > 0
    if not np.isfinite(V[ok]).all() or (V[ok] > 1e300).any():
        raise ApOverflowError("dual-exponent integral overflows: w is not in A_p")
    vals = np.zeros(len(fam))
    with np.errstate(over="raise"):
        try:
            vals[ok] = (W[ok] / size[ok]) * (V[ok] / size[ok]) ** (p - 1.0)
        except FloatingPointError as exc:
            raise ApOverflowError("A_p product overflows") from exc
    k = int(np.argmax(vals))
    return ApEstimate(p, float(vals[k]), fam.cubes[k], fam, resolution)


def dense_ap_constant(w: Weight, p: float, domain: Domain, stride: int = 1) -> float:
    """Brute-force sup over every lattice interval (n = 1 oracle)."""
    if domain.n != 1:
        raise ValueError("dense scan is implemented for n = 1")
    W = np.concatenate([[0.0], np.cumsum(w.cell_integrals(domain))])
    V = np.concatenate([[0.0], np.cumsum(dual_weight(w, p).cell_integrals(domain))])
    N, h = domain.points_per_axis, domain.spacing
    best = 0.0
    for k in range(1, N + 1, stride):
        a = (W[k:] - W[:-k]) / (k * h)
        b = (V[k:] - V[:-k]) / (k * h)
        best = max(best, float(np.max(a * b ** (p - 1.0))))
    return best


def _bounds_volume(bounds) -> float:
    return float(np.prod([b - a for a, b in bounds]))


def _inside(inner, outer) -> bool:
    return all(c >= a - 1e-12 and d <= b + 1e-12 for (a, b), (c, d) in zip(outer, inner))


def check_doubling(w: Weight, Q: DyadicCube, S: DyadicCube, p: float,
                   fam: CubeFamily) -> VerificationReport:
    """w(Q)/w(S) <= [w]_{A_p} (|Q|/|S|)^p for S inside Q."""
    t0 = time.perf_counter()
    if not _inside(S.bounds(), Q.bounds()):
        raise ValueError("S must be contained in Q")
    domain = fam.domain
    wQ = weight_measure(w, Q, domain)
    wS = weight_measure(w, S, domain)
    ratio = wQ / wS
    c = ap_constant(w, p, fam).value
    bound = c * (_bounds_volume(Q.bounds()) / _bounds_volume(S.bounds())) ** p
    return VerificationReport(
        "doubling", "doubling condition for A_p weights", ratio, bound, c,
        bool(ratio <= bound * (1 + 1e-12)),
        witnesses={"Q": Q.key(), "S": S.key(), "weight": w.label()},
        grid=domain.as_dict(), runtime_s=time.perf_counter() - t0)


def check_reverse_doubling(w: Weight, fam: CubeFamily,
                           cubes=None) -> VerificationReport:
    """sup w(Q)/w(2Q) over cubes whose double fits in the domain; must be < 1."""
    t0 = time.perf_counter()
    domain = fam.domain
    W = w.cell_integrals(domain)
    L = domain.half_width
    ratios, keys = [], []
    skipped = 0
    for c in (cubes if cubes is not None else fam.cubes):
        big = c.dilate(2.0)
        if any(a < -L - 1e-12 or b > L + 1e-12 for a, b in big):
            skipped += 1
            continue
        num = W[bounds_slices(domain, c.bounds())].sum()
        den = W[bounds_slices(domain, big)].sum()
        ratios.append(num / den)
        keys.append(c.key())
    if not ratios:
        raise ValueError("no cube has its double inside the domain")
    ratios = np.asarray(ratios)
    k = int(np.argmax(ratios))
    sup = float(ratios[k])
    return VerificationReport(
        "reverse_doubling", "reverse doubling condition", sup, 1.0, 1.0 - sup,
        bool(sup < 1.0),
        witnesses={"attained": keys[k], "weight": w.label()},
        grid=domain.as_dict(), runtime_s=time.perf_counter() - t0,
        details={"delta": 1.0 - sup, "cubes_checked": len(ratios), "cubes_skipped": skipped,
                 "ratios": ratios.tolist() if len(ratios) <= 64 else []})
