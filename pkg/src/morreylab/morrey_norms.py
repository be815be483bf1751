"""Weighted Morrey norms over dyadic, centered and ball families."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .dyadic_grid import (Ball, CubeFamily, DyadicCube, Domain, GridError, GridFunction,
                          box_sums, default_family, default_scales, enumerate_cubes,
                          region_mask, stride_centers)
from .muckenhoupt import Weight, check_reverse_doubling, conjugate, weight_measure
from .report import VerificationReport

_EPS = 1e-12


@dataclass(frozen=True)
class MorreyParams:
    """Exponents of L^r_p(w): 1 < p < inf and -n/p <= r < 0."""

    p: float
    r: float
    n: int = 1

    def __post_init__(self):
        if not 1 < self.p < math.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if not (-self.n / self.p - _EPS <= self.r < 0):
            raise ValueError(f"r must lie in [-n/p, 0) = [{-self.n / self.p:g}, 0), got {self.r}")

    @property
    def scale_exponent(self) -> float:
        """1/p + r/n, the power of w(Q) dividing the local L_p mass."""
        return max(1.0 / self.p + self.r / self.n, 0.0)

    @property
    def is_endpoint(self) -> bool:
        return abs(self.r + self.n / self.p) <= 1e-12

    def paired(self) -> "PredualParams":
        return PredualParams(conjugate(self.p), -self.n - self.r, self.n)


@dataclass(frozen=True)
class PredualParams:
    """Exponents of the predual H^rho L_p(w): 1 < p < inf, -n < rho < -n/p.

    Pieces are measured in L_p with weight w^{1-p}; the paired Morrey space
    has exponent p' and r = -n - rho.
    """

    p: float
    rho: float
    n: int = 1

    def __post_init__(self):
        if not 1 < self.p < math.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if not (-self.n < self.rho < -self.n / self.p):
            raise ValueError(
                f"rho must lie in (-n, -n/p) = ({-self.n}, {-self.n / self.p:g}), got {self.rho}")

    @property
    def cost_exponent(self) -> float:
        """-(1/p + rho/n), the power of w(Q) in the cost of a piece."""
        return -(1.0 / self.p + self.rho / self.n)

    def paired(self) -> MorreyParams:
        return MorreyParams(conjugate(self.p), -self.n - self.rho, self.n)


class MorreyNorm(NamedTuple):
    value: float
    attained: Optional[DyadicCube]


def _check(f: GridFunction, w: Weight, mp: MorreyParams):
    if f.domain.n != mp.n or w.n != mp.n:
        raise ValueError("function, weight and parameters must share the dimension")


def _local_masses(f: GridFunction, w: Weight, p: float):
    W = w.cell_integrals(f.domain)
    return np.abs(f.samples) ** p * W, W


def _sup(mass: np.ndarray, wq: np.ndarray, mp: MorreyParams):
    vals = np.zeros_like(mass)
    ok = wq > 0
    # prefix-sum differences can dip just below zero on empty boxes
    mass = np.maximum(mass, 0.0)
    vals[ok] = wq[ok] ** (-mp.scale_exponent) * mass[ok] ** (1.0 / mp.p)
    k = int(np.argmax(vals))
    return float(vals[k]), k


def morrey_norm(f: GridFunction, w: Weight, mp: MorreyParams,
                fam: Optional[CubeFamily] = None) -> MorreyNorm:
    """sup over ``fam`` of w(Q)^{-(1/p+r/n)} (int_Q |f|^p w)^{1/p}.

    Ties go to the first cube in family order.
    """
    _check(f, w, mp)
    fam = fam if fam is not None else default_family(f.domain)
    if len(fam) == 0:
        raise GridError("empty cube family")
    if not f.samples.any():
        return MorreyNorm(0.0, None)
    F, W = _local_masses(f, w, mp.p)
    value, k = _sup(fam.box_sums(F), fam.box_sums(W), mp)
    return MorreyNorm(value, fam.cubes[k])


def morrey_norm_halfopen(f: GridFunction, w: Weight, mp: MorreyParams,
                         fam: Optional[CubeFamily] = None) -> MorreyNorm:
    fam = fam if fam is not None else default_family(f.domain, "half_open")
    if fam.variant != "half_open":
        raise ValueError("expected a half-open family")
    return morrey_norm(f, w, mp, fam)


def _index_ranges(domain: Domain, lo: np.ndarray, hi: np.ndarray):
    h, L, N = domain.spacing, domain.half_width, domain.points_per_axis
    a = np.ceil((lo + L) / h - 0.5 - 1e-9).astype(np.int64)
    b = np.ceil((hi + L) / h - 0.5 - 1e-9).astype(np.int64)
    return np.clip(a, 0, N), np.clip(b, 0, N)


def morrey_norm_centered(f: GridFunction, w: Weight, mp: MorreyParams,
                         centers: Optional[np.ndarray] = None,
                         j_range: Optional[Sequence[int]] = None,
                         stride: int = 4) -> MorreyNorm:
    """Sup over cubes x + 2^{-J}[-1,1]^n with x from a grid of cell centers."""
    _check(f, w, mp)
    d = f.domain
    if centers is None:
        centers = stride_centers(d, stride)
    centers = np.asarray(centers, dtype=float).reshape(-1, d.n)
    if j_range is None:
        j_min, j_max = default_scales(d)
        j_range = range(j_min, j_max + 1)
    if len(centers) == 0 or len(j_range) == 0:
        raise GridError("empty cube family")
    if not f.samples.any():
        return MorreyNorm(0.0, None)
    F, W = _local_masses(f, w, mp.p)
    best, arg = -1.0, None
    for J in j_range:
        s = 2.0 ** (-J)
        lo, hi = _index_ranges(d, centers - s, centers + s)
        value, k = _sup(box_sums(F, lo, hi), box_sums(W, lo, hi), mp)
        if value > best:
            best, arg = value, DyadicCube(J, variant="centered", center=tuple(centers[k]))
    return MorreyNorm(best, arg)


def default_balls(domain: Domain, stride: int = 4,
                  j_range: Optional[Sequence[int]] = None) -> list:
    if j_range is None:
        j_min, j_max = default_scales(domain)
        j_range = range(j_min, j_max + 1)
    return [Ball(tuple(x), 2.0 ** (-J)) for J in j_range
            for x in stride_centers(domain, stride)]


def morrey_norm_balls(f: GridFunction, w: Weight, mp: MorreyParams,
                      balls: Optional[Sequence[Ball]] = None) -> MorreyNorm:
    """Sup over balls B(x, 2^{-J}); cells belong to a ball when their center does."""
    _check(f, w, mp)
    d = f.domain
    balls = default_balls(d) if balls is None else list(balls)
    if not balls:
        raise GridError("empty ball family")
    if not f.samples.any():
        return MorreyNorm(0.0, None)
    F, W = _local_masses(f, w, mp.p)
    c = d.centers()
    mass = np.zeros(len(balls))
    wq = np.zeros(len(balls))
    for k, b in enumerate(balls):
        sl, parts = [], []
        for x0 in b.center:
            a, e = d.index_range(x0 - b.radius, x0 + b.radius + d.spacing)
            sl.append(slice(a, e))
            parts.append((c[a:e] - x0) ** 2)
        if any(s.stop <= s.start for s in sl):
            continue
        d2 = parts[0] if d.n == 1 else np.add.outer(parts[0], parts[1])
        m = d2 < b.radius ** 2
        mass[k] = F[tuple(sl)][m].sum()
        wq[k] = W[tuple(sl)][m].sum()
    value, k = _sup(mass, wq, mp)
    return MorreyNorm(value, None if value == 0 else balls[k])


def weighted_lp_norm(f: GridFunction, w: Weight, p: float) -> float:
    """(int |f|^p w)^{1/p} over the whole domain."""
    return float((np.abs(f.samples) ** p * w.cell_integrals(f.domain)).sum() ** (1.0 / p))


def embedding_check(f: GridFunction, w: Weight, mp: MorreyParams, p_tilde: float,
                    fam: Optional[CubeFamily] = None) -> VerificationReport:
    """The chain ||f|L^r_p(w)|| <= ||f|L^r_pt(w)|| <= ||f|L_{u,w}||, u = -n/r."""
    t0 = time.perf_counter()
    n, p, r = mp.n, mp.p, mp.r
    if not (p <= p_tilde and -n / p <= -n / p_tilde + _EPS and -n / p_tilde <= r + _EPS):
        raise ValueError("need p <= p~ and -n/p <= -n/p~ <= r < 0")
    u = -n / r
    a = morrey_norm(f, w, mp, fam).value
    b = morrey_norm(f, w, MorreyParams(p_tilde, r, n), fam).value
    c = weighted_lp_norm(f, w, u)
    tol = 1e-10 * max(1.0, c)
    ok = a <= b + tol and b <= c + tol
    return VerificationReport(
        "embedding", "embedding chain of weighted Morrey spaces", a, c,
        ratio_of(a, c), bool(ok),
        witnesses={"weight": w.label()}, grid=f.domain.as_dict(),
        runtime_s=time.perf_counter() - t0,
        details={"p": p, "p_tilde": p_tilde, "r": r, "u": u,
                 "norm_p": a, "norm_p_tilde": b, "norm_lebesgue_u": c})


def ratio_of(a: float, b: float) -> float:
    return a / b if b > 0 else (0.0 if a == 0 else math.inf)


# witness construction ------------------------------------------------------

def witness_cube(l: int, n: int) -> DyadicCube:
    """2^{-l}((2,...,2) + [0,1]^n): pairwise disjoint, inside [-1,1]^n."""
    return DyadicCube(l, (2,) * n, "half_open")


def default_witness_depth(domain: Domain) -> int:
    """Largest l whose witness cube still spans two cells per axis."""
    return int(math.floor(-math.log2(2 * domain.spacing) + 1e-9))


def nonseparability_witness(signs: Sequence[int], w: Weight, mp: MorreyParams,
                            domain: Domain) -> GridFunction:
    """sum_l signs[l-2] w(Q_l)^{r/n} chi_{Q_l}, l = 2, 3, ..."""
    if mp.is_endpoint or mp.r <= -mp.n / mp.p:
        raise ValueError("witnesses need r > -n/p strictly")
    l_max = 1 + len(signs)
    if l_max > default_witness_depth(domain):
        raise GridError(f"grid too coarse for depth {l_max}: "
                        f"at most {default_witness_depth(domain)}")
    out = np.zeros(domain.shape)
    for l, s in enumerate(signs, start=2):
        if s not in (1, -1):
            raise ValueError("signs must be +1 or -1")
        Q = witness_cube(l, mp.n)
        out[region_mask(domain, Q)] = s * weight_measure(w, Q, domain) ** (mp.r / mp.n)
    return GridFunction(domain, out)


def witness_bound(w: Weight, mp: MorreyParams, domain: Domain, l_max: int) -> dict:
    """Geometric-series bound on the half-open norm of any witness of depth l_max.

    Cubes meeting one witness cube contribute at most 1; cubes 2^{2-l0}[0,1]^n
    holding the tail l >= l0 are bounded through the reverse doubling ratio of
    the cubes Q_{l,(2,...,2)}.
    """
    s = mp.scale_exponent * mp.p
    # dilates 2^k Q_{l,(2,...,2)} whose doubles stay inside [-1,1]^n
    cubes = [DyadicCube(l - k, variant="centered", center=(2.0 ** (1 - l),) * mp.n)
             for l in range(2, l_max + 1) for k in range(0, l - 1)]
    rd = check_reverse_doubling(w, enumerate_cubes(domain, 0, 0), cubes=cubes)
    c = rd.left
    geo = sum(c ** (k * s) for k in range(l_max - 1))
    worst = 1.0
    for l0 in range(2, l_max + 1):
        big = DyadicCube(l0 - 2, (0,) * mp.n)
        half = DyadicCube(l0 - 2, (0,) * mp.n, "half_open")
        ratio = weight_measure(w, big, domain) / weight_measure(w, half, domain)
        worst = max(worst, ratio ** s * geo)
    return {"bound": worst ** (1.0 / mp.p), "reverse_doubling": c, "series": geo}
