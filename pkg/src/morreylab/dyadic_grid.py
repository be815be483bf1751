"""Uniform lattices, dyadic cubes and cell-center quadrature.

Functions live on the box ``[-L, L]^n`` sampled at cell centers and are
treated as piecewise constant on cells.  A region contains a cell when the
cell center lies in it (half-open on the upper side, so that dyadic children
partition their parent exactly).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

_TIE = 1e-9


class GridError(ValueError):
    """Raised for invalid lattice geometry or empty regions."""


@dataclass(frozen=True)
class Domain:
    n: int
    half_width: float = 8.0
    points_per_axis: int = 4096

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {self.n}")
        if self.half_width <= 0:
            raise GridError("half_width must be positive")
        N = self.points_per_axis
        if N < 8 or N & (N - 1):
            raise GridError(f"points_per_axis must be a power of two >= 8, got {N}")
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    def centers(self) -> np.ndarray:
        """Cell centers along one axis."""
        N, h = self.points_per_axis, self.spacing
        return -self.half_width + (np.arange(N) + 0.5) * h

    def mesh(self) -> Tuple[np.ndarray, ...]:
        c = self.centers()
        return tuple(np.meshgrid(*([c] * self.n), indexing="ij"))

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(x * x for x in self.mesh()))

    def refine(self, levels: int = 1) -> "Domain":
        return Domain(self.n, self.half_width, self.points_per_axis * 2 ** levels)

    def index_range(self, lo: float, hi: float) -> Tuple[int, int]:
        """Cells whose center c satisfies lo <= c < hi, clipped to the lattice."""
        h, L, N = self.spacing, self.half_width, self.points_per_axis
        a = math.ceil((lo + L) / h - 0.5 - _TIE)
        b = math.ceil((hi + L) / h - 0.5 - _TIE)
        return max(a, 0), min(b, N)

    def as_dict(self) -> dict:
        return {"n": self.n, "half_width": self.half_width,
                "points_per_axis": self.points_per_axis, "spacing": self.spacing}


class GridFunction:
    """Samples of a function on the cells of a :class:`Domain`.

    Instances are read-only; arithmetic returns new objects.
    """

    __array_priority__ = 20

    def __init__(self, domain: Domain, samples):
        samples = np.asarray(samples)
        if samples.shape != domain.shape:
            if samples.size == domain.points_per_axis ** domain.n:
                samples = samples.reshape(domain.shape)
            else:
                raise GridError(
                    f"expected {domain.shape} samples, got {samples.shape}")
        if not np.isfinite(samples).all():
            raise GridError("GridFunction samples must be finite")
        if not np.iscomplexobj(samples):
            samples = samples.astype(float, copy=False)
        samples = samples.copy()
        samples.setflags(write=False)
        self.domain = domain
        self.samples = samples

    @classmethod
    def zeros(cls, domain: Domain) -> "GridFunction":
        return cls(domain, np.zeros(domain.shape))

    @classmethod
    def from_callable(cls, domain: Domain, fn) -> "GridFunction":
        """Evaluate ``fn`` at cell centers; ``fn`` receives one array per axis."""
        return cls(domain, np.broadcast_to(fn(*domain.mesh()), domain.shape))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.samples)

    def _wrap(self, values) -> "GridFunction":
        return GridFunction(self.domain, values)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise GridError("grid functions live on different domains")
            return other.samples
        return other

    def __add__(self, other):
        return self._wrap(self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.samples - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.samples)

    def __mul__(self, other):
        return self._wrap(self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.samples / self._other(other))

    def __neg__(self):
        return self._wrap(-self.samples)

    def __abs__(self):
        return self._wrap(np.abs(self.samples))

    def real(self) -> "GridFunction":
        return self._wrap(self.samples.real)

    def support_mask(self) -> np.ndarray:
        return self.samples != 0

    def __repr__(self):
        return f"GridFunction(n={self.domain.n}, N={self.domain.points_per_axis})"


@dataclass(frozen=True)
class DyadicCube:
    """``Q_{J,M}`` and its half-open and point-centered relatives.

    closed:     2^{-J}(M + [-1, 1]^n), side 2^{-J+1}
    half_open:  2^{-J}(M + [0, 1]^n),  side 2^{-J}
    centered:   x + 2^{-J}[-1, 1]^n,   side 2^{-J+1}
    """

    J: int
    M: Tuple[int, ...] = (0,)
    variant: str = "closed"
    center: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.variant not in ("closed", "half_open", "centered"):
            raise GridError(f"unknown cube variant {self.variant!r}")
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        if self.variant == "centered":
            if self.center is None:
                raise GridError("centered cube needs a center")
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def n(self) -> int:
        return len(self.center) if self.variant == "centered" else len(self.M)

    def bounds(self) -> Tuple[Tuple[float, float], ...]:
        s = 2.0 ** (-self.J)
        if self.variant == "closed":
            return tuple((s * (m - 1), s * (m + 1)) for m in self.M)
        if self.variant == "half_open":
            return tuple((s * m, s * (m + 1)) for m in self.M)
        return tuple((x - s, x + s) for x in self.center)

    def dilate(self, factor: float) -> Tuple[Tuple[float, float], ...]:
        """Bounds of the concentric cube with ``factor`` times the side."""
        out = []
        for lo, hi in self.bounds():
            c, r = 0.5 * (lo + hi), 0.5 * (hi - lo) * factor
            out.append((c - r, c + r))
        return tuple(out)

    def children(self) -> Iterator["DyadicCube"]:
        """The 2^n closed cubes at scale J+1 tiling a closed cube."""
        if self.variant != "closed":
            raise GridError("children are defined for closed cubes only")
        for e in np.ndindex(*([2] * self.n)):
            yield DyadicCube(self.J + 1, tuple(2 * m + 2 * b - 1 for m, b in zip(self.M, e)))

    def contains(self, other: "DyadicCube") -> bool:
        return all(a <= c + _TIE and d <= b + _TIE
                   for (a, b), (c, d) in zip(self.bounds(), other.bounds()))

    def key(self) -> str:
        if self.variant == "centered":
            return f"Q(x={list(self.center)},J={self.J})"
        tag = "Q" if self.variant == "closed" else "Qt"
        return f"{tag}[J={self.J},M={list(self.M)}]"


@dataclass(frozen=True)
class Ball:
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GridError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


Region = Union[DyadicCube, Ball, None]


def cube_geometry(c: DyadicCube) -> Tuple[Tuple[float, ...], float]:
    """Unclipped center and side length of ``c``."""
    (lo, hi), *_ = c.bounds()
    center = tuple(0.5 * (a + b) for a, b in c.bounds())
    return center, hi - lo


def bounds_slices(domain: Domain, bounds) -> Tuple[slice, ...]:
    out = []
    for lo, hi in bounds:
        a, b = domain.index_range(lo, hi)
        out.append(slice(a, max(a, b)))
    return tuple(out)


def region_mask(domain: Domain, region: Region) -> np.ndarray:
    mask = np.zeros(domain.shape, dtype=bool)
    if region is None:
        mask[...] = True
    elif isinstance(region, Ball):
        d2 = sum((x - c) ** 2 for x, c in zip(domain.mesh(), region.center))
        mask = d2 < region.radius ** 2
    else:
        mask[bounds_slices(domain, region.bounds())] = True
    return mask


@dataclass(frozen=True)
class CubeFamily:
    """All cubes of one variant with J_min <= J <= J_max meeting the domain."""

    domain: Domain
    j_min: int
    j_max: int
    variant: str
    cubes: Tuple[DyadicCube, ...]
    lo: np.ndarray = field(repr=False, compare=False)
    hi: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def sizes(self) -> np.ndarray:
        """Number of lattice cells in each (clipped) cube."""
        return np.prod(np.maximum(self.hi - self.lo, 0), axis=1)

    def box_sums(self, values: np.ndarray) -> np.ndarray:
        return box_sums(values, self.lo, self.hi)

    def cell_slices(self, k: int) -> Tuple[slice, ...]:
        return tuple(slice(a, b) for a, b in zip(self.lo[k], self.hi[k]))


def enumerate_cubes(domain: Domain, j_min: int, j_max: int,
                    variant: str = "closed") -> CubeFamily:
    """Finite realization of the dyadic lattice restricted to ``domain``.

    Ordering is J ascending, then M lexicographic.
    """
    if j_min > j_max:
        raise GridError("j_min must not exceed j_max")
    if variant not in ("closed", "half_open"):
        raise GridError("families are built from closed or half_open cubes")
    finest = 2.0 ** (-j_max + (1 if variant == "closed" else 0))
    if finest < 2 * domain.spacing * (1 - _TIE):
        raise GridError(
            f"scale too fine: side {finest} spans fewer than 2 cells (h={domain.spacing})")
    L = domain.half_width
    cubes = []
    for J in range(j_min, j_max + 1):
        t = L * 2.0 ** J
        if variant == "closed":
            # interior (M-1, M+1) 2^-J meets (-L, L)
            ms = range(math.floor(-t - 1) + 1, math.ceil(t + 1))
        else:
            ms = range(math.floor(-t - 1) + 1, math.ceil(t))
        for M in np.ndindex(*([len(ms)] * domain.n)):
            cubes.append(DyadicCube(J, tuple(ms[i] for i in M), variant))
    lo = np.empty((len(cubes), domain.n), dtype=np.int64)
    hi = np.empty_like(lo)
    for k, c in enumerate(cubes):
        for ax, (a, b) in enumerate(c.bounds()):
            lo[k, ax], hi[k, ax] = domain.index_range(a, b)
    return CubeFamily(domain, j_min, j_max, variant, tuple(cubes), lo, hi)


def default_scales(domain: Domain) -> Tuple[int, int]:
    """Coarsest J whose central cube covers the box, finest J spanning 2 cells."""
    j_min = -math.ceil(math.log2(domain.half_width) - _TIE)
    j_max = math.floor(1 - math.log2(2 * domain.spacing) + _TIE)
    return j_min, j_max


def default_family(domain: Domain, variant: str = "closed") -> CubeFamily:
    j_min, j_max = default_scales(domain)
    if variant == "half_open":
        j_max -= 1
    return enumerate_cubes(domain, j_min, j_max, variant)


class SummedArea:
    """Padded prefix-sum table answering box sums over index boxes [lo, hi)."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values)
        self.ndim = values.ndim
        P = values
        for ax in range(self.ndim):
            P = np.cumsum(P, axis=ax)
            pad = [(0, 0)] * self.ndim
            pad[ax] = (1, 0)
            P = np.pad(P, pad)
        self.table = P

    def __call__(self, lo, hi):
        P = self.table
        lo = np.asarray(lo)
        hi = np.maximum(np.asarray(hi), lo)
        if self.ndim == 1:
            return P[hi[..., 0]] - P[lo[..., 0]]
        a0, a1, b0, b1 = lo[..., 0], lo[..., 1], hi[..., 0], hi[..., 1]
        return P[b0, b1] - P[a0, b1] - P[b0, a1] + P[a0, a1]


def box_sums(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sums of ``values`` over index boxes [lo, hi) via summed-area tables."""
    return SummedArea(values)(lo, hi)


def _check_domain(f: GridFunction, region: Region):
    mask = region_mask(f.domain, region)
    if not mask.any():
        raise GridError("region does not meet the domain")
    return mask


def integrate(f: GridFunction, region: Region = None):
    """Riemann sum ``h^n * sum(samples)`` over cells whose centers lie in ``region``."""
    mask = _check_domain(f, region)
    return f.samples[mask].sum() * f.domain.cell_volume


def restrict(f: GridFunction, c: Region) -> GridFunction:
    """Zero ``f`` outside the region ``c``."""
    mask = _check_domain(f, c)
    return GridFunction(f.domain, np.where(mask, f.samples, 0))


def indicator(domain: Domain, region: Region) -> GridFunction:
    return GridFunction(domain, region_mask(domain, region).astype(float))


def covering_cube(mask: np.ndarray, fam: CubeFamily) -> Optional[int]:
    """Index in ``fam`` of the finest cube whose cells contain ``mask``'s support."""
    if not mask.any():
        return None
    idx = np.nonzero(mask)
    lo = np.array([i.min() for i in idx])
    hi = np.array([i.max() + 1 for i in idx])
    ok = np.all((fam.lo <= lo) & (fam.hi >= hi), axis=1)
    if not ok.any():
        return None
    sizes = np.where(ok, fam.sizes(), np.iinfo(np.int64).max)
    return int(np.argmin(sizes))


def stride_centers(domain: Domain, stride: int) -> np.ndarray:
    """Cell centers at the given stride along each axis, shape (k, n)."""
    c = domain.centers()[stride // 2::stride]
    grids = np.meshgrid(*([c] * domain.n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def centered_cubes(centers: Sequence[Sequence[float]], j_range: Sequence[int]):
    return [DyadicCube(J, variant="centered", center=tuple(x))
            for J in j_range for x in centers]
