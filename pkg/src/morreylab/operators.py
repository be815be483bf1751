"""Maximal, singular-integral, multiplier, Carleson and commutator operators.

Each operator exists as a plain function on :class:`GridFunction` and as a
scikit-learn style transformer acting on rows of a (n_functions, N^n) array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import maximum_filter, maximum_filter1d
from scipy.signal import fftconvolve
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .dyadic_grid import (CubeFamily, Domain, GridError, GridFunction, default_family,
                          default_scales)


# maximal operator -----------------------------------------------------------

def _window_sums_1d(a: np.ndarray, m: int, axis: int) -> np.ndarray:
    """Sums over every length-m window of ``a`` zero-padded by m-1 on both ends."""
    pad = [(0, 0)] * a.ndim
    pad[axis] = (m, m - 1)
    c = np.cumsum(np.pad(a, pad), axis=axis)
    hi = np.take(c, np.arange(m, c.shape[axis]), axis=axis)
    lo = np.take(c, np.arange(0, c.shape[axis] - m), axis=axis)
    return hi - lo


def _sliding_widths(domain: Domain, fam: Optional[CubeFamily]):
    N = domain.points_per_axis
    if fam is None:
        j_min, _ = default_scales(domain)
    else:
        j_min = fam.j_min
    largest = int(round(2.0 ** (-j_min + 1) / domain.spacing))
    # wider windows only add empty cells, so N cells suffice
    return range(1, min(largest, N) + 1)


def maximal(f: GridFunction, fam: Optional[CubeFamily] = None,
            mode: str = "sliding") -> GridFunction:
    """Uncentered maximal function of |f| extended by zero outside the box.

    ``sliding`` takes every cube made of whole cells (all integer widths up to
    the largest family side, every offset); ``dyadic`` restricts to the closed
    dyadic cubes of the family scales.  Averages divide by the full |Q|.
    """
    a = np.abs(f.samples)
    if mode == "dyadic":
        return GridFunction(f.domain, _maximal_dyadic(a, f.domain, fam))
    if mode != "sliding":
        raise ValueError("mode must be 'sliding' or 'dyadic'")
    N, n = f.domain.points_per_axis, f.domain.n
    out = np.zeros_like(a)
    for m in _sliding_widths(f.domain, fam):
        S = a
        for ax in range(n):
            S = _window_sums_1d(S, m, ax)
        S = S / m ** n
        if n == 1:
            M = maximum_filter1d(S, m, mode="constant", cval=-np.inf)
            out = np.maximum(out, M[m // 2:m // 2 + N])
        else:
            M = maximum_filter(S, size=m, mode="constant", cval=-np.inf)
            out = np.maximum(out, M[m // 2:m // 2 + N, m // 2:m // 2 + N])
    return GridFunction(f.domain, out)


def _maximal_dyadic(a: np.ndarray, domain: Domain, fam: Optional[CubeFamily]) -> np.ndarray:
    if fam is None:
        j_min, j_max = default_scales(domain)
    else:
        j_min, j_max = fam.j_min, fam.j_max
    N, n, h = domain.points_per_axis, domain.n, domain.spacing
    out = np.zeros_like(a)
    for J in range(j_min, j_max + 1):
        b = int(round(2.0 ** (-J) / h))
        if b < 1 or N % b:
            continue
        k = N // b
        if n == 1:
            B = np.pad(a.reshape(k, b).sum(axis=1), 1)
            A = (B[:-1] + B[1:]) / (2 * b)
            block = np.maximum(A[:-1], A[1:])
            out = np.maximum(out, np.repeat(block, b))
        else:
            B = np.pad(a.reshape(k, b, k, b).sum(axis=(1, 3)), 1)
            A = (B[:-1, :-1] + B[1:, :-1] + B[:-1, 1:] + B[1:, 1:]) / (2 * b) ** 2
            block = np.maximum.reduce([A[:-1, :-1], A[1:, :-1], A[:-1, 1:], A[1:, 1:]])
            out = np.maximum(out, np.repeat(np.repeat(block, b, 0), b, 1))
    return out


# Calderón-Zygmund kernels ---------------------------------------------------

@dataclass(frozen=True)
class CZKernel:
    """Off-diagonal kernel K(x, y).

    ``fn`` takes z = x - y with shape (..., n) when ``translation_invariant``,
    otherwise the pair (x, y).  ``c_size`` and ``c_smooth`` bound the size and
    Hölder conditions with exponent ``delta``; both are spot-checked.
    """

    name: str
    n: int
    fn: Callable
    c_size: float
    c_smooth: float
    delta: float = 1.0
    translation_invariant: bool = True
    odd: bool = False

    def __call__(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self.translation_invariant:
            return self.fn(x - y)
        return self.fn(x, y)

    def spot_check(self, n_pairs: int = 1000, seed: int = 1234, scale: float = 4.0) -> dict:
        rng = np.random.default_rng(seed)
        x = rng.uniform(-scale, scale, (n_pairs, self.n))
        y = rng.uniform(-scale, scale, (n_pairs, self.n))
        dist = np.linalg.norm(x - y, axis=1)
        size = np.abs(self(x, y)) * dist ** self.n
        # perturb x by at most a quarter of |x - y| so 2|x-x'| <= max(...)
        u = rng.normal(size=(n_pairs, self.n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        t = rng.uniform(0.01, 0.25, n_pairs) * dist
        x2 = x + u * t[:, None]
        d2 = np.linalg.norm(x2 - y, axis=1)
        lhs = np.abs(self(x, y) - self(x2, y))
        rhs = t ** self.delta / (dist + d2) ** (self.n + self.delta)
        smooth = lhs / rhs
        return {"size": float(size.max()), "smooth": float(smooth.max()),
                "size_ok": bool(size.max() <= self.c_size * (1 + 1e-12)),
                "smooth_ok": bool(smooth.max() <= self.c_smooth * (1 + 1e-12))}


def _hilbert_fn(z):
    z = z[..., 0]
    with np.errstate(divide="ignore"):
        return np.where(z == 0, 0.0, 1.0 / (np.pi * np.where(z == 0, 1.0, z)))


def _cauchy_fn(z):
    return np.pi * _hilbert_fn(z)


def _riesz_fn(j):
    def fn(z):
        r = np.linalg.norm(z, axis=-1)
        safe = np.where(r == 0, 1.0, r)
        return np.where(r == 0, 0.0, z[..., j] / (2 * np.pi * safe ** 3))
    return fn


KERNELS: Dict[str, CZKernel] = {
    "hilbert": CZKernel("hilbert", 1, _hilbert_fn, 1 / np.pi, 4.5 / np.pi, odd=True),
    "cauchy": CZKernel("cauchy", 1, _cauchy_fn, 1.0, 4.5, odd=True),
    "riesz1": CZKernel("riesz1", 2, _riesz_fn(0), 1 / (2 * np.pi), 8.0, odd=True),
    "riesz2": CZKernel("riesz2", 2, _riesz_fn(1), 1 / (2 * np.pi), 8.0, odd=True),
}


def get_kernel(name) -> CZKernel:
    if isinstance(name, CZKernel):
        return name
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}") from None


def _stencil(k: CZKernel, domain: Domain, eps: float) -> np.ndarray:
    N, h = domain.points_per_axis, domain.spacing
    d = np.arange(-(N - 1), N) * h
    Z = np.stack(np.meshgrid(*([d] * domain.n), indexing="ij"), axis=-1)
    vals = k.fn(Z)
    vals[np.linalg.norm(Z, axis=-1) < eps * (1 - 1e-12)] = 0.0
    return vals * domain.cell_volume


def _check_eps(domain: Domain, eps: float):
    if eps < 2 * domain.spacing * (1 - 1e-12):
        raise GridError(f"truncation radius {eps} below resolution 2h = {2 * domain.spacing}")


def cz_apply(k, f: GridFunction, eps: Optional[float] = None) -> GridFunction:
    """T_eps f(y) = sum over cells with |y - x| >= eps of K(y, x) f(x) h^n."""
    k = get_kernel(k)
    d = f.domain
    if k.n != d.n:
        raise ValueError("kernel and domain dimensions differ")
    eps = 4 * d.spacing if eps is None else float(eps)
    _check_eps(d, eps)
    N = d.points_per_axis
    if k.translation_invariant:
        full = fftconvolve(f.samples, _stencil(k, d, eps), mode="full")
        out = full[tuple(slice(N - 1, 2 * N - 1) for _ in range(d.n))]
        return GridFunction(d, out if f.is_complex else out.real)
    return GridFunction(d, _direct_apply(k, f, eps))


def _direct_apply(k: CZKernel, f: GridFunction, eps: float, chunk: int = 512) -> np.ndarray:
    d = f.domain
    pts = np.stack([x.ravel() for x in d.mesh()], axis=1)
    vals = f.samples.ravel()
    out = np.zeros(len(pts), dtype=vals.dtype)
    for s in range(0, len(pts), chunk):
        y = pts[s:s + chunk, None, :]
        K = k(y, pts[None, :, :])
        K[np.linalg.norm(y - pts[None], axis=-1) < eps * (1 - 1e-12)] = 0.0
        out[s:s + chunk] = K @ vals * d.cell_volume
    return out.reshape(d.shape)


def default_eps_list(domain: Domain, count: int = 8) -> list:
    base = 4 * domain.spacing
    return [base * 2.0 ** j for j in range(count) if base * 2.0 ** j <= 2 * domain.half_width]


def cz_maximal_truncation(k, f: GridFunction, eps_list: Optional[Sequence[float]] = None) -> GridFunction:
    """Pointwise max over eps of |T_eps f|."""
    eps_list = default_eps_list(f.domain) if eps_list is None else list(eps_list)
    if not eps_list:
        raise ValueError("empty truncation list")
    out = np.zeros(f.domain.shape)
    for eps in eps_list:
        out = np.maximum(out, np.abs(cz_apply(k, f, eps).samples))
    return GridFunction(f.domain, out)


# Fourier multipliers ----------------------------------------------------------

@dataclass(frozen=True)
class Multiplier:
    """Symbol m(xi) evaluated on the frequency lattice xi_k = k / (2L)."""

    name: str
    symbol: Callable
    kind: str = "custom"
    s: float = 2.0

    def sample(self, domain: Domain) -> np.ndarray:
        xi = sfft.fftfreq(domain.points_per_axis, d=domain.spacing)
        return np.asarray(self.symbol(*np.meshgrid(*([xi] * domain.n), indexing="ij")))


def _block_symbol(j: int):
    def sym(xi):
        a = np.abs(xi)
        return ((a >= 2.0 ** j) & (a < 2.0 ** (j + 1))).astype(float)
    return sym


MULTIPLIERS: Dict[str, Multiplier] = {
    "identity": Multiplier("identity", lambda *xi: np.ones_like(xi[0]), "hormander_mikhlin"),
    "hilbert": Multiplier("hilbert", lambda xi: -1j * np.sign(xi), "hormander_mikhlin"),
    "riesz1": Multiplier("riesz1", lambda a, b: -1j * a / np.where(np.hypot(a, b) == 0, 1,
                                                                      np.hypot(a, b)),
                         "hormander_mikhlin"),
    "riesz2": Multiplier("riesz2", lambda a, b: -1j * b / np.where(np.hypot(a, b) == 0, 1,
                                                                      np.hypot(a, b)),
                         "hormander_mikhlin"),
    "block0": Multiplier("block0", _block_symbol(0), "marcinkiewicz"),
    "smooth_cutoff": Multiplier("smooth_cutoff", lambda *xi: np.exp(-sum(x * x for x in xi)),
                                "hormander_mikhlin"),
}


def get_multiplier(name) -> Multiplier:
    if isinstance(name, Multiplier):
        return name
    if isinstance(name, str) and name.startswith("block") and name[5:].lstrip("-").isdigit():
        j = int(name[5:])
        return Multiplier(name, _block_symbol(j), "marcinkiewicz")
    try:
        return MULTIPLIERS[name]
    except KeyError:
        raise ValueError(f"unknown multiplier {name!r}") from None


def _hermitian(m: np.ndarray) -> bool:
    """m(-xi) == conj(m(xi)) away from the Nyquist frequency."""
    N = m.shape[0]
    idx = np.r_[1:N // 2]
    neg = (-idx) % N
    for ax in range(m.ndim):
        a = np.take(m, idx, axis=ax)
        b = np.take(m, neg, axis=ax)
        if m.ndim == 1 and not np.allclose(a, np.conj(b), atol=1e-14):
            return False
    if m.ndim == 2:
        flip = np.roll(m[::-1, ::-1], 1, axis=(0, 1))
        core = np.ones(m.shape, bool)
        core[N // 2, :] = core[:, N // 2] = False
        return bool(np.allclose(m[core], np.conj(flip[core]), atol=1e-14))
    return True


def fourier_multiplier(m, f: GridFunction) -> GridFunction:
    """Periodized multiplier: DFT, multiply by m on the lattice, inverse DFT.

    Real input and a Hermitian symbol give real output.
    """
    m = get_multiplier(m)
    sym = m.sample(f.domain)
    out = sfft.ifftn(sfft.fftn(f.samples) * sym)
    if not f.is_complex and _hermitian(sym):
        out = out.real
    return GridFunction(f.domain, out)


def hormander_mikhlin_profile(m, domain: Domain) -> dict:
    """Advisory: max over dyadic annuli of R^{s|a|-n} sup |D^a m| per order |a| <= n."""
    m = get_multiplier(m)
    if domain.n != 1:
        raise ValueError("profile implemented for n = 1")
    xi = np.fft.fftshift(sfft.fftfreq(domain.points_per_axis, d=domain.spacing))
    vals = np.fft.fftshift(m.sample(domain))
    dx = xi[1] - xi[0]
    deriv = np.gradient(vals, dx)
    out = {}
    R = 2 * dx
    while 2 * R <= xi.max():
        sel = (np.abs(xi) > R) & (np.abs(xi) < 2 * R)
        for order, arr in ((0, vals), (1, deriv)):
            v = (R ** (m.s * order - 1) * np.abs(arr[sel]).max()) ** (1 / m.s)
            out[order] = max(out.get(order, 0.0), float(v))
        R *= 2
    return {"orders": out, "advisory": True}


def marcinkiewicz_variation(m, domain: Domain) -> dict:
    """Advisory: sup|m| and the largest total variation over representable dyadic blocks."""
    m = get_multiplier(m)
    if domain.n != 1:
        raise ValueError("Marcinkiewicz class is defined for n = 1")
    xi = np.fft.fftshift(sfft.fftfreq(domain.points_per_axis, d=domain.spacing))
    vals = np.fft.fftshift(m.sample(domain))
    dx = xi[1] - xi[0]
    worst = 0.0
    j = math.floor(math.log2(dx))
    while 2.0 ** (j + 1) <= -xi.min():
        for sgn in (1, -1):
            sel = (sgn * xi >= 2.0 ** j) & (sgn * xi < 2.0 ** (j + 1))
            if sel.sum() > 1:
                worst = max(worst, float(np.abs(np.diff(vals[sel])).sum()))
        j += 1
    return {"sup": float(np.abs(vals).max()), "variation": worst, "advisory": True}


# Carleson maximal operator ----------------------------------------------------

def default_xi_grid(domain: Domain, count: int = 64) -> np.ndarray:
    """Symmetric frequency grid with an odd number of points, so 0 is included."""
    top = domain.points_per_axis / (8 * domain.half_width)
    return np.linspace(-top, top, 2 * (count // 2) + 1)


def carleson_maximal(f: GridFunction, xi_grid=None, eps_list=None) -> GridFunction:
    """max over (xi, eps) of |sum_{|x-y|>=eps} f(y) e^{2 pi i xi y} / (x - y) h|.

    Cost is one FFT convolution per (xi, eps) pair.
    """
    d = f.domain
    if d.n != 1:
        raise ValueError("the Carleson operator is implemented for n = 1")
    xi_grid = default_xi_grid(d) if xi_grid is None else np.asarray(xi_grid, float)
    eps_list = default_eps_list(d) if eps_list is None else list(eps_list)
    if len(eps_list) == 0 or len(xi_grid) == 0:
        raise ValueError("empty frequency or truncation list")
    N = d.points_per_axis
    size = sfft.next_fast_len(3 * N - 2)
    stencils = []
    for eps in eps_list:
        _check_eps(d, eps)
        stencils.append(sfft.fft(_stencil(KERNELS["cauchy"], d, eps), size))
    y = d.centers()
    out = np.zeros(N)
    for xi in xi_grid:
        G = sfft.fft(f.samples * np.exp(2j * np.pi * xi * y), size)
        for S in stencils:
            v = sfft.ifft(G * S)[N - 1:2 * N - 1]
            out = np.maximum(out, np.abs(v))
    return GridFunction(d, out)


# BMO and commutators ----------------------------------------------------------

def bmo_seminorm(b: GridFunction, fam: Optional[CubeFamily] = None) -> float:
    """max over family cubes of the mean oscillation |Q|^{-1} int_Q |b - b_Q|."""
    fam = fam or default_family(b.domain)
    best = 0.0
    s = b.samples
    for k in range(len(fam)):
        sl = fam.cell_slices(k)
        block = s[sl]
        if block.size == 0:
            continue
        best = max(best, float(np.abs(block - block.mean()).mean()))
    return best


def log_abs(domain: Domain) -> GridFunction:
    """ln|x| as exact cell averages (n = 1); cell-center samples for n = 2."""
    if domain.n == 2:
        return GridFunction(domain, np.log(domain.radius()))
    h = domain.spacing
    edges = -domain.half_width + np.arange(domain.points_per_axis + 1) * h
    with np.errstate(divide="ignore", invalid="ignore"):
        F = np.where(edges == 0, 0.0, edges * np.log(np.abs(edges)) - edges)
    return GridFunction(domain, np.diff(F) / h)


SYMBOLS: Dict[str, Callable[[Domain], GridFunction]] = {
    "log_abs": log_abs,
    "x": lambda d: GridFunction(d, d.mesh()[0]),
    "const": lambda d: GridFunction(d, np.full(d.shape, 3.0)),
}


def commutator(b: GridFunction, T, f: GridFunction) -> GridFunction:
    """[b, T] f = b T(f) - T(b f) for a linear operator T."""
    if not getattr(T, "linear", False):
        raise ValueError("commutators need a linear operator")
    apply = T.apply if hasattr(T, "apply") else T
    return b * apply(f) - apply(b * f)


# estimator layer ---------------------------------------------------------------

class GridOperator(TransformerMixin, BaseEstimator):
    """Base transformer: rows of X are flattened samples on ``domain``."""

    linear = True

    def __init__(self, domain: Domain = None):
        self.domain = domain

    def _domain(self) -> Domain:
        if self.domain is None:
            raise ValueError("operator has no domain")
        return self.domain

    def fit(self, X=None, y=None):
        if X is not None:
            self._validate(X)
        self.n_features_in_ = self._domain().points_per_axis ** self._domain().n
        return self

    def _validate(self, X) -> np.ndarray:
        X = check_array(X, dtype=None, ensure_2d=True)
        size = self._domain().points_per_axis ** self._domain().n
        if X.shape[1] != size:
            raise ValueError(f"expected {size} columns, got {X.shape[1]}")
        return X

    def transform(self, X):
        X = self._validate(X)
        rows = [self.apply(GridFunction(self._domain(), x)).samples.ravel() for x in X]
        return np.array(rows)

    def apply(self, f: GridFunction) -> GridFunction:
        raise NotImplementedError

    def __call__(self, f: GridFunction) -> GridFunction:
        return self.apply(f)


class IdentityOperator(GridOperator):
    def apply(self, f):
        return f


class MaximalOperator(GridOperator):
    linear = False

    def __init__(self, domain: Domain = None, mode: str = "sliding",
                 j_min: Optional[int] = None, j_max: Optional[int] = None):
        self.domain = domain
        self.mode = mode
        self.j_min = j_min
        self.j_max = j_max

    def _family(self):
        if self.j_min is None and self.j_max is None:
            return None
        j0, j1 = default_scales(self._domain())
        from .dyadic_grid import enumerate_cubes
        return enumerate_cubes(self._domain(), self.j_min if self.j_min is not None else j0,
                               self.j_max if self.j_max is not None else j1)

    def apply(self, f):
        return maximal(f, self._family(), self.mode)


class TruncatedSingularIntegral(GridOperator):
    def __init__(self, domain: Domain = None, kernel: str = "hilbert",
                 eps: Optional[float] = None):
        self.domain = domain
        self.kernel = kernel
        self.eps = eps

    def apply(self, f):
        return cz_apply(self.kernel, f, self.eps)


class MaximalTruncation(GridOperator):
    linear = False

    def __init__(self, domain: Domain = None, kernel: str = "hilbert", eps_list=None):
        self.domain = domain
        self.kernel = kernel
        self.eps_list = eps_list

    def apply(self, f):
        return cz_maximal_truncation(self.kernel, f, self.eps_list)


class FourierMultiplierOperator(GridOperator):
    def __init__(self, domain: Domain = None, symbol: str = "hilbert"):
        self.domain = domain
        self.symbol = symbol

    def apply(self, f):
        return fourier_multiplier(self.symbol, f)


class CarlesonOperator(GridOperator):
    linear = False

    def __init__(self, domain: Domain = None, xi_grid=None, eps_list=None):
        self.domain = domain
        self.xi_grid = xi_grid
        self.eps_list = eps_list

    def apply(self, f):
        return carleson_maximal(f, self.xi_grid, self.eps_list)


class Commutator(GridOperator):
    def __init__(self, domain: Domain = None, symbol: str = "log_abs", operator=None):
        self.domain = domain
        self.symbol = symbol
        self.operator = operator

    def apply(self, f):
        op = self.operator if self.operator is not None else TruncatedSingularIntegral(self.domain)
        b = self.symbol if isinstance(self.symbol, GridFunction) else SYMBOLS[self.symbol](f.domain)
        return commutator(b, op, f)


def make_operator(op_id: str, domain: Domain, eps: Optional[float] = None) -> GridOperator:
    """Build an operator from its identifier, e.g. ``commutator:log_abs:hilbert``.

    ``eps`` fixes the truncation radius of singular integrals (default 4h);
    holding it fixed across grids compares one operator under refinement.
    """
    head, _, rest = op_id.partition(":")
    if head == "identity":
        return IdentityOperator(domain)
    if head == "maximal":
        return MaximalOperator(domain)
    if head in ("hilbert", "riesz1", "riesz2"):
        return TruncatedSingularIntegral(domain, head, eps)
    if head == "hilbert_max":
        return MaximalTruncation(domain, "hilbert")
    if head == "multiplier":
        get_multiplier(rest)
        return FourierMultiplierOperator(domain, rest)
    if head == "carleson":
        return CarlesonOperator(domain)
    if head == "commutator":
        b, _, inner = rest.partition(":")
        if b not in SYMBOLS:
            raise ValueError(f"unknown symbol {b!r}")
        T = make_operator(inner or "hilbert", domain, eps)
        if not T.linear:
            raise ValueError(f"commutator needs a linear operator, got {inner!r}")
        return Commutator(domain, b, T)
    raise ValueError(f"unknown operator {op_id!r}")
