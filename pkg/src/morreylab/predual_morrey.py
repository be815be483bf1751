"""Atomic decompositions of the predual space and two-sided norm brackets.

The infimum over all representations cannot be computed; it is bracketed by
a dyadic split search from above and by pairings against Morrey-normalized
test functions from below.  Discrete Hölder makes ``lower <= upper`` exact.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dyadic_grid import (CubeFamily, DyadicCube, GridError, GridFunction, SummedArea,
                          bounds_slices, covering_cube, default_family, region_mask)
from .morrey_norms import MorreyParams, PredualParams, morrey_norm
from .muckenhoupt import Weight
from .report import VerificationReport, array_hash, dumps


class InconsistencyError(RuntimeError):
    """A certified lower bound exceeded a certified upper bound."""


def _pairing(f: GridFunction, g: GridFunction) -> complex:
    return complex((f.samples * g.samples).sum() * f.domain.cell_volume)


def _abs_pairing(f: GridFunction, g: GridFunction) -> float:
    return float(np.abs(f.samples * g.samples).sum() * f.domain.cell_volume)


class Decomposition:
    """Finite list of (cube, piece) pairs with each piece supported in its cube.

    Built either from explicit pieces or as the restriction of one function
    to a set of cubes whose cells are disjoint; the second form materializes
    pieces on demand.
    """

    def __init__(self, pieces: Sequence[Tuple[DyadicCube, GridFunction]] = (),
                 params: Optional[PredualParams] = None, weight: Optional[Weight] = None,
                 *, source: Optional[GridFunction] = None,
                 cubes: Sequence[DyadicCube] = ()):
        self.params = params
        self.weight = weight
        self.source = source
        if source is not None:
            self._pieces = None
            self.cubes = list(cubes)
            owner = np.zeros(source.domain.shape, dtype=np.int64)
            for c in self.cubes:
                owner[region_mask(source.domain, c)] += 1
            if (owner > 1).any():
                raise GridError("partition cubes overlap")
            if (source.support_mask() & (owner == 0)).any():
                raise GridError("partition does not cover the support")
        else:
            self._pieces = list(pieces)
            self.cubes = [c for c, _ in self._pieces]
            for c, piece in self._pieces:
                if (piece.support_mask() & ~region_mask(piece.domain, c)).any():
                    raise GridError(f"piece not supported in {c.key()}")

    def __len__(self):
        return len(self.cubes)

    @property
    def pieces(self):
        if self._pieces is not None:
            return iter(self._pieces)
        d = self.source.domain
        return ((c, GridFunction(d, np.where(region_mask(d, c), self.source.samples, 0)))
                for c in self.cubes)

    def reconstruct(self, domain=None) -> GridFunction:
        if self.source is not None:
            return self.source
        pieces = list(self.pieces)
        if not pieces:
            if domain is None:
                raise ValueError("empty decomposition needs a domain")
            return GridFunction.zeros(domain)
        total = sum(p.samples for _, p in pieces)
        return GridFunction(pieces[0][1].domain, total)

    def to_json(self) -> str:
        entries = []
        digest = hashlib.sha256()
        for c, piece in self.pieces:
            ref = array_hash(piece.samples)
            entries.append({"J": c.J, "M": list(c.M), "variant": c.variant, "samples_ref": ref})
            digest.update(f"{c.key()}:{ref};".encode())
        return dumps({"pieces": entries, "content_hash": digest.hexdigest()[:16]})


def _cube_costs(pieces_abs_p: SummedArea, W: SummedArea, domain, cubes, pp: PredualParams):
    out = np.zeros(len(cubes))
    for k, c in enumerate(cubes):
        sl = bounds_slices(domain, c.bounds())
        lo = np.array([s.start for s in sl])
        hi = np.array([s.stop for s in sl])
        mass = float(pieces_abs_p(lo[None], hi[None])[0])
        if mass <= 0:
            continue
        wq = float(W(lo[None], hi[None])[0])
        out[k] = wq ** pp.cost_exponent * mass ** (1.0 / pp.p)
    return out


def _piece_cost(piece: GridFunction, c: DyadicCube, pp: PredualParams, w: Weight) -> float:
    d = piece.domain
    sl = bounds_slices(d, c.bounds())
    V = w.pow(1.0 - pp.p).cell_integrals(d)
    mass = float((np.abs(piece.samples[sl]) ** pp.p * V[sl]).sum())
    if mass <= 0:
        return 0.0
    wq = float(w.cell_integrals(d)[sl].sum())
    return wq ** pp.cost_exponent * mass ** (1.0 / pp.p)


def decomposition_cost(dec: Decomposition, pp: Optional[PredualParams] = None,
                       w: Optional[Weight] = None) -> float:
    """sum over pieces of w(Q)^{-(1/p+rho/n)} ||piece w^{-1/p'} | L_p||."""
    pp = pp or dec.params
    w = w or dec.weight
    if pp is None or w is None:
        raise ValueError("cost needs predual parameters and a weight")
    if dec.source is not None:
        d = dec.source.domain
        A = SummedArea(np.abs(dec.source.samples) ** pp.p
                       * w.pow(1.0 - pp.p).cell_integrals(d))
        return float(_cube_costs(A, SummedArea(w.cell_integrals(d)), d, dec.cubes, pp).sum())
    return float(sum(_piece_cost(piece, c, pp, w) for c, piece in dec.pieces))


@dataclass
class PredualNormBracket:
    upper: float
    lower: float
    witness_upper: Optional[Decomposition] = None
    witness_lower: Optional[GridFunction] = None
    details: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.lower == 0:
            return 1.0 if self.upper == 0 else np.inf
        return self.upper / self.lower


def _cube_box(domain, c: DyadicCube):
    sl = bounds_slices(domain, c.bounds())
    return np.array([s.start for s in sl]), np.array([s.stop for s in sl])


def _split_search(h: GridFunction, pp: PredualParams, w: Weight, depth: int,
                  fam: CubeFamily) -> Tuple[float, List[DyadicCube], List[DyadicCube]]:
    d = h.domain
    A = SummedArea(np.abs(h.samples) ** pp.p * w.pow(1.0 - pp.p).cell_integrals(d))
    W = SummedArea(w.cell_integrals(d))
    S = SummedArea(h.support_mask().astype(np.int64))
    root = covering_cube(h.support_mask(), fam)
    if root is None:
        raise GridError("support of h is not covered by any family cube")
    visited: List[DyadicCube] = []

    def single(c):
        lo, hi = _cube_box(d, c)
        mass = float(A(lo[None], hi[None])[0])
        wq = float(W(lo[None], hi[None])[0])
        return wq ** pp.cost_exponent * mass ** (1.0 / pp.p)

    def occupied(c):
        lo, hi = _cube_box(d, c)
        return int(S(lo[None], hi[None])[0]) > 0

    def best(c, k):
        visited.append(c)
        base = single(c)
        if k == 0 or c.J + 1 > fam.j_max:
            return base, [c]
        total, leaves = 0.0, []
        for child in c.children():
            if not occupied(child):
                continue
            cost, sub = best(child, k - 1)
            total += cost
            leaves.extend(sub)
            if total >= base:
                return base, [c]
        # keep a split only when strictly cheaper
        return (total, leaves) if total < base else (base, [c])

    cost, leaves = best(fam.cubes[root], depth)
    return cost, leaves, visited


def predual_norm_upper(h: GridFunction, pp: PredualParams, w: Weight,
                       search_depth: int = 8,
                       fam: Optional[CubeFamily] = None) -> PredualNormBracket:
    """Cheapest decomposition found by recursive dyadic splitting.

    Starts from the smallest family cube covering supp(h); a split replaces a
    cube by its occupied children and is kept only if it lowers the cost.
    """
    if h.domain.n != pp.n or w.n != pp.n:
        raise ValueError("dimension mismatch")
    fam = fam or default_family(h.domain)
    if not h.samples.any():
        return PredualNormBracket(0.0, 0.0, Decomposition((), pp, w, source=h, cubes=[]))
    cost, leaves, visited = _split_search(h, pp, w, search_depth, fam)
    dec = Decomposition(params=pp, weight=w, source=h, cubes=leaves)
    return PredualNormBracket(cost, 0.0, dec,
                              details={"leaves": len(leaves), "nodes": len(visited),
                                       "search_depth": search_depth,
                                       "covering_cube": visited[0].key()})


def holder_extremal(h: GridFunction, w: Weight, pp: PredualParams,
                    cube: Optional[DyadicCube] = None) -> GridFunction:
    """The function attaining discrete Hölder equality against h on ``cube``."""
    d = h.domain
    W = w.cell_integrals(d)
    mag = (np.abs(h.samples) * d.cell_volume / W) ** (pp.p - 1.0)
    phase = np.conj(np.sign(h.samples)) if h.is_complex else np.sign(h.samples)
    g = mag * phase
    if cube is not None:
        g = np.where(region_mask(d, cube), g, 0)
    return GridFunction(d, g)


def _leaf_extremal(h: GridFunction, w: Weight, pp: PredualParams,
                   leaves: Sequence[DyadicCube]) -> GridFunction:
    """Per-leaf extremals scaled so each leaf cube has unit local Morrey ratio."""
    mp = pp.paired()
    d = h.domain
    W = w.cell_integrals(d)
    base = holder_extremal(h, w, pp).samples
    g = np.zeros(d.shape, dtype=base.dtype)
    for c in leaves:
        m = region_mask(d, c)
        mass = (np.abs(base[m]) ** mp.p * W[m]).sum()
        if mass <= 0:
            continue
        g[m] = base[m] * W[m].sum() ** mp.scale_exponent / mass ** (1.0 / mp.p)
    return GridFunction(d, g)


def conic_extremal(h: GridFunction, w: Weight, pp: PredualParams, fam: CubeFamily,
                   max_cells: int = 1024, max_constraints: int = 8192) -> Optional[GridFunction]:
    """Maximizer of int h g over the unit ball of the paired Morrey norm on ``fam``.

    Solved as a p-norm cone program on the bounding box of supp h (zero
    elsewhere is optimal).  Returns None for complex input, oversized problems
    or solver failure; the caller renormalizes, so solver tolerance never
    leaks into the bound.
    """
    if h.is_complex or not h.samples.any():
        return None
    d = h.domain
    nz = np.nonzero(h.samples)
    a = np.array([ix.min() for ix in nz])
    b = np.array([ix.max() + 1 for ix in nz])
    box = tuple(b - a)
    if int(np.prod(box)) > max_cells:
        return None
    mp = pp.paired()
    W = w.cell_integrals(d)
    rhs = fam.box_sums(W) ** mp.scale_exponent
    lo = np.maximum(fam.lo, a) - a
    hi = np.minimum(fam.hi, b) - a
    live = (hi > lo).all(axis=1)
    bounds = {}
    for k in np.nonzero(live)[0]:
        key = tuple(lo[k]) + tuple(hi[k])
        bounds[key] = min(bounds.get(key, np.inf), rhs[k])
    if len(bounds) > max_constraints:
        return None
    import cvxpy as cp

    sl = tuple(slice(i, j) for i, j in zip(a, b))
    flat = np.arange(int(np.prod(box))).reshape(box)
    scale = W[sl].ravel() ** (1.0 / mp.p)
    g = cp.Variable(flat.size)
    cons = []
    for key, r in bounds.items():
        idx = flat[tuple(slice(i, j) for i, j in zip(key[:d.n], key[d.n:]))].ravel()
        cons.append(cp.pnorm(cp.multiply(scale[idx], g[idx]), mp.p) <= r)
    prob = cp.Problem(cp.Maximize((h.samples[sl].ravel() * d.cell_volume) @ g), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        return None
    if g.value is None:
        return None
    out = np.zeros(d.shape)
    out[sl] = np.asarray(g.value).reshape(box)
    return GridFunction(d, out)


def random_piecewise_constant(domain, cube: DyadicCube, rng: np.random.Generator,
                              blocks_per_axis: int = 8) -> GridFunction:
    (lo, hi), *_ = cube.bounds()
    side = (hi - lo) / blocks_per_axis
    vals = rng.standard_normal((blocks_per_axis,) * domain.n)
    idx = []
    for (a, _b), x in zip(cube.bounds(), domain.mesh()):
        idx.append(np.clip(np.floor((x - a) / side), 0, blocks_per_axis - 1).astype(int))
    out = vals[tuple(idx)] * region_mask(domain, cube)
    return GridFunction(domain, out)


def standard_corpus(h: GridFunction, pp: PredualParams, w: Weight,
                    fam: Optional[CubeFamily] = None, search_depth: int = 8,
                    n_random: int = 10, seed: int = 0,
                    max_cubes: int = 256, conic: bool = False) -> List[GridFunction]:
    """Test functions for the lower bound, built around the support of h.

    With ``conic`` the cone-program maximizer is added when the support is small.
    """
    fam = fam or default_family(h.domain)
    d = h.domain
    if not h.samples.any():
        return []
    _, leaves, visited = _split_search(h, pp, w, search_depth, fam)
    cubes = sorted(set(visited) | set(leaves), key=lambda c: (c.J, c.M))[:max_cubes]
    corpus = [_leaf_extremal(h, w, pp, leaves)]
    for c in cubes:
        corpus.append(holder_extremal(h, w, pp, c))
        corpus.append(GridFunction(d, region_mask(d, c).astype(float)))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        corpus.append(random_piecewise_constant(d, visited[0], rng))
    if conic:
        g = conic_extremal(h, w, pp, fam)
        if g is not None:
            corpus.append(g)
    return corpus


def predual_norm_lower(h: GridFunction, pp: PredualParams, w: Weight,
                       corpus: Optional[Sequence[GridFunction]] = None,
                       fam: Optional[CubeFamily] = None) -> Tuple[float, Optional[GridFunction]]:
    """max over the corpus of |int h g| / ||g | L^r_{p'}(w)||, r = -n - rho."""
    fam = fam or default_family(h.domain)
    if corpus is None:
        corpus = standard_corpus(h, pp, w, fam)
        if not corpus:
            return 0.0, None
    elif len(corpus) == 0:
        raise ValueError("empty corpus")
    mp = pp.paired()
    best, arg = 0.0, None
    for g in corpus:
        nrm = morrey_norm(g, w, mp, fam).value
        if nrm == 0:
            continue
        val = abs(_pairing(h, g)) / nrm
        if val > best:
            best, arg = val, g
    return best, arg


def predual_bracket(h: GridFunction, pp: PredualParams, w: Weight,
                    search_depth: int = 8, corpus=None,
                    fam: Optional[CubeFamily] = None, rtol: float = 1e-6,
                    conic: bool = True, conic_gap: float = 1e-3) -> PredualNormBracket:
    """Upper bound from the split search, lower bound from test pairings.

    When the default corpus leaves a relative gap above ``conic_gap`` the
    cone-program maximizer is tried as one more test function.
    """
    fam = fam or default_family(h.domain)
    up = predual_norm_upper(h, pp, w, search_depth, fam)
    lo, g = predual_norm_lower(h, pp, w, corpus, fam)
    source = "corpus"
    if conic and corpus is None and lo * (1 + conic_gap) < up.upper:
        extra = conic_extremal(h, w, pp, fam)
        if extra is not None:
            lo2, g2 = predual_norm_lower(h, pp, w, [extra], fam)
            if lo2 > lo:
                lo, g, source = lo2, g2, "conic"
    if lo > up.upper * (1 + rtol) + 1e-300:
        raise InconsistencyError(f"lower bound {lo!r} exceeds upper bound {up.upper!r}")
    up.lower, up.witness_lower = lo, g
    up.details["lower_source"] = source
    return up


def _require_pairing(mp: MorreyParams, pp: PredualParams):
    if mp.n != pp.n or abs(mp.r + pp.rho + mp.n) > 1e-12 or abs(1 / mp.p + 1 / pp.p - 1) > 1e-12:
        raise ValueError("pairing needs r + rho = -n and conjugate Lebesgue exponents")


def holder_pairing_check(g: GridFunction, h: GridFunction, mp: MorreyParams,
                         pp: PredualParams, w: Weight, search_depth: int = 8,
                         fam: Optional[CubeFamily] = None, rtol: float = 1e-9) -> VerificationReport:
    """int |g h| <= ||g | Morrey|| * (upper bracket of h)."""
    t0 = time.perf_counter()
    _require_pairing(mp, pp)
    fam = fam or default_family(g.domain)
    left = _abs_pairing(g, h)
    gn = morrey_norm(g, w, mp, fam).value
    hu = predual_norm_upper(h, pp, w, search_depth, fam).upper
    right = gn * hu
    ok = left <= right * (1 + rtol) + 1e-300
    return VerificationReport(
        "holder_pairing", "Hölder-type pairing of Morrey and predual spaces",
        left, right, left / right if right > 0 else 0.0, bool(ok),
        witnesses={"g": array_hash(g.samples), "h": array_hash(h.samples),
                   "weight": w.label()},
        grid=g.domain.as_dict(), runtime_s=time.perf_counter() - t0,
        details={"morrey_norm_g": gn, "predual_upper_h": hu, "slack": right - left})


def lattice_check(f: GridFunction, g: GridFunction, pp: PredualParams, w: Weight,
                  search_depth: int = 8, fam: Optional[CubeFamily] = None) -> VerificationReport:
    """lower(f) <= C upper(g) for |f| <= |g|, plus the bracket of |f| against f."""
    t0 = time.perf_counter()
    if (np.abs(f.samples) > np.abs(g.samples) * (1 + 1e-12)).any():
        raise ValueError("lattice check needs |f| <= |g| pointwise")
    fam = fam or default_family(f.domain)
    bf = predual_bracket(f, pp, w, search_depth, fam=fam)
    bg = predual_bracket(g, pp, w, search_depth, fam=fam)
    babs = predual_bracket(abs(f), pp, w, search_depth, fam=fam)
    C = bf.lower / bg.upper if bg.upper > 0 else 0.0
    abs_ratio = (max(babs.upper / bf.lower, bf.upper / babs.lower)
                 if bf.lower > 0 and babs.lower > 0 else 1.0)
    return VerificationReport(
        "lattice", "lattice property of the predual norm", bf.lower, bg.upper, C,
        bool(C <= 1 + 1e-9),
        witnesses={"f": array_hash(f.samples), "g": array_hash(g.samples)},
        grid=f.domain.as_dict(), runtime_s=time.perf_counter() - t0,
        details={"bracket_f": [bf.lower, bf.upper], "bracket_g": [bg.lower, bg.upper],
                 "bracket_abs_f": [babs.lower, babs.upper], "abs_equivalence": abs_ratio})


def associated_norm_morrey(f: GridFunction, w: Weight, mp: MorreyParams,
                           corpus: Sequence[GridFunction],
                           fam: Optional[CubeFamily] = None) -> float:
    """sup over the corpus of int |f g| with g normalized in L^r_p(w)."""
    if not len(corpus):
        raise ValueError("empty corpus")
    fam = fam or default_family(f.domain)
    best = 0.0
    for g in corpus:
        nrm = morrey_norm(g, w, mp, fam).value
        if nrm > 0:
            best = max(best, _abs_pairing(f, g) / nrm)
    return best


def associated_norm_predual(f: GridFunction, w: Weight, pp: PredualParams,
                            corpus: Sequence[GridFunction], search_depth: int = 8,
                            fam: Optional[CubeFamily] = None) -> float:
    """sup over the corpus of int |f g| with g normalized by its upper bracket.

    The upper bracket dominates the true norm, so this is a lower estimate.
    """
    if not len(corpus):
        raise ValueError("empty corpus")
    fam = fam or default_family(f.domain)
    best = 0.0
    for g in corpus:
        up = predual_norm_upper(g, pp, w, search_depth, fam).upper
        if up > 0:
            best = max(best, _abs_pairing(f, g) / up)
    return best
