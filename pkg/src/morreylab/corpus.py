"""Reproducible test-function corpora.

Shapes are drawn from the seed alone, so the same corpus can be sampled on
any grid; this is what makes refinement studies meaningful.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .dyadic_grid import DyadicCube, Domain, GridFunction, region_mask
from .morrey_norms import MorreyParams, nonseparability_witness
from .muckenhoupt import Weight

KINDS = ("indicator", "bump", "piecewise", "witness")


@dataclass(frozen=True)
class CorpusSpec:
    seed: int
    size: int
    kinds: Tuple[str, ...] = KINDS
    witness_depth: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        unknown = set(self.kinds) - set(KINDS)
        if unknown:
            raise ValueError(f"unknown corpus kinds {sorted(unknown)}")
        if self.size < 0:
            raise ValueError("corpus size must be nonnegative")
        if self.size and not self.kinds:
            raise ValueError("corpus needs at least one kind")


def _random_cube(rng: np.random.Generator, n: int, j_lo: int, j_hi: int,
                 reach: float = 4.0) -> DyadicCube:
    J = int(rng.integers(j_lo, j_hi + 1))
    s = 2.0 ** (-J)
    # closed cube 2^{-J}(M + [-1, 1]^n) inside [-reach, reach]^n
    m_max = max(int(np.floor(reach / s)) - 1, 0)
    M = tuple(int(v) for v in rng.integers(-m_max, m_max + 1, size=n))
    return DyadicCube(J, M)


def cube_indicator(domain: Domain, cube: DyadicCube) -> GridFunction:
    return GridFunction(domain, region_mask(domain, cube).astype(float))


def bump(domain: Domain, cube: DyadicCube, tilt: Sequence[float]) -> GridFunction:
    """(1 - |x - c|^2 / rho^2)_+^2 (1 + tilt . (x - c) / rho), inside ``cube``."""
    bounds = cube.bounds()
    c = [0.5 * (a + b) for a, b in bounds]
    rho = 0.5 * (bounds[0][1] - bounds[0][0])
    X = domain.mesh()
    r2 = sum((x - ci) ** 2 for x, ci in zip(X, c)) / rho ** 2
    prof = np.clip(1.0 - r2, 0.0, None) ** 2
    lin = 1.0 + sum(t * (x - ci) / rho for t, x, ci in zip(tilt, X, c))
    return GridFunction(domain, prof * lin * region_mask(domain, cube))


def piecewise_constant(domain: Domain, cube: DyadicCube, values: np.ndarray) -> GridFunction:
    k = values.shape[0]
    (lo, hi), *_ = cube.bounds()
    side = (hi - lo) / k
    idx = tuple(np.clip(np.floor((x - a) / side), 0, k - 1).astype(int)
                for (a, _), x in zip(cube.bounds(), domain.mesh()))
    return GridFunction(domain, values[idx] * region_mask(domain, cube))


def _member(kind: str, rng: np.random.Generator, domain: Domain, spec: CorpusSpec):
    n = domain.n
    if kind == "indicator":
        return cube_indicator(domain, _random_cube(rng, n, 0, 3))
    if kind == "bump":
        cube = _random_cube(rng, n, -1, 2)
        return bump(domain, cube, rng.uniform(-0.5, 0.5, n))
    if kind == "piecewise":
        cube = _random_cube(rng, n, -1, 2)
        return piecewise_constant(domain, cube, rng.standard_normal((8,) * n))
    signs = rng.choice([-1, 1], size=spec.witness_depth - 1)
    mp = MorreyParams(2.0, -0.25 * n, n)
    return nonseparability_witness(signs, Weight.constant(1.0, n), mp, domain)


def generate_corpus(spec: CorpusSpec, domain: Domain) -> List[GridFunction]:
    """Round-robin over ``spec.kinds``; member i depends only on (seed, i)."""
    out = []
    for i in range(spec.size):
        kind = spec.kinds[i % len(spec.kinds)]
        rng = np.random.default_rng([spec.seed, i])
        out.append(_member(kind, rng, domain, spec))
    return out


def corpus_hash(corpus: Sequence[GridFunction]) -> str:
    h = hashlib.sha256()
    for f in corpus:
        h.update(np.ascontiguousarray(f.samples).tobytes())
    return h.hexdigest()[:16]
