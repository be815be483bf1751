"""Experiment configuration and the check runners used by the command line."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import yaml

from .corpus import KINDS, CorpusSpec, corpus_hash, generate_corpus
from .dyadic_grid import (DyadicCube, Domain, GridFunction, default_scales, enumerate_cubes,
                          region_mask)
from .extrapolation import (PairFamily, RdFConfig, Target, estimate_operator_norm,
                            extrapolation_check, predual_boundedness_check, rdf_properties,
                            space_norm)
from .morrey_norms import (MorreyParams, PredualParams, embedding_check, morrey_norm,
                           morrey_norm_balls, morrey_norm_centered, morrey_norm_halfopen,
                           nonseparability_witness, default_witness_depth,
                           weighted_lp_norm, witness_bound)
from .muckenhoupt import Weight, ap_constant, check_reverse_doubling
from .operators import SYMBOLS, make_operator
from .predual_morrey import holder_pairing_check, predual_bracket
from .report import VerificationReport, array_hash


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


# schema ----------------------------------------------------------------------

_TOP = {"seed", "domain", "weight", "morrey", "predual", "operators", "corpus",
        "checks", "output"}
_DOMAIN = {"n", "half_width", "points_per_axis"}
_WEIGHT = {"kind", "c", "alpha", "alphas"}
_CORPUS = {"size", "kinds", "witness_depth"}

CHECK_KEYS: Dict[str, set] = {
    "ap": {"p", "levels"},
    "reverse_doubling": set(),
    "norm_equivalence": {"stride"},
    "embedding": {"p_tilde"},
    "witness": {"pairs", "depth"},
    "holder": {"functions"},
    "predual_bracket": {"search_depth"},
    "operator_norm": {"operator", "space", "p"},
    "extrapolation": {"operator", "p1", "targets"},
    "predual_boundedness": {"operator"},
    "rdf": {"K", "space"},
    "commutator": {"symbol", "operator", "translates"},
}

SUBCOMMAND_CHECKS = {
    "ap": {"ap", "reverse_doubling"},
    "norm": {"norm_equivalence", "embedding", "witness"},
    "predual": {"holder", "predual_bracket"},
    "operator": {"operator_norm", "commutator", "predual_boundedness"},
    "extrapolate": {"extrapolation", "rdf"},
}


def _unknown(section: str, got: dict, allowed: set):
    extra = set(got) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {section}: {sorted(extra)}")


def parse_weight(spec: dict, n: int) -> Weight:
    if not isinstance(spec, dict):
        raise ConfigError("weight must be a mapping")
    _unknown("weight", spec, _WEIGHT)
    kind = spec.get("kind", "constant")
    try:
        if kind == "constant":
            return Weight.constant(float(spec.get("c", 1.0)), n)
        if kind == "power":
            return Weight.power(float(spec["alpha"]), n)
        if kind == "axis_power":
            return Weight.axis_power([float(a) for a in spec["alphas"]])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad weight: {exc}") from exc
    raise ConfigError(f"unknown weight kind {kind!r}")


@dataclass
class ExperimentConfig:
    seed: int
    domain: Domain
    weight: Weight
    morrey: MorreyParams
    predual: PredualParams
    operators: List[str]
    corpus: CorpusSpec
    checks: List[dict]
    output: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        _unknown("config", data, _TOP)
        if "seed" not in data:
            raise ConfigError("a random seed is mandatory")
        try:
            seed = int(data["seed"])
            dom = data.get("domain", {})
            _unknown("domain", dom, _DOMAIN)
            domain = Domain(int(dom.get("n", 1)), float(dom.get("half_width", 8.0)),
                            int(dom.get("points_per_axis", 1024)))
            weight = parse_weight(data.get("weight", {"kind": "constant"}), domain.n)
            mo = data.get("morrey", {"p": 2.0, "r": -0.25 * domain.n})
            _unknown("morrey", mo, {"p", "r"})
            morrey = MorreyParams(float(mo["p"]), float(mo["r"]), domain.n)
            pr = data.get("predual")
            if pr is None:
                predual = morrey.paired()
            else:
                _unknown("predual", pr, {"p", "rho"})
                predual = PredualParams(float(pr["p"]), float(pr["rho"]), domain.n)
            ops = [str(o) for o in data.get("operators", ["identity"])]
            for o in ops:
                make_operator(o, domain)
            co = data.get("corpus", {})
            _unknown("corpus", co, _CORPUS)
            kinds = co.get("kinds", list(KINDS) if domain.n == 1 else
                           ["indicator", "bump", "piecewise"])
            corpus = CorpusSpec(seed, int(co.get("size", 10)), tuple(kinds),
                                int(co.get("witness_depth", 4)))
            checks = data.get("checks", [])
            if not isinstance(checks, list):
                raise ConfigError("checks must be a list")
            for c in checks:
                if not isinstance(c, dict) or "type" not in c:
                    raise ConfigError("each check needs a 'type'")
                if c["type"] not in CHECK_KEYS:
                    raise ConfigError(f"unknown check type {c['type']!r}")
                _unknown(f"check {c['type']}", c, CHECK_KEYS[c["type"]] | {"type"})
            out = data.get("output", {}) or {}
            _unknown("output", out, {"dir"})
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(seed, domain, weight, morrey, predual, ops, corpus, checks,
                   out.get("dir"), raw=data)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, seed: Optional[int] = None, refine: int = 0) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, corpus=replace(cfg.corpus, seed=seed))
        if refine:
            cfg = replace(cfg, domain=cfg.domain.refine(refine))
        return cfg


# check runners -----------------------------------------------------------------

def _corpus(cfg: ExperimentConfig, domain: Optional[Domain] = None) -> List[GridFunction]:
    return generate_corpus(cfg.corpus, domain or cfg.domain)


def run_ap(cfg, spec) -> VerificationReport:
    """A_p estimate over growing J_max; passes when it has stabilized (< 2%)."""
    t0 = time.perf_counter()
    p = float(spec.get("p", cfg.morrey.p))
    levels = int(spec.get("levels", 3))
    j_min, j_max = default_scales(cfg.domain)
    values, cubes = [], []
    for jm in range(j_max - levels + 1, j_max + 1):
        est = ap_constant(cfg.weight, p, enumerate_cubes(cfg.domain, max(j_min, -2), jm))
        values.append(est.value)
        cubes.append(est.attained_cube.key())
    growth = [b / a for a, b in zip(values, values[1:])]
    stable = all(abs(g - 1) < 0.02 for g in growth)
    return VerificationReport(
        "ap", "A_p constant (lower estimate)", values[-1], values[0], max(growth or [1.0]),
        bool(stable and all(math.isfinite(v) for v in values)),
        witnesses={"attained": cubes, "weight": cfg.weight.label()},
        grid=cfg.domain.as_dict(), runtime_s=time.perf_counter() - t0,
        details={"p": p, "values": values, "growth": growth, "label": "lower estimate"})


def run_reverse_doubling(cfg, spec) -> VerificationReport:
    j_min, j_max = default_scales(cfg.domain)
    return check_reverse_doubling(cfg.weight, enumerate_cubes(cfg.domain, j_min, j_max))


def variant_ratio_constant(corpus, w, mp, stride: int = 4) -> dict:
    """Largest max(a/b, b/a) over pairs of norm variants and corpus members."""
    worst, per = 1.0, []
    for f in corpus:
        vals = [morrey_norm(f, w, mp).value, morrey_norm_halfopen(f, w, mp).value,
                morrey_norm_centered(f, w, mp, stride=stride).value,
                morrey_norm_balls(f, w, mp).value]
        if min(vals) <= 0:
            continue
        c = max(vals) / min(vals)
        per.append(c)
        worst = max(worst, c)
    return {"C": worst, "per_function": per}


def run_norm_equivalence(cfg, spec) -> VerificationReport:
    t0 = time.perf_counter()
    stride = int(spec.get("stride", 4))
    coarse = variant_ratio_constant(_corpus(cfg), cfg.weight, cfg.morrey, stride)
    fine_dom = cfg.domain.refine(1)
    fine = variant_ratio_constant(_corpus(cfg, fine_dom), cfg.weight, cfg.morrey, 2 * stride)
    change = abs(fine["C"] - coarse["C"]) / coarse["C"]
    return VerificationReport(
        "norm_equivalence", "equivalent forms of the Morrey norm", coarse["C"], fine["C"],
        coarse["C"], bool(change <= 0.10),
        witnesses={"weight": cfg.weight.label()}, grid=cfg.domain.as_dict(),
        runtime_s=time.perf_counter() - t0,
        details={"relative_change": change, "coarse": coarse, "refined": fine})


def run_embedding(cfg, spec) -> VerificationReport:
    mp = cfg.morrey
    p_tilde = float(spec.get("p_tilde", -mp.n / mp.r))
    reports = [embedding_check(f, cfg.weight, mp, p_tilde) for f in _corpus(cfg)]
    worst = max(reports, key=lambda r: r.constant)
    worst.passed = all(r.passed for r in reports)
    worst.details["functions"] = len(reports)
    return worst


def run_witness(cfg, spec) -> VerificationReport:
    """Pairwise distances of sign-sequence witnesses against the common bound 2."""
    t0 = time.perf_counter()
    mp, w, d = cfg.morrey, cfg.weight, cfg.domain
    depth = int(spec.get("depth") or min(default_witness_depth(d), 8))
    rng = np.random.default_rng(cfg.seed)
    pairs = int(spec.get("pairs", 10))
    dists, norms = [], []
    for _ in range(pairs):
        a = rng.choice([-1, 1], size=depth - 1)
        b = a.copy()
        flip = rng.random(depth - 1) < 0.5
        flip[rng.integers(depth - 1)] = True
        b[flip] *= -1
        fa = nonseparability_witness(a, w, mp, d)
        fb = nonseparability_witness(b, w, mp, d)
        norms.append(morrey_norm(fa, w, mp).value)
        dists.append(morrey_norm(fa - fb, w, mp).value)
    bound = witness_bound(w, mp, d, depth)
    c = 1.0
    ok = min(dists) >= 2 * c * (1 - 1e-9) and all(math.isfinite(v) for v in norms)
    return VerificationReport(
        "witness", "non-separability witnesses", min(dists), 2 * c, c, bool(ok),
        witnesses={"depth": depth, "weight": w.label()}, grid=d.as_dict(),
        runtime_s=time.perf_counter() - t0,
        details={"distances": dists, "norms": norms, "halfopen_bound": bound})


def run_holder(cfg, spec) -> VerificationReport:
    mp, pp = cfg.morrey, cfg.predual
    d = cfg.domain
    if spec.get("functions") == "indicators":
        fs = [GridFunction(d, _ind(d, J, M)) for J, M in ((0, 0), (1, 1), (2, -3), (1, -2))]
    else:
        fs = _corpus(cfg)
    pairs = [(fs[i], fs[(i + 1) % len(fs)]) for i in range(len(fs))]
    reports = [holder_pairing_check(g, h, mp, pp, cfg.weight) for g, h in pairs]
    worst = max(reports, key=lambda r: r.constant)
    worst.passed = all(r.passed for r in reports)
    worst.details["pairs"] = len(reports)
    return worst


def _ind(d: Domain, J: int, M: int) -> np.ndarray:
    return region_mask(d, DyadicCube(J, (M,) * d.n)).astype(float)


def run_predual_bracket(cfg, spec) -> VerificationReport:
    t0 = time.perf_counter()
    depth = int(spec.get("search_depth", 8))
    ratios = []
    for h in _corpus(cfg):
        b = predual_bracket(h, cfg.predual, cfg.weight, depth)
        ratios.append(b.ratio)
    worst = max(ratios)
    return VerificationReport(
        "predual_bracket", "two-sided bracket of the predual norm", worst, 1.0, worst,
        True, witnesses={"weight": cfg.weight.label()}, grid=cfg.domain.as_dict(),
        runtime_s=time.perf_counter() - t0, details={"upper_over_lower": ratios})


def _space_params(cfg, space: str, p: Optional[float]) -> dict:
    if space == "lp":
        return {"p": float(p or cfg.morrey.p), "weight": cfg.weight}
    if space == "morrey":
        return {"mp": cfg.morrey, "weight": cfg.weight}
    return {"pp": cfg.predual, "weight": cfg.weight}


def run_operator_norm(cfg, spec) -> VerificationReport:
    t0 = time.perf_counter()
    ops = [spec["operator"]] if "operator" in spec else cfg.operators
    space = spec.get("space", "lp")
    values = {}
    for op in ops:
        est = estimate_operator_norm(op, space, _space_params(cfg, space, spec.get("p")),
                                     _corpus(cfg))
        values[op] = est.value
    worst = max(values.values())
    return VerificationReport(
        "operator_norm", "empirical operator norm", worst, math.inf, worst,
        bool(math.isfinite(worst)), witnesses={"space": space},
        grid=cfg.domain.as_dict(), runtime_s=time.perf_counter() - t0,
        details={"estimates": values})


def _targets(cfg, spec) -> List[Target]:
    raw = spec.get("targets")
    if not raw:
        return [Target(cfg.morrey.p, cfg.morrey.r, cfg.weight)]
    out = []
    for t in raw:
        _unknown("target", t, {"p", "r", "weight"})
        w = parse_weight(t["weight"], cfg.domain.n) if "weight" in t else cfg.weight
        out.append(Target(float(t["p"]), float(t["r"]), w))
    return out


def run_extrapolation(cfg, spec) -> VerificationReport:
    op = spec.get("operator", cfg.operators[0])
    p1 = float(spec.get("p1", 2.0))
    fine = cfg.domain.refine(1)
    # one truncation radius on both grids, so refinement compares one operator
    eps = 4.0 * cfg.domain.spacing
    F = PairFamily.from_operator(make_operator(op, cfg.domain, eps), _corpus(cfg), op)
    Ff = PairFamily.from_operator(make_operator(op, fine, eps), _corpus(cfg, fine), op)
    return extrapolation_check(F, p1, _targets(cfg, spec), Ff)


def run_predual_boundedness(cfg, spec) -> VerificationReport:
    op = spec.get("operator", "maximal")
    return predual_boundedness_check(op, cfg.predual, cfg.weight, _corpus(cfg),
                                     _corpus(cfg, cfg.domain.refine(1)))


def run_rdf(cfg, spec) -> VerificationReport:
    t0 = time.perf_counter()
    space = spec.get("space", "lp")
    params = _space_params(cfg, space, None)
    corpus = _corpus(cfg)
    est = estimate_operator_norm("maximal", space, params, corpus).value
    rcfg = RdFConfig(int(spec.get("K", 12)), max(1.0, 1.1 * est))
    nrm = space_norm(space, params)
    props = [rdf_properties(h, rcfg, nrm) for h in corpus]
    ok = all(p["i_holds"] and p["iii_holds"] and p["ii_slack"] <= 0.05
             and p["iii_tail_fraction"] < 0.01 for p in props)
    slack = max(p["ii_slack"] for p in props)
    return VerificationReport(
        "rdf", "Rubio de Francia iteration", slack, 0.05, rcfg.M_norm, bool(ok),
        witnesses={"space": space}, grid=cfg.domain.as_dict(),
        runtime_s=time.perf_counter() - t0, details={"K": rcfg.K, "properties": props})


def commutator_ratios(domain: Domain, symbol: str, operator: str, translates: int,
                      seed: int, weight: Weight) -> List[float]:
    """||[b, T] f|L_2(w)|| / ||f|L_2(w)|| for dyadic translates of chi_[0,1]."""
    op = make_operator(f"commutator:{symbol}:{operator}", domain)
    rng = np.random.default_rng(seed)
    shifts = rng.integers(-4, 4, size=translates)
    out = []
    for s in shifts:
        f = GridFunction(domain, _ind(domain, 1, 1 + 2 * int(s)))
        out.append(weighted_lp_norm(op.apply(f), weight, 2) / weighted_lp_norm(f, weight, 2))
    return out


def run_commutator(cfg, spec) -> VerificationReport:
    t0 = time.perf_counter()
    sym = spec.get("symbol", "log_abs")
    op = spec.get("operator", "hilbert")
    if sym not in SYMBOLS:
        raise ConfigError(f"unknown symbol {sym!r}")
    k = int(spec.get("translates", 10))
    coarse = commutator_ratios(cfg.domain, sym, op, k, cfg.seed, cfg.weight)
    fine = commutator_ratios(cfg.domain.refine(1), sym, op, k, cfg.seed, cfg.weight)
    a, b = max(coarse), max(fine)
    change = abs(b - a) / a if a > 0 else 0.0
    return VerificationReport(
        "commutator", "commutators with BMO symbols", a, b, a,
        bool(math.isfinite(a) and change <= 0.25),
        witnesses={"symbol": sym, "operator": op}, grid=cfg.domain.as_dict(),
        runtime_s=time.perf_counter() - t0,
        details={"coarse": coarse, "refined": fine, "relative_change": change})


RUNNERS: Dict[str, Callable] = {
    "ap": run_ap, "reverse_doubling": run_reverse_doubling,
    "norm_equivalence": run_norm_equivalence, "embedding": run_embedding,
    "witness": run_witness, "holder": run_holder, "predual_bracket": run_predual_bracket,
    "operator_norm": run_operator_norm, "extrapolation": run_extrapolation,
    "predual_boundedness": run_predual_boundedness, "rdf": run_rdf,
    "commutator": run_commutator,
}


def run_check(cfg: ExperimentConfig, spec: dict) -> VerificationReport:
    return RUNNERS[spec["type"]](cfg, spec)


def corpus_summary(cfg: ExperimentConfig) -> dict:
    fs = _corpus(cfg)
    return {"seed": cfg.corpus.seed, "size": len(fs), "kinds": list(cfg.corpus.kinds),
            "hash": corpus_hash(fs), "members": [array_hash(f.samples) for f in fs]}
