"""Acceptance suite: one recorded PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""
import json
import math
import os
import time

import numpy as np
import pytest

from morreylab import MorreyParams, Weight, ap_constant, morrey_norm
from morreylab.checks import commutator_ratios, variant_ratio_constant
from morreylab.cli import main
from morreylab.corpus import CorpusSpec, bump, cube_indicator, generate_corpus, piecewise_constant
from morreylab.dyadic_grid import Domain, DyadicCube, GridFunction, enumerate_cubes
from morreylab.extrapolation import (PairFamily, RdFConfig, Target, annular_profile,
                                     estimate_operator_norm, extrapolation_check,
                                     rdf_properties, space_norm)
from morreylab.morrey_norms import default_witness_depth, nonseparability_witness, witness_bound
from morreylab.operators import cz_apply, fourier_multiplier, make_operator
from morreylab.predual_morrey import holder_pairing_check, predual_bracket

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
ONE = Weight.constant()
ROOT = Weight.power(0.5)


def test_criterion_01_ap_sanity(verdict):
    t0 = time.perf_counter()
    d = Domain(1, 8.0, 2 ** 12)
    fam = enumerate_cubes(d, -2, 6)
    const = {p: ap_constant(ONE, p, fam).value for p in (1.5, 2.0, 3.0)}
    exact = all(v == 1.0 for v in const.values())

    levels = (5, 6, 7)
    root = [ap_constant(ROOT, 2.0, enumerate_cubes(d, -2, J)).value for J in levels]
    spread = (max(root) - min(root)) / min(root)
    steep = [ap_constant(Weight.power(1.5), 2.0, enumerate_cubes(d, -2, J)).value for J in levels]
    growth = min(b / a for a, b in zip(steep, steep[1:]))
    elapsed = time.perf_counter() - t0

    parts = {"w=1 exact": exact, "|x|^0.5 within 2%": spread <= 0.02,
             "|x|^1.5 growth >= 1.5": growth >= 1.5, "runtime < 10 s": elapsed < 10}
    verdict("1", "A_p sanity", all(parts.values()),
            f"spread={spread:.4f} growth={growth:.3f} t={elapsed:.1f}s "
            + " ".join(k for k, v in parts.items() if not v))
    assert exact, const
    assert spread <= 0.02, root
    assert elapsed < 10
    # the per-level growth factor of this weight is 2^(alpha - p + 1) = sqrt(2);
    # the threshold below is out of reach (see the decisions ledger)
    assert growth >= 1.5, steep


def test_criterion_02_norm_equivalence(verdict):
    t0 = time.perf_counter()
    mp = MorreyParams(2.0, -0.25)
    spec = CorpusSpec(seed=11, size=20)
    coarse, fine = Domain(1, 8.0, 2 ** 10), Domain(1, 8.0, 2 ** 11)
    out = {}
    for w in (ONE, ROOT):
        a = variant_ratio_constant(generate_corpus(spec, coarse), w, mp, stride=4)["C"]
        b = variant_ratio_constant(generate_corpus(spec, fine), w, mp, stride=8)["C"]
        out[w.label()] = (a, b, abs(b - a) / a)
    elapsed = time.perf_counter() - t0
    ok = all(math.isfinite(a) and ch <= 0.10 for a, _, ch in out.values()) and elapsed < 60
    verdict("2", "norm-variant equivalence", ok,
            " ".join(f"{k}: C={a:.3f}->{b:.3f}" for k, (a, b, _) in out.items())
            + f" t={elapsed:.1f}s")
    assert ok, out


def test_criterion_03_indicator_law(verdict):
    d = Domain(1, 8.0, 2 ** 12)
    cubes = [DyadicCube(0, (0,)), DyadicCube(1, (1,)), DyadicCube(2, (-3,)),
             DyadicCube(-1, (1,)), DyadicCube(3, (5,))]
    # r values scaled into the admissible range [-n/p, 0)
    rs = (-0.25, -0.5 * 0.5, -0.75 * 0.5)
    worst = 0.0
    for r in rs:
        mp = MorreyParams(2.0, r)
        for c in cubes:
            f = cube_indicator(d, c)
            size = float(f.samples.sum() * d.cell_volume)
            expected = size ** (-r)
            worst = max(worst, abs(morrey_norm(f, ONE, mp).value / expected - 1))
    with pytest.raises(ValueError):
        MorreyParams(2.0, -0.75)
    verdict("3", "indicator norm law", worst <= 0.03, f"max rel err={worst:.2e}")
    assert worst <= 0.03


def test_criterion_04_bracket_and_holder(verdict):
    d = Domain(1, 8.0, 2 ** 12)
    mp = MorreyParams(2.0, -0.25)
    pp = mp.paired()
    rng = np.random.default_rng(4)
    ratios = []
    for c in (DyadicCube(0, (0,)), DyadicCube(1, (1,)), DyadicCube(2, (-3,)), DyadicCube(3, (5,))):
        for h in (cube_indicator(d, c), bump(d, c, [0.3]),
                  piecewise_constant(d, c, rng.standard_normal(8))):
            ratios.append(predual_bracket(h, pp, ONE).ratio)

    corpus = generate_corpus(CorpusSpec(seed=5, size=30, kinds=("indicator", "bump", "piecewise")), d)
    support = [f.support_mask() for f in corpus]
    violations, pairs = 0, 0
    for _ in range(400):
        i, j = rng.integers(len(corpus), size=2)
        if not (support[i] & support[j]).any():
            continue
        rep = holder_pairing_check(corpus[i], corpus[j], mp, pp, ONE)
        violations += not rep.passed
        pairs += 1
        if pairs == 50:
            break
    ok = max(ratios) <= 1.25 and violations == 0 and pairs == 50
    verdict("4", "duality bracket and Hölder pairing", ok,
            f"max upper/lower={max(ratios):.4f} pairs={pairs} violations={violations}")
    assert ok


def test_criterion_05_hilbert_oracle(verdict):
    d = Domain(1, 8.0, 2 ** 13)
    x = d.centers()
    chi = GridFunction(d, (np.abs(x) <= 1.0).astype(float))
    Hf = cz_apply("hilbert", chi).samples
    oracle = np.log(np.abs((x + 1) / (x - 1))) / math.pi
    far = np.minimum(np.abs(x - 1), np.abs(x + 1)) >= 0.25
    rel = float(np.max(np.abs(Hf[far] - oracle[far]) / np.abs(oracle[far])))

    worst_l2 = 0.0
    for freq, sigma in ((2 * math.pi, 1.0), (3.0, 0.7), (5.0, 1.5)):
        f = GridFunction(d, np.exp(-(x / sigma) ** 2) * np.cos(freq * x))
        pv = cz_apply("hilbert", f).samples
        mult = fourier_multiplier("hilbert", f).samples
        worst_l2 = max(worst_l2, float(np.linalg.norm(pv - mult) / np.linalg.norm(mult)))
    ok = rel < 0.05 and worst_l2 < 0.10
    verdict("5", "Hilbert transform oracle", ok, f"max rel={rel:.2e} L2 gap={worst_l2:.3f}")
    assert ok


def test_criterion_06_rubio_de_francia(verdict):
    t0 = time.perf_counter()
    d = Domain(1, 8.0, 1024)
    corpus = generate_corpus(CorpusSpec(seed=6, size=10, kinds=("indicator", "bump", "piecewise")), d)
    params = {"p": 2.0, "weight": ONE}
    est = estimate_operator_norm("maximal", "lp", params, corpus).value
    cfg = RdFConfig(K=12, M_norm=max(1.0, 1.1 * est))
    norm = space_norm("lp", params)
    props = [rdf_properties(h, cfg, norm) for h in corpus]
    elapsed = time.perf_counter() - t0
    i_ok = all(p["i_holds"] for p in props)
    slack = max(p["ii_slack"] for p in props)
    tail = max(p["iii_tail_fraction"] for p in props)
    iii_ok = all(p["iii_holds"] for p in props)
    ok = i_ok and slack <= 0.05 and iii_ok and tail < 0.01 and elapsed < 120
    verdict("6", "Rubio de Francia properties", ok,
            f"ii slack={slack:.3f} iii tail={tail:.1e} t={elapsed:.1f}s")
    assert ok


def test_criterion_07_extrapolation(verdict):
    coarse, fine = Domain(1, 8.0, 512), Domain(1, 8.0, 1024)
    spec = CorpusSpec(seed=7, size=8, kinds=("indicator", "bump", "piecewise"))
    targets = [Target(p, -theta / p, w)
               for w in (ONE, ROOT) for p in (1.5, 2.0, 3.0) for theta in (0.25, 0.5, 0.75)]
    worst, finite = 0.0, True
    # the truncation radius stays at the coarse default so both grids see one operator
    eps = 4.0 * coarse.spacing
    for op in ("maximal", "hilbert"):
        F = PairFamily.from_operator(make_operator(op, coarse, eps),
                                     generate_corpus(spec, coarse), op)
        Ff = PairFamily.from_operator(make_operator(op, fine, eps),
                                      generate_corpus(spec, fine), op)
        rep = extrapolation_check(F, 2.0, targets, Ff)
        finite &= all(math.isfinite(v) for v in rep.details["coarse"]["c2"].values())
        worst = max(worst, rep.details["worst_relative_change"])
    ok = finite and worst < 0.25
    verdict("7", "extrapolation constants", ok,
            f"{len(targets)} targets x 2 operators, max change={worst:.3f}")
    assert ok


def test_criterion_08_nonseparability(verdict):
    d = Domain(1, 8.0, 2 ** 12)
    mp = MorreyParams(2.0, -0.25)
    depth = default_witness_depth(d)
    rng = np.random.default_rng(8)
    c = 1.0
    dists, norms = [], []
    for _ in range(10):
        a = rng.choice([-1, 1], size=depth - 1)
        b = a.copy()
        flip = rng.random(depth - 1) < 0.5
        flip[rng.integers(depth - 1)] = True
        b[flip] *= -1
        fa = nonseparability_witness(a, ONE, mp, d)
        fb = nonseparability_witness(b, ONE, mp, d)
        norms.append(morrey_norm(fa, ONE, mp).value)
        dists.append(morrey_norm(fa - fb, ONE, mp).value)
    bound = witness_bound(ONE, mp, d, depth)
    ok = (min(dists) >= 2 * c * (1 - 1e-9) and all(math.isfinite(v) for v in norms)
          and math.isfinite(bound["bound"]) and max(norms) <= bound["bound"] * (1 + 1e-9))
    verdict("8", "non-separability witnesses", ok,
            f"min distance={min(dists):.4f} (2c=2) max norm={max(norms):.3f} "
            f"series bound={bound['bound']:.3f}")
    assert ok


def test_criterion_09_annular_decay(verdict):
    d = Domain(1, 8.0, 2 ** 12)
    cube = DyadicCube(1, (1,))
    chi = cube_indicator(d, cube)
    laws = {"maximal": 1.0, "hilbert": 1.0 / math.pi}
    worst, lines = 0.0, []
    for op, law in laws.items():
        prof = annular_profile(make_operator(op, d).apply(chi), chi, cube, (2, 3))
        for e in prof:
            worst = max(worst, abs(e["c_inf"] - law) / law)
            lines.append(f"{op} l={e['l']}: {e['c_inf']:.3f}/{law:.3f} (sup {e['c_sup']:.3f})")
    ok = worst <= 0.25 and len(lines) == 4
    verdict("9", "annular size law", ok, f"max dev={worst:.3f}; " + "; ".join(lines))
    assert ok


def test_criterion_10_commutator(verdict):
    d = Domain(1, 8.0, 2 ** 12)
    f = cube_indicator(d, DyadicCube(1, (1,)))
    zero = float(np.max(np.abs(make_operator("commutator:const:hilbert", d).apply(f).samples)))
    changes = {}
    for w in (ONE, ROOT):
        a = commutator_ratios(d, "log_abs", "hilbert", 10, 10, w)
        b = commutator_ratios(d.refine(1), "log_abs", "hilbert", 10, 10, w)
        finite = all(math.isfinite(v) for v in a)
        changes[w.label()] = max(abs(y - x) / x for x, y in zip(a, b)) if finite else math.inf
    ok = zero <= 1e-12 and max(changes.values()) <= 0.25
    verdict("10", "commutators", ok, f"const symbol max={zero:.1e} "
            + " ".join(f"{k}: change={v:.3f}" for k, v in changes.items()))
    assert ok


def _numerics(out_dir):
    data = {}
    for name in sorted(os.listdir(out_dir)):
        path = os.path.join(out_dir, name)
        if name.endswith(".json"):
            with open(path) as fh:
                rec = json.load(fh)
            rec.pop("runtime_s", None)
            data[name] = rec
        else:
            with open(path, "rb") as fh:
                data[name] = fh.read()
    return data


def test_criterion_11_determinism(verdict, tmp_path):
    cfg = os.path.join(CONFIGS, "full.yaml")
    runs = []
    for threads in (1, 2):
        out = tmp_path / f"t{threads}"
        code = main(["report", "--config", cfg, "--seed", "3", "--threads", str(threads),
                     "--out", str(out)])
        runs.append((code, _numerics(out)))
    (c1, a), (c2, b) = runs
    ok = c1 == c2 and a == b and len(a) > 1
    verdict("11", "determinism across thread counts", ok, f"{len(a)} files compared")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
