import math

import numpy as np
import pytest

from morreylab.corpus import CorpusSpec, cube_indicator, generate_corpus
from morreylab.dyadic_grid import Domain, DyadicCube, GridFunction
from morreylab.extrapolation import (PairFamily, RdFConfig, Target, annular_profile,
                                     estimate_operator_norm, extrapolation_check,
                                     predual_boundedness_check, rdf_properties,
                                     rubio_de_francia)
from morreylab.morrey_norms import MorreyParams, PredualParams
from morreylab.muckenhoupt import Weight
from morreylab.operators import make_operator

D = Domain(1, 8.0, 512)
ONE = Weight.constant()
ROOT = Weight.power(0.5)
CORPUS_SPEC = CorpusSpec(seed=2, size=6, kinds=("indicator", "bump", "piecewise"))


def test_rdf_zero_and_domination():
    cfg = RdFConfig(K=6)
    assert not rubio_de_francia(GridFunction.zeros(D), cfg).samples.any()
    h = GridFunction(D, np.random.default_rng(0).standard_normal(D.shape))
    assert (rubio_de_francia(h, cfg).samples >= np.abs(h.samples)).all()


def test_rdf_indicator_properties():
    h = cube_indicator(D, DyadicCube(0, (0,)))
    props = rdf_properties(h, RdFConfig(K=12, M_norm=2.0),
                           norm=lambda f: float(np.sqrt((f.samples ** 2).sum() * D.spacing)))
    assert props["i_holds"] and props["iii_holds"]
    assert props["iii_tail_fraction"] <= 0.5 ** 12 * 10
    assert props["iii_violation_fraction"] < 0.01
    assert props["ii_slack"] <= 0.05


def test_rdf_config_validation():
    with pytest.raises(ValueError):
        RdFConfig(K=0)
    with pytest.raises(ValueError):
        RdFConfig(M_norm=0.5)


@pytest.mark.parametrize("space,params", [
    ("lp", {"p": 2.0, "weight": ROOT}),
    ("morrey", {"mp": MorreyParams(2.0, -0.25), "weight": ONE}),
    ("predual", {"pp": MorreyParams(2.0, -0.25).paired(), "weight": ONE}),
])
def test_identity_has_unit_norm(space, params):
    corpus = generate_corpus(CORPUS_SPEC, D)
    assert estimate_operator_norm("identity", space, params, corpus).value == pytest.approx(1.0)


def test_maximal_norm_in_range():
    d = Domain(1, 8.0, 2 ** 12)
    corpus = generate_corpus(CorpusSpec(seed=1, size=8), d)
    est = estimate_operator_norm("maximal", "lp", {"p": 2.0, "weight": ONE}, corpus).value
    assert 1.0 <= est <= 4.0


def test_two_hilbert_realizations_agree():
    d = Domain(1, 8.0, 2 ** 12)
    corpus = generate_corpus(CorpusSpec(seed=3, size=6, kinds=("bump",)), d)
    params = {"p": 2.0, "weight": ONE}
    a = estimate_operator_norm("hilbert", "lp", params, corpus).value
    b = estimate_operator_norm("multiplier:hilbert", "lp", params, corpus).value
    assert abs(a - b) / b < 0.10


def test_extrapolation_pipeline_for_maximal():
    spec = CorpusSpec(seed=4, size=20, kinds=("indicator", "bump", "piecewise"))
    fine = D.refine(1)
    F = PairFamily.from_operator(make_operator("maximal", D), generate_corpus(spec, D), "M")
    Ff = PairFamily.from_operator(make_operator("maximal", fine), generate_corpus(spec, fine), "M")
    targets = [Target(2.0, -0.5, ONE), Target(3.0, -0.25, ROOT)]
    rep = extrapolation_check(F, 2.0, targets, Ff)
    assert rep.passed
    assert all(math.isfinite(v) for v in rep.details["coarse"]["c2"].values())


def test_identity_pairs_give_unit_constants():
    F = PairFamily.identity(generate_corpus(CORPUS_SPEC, D))
    rep = extrapolation_check(F, 2.0, [Target(2.0, -0.25, ONE), Target(3.0, -0.125, ROOT)])
    for group in ("c1", "c2"):
        assert all(v == pytest.approx(1.0) for v in rep.details["coarse"][group].values())


def test_hilbert_targets_are_finite():
    F = PairFamily.from_operator(make_operator("hilbert", D), generate_corpus(CORPUS_SPEC, D), "H")
    targets = [Target(2.0, r, ONE) for r in (-0.375, -0.25, -0.125)]
    rep = extrapolation_check(F, 2.0, targets)
    assert all(math.isfinite(v) for v in rep.details["coarse"]["c2"].values())


def test_bad_pair_families():
    with pytest.raises(ValueError):
        extrapolation_check(PairFamily([], "empty"), 2.0, [Target(2.0, -0.25, ONE)])
    chi = cube_indicator(D, DyadicCube(0, (0,)))
    F = PairFamily([(chi, GridFunction.zeros(D))], "broken")
    with pytest.raises(ValueError):
        extrapolation_check(F, 2.0, [Target(2.0, -0.25, ONE)])


def test_predual_boundedness_for_maximal():
    d = Domain(1, 8.0, 2 ** 11)
    chi = cube_indicator(d, DyadicCube(1, (1,)))
    rep = predual_boundedness_check("maximal", PredualParams(2.0, -0.6), ONE, [chi])
    assert math.isfinite(rep.left) and rep.details["law_ok"]
    zero = predual_boundedness_check("maximal", PredualParams(2.0, -0.6), ONE,
                                     [GridFunction.zeros(d)])
    assert zero.left == 0.0


def test_hilbert_annular_law():
    d = Domain(1, 8.0, 2 ** 12)
    cube = DyadicCube(1, (1,))
    chi = cube_indicator(d, cube)
    prof = annular_profile(make_operator("hilbert", d).apply(chi), chi, cube, (2, 3))
    for e in prof:
        assert e["c_inf"] == pytest.approx(1 / math.pi, rel=0.25)
        assert e["c_inf"] <= e["c_sup"]
    with pytest.raises(ValueError):
        predual_boundedness_check("carleson", PredualParams(2.0, -0.6), ONE, [chi])
