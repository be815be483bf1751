import math

import numpy as np
import pytest

from morreylab.corpus import cube_indicator
from morreylab.dyadic_grid import Domain, DyadicCube, GridError, GridFunction, default_family
from morreylab.morrey_norms import (MorreyParams, PredualParams, embedding_check,
                                    morrey_norm, morrey_norm_balls, morrey_norm_centered,
                                    morrey_norm_halfopen, nonseparability_witness,
                                    weighted_lp_norm, witness_bound, witness_cube)
from morreylab.muckenhoupt import Weight, weight_measure

D = Domain(1, 8.0, 2 ** 12)
ONE = Weight.constant()
ROOT = Weight.power(0.5)
VARIANTS = (morrey_norm, morrey_norm_halfopen, morrey_norm_centered, morrey_norm_balls)


def test_parameter_ranges():
    with pytest.raises(ValueError):
        MorreyParams(1.0, -0.5)
    with pytest.raises(ValueError):
        MorreyParams(2.0, -0.6)
    with pytest.raises(ValueError):
        MorreyParams(2.0, 0.0)
    with pytest.raises(ValueError):
        PredualParams(2.0, -0.5)
    mp = MorreyParams(3.0, -0.2)
    back = mp.paired().paired()
    assert (back.p, back.r) == pytest.approx((mp.p, mp.r))
    assert mp.paired().rho == pytest.approx(-0.8)


@pytest.mark.parametrize("cube", [DyadicCube(0, (0,)), DyadicCube(2, (-3,)), DyadicCube(-1, (1,))])
@pytest.mark.parametrize("r", [-0.125, -0.25, -0.375])
def test_indicator_law_and_attained_cube(cube, r):
    f = cube_indicator(D, cube)
    res = morrey_norm(f, ONE, MorreyParams(2.0, r))
    assert res.value == pytest.approx((2.0 ** (1 - cube.J)) ** (-r), rel=0.03)
    assert res.attained == cube


def test_indicator_law_in_two_dimensions():
    d = Domain(2, 4.0, 128)
    f = cube_indicator(d, DyadicCube(0, (1, -1)))
    value = morrey_norm(f, Weight.constant(1.0, 2), MorreyParams(2.0, -0.5, 2)).value
    assert value == pytest.approx(4.0 ** 0.25, rel=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_zero_function(variant):
    assert variant(GridFunction.zeros(Domain(1, 8.0, 256)), ONE, MorreyParams(2.0, -0.25)).value == 0


def test_endpoint_collapses_to_lebesgue_norm():
    mp = MorreyParams(2.0, -0.5)
    f = GridFunction.from_callable(D, lambda x: np.exp(-x * x) * (1 + x))
    for w in (ONE, ROOT):
        assert morrey_norm(f, w, mp).value == pytest.approx(weighted_lp_norm(f, w, 2.0), rel=0.02)


def test_variants_are_comparable():
    d = Domain(1, 8.0, 1024)
    mp = MorreyParams(2.0, -0.25)
    for f in (cube_indicator(d, DyadicCube(1, (1,))), GridFunction(d, np.ones(d.shape)),
              GridFunction.from_callable(d, lambda x: np.cos(3 * x) * np.exp(-x * x))):
        for w in (ONE, ROOT):
            vals = [v(f, w, mp).value for v in VARIANTS]
            assert max(vals) / min(vals) <= 2.0


def test_embedding_chain():
    f = cube_indicator(D, DyadicCube(0, (0,)))
    rep = embedding_check(f, ONE, MorreyParams(2.0, -1 / 3), 3.0)
    assert rep.passed
    assert rep.details["norm_p"] <= rep.details["norm_p_tilde"] <= rep.details["norm_lebesgue_u"]
    zero = embedding_check(GridFunction.zeros(D), ONE, MorreyParams(2.0, -1 / 3), 3.0)
    assert zero.left == zero.right == 0
    g = GridFunction.from_callable(D, lambda x: np.exp(-x * x))
    col = embedding_check(g, ROOT, MorreyParams(2.0, -0.5), 2.0)
    vals = [col.details[k] for k in ("norm_p", "norm_p_tilde", "norm_lebesgue_u")]
    assert max(vals) / min(vals) - 1 < 0.02


def test_embedding_rejects_bad_exponents():
    with pytest.raises(ValueError):
        embedding_check(GridFunction.zeros(D), ONE, MorreyParams(3.0, -0.25), 2.0)


def test_single_term_witness_has_unit_norm():
    mp = MorreyParams(2.0, -0.25)
    f = nonseparability_witness([1], ONE, mp, D)
    assert morrey_norm(f, ONE, mp).value == pytest.approx(1.0, rel=0.05)
    assert morrey_norm_halfopen(f, ONE, mp).value == pytest.approx(1.0, rel=0.05)


def test_witness_norms_bounded_and_separated():
    mp = MorreyParams(2.0, -0.25)
    bound = witness_bound(ONE, mp, D, 6)
    plus = nonseparability_witness([1] * 5, ONE, mp, D)
    assert math.isfinite(bound["bound"])
    assert morrey_norm_halfopen(plus, ONE, mp).value <= bound["bound"] * (1 + 1e-9)
    minus = nonseparability_witness([1, 1, -1, 1, 1], ONE, mp, D)
    assert morrey_norm(plus - minus, ONE, mp).value >= 2.0 * (1 - 1e-9)


def test_witness_coefficients_follow_weight():
    mp = MorreyParams(2.0, -0.25)
    f = nonseparability_witness([1, -1], ROOT, mp, D)
    Q3 = witness_cube(3, 1)
    inside = f.samples[np.nonzero(f.samples < 0)]
    assert np.allclose(inside, -weight_measure(ROOT, Q3, D) ** mp.r)


def test_witness_guards():
    with pytest.raises(ValueError):
        nonseparability_witness([1, 1], ONE, MorreyParams(2.0, -0.5), D)
    with pytest.raises(GridError):
        nonseparability_witness([1] * 12, ONE, MorreyParams(2.0, -0.25), D)
    with pytest.raises(ValueError):
        nonseparability_witness([1, 0], ONE, MorreyParams(2.0, -0.25), D)


def test_explicit_family_is_respected():
    f = cube_indicator(D, DyadicCube(3, (0,)))
    fam = default_family(Domain(1, 8.0, 2 ** 12))
    mp = MorreyParams(2.0, -0.25)
    assert morrey_norm(f, ONE, mp, fam).value == morrey_norm(f, ONE, mp).value
