import numpy as np
import pytest

from morreylab.dyadic_grid import Domain, DyadicCube, GridFunction, default_family, enumerate_cubes
from morreylab.muckenhoupt import (ApOverflowError, NonIntegrableWeightError, Weight, ap_constant,
                                   check_doubling, check_reverse_doubling, dense_ap_constant,
                                   dual_weight, weight_measure)

D1 = Domain(1, 8.0, 1024)


def test_weight_measure_examples():
    assert weight_measure(Weight.constant(), DyadicCube(0, (0,)), D1) == pytest.approx(2.0)
    root = Weight.power(0.5)
    assert weight_measure(root, DyadicCube(1, (1,)), D1) == pytest.approx(2 / 3, abs=1e-3)
    assert weight_measure(root, DyadicCube(0, (0,)), D1) == pytest.approx(4 / 3, abs=1e-3)


def test_exact_cells_integrate_the_singularity():
    w = Weight.power(-0.5)
    assert weight_measure(w, DyadicCube(1, (1,)), D1) == pytest.approx(2.0, rel=1e-12)
    d2 = Domain(2, 1.0, 16)
    total = Weight.power(-1.0, 2).cell_integrals(d2).sum()
    # radial integral of |x|^{-1} over the square [-1, 1]^2
    assert total == pytest.approx(8 * np.arcsinh(1.0), rel=1e-6)


def test_non_integrable_power_is_rejected():
    with pytest.raises(NonIntegrableWeightError):
        Weight.power(-1.0)
    with pytest.raises(NonIntegrableWeightError):
        Weight.axis_power([0.0, -1.5])


def test_dual_weight_arithmetic():
    assert dual_weight(Weight.constant(), 3.0) == Weight.constant(1.0)
    assert dual_weight(Weight.power(0.5), 2.0).alpha == pytest.approx(-0.5)
    w = Weight.power(0.7)
    p = 3.0
    back = dual_weight(dual_weight(w, p), p / (p - 1))
    assert back.alpha == pytest.approx(w.alpha)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("resolution", ["dyadic", "grid"])
def test_constant_weight_has_unit_constant(p, resolution):
    fam = enumerate_cubes(D1, -2, 5)
    assert ap_constant(Weight.constant(), p, fam, resolution).value == 1.0
    assert ap_constant(Weight.constant(3.0), p, fam, resolution).value == pytest.approx(1.0)


def test_constant_weight_in_two_dimensions():
    d = Domain(2, 4.0, 64)
    assert ap_constant(Weight.constant(1.0, 2), 2.0, default_family(d)).value == 1.0


def test_root_weight_stabilizes_and_stays_below_dense_oracle():
    d = Domain(1, 8.0, 2 ** 12)
    vals = [ap_constant(Weight.power(0.5), 2.0, enumerate_cubes(d, -2, J)).value
            for J in (5, 6, 7)]
    assert max(vals) / min(vals) - 1 < 0.02
    small = Domain(1, 8.0, 256)
    dense = dense_ap_constant(Weight.power(0.5), 2.0, small)
    assert ap_constant(Weight.power(0.5), 2.0, default_family(small)).value <= dense


def test_steep_power_grows_with_finest_scale():
    d = Domain(1, 8.0, 2 ** 12)
    vals = [ap_constant(Weight.power(1.5), 2.0, enumerate_cubes(d, -2, J)).value
            for J in (5, 6, 7)]
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    assert all(r > 1 for r in ratios)
    # block averages near the origin predict a factor 2^(alpha - p + 1) per level
    assert ratios[-1] == pytest.approx(2 ** 0.5, rel=0.05)


def test_overflow_is_reported():
    tiny = GridFunction(D1, np.full(D1.shape, 1e-200))
    with pytest.raises(ApOverflowError):
        ap_constant(Weight.from_grid(tiny), 1.01, default_family(D1), resolution="grid")


def test_doubling_examples():
    fam = enumerate_cubes(D1, -2, 5)
    Q, S = DyadicCube(0, (0,)), DyadicCube(1, (1,))
    rep = check_doubling(Weight.constant(), Q, S, 2.0, fam)
    assert rep.left == pytest.approx(2.0) and rep.passed
    assert check_doubling(Weight.constant(), Q, Q, 2.0, fam).left == pytest.approx(1.0)
    Q1, S1 = DyadicCube(1, (1,)), DyadicCube(2, (1,))
    rep = check_doubling(Weight.power(0.5), Q1, S1, 2.0, fam)
    assert rep.left == pytest.approx(2 ** 1.5, rel=1e-6)
    with pytest.raises(ValueError):
        check_doubling(Weight.constant(), S, Q, 2.0, fam)


def test_reverse_doubling_lebesgue_ratios():
    rep = check_reverse_doubling(Weight.constant(), enumerate_cubes(D1, -1, 5))
    assert rep.left == pytest.approx(0.5)
    d2 = Domain(2, 4.0, 64)
    rep2 = check_reverse_doubling(Weight.constant(1.0, 2), enumerate_cubes(d2, 0, 3))
    assert rep2.left == pytest.approx(0.25)


def test_reverse_doubling_on_witness_cubes():
    fam = enumerate_cubes(D1, -1, 5)
    cubes = [DyadicCube(l, (2,), "half_open") for l in range(2, 7)]
    rep = check_reverse_doubling(Weight.power(0.5), fam, cubes)
    assert rep.passed and rep.left < 1
