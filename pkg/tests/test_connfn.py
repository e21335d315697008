import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sci

from rcm_lab.connfn import (ConnectionModel, DivergenceError, Exponential, LogNormalShadow, Rayleigh,
                            Tabulated, UnitDisk, check_strict_decay, critical_radius, make_model, scaled,
                            spreading_constant, tail_moment)

GRID = np.geomspace(1.0, 1e4, 401)


class SlowTail(ConnectionModel):
    """g(x) = 1 / (1 + x^2): x g(x) is not integrable."""

    def _g(self, x):
        return 1.0 / (1.0 + x * x)


def test_unit_disk_values():
    m = UnitDisk()
    assert m(0.0) == 1.0 and m(1.0) == 1.0 and m(1.0 + 1e-12) == 0.0


@pytest.mark.parametrize("bad", [-0.1, math.nan, math.inf])
def test_evaluate_rejects_bad_distance(bad):
    with pytest.raises(ValueError):
        Exponential().evaluate(bad)


@pytest.mark.parametrize("m", [UnitDisk(), Exponential(), Rayleigh(), LogNormalShadow(4, 3),
                               Tabulated([(0, 1), (0.5, 0.8), (2, 0)])])
@given(st.floats(0, 50), st.floats(0, 50))
def test_models_are_non_increasing_probabilities(m, x, y):
    lo, hi = sorted((x, y))
    assert 0.0 <= m(hi) <= m(lo) <= 1.0


def test_spreading_constants_closed_forms():
    assert spreading_constant(UnitDisk()) == pytest.approx(math.pi, abs=1e-12)
    assert spreading_constant(Exponential()) == pytest.approx(2 * math.pi, rel=1e-10)
    assert spreading_constant(Rayleigh()) == pytest.approx(math.pi, rel=1e-10)
    # int 2 pi x Phi(-c log x) dx = pi exp(2 / c^2), c = 10 alpha / (sigma ln 10)
    sigma, alpha = 8.0, 3.0
    s = sigma * math.log(10) / (10 * alpha)
    assert spreading_constant(LogNormalShadow(sigma, alpha)) == pytest.approx(math.pi * math.exp(2 * s * s), rel=1e-9)


def test_spreading_constant_matches_scipy_for_tabulated():
    m = Tabulated([(0, 1), (0.3, 0.9), (1.2, 0.4), (2.5, 0)])
    ref = 2 * math.pi * sci.quad(lambda x: x * m(x), 0, 2.5, points=[0.3, 1.2], epsabs=0, epsrel=1e-13)[0]
    assert spreading_constant(m) == pytest.approx(ref, rel=1e-10)


def test_tail_moment_is_direct():
    # int_a^inf x e^-x dx = (1 + a) e^-a, tiny for large a: no cancellation
    a = 40.0
    assert tail_moment(Exponential(), a).value == pytest.approx((1 + a) * math.exp(-a), rel=1e-9)


def test_divergent_constant_raises():
    with pytest.raises(DivergenceError):
        spreading_constant(SlowTail())


def test_tolerance_validation():
    with pytest.raises(ValueError):
        spreading_constant(UnitDisk(), tol=0.1)


def test_lazy_C_is_cached():
    m = Exponential()
    assert m.C is m.C


def test_decay_verdicts():
    assert check_strict_decay(Exponential(), GRID).verdict == "pass"
    assert check_strict_decay(UnitDisk(), GRID).verdict == "pass"
    heavy = Tabulated([(x, min(1.0, 1.0 / (x * x))) for x in np.geomspace(0.1, 2e4, 400)])
    v = check_strict_decay(heavy, GRID)
    assert v.verdict == "fail" and v.witness >= math.sqrt(GRID[-1])
    short = Tabulated([(0, 1), (5, 0)])
    assert check_strict_decay(short, GRID).verdict == "inconclusive"


def test_decay_grid_validation():
    with pytest.raises(ValueError):
        check_strict_decay(Exponential(), [1, 2, 3])
    with pytest.raises(ValueError):
        check_strict_decay(Exponential(), [1, 200, 100])


def test_tabulated_validation(tmp_path):
    with pytest.raises(ValueError, match="monotonicity violated at x=2"):
        Tabulated([(0, 1), (1, 0.5), (2, 0.7)])
    with pytest.raises(ValueError):
        Tabulated([(0, 1), (0, 0.5)])
    with pytest.raises(ValueError):
        Tabulated([(0, 1.5)])
    f = tmp_path / "g.tab"
    f.write_text("# d p\n0 1\n1 0.5  # mid\n2 0\n")
    m = Tabulated.from_file(f)
    assert m(0.5) == pytest.approx(0.75) and m(3.0) == 0.0
    assert make_model("tabulated", file=f)(1.0) == 0.5


def test_make_model_unknown():
    with pytest.raises(ValueError):
        make_model("nope")


def test_critical_radius():
    r = critical_radius(500, 0, math.pi)
    assert math.pi * r * r * 500 == pytest.approx(math.log(500))
    for args in [(1.0, 0, 1), (500, 0, 0), (2.0, -1.0, 1)]:
        with pytest.raises(ValueError):
            critical_radius(*args)


def test_scaled_model():
    g = scaled(Exponential(), 0.5)
    assert g(1.0) == pytest.approx(math.exp(-2))
    assert scaled(UnitDisk(), 0.1).support == pytest.approx(0.1)
    with pytest.raises(ValueError):
        scaled(UnitDisk(), 0.0)
