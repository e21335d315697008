import math

import numpy as np
import pytest
from scipy import integrate as sci

from rcm_lab.quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, QuadratureError, fixed_panels, integrate


def test_rule_weights():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    # Kronrod is exact through degree 22, Gauss through 13
    for d in range(0, 23, 2):
        assert KRONROD_WEIGHTS @ NODES**d == pytest.approx(2.0 / (d + 1), abs=1e-14)


def test_smooth_integrals_against_scipy():
    for f, a, b in [(np.sin, 0, math.pi), (np.exp, -1, 2), (lambda x: 1 / (1 + x * x), 0, 50)]:
        ref = sci.quad(f, a, b, epsabs=0, epsrel=1e-13)[0]
        assert integrate(f, a, b, rtol=1e-12).value == pytest.approx(ref, rel=1e-11)


def test_breakpoint_handles_jump():
    res = integrate(lambda x: np.where(x < 0.3, 1.0, 0.0), 0, 1, breakpoints=[0.3])
    assert res.value == pytest.approx(0.3, abs=1e-14)


def test_reversed_limits():
    assert integrate(np.exp, 1, 0).value == pytest.approx(-(math.e - 1), rel=1e-12)


def test_budget_exhaustion_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.sin(1 / np.maximum(x, 1e-300)), 0, 1, rtol=1e-14, max_panels=20)


def test_fixed_panels_batched():
    a = np.array([0.0, 1.0])
    b = np.array([1.0, 3.0])
    val, err = fixed_panels(lambda x: x**3, a, b)
    assert val == pytest.approx([0.25, 20.0], rel=1e-14)
    assert (err < 1e-12).all()
