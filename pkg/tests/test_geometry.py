import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcm_lab.geometry import (Domain, Point, PointSet, distance, euclidean_distance, inside_angle,
                              sample_poisson_process, toroidal_distance)
from rcm_lab.rng import Stream

coord = st.floats(-0.5, 0.5, allow_nan=False)
point = st.tuples(coord, coord)


def test_point_validation():
    Point(0.5, -0.5)
    with pytest.raises(ValueError):
        Point(0.6, 0.0)


def test_distance_examples():
    assert euclidean_distance((0, 0), (0.3, 0.4)) == pytest.approx(0.5)
    assert toroidal_distance((-0.45, 0), (0.45, 0)) == pytest.approx(0.1)
    assert toroidal_distance((-0.5, -0.5), (0.5, 0.5)) == pytest.approx(0.0)
    assert distance(Domain.SQUARE, Point(-0.45, 0), Point(0.45, 0)) == pytest.approx(0.9)


@given(point)
def test_torus_norm_of_points_in_A_is_plain_norm(p):
    # for x in A the torus norm about the origin is the Euclidean norm
    assert toroidal_distance(p, (0, 0)) == pytest.approx(math.hypot(*p), abs=1e-15)


@given(point, point)
def test_torus_never_exceeds_euclid(p, q):
    assert toroidal_distance(p, q) <= euclidean_distance(p, q) + 1e-15
    assert toroidal_distance(p, q) <= math.sqrt(2) / 2 + 1e-15


@given(point, point, point)
def test_torus_triangle_inequality(p, q, s):
    assert toroidal_distance(p, s) <= toroidal_distance(p, q) + toroidal_distance(q, s) + 1e-12


def test_torus_brute_force_shifts():
    rng = np.random.default_rng(0)
    p = rng.random((500, 2)) - 0.5
    q = rng.random((500, 2)) - 0.5
    shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)])
    brute = np.min(np.linalg.norm(p[:, None, :] + shifts[None] - q[:, None, :], axis=2), axis=1)
    assert np.allclose(toroidal_distance(p, q), brute, atol=1e-15)


def test_poisson_process_determinism_and_law():
    s = Stream.from_seed(5)
    a = sample_poisson_process(100.0, s)
    b = sample_poisson_process(100.0, s)
    assert np.array_equal(a.coords, b.coords)
    assert isinstance(a, PointSet) and a.density == 100.0
    counts = np.array([len(sample_poisson_process(100.0, s.child(t))) for t in range(2000)])
    assert abs(counts.mean() - 100) < 4 * math.sqrt(100 / counts.size)
    assert abs(counts.var() / 100 - 1) < 0.15


@pytest.mark.parametrize("rho", [0.0, -1.0, math.inf, math.nan])
def test_poisson_process_rejects_bad_density(rho):
    with pytest.raises(ValueError):
        sample_poisson_process(rho, Stream.from_seed(0))


def test_uniform_positions_fill_A():
    pts = sample_poisson_process(20000.0, Stream.from_seed(2)).coords
    assert (np.abs(pts) <= 0.5).all()
    hist = np.histogram2d(pts[:, 0], pts[:, 1], bins=4, range=[[-0.5, 0.5]] * 2)[0]
    assert hist.min() > 0.8 * hist.mean()


@given(point, st.floats(0.001, 1.5))
def test_inside_angle_against_sampled_circle(c, t):
    th = np.linspace(0, 2 * np.pi, 20001)[:-1]
    x = c[0] + t * np.cos(th)
    y = c[1] + t * np.sin(th)
    frac = np.mean((np.abs(x) <= 0.5) & (np.abs(y) <= 0.5))
    assert inside_angle(np.array(c), t) == pytest.approx(2 * np.pi * frac, abs=2e-3)
