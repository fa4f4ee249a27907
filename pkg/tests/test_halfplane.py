import math

import numpy as np
import pytest

from geodlab.halfplane import (FUND_AREA, TOTAL_FRAME_MEASURE, MappingClass,
                               ModelParams, ModelPoint, RealIsometry,
                               apply_isometry, hyp_ball_area, hyp_dist,
                               hyp_dist_arrays, reduce_points,
                               reduce_to_fundamental, sample_ball,
                               sample_ball_arrays, teich_ball_area, teich_dist)


def test_model_point_guards():
    with pytest.raises(ValueError):
        ModelPoint(0.0, 0.0)
    with pytest.raises(ValueError):
        ModelPoint(0.0, -1.0)
    with pytest.raises(ValueError):
        ModelPoint(math.inf, 1.0)
    p = ModelPoint(0.25, 2.0)
    assert p.z == complex(0.25, 2.0)
    assert ModelPoint.from_complex(p.z) == p


def test_model_params_consistency():
    ModelParams()
    with pytest.raises(ValueError):
        ModelParams(h=3)
    with pytest.raises(ValueError):
        ModelParams(m=2)


def test_vertical_distance():
    a = ModelPoint(0.0, 1.0)
    b = ModelPoint(0.0, math.e)
    assert hyp_dist(a, b) == pytest.approx(1.0, abs=1e-12)
    assert teich_dist(a, b) == pytest.approx(0.5, abs=1e-12)


def test_distance_symmetry_and_triangle():
    rng = np.random.default_rng(3)
    pts = [ModelPoint(float(x), float(y))
           for x, y in zip(rng.uniform(-2, 2, 12), rng.uniform(0.1, 5, 12))]
    for a in pts[:4]:
        for b in pts[4:8]:
            assert hyp_dist(a, b) == pytest.approx(hyp_dist(b, a), rel=1e-12)
            assert hyp_dist(a, b) >= 0.0
            for c in pts[8:]:
                assert hyp_dist(a, c) <= hyp_dist(a, b) + hyp_dist(b, c) + 1e-12


def test_dist_arrays_match_scalar():
    rng = np.random.default_rng(4)
    x1, y1 = rng.uniform(-1, 1, 20), rng.uniform(0.2, 4, 20)
    x2, y2 = rng.uniform(-1, 1, 20), rng.uniform(0.2, 4, 20)
    arr = hyp_dist_arrays(x1, y1, x2, y2)
    for i in range(20):
        d = hyp_dist(ModelPoint(x1[i], y1[i]), ModelPoint(x2[i], y2[i]))
        assert arr[i] == pytest.approx(d, rel=1e-12)


def test_ball_areas():
    # teich radius r is hyperbolic radius 2r
    assert teich_ball_area(1.0) == pytest.approx(hyp_ball_area(2.0), rel=1e-12)
    assert hyp_ball_area(1.0) == pytest.approx(
        2.0 * math.pi * (math.cosh(1.0) - 1.0), rel=1e-12)
    assert teich_ball_area(0.0) == 0.0


def test_frame_measure_constant():
    assert FUND_AREA == pytest.approx(math.pi / 3.0, rel=1e-15)
    assert TOTAL_FRAME_MEASURE == pytest.approx(2.0 * math.pi ** 2 / 3.0,
                                                rel=1e-15)


def test_isometry_preserves_distance():
    g = RealIsometry(2.0, 0.3, 0.5, 0.575)
    a = ModelPoint(0.4, 1.7)
    b = ModelPoint(-1.1, 0.2)
    assert hyp_dist(apply_isometry(g, a), apply_isometry(g, b)) == \
        pytest.approx(hyp_dist(a, b), rel=1e-9)


def test_isometry_determinant_guard():
    with pytest.raises(ValueError):
        RealIsometry(1.0, 0.0, 0.0, 2.0)


def test_mapping_class_algebra():
    with pytest.raises(ValueError):
        MappingClass(1, 1, 1, 1)
    m = MappingClass(2, 1, 1, 1)
    assert m.trace == 3
    assert m.is_hyperbolic
    assert (m * m.inverse()) == MappingClass.identity()
    assert not MappingClass(1, 1, 0, 1).is_hyperbolic
    assert hash(m) == hash(MappingClass(2, 1, 1, 1))


def test_reduce_to_fundamental_deck_and_domain():
    rng = np.random.default_rng(7)
    for _ in range(50):
        z = ModelPoint(float(rng.uniform(-8, 8)), float(rng.uniform(0.02, 9)))
        w, deck = reduce_to_fundamental(z)
        assert abs(w.x) <= 0.5 + 1e-9
        assert w.x * w.x + w.y * w.y >= 1.0 - 1e-9
        back = deck.apply(z)
        assert back.x == pytest.approx(w.x, abs=1e-7)
        assert back.y == pytest.approx(w.y, rel=1e-7)


def test_reduce_is_idempotent():
    z = ModelPoint(0.37, 0.11)
    w, _ = reduce_to_fundamental(z)
    w2, deck2 = reduce_to_fundamental(w)
    assert deck2 == MappingClass.identity()
    assert w2 == w


def test_reduce_points_matches_scalar():
    rng = np.random.default_rng(8)
    xs = rng.uniform(-5, 5, 40)
    ys = rng.uniform(0.05, 6, 40)
    rx, ry = reduce_points(xs, ys)
    for i in range(40):
        w, _ = reduce_to_fundamental(ModelPoint(xs[i], ys[i]))
        # x is only defined up to the boundary identification of F
        assert ry[i] == pytest.approx(w.y, rel=1e-9)
        assert abs(abs(rx[i]) - abs(w.x)) < 1e-7 or \
            abs(rx[i] - w.x) < 1e-7


def test_sample_ball_stays_in_ball():
    rng = np.random.default_rng(9)
    center = ModelPoint(0.3, 2.0)
    xs, ys = sample_ball_arrays(center, 1.5, 4000, rng)
    d = hyp_dist_arrays(xs, ys, np.full(4000, center.x), np.full(4000, center.y))
    assert float(d.max()) <= 3.0 + 1e-9  # hyp radius is twice teich radius
    # area-uniform: P(d <= rho) = (cosh rho - 1)/(cosh 2r - 1)
    med = (math.cosh(3.0) - 1.0) / 2.0
    rho_med = math.acosh(1.0 + med)
    frac = float((d <= rho_med).mean())
    assert abs(frac - 0.5) < 0.03


def test_sample_ball_zero_radius_and_scalar():
    rng = np.random.default_rng(10)
    center = ModelPoint(-0.2, 0.7)
    xs, ys = sample_ball_arrays(center, 0.0, 5, rng)
    assert np.all(xs == center.x) and np.all(ys == center.y)
    p = sample_ball(center, 0.8, rng)
    assert teich_dist(p, center) <= 0.8 + 1e-9
    with pytest.raises(ValueError):
        sample_ball_arrays(center, -0.1, 3, rng)


def test_sample_ball_deterministic():
    center = ModelPoint(0.0, 1.0)
    a = sample_ball_arrays(center, 2.0, 10, np.random.default_rng(11))
    b = sample_ball_arrays(center, 2.0, 10, np.random.default_rng(11))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
