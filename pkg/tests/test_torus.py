import math

import numpy as np
import pytest

from geodlab.halfplane import ModelPoint
from geodlab.torus import (MAX_SYSTOLE, BiasParams, CurveClass, bias_eval,
                           extremal_length, in_region_W, systole,
                           systole_values)


def test_curve_class_normalization():
    with pytest.raises(ValueError):
        CurveClass(2, 4)
    with pytest.raises(ValueError):
        CurveClass(1, -1)
    assert CurveClass.normalized(-3, -6) == CurveClass(1, 2)
    assert CurveClass.normalized(-2, 0) == CurveClass(1, 0)
    with pytest.raises(ValueError):
        CurveClass.normalized(0, 0)


def test_extremal_length_formula():
    z = ModelPoint(0.3, 1.7)
    c = CurveClass(2, 3)
    expect = ((2 + 3 * 0.3) ** 2 + (3 * 1.7) ** 2) / 1.7
    assert extremal_length(c, z) == pytest.approx(expect, rel=1e-15)
    # scaling: Ext((1,0), x+iy) = 1/y
    assert extremal_length(CurveClass(1, 0), ModelPoint(0.0, 4.0)) == \
        pytest.approx(0.25, rel=1e-15)


def test_systole_deep_cusp():
    c, v = systole(ModelPoint(0.0, 10.0))
    assert c == CurveClass(1, 0)
    assert v == pytest.approx(0.1, rel=1e-12)


def test_systole_after_deck_translation():
    # same point marked through z -> z + 5: shortest class pulls back
    c, v = systole(ModelPoint(5.0, 10.0))
    assert v == pytest.approx(0.1, rel=1e-12)
    assert extremal_length(c, ModelPoint(5.0, 10.0)) == pytest.approx(v, rel=1e-9)


def test_systole_after_inversion():
    # z = -1/w for w = 10i gives y = 0.1; the short curve there is (0,1)
    c, v = systole(ModelPoint(0.0, 0.1))
    assert v == pytest.approx(0.1, rel=1e-12)
    assert extremal_length(c, ModelPoint(0.0, 0.1)) == pytest.approx(v, rel=1e-9)


def test_max_systole_at_hexagonal_point():
    corner = ModelPoint(0.5, math.sqrt(3.0) / 2.0)
    _, v = systole(corner)
    assert v == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-12)
    assert v == pytest.approx(MAX_SYSTOLE, rel=1e-12)
    # nothing beats it on a random sweep
    rng = np.random.default_rng(2)
    vals = systole_values(rng.uniform(-3, 3, 2000), rng.uniform(0.05, 5, 2000))
    assert float(vals.max()) <= MAX_SYSTOLE + 1e-9


def test_systole_is_min_over_curves():
    rng = np.random.default_rng(5)
    curves = [CurveClass.normalized(p, q)
              for p in range(-6, 7) for q in range(0, 7)
              if (p, q) != (0, 0) and math.gcd(p, q) == 1]
    for _ in range(25):
        z = ModelPoint(float(rng.uniform(-2, 2)), float(rng.uniform(0.1, 3)))
        c, v = systole(z)
        brute = min(extremal_length(k, z) for k in curves)
        assert v == pytest.approx(brute, rel=1e-9)
        assert extremal_length(c, z) == pytest.approx(v, rel=1e-9)


def test_systole_values_matches_scalar():
    rng = np.random.default_rng(6)
    xs = rng.uniform(-4, 4, 60)
    ys = rng.uniform(0.02, 6, 60)
    vals = systole_values(xs, ys)
    for i in range(60):
        _, v = systole(ModelPoint(xs[i], ys[i]))
        assert vals[i] == pytest.approx(v, rel=1e-9)


def test_bias_params_default_ladder():
    p = BiasParams.default(m=1, tau=3.0)
    assert p.log_K == pytest.approx(6.0 + math.log1p(1e-3), rel=1e-12)
    assert p.log_eps[0] == pytest.approx(-3.0 * p.log_K - math.log(2.0),
                                         rel=1e-12)
    assert p.log_eps_prime[0] == pytest.approx(
        p.log_eps[0] - 2.0 * p.log_K, rel=1e-12)
    assert p.eps(1) == pytest.approx(math.exp(p.log_eps[0]), rel=1e-12)
    lo, hi = p.kappa_bounds()
    assert 0.0 < lo < hi


def test_bias_params_multi_factor_ladder_monotone():
    p = BiasParams.default(m=3, tau=8.0)
    assert p.log_eps[0] < p.log_eps[1] < p.log_eps[2]
    # deep rungs underflow floats but stay ordered in log space
    assert p.log_eps[0] < -700.0
    assert p.eps(1) == 0.0
    assert p.eps(3) > 0.0
    p.validate()


def test_bias_params_validation_errors():
    with pytest.raises(ValueError):
        BiasParams.from_eps([0.5], K=math.exp(6.001), tau=3.0)  # eps too big
    with pytest.raises(ValueError):
        BiasParams.from_eps([1e-9], K=1.0, tau=3.0)  # K too small
    good = BiasParams.default(m=1, tau=3.0)
    with pytest.raises(ValueError):
        BiasParams(1, 1.5, good.tau, good.log_K, good.log_eps,
                   good.log_eps_prime).validate()


def test_bias_eval_deep_point():
    p = BiasParams.default(m=1, tau=3.0)
    z = ModelPoint(0.0, math.exp(20.0))
    ev = bias_eval(z, p)
    assert ev.lengths[0] == pytest.approx(math.exp(-20.0), rel=1e-9)
    expect_logf = p.s * (p.log_eps[0] + 20.0)
    assert ev.log_f[1] == pytest.approx(expect_logf, rel=1e-9)
    assert ev.f[0] == 1.0
    assert ev.u == pytest.approx(1.0 + ev.f[1], rel=1e-12)
    assert ev.u_tail == (ev.u, ev.f[1])
    assert ev.G == pytest.approx(math.exp(10.0), rel=1e-9)


def test_bias_eval_thick_point_small_f():
    p = BiasParams.default(m=1, tau=3.0)
    ev = bias_eval(ModelPoint(0.0, 1.0), p)
    # systole 1 is far above eps_1, so f_1 is exponentially small
    assert ev.f[1] < 1e-3
    assert ev.u == pytest.approx(1.0, abs=1e-3)


def test_region_membership():
    p = BiasParams.default(m=1, tau=3.0)
    thick = ModelPoint(0.0, 1.0)
    deep = ModelPoint(0.0, math.exp(40.0))
    assert in_region_W(0, thick, p)
    assert not in_region_W(0, deep, p)
    assert in_region_W(1, thick, p) and in_region_W(1, deep, p)
    with pytest.raises(ValueError):
        in_region_W(2, thick, p)
    with pytest.raises(ValueError):
        in_region_W(-1, thick, p)


def test_region_boundary_threshold():
    p = BiasParams.default(m=1, tau=3.0)
    y_edge = math.exp(-p.log_eps_prime[0])
    assert not in_region_W(0, ModelPoint(0.0, y_edge * 1.01), p)
    assert in_region_W(0, ModelPoint(0.0, y_edge * 0.99), p)
