"""Quadrature rules, determinism, and Richardson extrapolation."""

import math
import os

import numpy as np
import pytest

from gaussbonnet.geometry import Chart
from gaussbonnet.quadrature import (
    QuadratureError, QuadratureSpec, axis_rule, chart_nodes, integrate_chart,
    pairwise_sum, richardson,
)


def flat_unit_torus():
    return Chart.from_strings("t2", 2, [(0, 1), (0, 1)], [True, True],
                              {(0, 0): "1", (1, 1): "1"})


def polar_sphere():
    return Chart.from_strings("s2", 2, [(0, math.pi), (0, 2 * math.pi)],
                              [False, True],
                              {(0, 0): "1", (1, 1): "sin(x1)^2"})


def one(chart, pts):
    return np.ones(len(pts))


def test_constant_on_flat_torus_exact():
    for n in (2, 5, 16):
        assert integrate_chart(flat_unit_torus(), one, n) == pytest.approx(1.0, abs=1e-15)


def test_sphere_area():
    got = integrate_chart(polar_sphere(), one, 64)
    assert got == pytest.approx(4 * math.pi, abs=1e-8)


def test_gauss_exactness_low_degree():
    chart = Chart.from_strings("box", 1, [(0, 1)], [False], {(0, 0): "1"})
    got = integrate_chart(chart, lambda c, p: p[:, 0] ** 2, 2)
    assert got == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_open_nodes_avoid_endpoints():
    x, _ = axis_rule(0.0, math.pi, 48, periodic=False)
    assert x.min() > 0 and x.max() < math.pi
    x, _ = axis_rule(0.0, 1.0, 9, periodic=True)
    assert x.min() > 0 and x.max() < 1


def test_trapezoid_superalgebraic_on_trig():
    chart = flat_unit_torus()

    def dens(c, p):
        return np.cos(2 * math.pi * p[:, 0]) ** 2 * np.sin(2 * math.pi * p[:, 1]) ** 2

    got = integrate_chart(chart, dens, 32)
    assert got == pytest.approx(0.25, abs=1e-12)


def test_density_error_carries_node_context():
    def bad(chart, pts):
        raise ValueError("boom")

    with pytest.raises(QuadratureError) as err:
        integrate_chart(flat_unit_torus(), bad, 4)
    assert "first node" in str(err.value)


def test_pairwise_sum_matches_math_fsum():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=1537) * 10.0 ** rng.integers(-8, 8, size=1537)
    assert pairwise_sum(vals) == pytest.approx(math.fsum(vals), rel=1e-12)


def test_determinism_across_chunking_and_threads():
    chart = polar_sphere()

    def dens(c, p):
        return np.sin(3 * p[:, 0]) * np.cos(2 * p[:, 1]) + 1.0

    a = integrate_chart(chart, dens, 48, chunk=50)
    b = integrate_chart(chart, dens, 48, chunk=10 ** 6)
    assert a == b  # bitwise
    os.environ["GBC_THREADS"] = "4"
    try:
        c = integrate_chart(chart, dens, 48, chunk=50)
    finally:
        os.environ.pop("GBC_THREADS")
    assert c == a  # scheduling cannot change the reduction order


def test_weighted_chart_integral():
    chart = Chart.from_strings("w", 1, [(0, 1)], [False], {(0, 0): "1"},
                               weight="x1")
    got = integrate_chart(chart, one, 16)
    assert got == pytest.approx(0.5, abs=1e-14)


# ------------------------------------------------------------- richardson

def test_richardson_constant_sequence():
    val, err = richardson([(8, 2.0), (16, 2.0), (32, 2.0)])
    assert val == 2.0 and err == 0.0


def test_richardson_recovers_quadratic_model():
    limit, c = 1.7, -0.4
    seq = [(n, limit + c / n ** 2) for n in (16, 32, 64)]
    val, err = richardson(seq)
    assert val == pytest.approx(limit, abs=1e-12)
    assert err == pytest.approx(abs(seq[-1][1] - limit), rel=1e-6)


def test_richardson_two_levels():
    limit, c = -0.3, 2.0
    seq = [(10, limit + c / 100), (20, limit + c / 400)]
    val, _ = richardson(seq)  # assumed order 2
    assert val == pytest.approx(limit, abs=1e-13)


def test_richardson_nonuniform_ratio():
    limit, c, q = 5.0, 3.0, 4.0
    seq = [(n, limit + c / n ** q) for n in (16, 24, 32)]
    val, _ = richardson(seq)
    assert val == pytest.approx(limit, abs=1e-9)


def test_richardson_needs_two_levels():
    with pytest.raises(ValueError):
        richardson([(8, 1.0)])
    with pytest.raises(ValueError):
        richardson([(8, 1.0), (8, 2.0)])


def test_quadrature_spec_validation():
    spec = QuadratureSpec(nodes=(4, 8))
    assert spec.per_axis(2) == [4, 8]
    with pytest.raises(ValueError):
        spec.per_axis(3)
    with pytest.raises(ValueError):
        QuadratureSpec(nodes=1).per_axis(1)


def test_chart_nodes_ascending_multi_index():
    chart = flat_unit_torus()
    pts, w = chart_nodes(chart, [2, 3])
    # C-order: second axis fastest
    assert pts.shape == (6, 2)
    assert np.all(np.diff(pts[:3, 1]) > 0)
    assert pts[0, 0] == pts[1, 0] == pts[2, 0]
    assert w.sum() == pytest.approx(1.0)
