"""Curvature integrand (both routes) and chi-recovery on built-in spaces."""

import math

import numpy as np
import pytest

from gaussbonnet.gbc import (
    gb_density_aw, gb_density_pfaffian, gb_density_pfaffian_batch,
    gb_density_pfaffian_reference, integrand_report, verify_gbc,
)
from gaussbonnet.geometry import Chart, Atlas
from gaussbonnet.library import build_manifold


def interior_points(rng, chart, n):
    cols = []
    for (lo, hi), per in zip(chart.ranges, chart.periodic):
        pad = 0.0 if per else 0.15 * (hi - lo)
        cols.append(rng.uniform(lo + pad, hi - pad, n))
    return np.column_stack(cols)


def test_unit_sphere_density_calibration():
    """The frozen sign convention: unit 2-sphere density is +1/(2 pi)."""
    chart = build_manifold("sphere2").atlas.charts[0]
    rng = np.random.default_rng(0)
    for x in interior_points(rng, chart, 8):
        assert gb_density_pfaffian(chart, x) == pytest.approx(1 / (2 * math.pi), rel=1e-10)
        assert gb_density_aw(chart, x) == pytest.approx(1 / (2 * math.pi), rel=1e-10)


def test_flat_density_zero():
    chart = build_manifold("torus2").atlas.charts[0]
    assert gb_density_pfaffian(chart, [0.3, 0.4]) == 0.0
    assert gb_density_aw(chart, [0.3, 0.4]) == 0.0


def test_radius_two_sphere4_density_constant():
    chart = build_manifold("sphere4", radius=2.0).atlas.charts[0]
    rng = np.random.default_rng(1)
    pts = interior_points(rng, chart, 12)
    vals = gb_density_pfaffian_batch(chart, pts)
    assert np.ptp(vals) < 1e-12 * abs(vals[0])
    # its integral must give chi = 2 (quadrature oracle below)
    atlas = build_manifold("sphere4", radius=2.0).atlas
    res = verify_gbc(atlas, resolution=10)
    assert res.integral == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("name", ["sphere2", "bumpy_sphere", "sphere4", "s2xs2"])
def test_pfaffian_aw_pointwise_agreement(name):
    manifold = build_manifold(name)
    rng = np.random.default_rng(hash(name) % 2 ** 31)
    for chart in manifold.atlas.charts:
        for x in interior_points(rng, chart, 50):
            rep = integrand_report(chart, x)
            assert rep.discrepancy < 1e-9 * (1.0 + abs(rep.pfaffian_density))


@pytest.mark.parametrize("name", ["sphere2", "bumpy_sphere", "sphere4", "cp2"])
def test_batch_pfaffian_matches_form_algebra(name):
    """The vectorized expansion agrees with the generic FormElement Pfaffian."""
    manifold = build_manifold(name)
    chart = manifold.atlas.charts[0]
    rng = np.random.default_rng(7)
    for x in interior_points(rng, chart, 6):
        fast = gb_density_pfaffian(chart, x)
        slow = gb_density_pfaffian_reference(chart, x)
        assert fast == pytest.approx(slow, rel=1e-11, abs=1e-14)


def test_verify_gbc_sphere2():
    res = verify_gbc(build_manifold("sphere2").atlas, resolution=64)
    assert res.abs_error < 1e-6


def test_verify_gbc_torus2():
    res = verify_gbc(build_manifold("torus2").atlas, resolution=8)
    assert abs(res.integral) < 1e-12


@pytest.mark.parametrize("eps", [0.1, 0.3])
def test_metric_independence_bumpy_sphere(eps):
    """Same topological value under a conformal change of metric."""
    res = verify_gbc(build_manifold("bumpy_sphere", eps=eps).atlas, resolution=96)
    assert res.integral == pytest.approx(2.0, abs=1e-4)


def test_s2xs2_product():
    res = verify_gbc(build_manifold("s2xs2").atlas, resolution=10)
    assert res.integral == pytest.approx(4.0, abs=1e-3)


def test_isometry_invariance_shifted_phi():
    base = verify_gbc(build_manifold("sphere2").atlas, resolution=48).integral
    shifted_chart = Chart.from_strings(
        "polar", 2, [(0.0, math.pi), (1.0, 1.0 + 2 * math.pi)], [False, True],
        {(0, 0): "1", (1, 1): "sin(x1)^2"})
    shifted = verify_gbc(Atlas((shifted_chart,), expected_chi=2), resolution=48)
    assert shifted.integral == pytest.approx(base, abs=1e-9)


def test_odd_dimension_rejected():
    chart = Chart.from_strings("odd", 3, [(0, 1)] * 3, [True] * 3,
                               {(i, i): "1" for i in range(3)})
    with pytest.raises(ValueError):
        verify_gbc(Atlas((chart,), expected_chi=0), resolution=4)
    with pytest.raises(ValueError):
        gb_density_pfaffian(chart, [0.5, 0.5, 0.5])


def test_convergence_table_recorded():
    res = verify_gbc(build_manifold("sphere2").atlas, resolution=32,
                     extrapolate=True, levels=3)
    assert len(res.resolutions) == 3
    assert res.extrapolated
    assert [n for n, _ in res.resolutions] == sorted(n for n, _ in res.resolutions)
