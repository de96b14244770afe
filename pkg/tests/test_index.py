"""Zero finding, winding numbers, mapping degrees and index sums."""

import math

import numpy as np
import pytest

from gaussbonnet.geometry import Atlas, Chart
from gaussbonnet.index import (
    DegreeError, VectorFieldSpec, field_consistency_residual, find_zeros,
    index_sum, local_degree,
)
from gaussbonnet.library import build_field, overlap_jacobian


def disk_chart(half=2.0, name="disk"):
    return Chart.from_strings(name, 2, [(-half, half), (-half, half)],
                              [False, False], {(0, 0): "1", (1, 1): "1"})


def disk_atlas(half=2.0):
    return Atlas((disk_chart(half),), expected_chi=None)


def flat_field(components, half=2.0, expected=None):
    atlas = disk_atlas(half)
    return VectorFieldSpec("test", "vector", {"disk": components}, atlas,
                           expected=expected)


# ------------------------------------------------------------ local degree

def test_source_degree_plus_one():
    f = flat_field(("x1", "x2"))
    rec = local_degree(f, "disk", [0.0, 0.0], 0.5)
    assert rec.local_degree == 1
    assert abs(rec.raw_degree - 1) < 1e-9


def test_saddle_degree_minus_one():
    f = flat_field(("x1", "-x2"))
    rec = local_degree(f, "disk", [0.0, 0.0], 0.5)
    assert rec.local_degree == -1


def test_z_squared_degree_two():
    f = flat_field(("x1^2 - x2^2", "2*x1*x2"))
    rec = local_degree(f, "disk", [0.0, 0.0], 0.4)
    assert rec.local_degree == 2


def test_degree_against_dense_angle_accumulation():
    """High-resolution angle-accumulation oracle for a nonlinear field."""
    comps = ("x1^3 - 3*x1*x2^2", "3*x1^2*x2 - x2^3")  # z^3
    f = flat_field(comps)
    theta = np.linspace(0, 2 * math.pi, 10 ** 4, endpoint=False)
    r = 0.3
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    vals = f.values("disk", pts)
    ang = np.unwrap(np.arctan2(vals[:, 1], vals[:, 0]))
    oracle = (ang[-1] - ang[0] + (ang[1] - ang[0])) / (2 * math.pi)
    rec = local_degree(f, "disk", [0.0, 0.0], r)
    assert rec.local_degree == int(round(oracle)) == 3


def test_degree_scale_invariance():
    for lam in (0.1, 7.0):
        f = flat_field((f"{lam}*x1", f"{lam}*(-x2)"))
        assert local_degree(f, "disk", [0.0, 0.0], 0.5).local_degree == -1


def test_degree_radius_independence():
    f = flat_field(("x1 + 0.2*x2^2", "x2 - 0.1*x1^2"))
    a = local_degree(f, "disk", [0.0, 0.0], 0.6).local_degree
    b = local_degree(f, "disk", [0.0, 0.0], 0.3).local_degree
    assert a == b == 1


def test_vanishing_on_circle_rejected():
    f = flat_field(("x1^2 + x2^2 - 0.25", "0"))
    with pytest.raises(DegreeError):
        local_degree(f, "disk", [0.0, 0.0], 0.5)


def test_degree_dimension_three():
    chart = Chart.from_strings("box", 3, [(-1, 1)] * 3, [False] * 3,
                               {(i, i): "1" for i in range(3)})
    atlas = Atlas((chart,), expected_chi=None)
    identity = VectorFieldSpec("id", "vector", {"box": ("x1", "x2", "x3")},
                               atlas)
    rec = local_degree(identity, "box", [0.0, 0.0, 0.0], 0.4)
    assert rec.local_degree == 1
    antipodal = VectorFieldSpec("anti", "vector",
                                {"box": ("-x1", "-x2", "-x3")}, atlas)
    rec = local_degree(antipodal, "box", [0.0, 0.0, 0.0], 0.4)
    assert rec.local_degree == -1  # (-1)^3
    twist = VectorFieldSpec("twist", "vector",
                            {"box": ("x1", "-x2", "-x3")}, atlas)
    rec = local_degree(twist, "box", [0.0, 0.0, 0.0], 0.4)
    assert rec.local_degree == 1


# ------------------------------------------------------------- find_zeros

def test_nowhere_zero_field_empty():
    field = build_field("constant")
    zeros, dropped = find_zeros(field, scan_resolution=24)
    assert zeros == [] and dropped == []


def test_two_chart_zeros_of_z_field():
    field = build_field("z")
    zeros, _ = find_zeros(field, scan_resolution=32)
    assert len(zeros) == 2
    for cname, x in zeros:
        assert np.linalg.norm(x) < 1e-10
    assert {cname for cname, _ in zeros} == {"north", "south"}


def test_algebraic_roots_on_disk():
    f = flat_field(("x1^2 - 0.25", "x2"))
    zeros, _ = find_zeros(f, scan_resolution=40)
    found = sorted(round(x[0], 6) for _, x in zeros)
    assert found == [-0.5, 0.5]
    for _, x in zeros:
        assert abs(abs(x[0]) - 0.5) < 1e-10 and abs(x[1]) < 1e-10


def test_near_zero_without_root_is_dropped_with_report():
    """A deep |X| minimum that is not a zero must be reported, not hidden."""
    f = flat_field(("x1^2 + 1e-7", "x2"))
    zeros, dropped = find_zeros(f, scan_resolution=40)
    assert zeros == []
    assert len(dropped) >= 1
    assert abs(dropped[0][1][0]) < 0.2  # near the fake minimum at the origin


# -------------------------------------------------------------- index sums

def test_morse_field_index_two():
    field = build_field("morse")
    result = index_sum(field, scan_resolution=48)
    assert result.total == 2 == result.expected
    degrees = sorted(rec.local_degree for rec in result.zeros)
    assert degrees == [-1, 1, 1, 1]


def test_constant_field_torus_zero():
    result = index_sum(build_field("constant"), scan_resolution=16)
    assert result.total == 0 == result.expected


def test_rotation_field_index_two():
    result = index_sum(build_field("rotation"), scan_resolution=32)
    assert result.total == 2
    assert sorted(r.local_degree for r in result.zeros) == [1, 1]


@pytest.mark.parametrize("name,total", [("z", 2), ("z2", 2)])
def test_sphere_polynomial_fields(name, total):
    result = index_sum(build_field(name), scan_resolution=32)
    assert result.total == total


@pytest.mark.parametrize("k", [1, 2, 3])
def test_section_degree_sum(k):
    """z^k sections of the k-clutched bundle: one zero of degree k."""
    field = build_field("section_zk", k=k)
    result = index_sum(field, scan_resolution=32)
    assert result.total == k == result.expected
    assert len(result.zeros) == 1 and result.zeros[0].chart == "north"


def test_scan_refinement_stability():
    field = build_field("morse")
    a = index_sum(field, scan_resolution=32)
    b = index_sum(field, scan_resolution=64)
    assert a.total == b.total == 2


# ------------------------------------------------- transition consistency

def test_vector_fields_push_forward_exactly():
    for name in ("morse", "rotation", "z", "z2"):
        field = build_field(name)
        residual = field_consistency_residual(field, overlap_jacobian)
        assert residual < 1e-10, name


def test_section_direction_consistency():
    k = 2
    field = build_field("section_zk", k=k)

    def clutch(x):
        # south components = R(-k theta) north components, directions only
        th = math.atan2(x[1], x[0])
        c, s = math.cos(k * th), math.sin(k * th)
        return np.array([[c, s], [-s, c]])

    residual = field_consistency_residual(field, clutch)
    assert residual < 1e-10
