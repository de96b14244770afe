"""Gauss-Bonnet integrand, evaluated two independent ways, and the
curvature-integral checker.

Route one builds the skew matrix of frame curvature 2-forms and takes its
Pfaffian; route two evaluates the double-permutation curvature sum in
orthonormal-frame components (where the metric determinant factor is 1).
Both carry the same global constant, calibrated once so the unit 2-sphere
density is +1/(2 pi); with this package's curvature sign convention
(riemann_frame[0,1,0,1] = +1 on the unit sphere) the calibrated constant
is +(2 pi)^{-d/2}, frozen for all dimensions.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .exterior import pfaffian
from .geometry import point_geometry, point_geometry_batch
from .quadrature import integrate_atlas, richardson

__all__ = [
    "CALIBRATED_SIGN", "gb_density_pfaffian", "gb_density_aw",
    "gb_density_pfaffian_batch", "gb_density_aw_batch",
    "integrand_report", "IntegrandReport", "verify_gbc", "GbcResult",
]

# Sign calibrated on the unit 2-sphere (density must come out +1/(2 pi),
# so that the integral is +2); frozen for every even dimension.
CALIBRATED_SIGN = 1.0


def _pf_top_batch(rf):
    """Top-form coefficient of Pf(curvature 2-form matrix), batched.

    rf has shape (N, d, d, d, d); entry (a, b) of the matrix is the 2-form
    sum_{k<l} rf[:, a, b, k, l] w^k w^l.  Recursive first-row expansion on
    sparse coefficient maps {index tuple -> (N,) array}.
    """
    n, d = rf.shape[0], rf.shape[1]
    pairs = [(k, l) for k in range(d) for l in range(k + 1, d)]

    from .exterior import merge_indices

    def entry(a, b):
        return {(k, l): rf[:, a, b, k, l] for (k, l) in pairs}

    memo = {}

    def pf(indices):
        if indices in memo:
            return memo[indices]
        i0, rest = indices[0], indices[1:]
        acc = {}
        for pos, j in enumerate(rest):
            sub_idx = tuple(k for k in rest if k != j)
            sign0 = (-1) ** pos
            ent = entry(i0, j)
            if sub_idx:
                for idx1, c1 in pf(sub_idx).items():
                    for idx2, c2 in ent.items():
                        s, merged = merge_indices(idx2, idx1)
                        if s:
                            key = merged
                            contrib = (sign0 * s) * (c2 * c1)
                            acc[key] = acc.get(key, 0) + contrib
            else:
                for idx2, c2 in ent.items():
                    acc[idx2] = acc.get(idx2, 0) + sign0 * c2
        memo[indices] = acc
        return acc

    top = tuple(range(d))
    result = pf(top).get(top)
    if result is None:
        return np.zeros(n)
    return result


def gb_density_pfaffian_batch(chart, points):
    points = np.asarray(points, dtype=float)
    d = chart.dim
    if d % 2:
        raise ValueError("even dimension required")
    b = point_geometry_batch(chart, points)
    coeff = _pf_top_batch(b.riemann_frame)
    return CALIBRATED_SIGN * (2 * math.pi) ** (-d / 2) * coeff


def gb_density_pfaffian(chart, x):
    """Scalar s with integrand = s * dvol at x, via the Pfaffian route.

    Cross-checked against the generic exterior-algebra Pfaffian of the
    omega2 matrix in the test suite; the batched expansion here is the
    integration-speed path.
    """
    return float(gb_density_pfaffian_batch(chart, np.asarray(x, dtype=float)[None, :])[0])


def gb_density_pfaffian_reference(chart, x):
    """Same density through the generic FormElement Pfaffian (slow path)."""
    d = chart.dim
    pg = point_geometry(chart, x)
    coeff = pfaffian(pg.omega2).coefficient(tuple(range(d)))
    return CALIBRATED_SIGN * (2 * math.pi) ** (-d / 2) * float(np.real(coeff))


def _perm_pairs(d):
    perms = list(itertools.permutations(range(d)))
    signs = []
    for sigma in perms:
        sgn = 1
        for i in range(d):
            for j in range(i + 1, d):
                if sigma[i] > sigma[j]:
                    sgn = -sgn
        signs.append(sgn)
    return perms, signs


_PERM_CACHE = {}


def gb_density_aw_batch(chart, points):
    """Double permutation sum over frame curvature components.

    (2 pi)^{-d/2} / (2^d (d/2)!) sum_{s1, s2} sgn(s1) sgn(s2)
        prod_m Rf[s1(2m), s1(2m+1), s2(2m), s2(2m+1)]
    with the calibrated global sign shared with the Pfaffian route.
    """
    points = np.asarray(points, dtype=float)
    d = chart.dim
    if d % 2:
        raise ValueError("even dimension required")
    if d not in _PERM_CACHE:
        _PERM_CACHE[d] = _perm_pairs(d)
    perms, signs = _PERM_CACHE[d]
    rf = point_geometry_batch(chart, points).riemann_frame
    n = rf.shape[0]
    total = np.zeros(n)
    half = d // 2
    for s1, sg1 in zip(perms, signs):
        for s2, sg2 in zip(perms, signs):
            prod = rf[:, s1[0], s1[1], s2[0], s2[1]].copy()
            for m in range(1, half):
                prod *= rf[:, s1[2 * m], s1[2 * m + 1], s2[2 * m], s2[2 * m + 1]]
            total += (sg1 * sg2) * prod
    const = (2 * math.pi) ** (-d / 2) / (2 ** d * math.factorial(half))
    return CALIBRATED_SIGN * const * total


def gb_density_aw(chart, x):
    return float(gb_density_aw_batch(chart, np.asarray(x, dtype=float)[None, :])[0])


@dataclass
class IntegrandReport:
    pfaffian_density: float
    aw_density: float
    discrepancy: float

    def within_tolerance(self):
        return self.discrepancy < 1e-9 * (1.0 + abs(self.pfaffian_density))


def integrand_report(chart, x):
    pf = gb_density_pfaffian(chart, x)
    aw = gb_density_aw(chart, x)
    return IntegrandReport(pf, aw, abs(pf - aw))


@dataclass
class GbcResult:
    integral: float
    expected_chi: float | None
    abs_error: float | None
    resolutions: list = field(default_factory=list)  # (node count, value)
    extrapolated: bool = False
    wall_time: float = 0.0


def _resolution_ladder(res, levels):
    if levels <= 1:
        return [res]
    ladder = sorted({max(4, res * k // (levels + 1)) for k in range(2, levels + 1)})
    return [n for n in ladder if n < res] + [res]


def verify_gbc(atlas, resolution=32, extrapolate=False, levels=3, chunk=65536):
    """Integrate the curvature density over the atlas and compare with chi.

    Returns a GbcResult with the per-resolution convergence table; when
    `extrapolate` is set the reported integral is the Richardson limit of
    `levels` increasing resolutions ending at `resolution`.
    """
    if atlas.dim % 2:
        raise ValueError("odd dimension: the curvature integrand vanishes identically")
    t0 = time.perf_counter()
    ladder = _resolution_ladder(resolution, levels) if extrapolate else [resolution]
    table = []
    for n in ladder:
        val = integrate_atlas(atlas, gb_density_pfaffian_batch, n, chunk)
        table.append((n, val))
    if extrapolate and len(table) >= 2:
        integral, _ = richardson(table)
        extrapolated = True
    else:
        integral, extrapolated = table[-1][1], False
    expected = atlas.expected_chi
    err = abs(integral - expected) if expected is not None else None
    return GbcResult(integral, expected, err, table, extrapolated,
                     time.perf_counter() - t0)
