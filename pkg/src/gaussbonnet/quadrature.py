"""Deterministic quadrature over charts and atlases.

Gauss-Legendre on non-periodic axes (nodes are interior, never on range
endpoints), shifted uniform rule on periodic axes (spectrally accurate for
smooth periodic integrands).  Sums are reduced by a fixed pairwise tree in
ascending multi-index order, so results are bitwise reproducible no matter
how node evaluation is scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import metric_jets

__all__ = ["QuadratureSpec", "axis_rule", "chart_nodes", "integrate_chart",
           "integrate_atlas", "pairwise_sum", "richardson", "worker_count"]


@dataclass(frozen=True)
class QuadratureSpec:
    """Per-axis node counts plus Richardson levels.

    nodes: int (same count on every axis) or a per-axis sequence.
    levels: number of coarser refinements used for extrapolation.
    """

    nodes: object = 32
    levels: int = 1

    def per_axis(self, dim):
        if isinstance(self.nodes, int):
            counts = [self.nodes] * dim
        else:
            counts = list(self.nodes)
            if len(counts) != dim:
                raise ValueError("per-axis node list does not match dimension")
        if any(n < 2 for n in counts):
            raise ValueError("node counts must be >= 2")
        return counts


def worker_count():
    """Worker pool size for node evaluation, capped by GBC_THREADS."""
    try:
        return max(1, int(os.environ.get("GBC_THREADS", "1")))
    except ValueError:
        return 1


def axis_rule(lo, hi, n, periodic):
    """Nodes and weights on one axis; open nodes in both rule families."""
    if periodic:
        h = (hi - lo) / n
        x = lo + (np.arange(n) + 0.5) * h
        w = np.full(n, h)
        return x, w
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid + half * x, half * w


def chart_nodes(chart, counts):
    """Tensor-product nodes (N, d) and weights (N,) in ascending multi-index order."""
    axes = [axis_rule(lo, hi, n, per)
            for (lo, hi), per, n in zip(chart.ranges, chart.periodic, counts)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    points = np.column_stack([g.reshape(-1) for g in grids])
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    weights = np.ones(len(points))
    for w in wgrids:
        weights = weights * w.reshape(-1)
    return points, weights


def pairwise_sum(values):
    """Fixed pairwise-tree reduction; deterministic for a fixed input order."""
    a = np.asarray(values, dtype=float).ravel().copy()
    n = len(a)
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        a[:half] = a[:half] + a[half:2 * half]
        if n % 2:
            a[half] = a[2 * half]
            n = half + 1
        else:
            n = half
    return float(a[0])


class QuadratureError(RuntimeError):
    pass


def integrate_chart(chart, density, spec_or_nodes, chunk=65536):
    """Integrate density(chart, X) * sqrt(det g) * weight over the chart box.

    `density` is a batched callable mapping (chart, (N, d) points) to (N,)
    values relative to the Riemannian volume.  Node evaluation may be
    chunked and threaded; the reduction order never changes.
    """
    if isinstance(spec_or_nodes, QuadratureSpec):
        counts = spec_or_nodes.per_axis(chart.dim)
    elif isinstance(spec_or_nodes, int):
        counts = [spec_or_nodes] * chart.dim
    else:
        counts = list(spec_or_nodes)
    points, weights = chart_nodes(chart, counts)
    values = np.empty(len(points))
    spans = [(s, min(s + chunk, len(points))) for s in range(0, len(points), chunk)]

    def eval_span(span):
        s, e = span
        pts = points[s:e]
        try:
            dens = np.asarray(density(chart, pts), dtype=float)
        except Exception as exc:
            raise QuadratureError(
                f"density evaluation failed on chart {chart.name!r} "
                f"(first node of block: {pts[0]}): {exc}") from exc
        g = metric_jets(chart, pts, order=0)[0]
        det = np.linalg.det(g)
        if np.any(det <= 0.0):
            bad = pts[int(np.argmax(det <= 0.0))]
            raise QuadratureError(
                f"metric not positive definite on chart {chart.name!r} "
                f"at node {bad}")
        values[s:e] = dens * np.sqrt(det) * chart.weight_values(pts) * weights[s:e]

    workers = worker_count()
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(eval_span, spans))
    else:
        for span in spans:
            eval_span(span)
    return pairwise_sum(values)


def integrate_atlas(atlas, density, spec_or_nodes, chunk=65536):
    """Sum of chart integrals; chart weights realize the partition of unity."""
    return sum(integrate_chart(c, density, spec_or_nodes, chunk)
               for c in atlas.charts)


def richardson(values):
    """Extrapolate (node_count, value) pairs in powers of 1/n.

    The convergence order is inferred from the observed difference ratio
    (floored at 2); extrapolation is Neville's algorithm in h = 1/n^order.
    Returns (extrapolated, error_estimate).
    """
    if len(values) < 2:
        raise ValueError("need at least two refinement levels")
    ns = np.array([float(n) for n, _ in values])
    vs = np.array([float(v) for _, v in values])
    if np.any(np.diff(ns) <= 0):
        raise ValueError("node counts must be strictly increasing")
    if np.allclose(np.diff(vs), 0.0, atol=0.0):
        return float(vs[-1]), 0.0
    order = 2.0
    if len(values) >= 3:
        d1, d2 = vs[-2] - vs[-3], vs[-1] - vs[-2]
        if d2 != 0.0 and d1 / d2 > 1.0:
            target = d1 / d2
            n1, n2, n3 = ns[-3], ns[-2], ns[-1]

            def ratio(q):
                return (n2 ** -q - n1 ** -q) / (n3 ** -q - n2 ** -q)

            lo_q, hi_q = 0.25, 16.0
            if ratio(lo_q) <= target <= ratio(hi_q):
                for _ in range(80):
                    mid = 0.5 * (lo_q + hi_q)
                    if ratio(mid) < target:
                        lo_q = mid
                    else:
                        hi_q = mid
                order = 0.5 * (lo_q + hi_q)
            else:
                order = hi_q if target > ratio(hi_q) else lo_q
            order = float(np.clip(order, 2.0, 16.0))
    h = 1.0 / ns ** order
    # Lagrange interpolation through (h_i, v_i), evaluated at h = 0
    total = 0.0
    for i in range(len(vs)):
        coeff = 1.0
        for j in range(len(vs)):
            if j != i:
                coeff *= h[j] / (h[j] - h[i])
        total += vs[i] * coeff
    return float(total), abs(float(total) - float(vs[-1]))
