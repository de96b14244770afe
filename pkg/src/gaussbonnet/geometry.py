"""Chart-based Riemannian geometry.

A Chart is a coordinate box with metric entries given as expressions; all
curvature data is derived from exact 2-jets of the metric.  The sign
conventions, fixed once and consumed by the curvature-integral modules:

* R^r_{smn} = d_m Gamma^r_{ns} - d_n Gamma^r_{ms}
              + Gamma^r_{ml} Gamma^l_{ns} - Gamma^r_{nl} Gamma^l_{ms}
* riemann[i,j,k,l] = g_{ir} R^r_{jkl}; both index pairs antisymmetric,
  pair-symmetric, and riemann[0,1,0,1] = +sin^2(theta) on the unit sphere
  (sectional curvature +1).
* The orthonormal frame is Gram-Schmidt on the coordinate basis in order,
  equivalently the inverse transpose Cholesky factor of g; it is upper
  triangular with positive diagonal, hence positively oriented.
* omega2[a][b] = sum_{k<l} Rf[a,b,k,l] w^k ^ w^l in frame indices.

Batched variants operate on (N, d) point arrays and return stacked
tensors; the scalar API wraps batch size 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, eval_jet, parse
from .exterior import FormElement, SkewFormMatrix

__all__ = [
    "Chart", "Atlas", "PointGeometry", "GeometryError",
    "metric_jets", "point_geometry", "point_geometry_batch",
    "christoffels_at", "geodesic", "geodesic_transport", "parallel_transport",
    "NormalCoordinates",
]


class GeometryError(RuntimeError):
    pass


@dataclass(frozen=True)
class Chart:
    """Coordinate box with expression-valued metric entries.

    metric maps (i, j) with i <= j (upper triangle, 0-based) to Expr;
    weight is an optional partition-of-unity factor (default 1).
    """

    name: str
    dim: int
    ranges: tuple          # ((lo, hi), ...) per coordinate
    periodic: tuple        # (bool, ...) per coordinate
    metric: dict
    weight: Expr | None = None
    params: dict = field(default_factory=dict)
    var_names: tuple = ()

    def __post_init__(self):
        if len(self.ranges) != self.dim or len(self.periodic) != self.dim:
            raise ValueError("ranges/periodic must match dim")
        if not self.var_names:
            object.__setattr__(self, "var_names",
                               tuple(f"x{i + 1}" for i in range(self.dim)))

    @classmethod
    def from_strings(cls, name, dim, ranges, periodic, metric_entries,
                     weight=None, params=None, var_names=None):
        """Build a chart from expression strings (upper-triangle metric)."""
        params = dict(params or {})
        var_names = tuple(var_names or (f"x{i + 1}" for i in range(dim)))
        metric = {}
        for (i, j), text in metric_entries.items():
            if i > j:
                raise ValueError("give the upper triangle only")
            metric[(i, j)] = parse(text, var_names, params) \
                if isinstance(text, str) else text
        w = parse(weight, var_names, params) if isinstance(weight, str) else weight
        return cls(name, dim, tuple(tuple(r) for r in ranges), tuple(periodic),
                   metric, w, params, var_names)

    def contains(self, x, margin=0.0):
        x = np.asarray(x)
        for i, (lo, hi) in enumerate(self.ranges):
            if self.periodic[i]:
                continue
            if not (lo + margin < x[i] < hi - margin):
                return False
        return True

    def wrap(self, x):
        """Wrap periodic coordinates back into their fundamental interval."""
        x = np.array(x, dtype=float)
        for i, (lo, hi) in enumerate(self.ranges):
            if self.periodic[i]:
                x[..., i] = lo + np.mod(x[..., i] - lo, hi - lo)
        return x

    def weight_values(self, points):
        if self.weight is None:
            return np.ones(len(points))
        return eval_jet(self.weight, points, self.params, order=0).val


@dataclass(frozen=True)
class Atlas:
    """Charts plus coverage mode and optional overlap identifications.

    identifications: list of (name_a, name_b, map_ab, map_ba) where map_ab
    sends chart-a coordinates to chart-b coordinates on the overlap.
    """

    charts: tuple
    expected_chi: int | None = None
    mode: str = "single"            # "single" (almost everywhere) | "weighted"
    identifications: tuple = ()
    name: str = ""

    @property
    def dim(self):
        return self.charts[0].dim

    def chart(self, name):
        for c in self.charts:
            if c.name == name:
                return c
        raise KeyError(f"no chart named {name!r}")

    def other_coords(self, chart_name, x):
        """Map a point to every other chart that contains its image."""
        out = []
        for (a, b, ab, ba) in self.identifications:
            if a == chart_name:
                out.append((b, ab(np.asarray(x, dtype=float))))
            elif b == chart_name:
                out.append((a, ba(np.asarray(x, dtype=float))))
        return out


@dataclass
class PointGeometry:
    """Metric, connection and curvature data at a single chart point."""

    x: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray          # gamma[k, i, j] = Gamma^k_{ij}, symmetric in (i, j)
    riemann: np.ndarray        # fully lowered, both index pairs antisymmetric
    frame: np.ndarray          # columns are the orthonormal frame in coordinates
    riemann_frame: np.ndarray  # curvature in orthonormal frame indices
    scalar_curvature: float
    sqrt_det_g: float

    @property
    def omega2(self):
        """Curvature 2-forms as a skew matrix of FormElements over the coframe."""
        d = len(self.x)
        zero = FormElement(d)
        ent = [[zero for _ in range(d)] for _ in range(d)]
        for a in range(d):
            for b in range(a + 1, d):
                terms = {}
                for k in range(d):
                    for l in range(k + 1, d):
                        c = self.riemann_frame[a, b, k, l]
                        if c != 0.0:
                            terms[(k, l)] = complex(c)
                ent[a][b] = FormElement(d, terms)
                ent[b][a] = -1 * ent[a][b]  # skew exactly, by construction
        return SkewFormMatrix(d, ent)


def metric_jets(chart, points, order=2):
    """Metric values and derivatives at a batch of points.

    Returns (g, dg, d2g) with dg[n,a,i,j] = d_a g_ij and
    d2g[n,a,b,i,j] = d_a d_b g_ij; higher entries are None below `order`.
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    g = np.zeros((n, d, d))
    dg = np.zeros((n, d, d, d)) if order >= 1 else None
    d2g = np.zeros((n, d, d, d, d)) if order >= 2 else None
    for (i, j), entry in chart.metric.items():
        jet = eval_jet(entry, points, chart.params, order)
        g[:, i, j] = jet.val
        if i != j:
            g[:, j, i] = jet.val
        if order >= 1:
            dg[:, :, i, j] = jet.grad
            if i != j:
                dg[:, :, j, i] = jet.grad
        if order >= 2:
            h = 0.5 * (jet.hess + jet.hess.transpose(0, 2, 1))
            d2g[:, :, :, i, j] = h
            if i != j:
                d2g[:, :, :, j, i] = h
    return g, dg, d2g


def _cholesky_psd(g, chart, points):
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        bad = None
        for k in range(len(g)):
            try:
                np.linalg.cholesky(g[k])
            except np.linalg.LinAlgError:
                bad = points[k]
                break
        raise GeometryError(
            f"metric not positive definite on chart {chart.name!r} at {bad}")


def christoffels_at(chart, points):
    """Batched Christoffel symbols Gamma^k_{ij} (order-1 metric jets only)."""
    g, dg, _ = metric_jets(chart, points, order=1)
    g_inv = np.linalg.inv(g)
    t = dg.transpose(0, 3, 1, 2) + dg.transpose(0, 3, 2, 1) - dg
    # t[n,l,i,j] = d_i g_jl + d_j g_il - d_l g_ij
    return 0.5 * np.einsum("nkl,nlij->nkij", g_inv, t, optimize=True)


@dataclass
class _BatchGeometry:
    x: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    frame: np.ndarray
    riemann_frame: np.ndarray
    scalar_curvature: np.ndarray
    sqrt_det_g: np.ndarray


def point_geometry_batch(chart, points):
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    g, dg, d2g = metric_jets(chart, points, order=2)
    l = _cholesky_psd(g, chart, points)
    g_inv = np.linalg.inv(g)
    sqrt_det_g = np.prod(np.diagonal(l, axis1=1, axis2=2), axis=1)

    # contractions below are batched matmuls on reshaped tensors (the
    # einsum equivalents are kept in comments; matmul is 2-3x faster here)
    t = dg.transpose(0, 3, 1, 2) + dg.transpose(0, 3, 2, 1) - dg
    # gamma[n,k,i,j] = 0.5 g^{kl} t[l,i,j]
    gamma = 0.5 * np.matmul(g_inv, t.reshape(n, d, d * d)).reshape(n, d, d, d)

    # d_m g^{kl} = -g^{ka} (d_m g_ab) g^{bl}
    dginv = -np.matmul(np.matmul(g_inv[:, None], dg), g_inv[:, None])
    dt = (d2g.transpose(0, 1, 4, 2, 3) + d2g.transpose(0, 1, 4, 3, 2)
          - d2g.transpose(0, 1, 2, 3, 4))
    # dgamma[n,m,k,i,j] = 0.5 (dginv[m,k,l] t[l,i,j] + g^{kl} dt[m,l,i,j])
    dgamma = 0.5 * (np.matmul(dginv, t.reshape(n, 1, d, d * d))
                    + np.matmul(g_inv[:, None], dt.reshape(n, d, d, d * d))
                    ).reshape(n, d, d, d, d)

    # R^r_{smv} = d_m Gamma^r_{vs} - d_v Gamma^r_{ms}
    #             + Gamma^r_{ml} Gamma^l_{vs} - Gamma^r_{vl} Gamma^l_{ms}
    gg = np.matmul(gamma.reshape(n, d * d, d), gamma.reshape(n, d, d * d))
    gg = gg.reshape(n, d, d, d, d)  # gg[n,r,m,v,s] = Gamma^r_{ml} Gamma^l_{vs}
    r_up = (dgamma.transpose(0, 2, 4, 1, 3) - dgamma.transpose(0, 2, 4, 3, 1)
            + gg.transpose(0, 1, 4, 2, 3) - gg.transpose(0, 1, 4, 3, 2))
    # riemann[n,i,s,k,l] = g_{ir} R^r_{skl}
    riemann = np.matmul(g, r_up.reshape(n, d, d ** 3)).reshape(n, d, d, d, d)

    frame = np.linalg.inv(l).transpose(0, 2, 1)
    # Rf[a,b,c,e] = R[i,j,k,l] F[i,a] F[j,b] F[k,c] F[l,e]: contract one
    # index per round, rolling the fresh frame index to the back
    ft = frame.transpose(0, 2, 1)
    x = riemann
    for _ in range(4):
        y = np.matmul(ft, x.reshape(n, d, d ** 3))
        x = y.reshape(n, d, d, d, d).transpose(0, 2, 3, 4, 1)
    riemann_frame = np.ascontiguousarray(x)
    # scal = g^{ik} g^{jl} R_{ijkl}
    tmp = np.matmul(g_inv, riemann.reshape(n, d, d ** 3)).reshape(n, d, d, d, d)
    scal = np.einsum("njl,nkjkl->n", g_inv, tmp, optimize=True)
    return _BatchGeometry(points, g, g_inv, gamma, riemann, frame,
                          riemann_frame, scal, sqrt_det_g)


def point_geometry(chart, x):
    """Full connection/curvature bundle at one interior chart point."""
    x = np.asarray(x, dtype=float)
    if not chart.contains(x):
        raise GeometryError(f"point {x} outside chart {chart.name!r}")
    b = point_geometry_batch(chart, x[None, :])
    return PointGeometry(x, b.g[0], b.g_inv[0], b.gamma[0], b.riemann[0],
                         b.frame[0], b.riemann_frame[0],
                         float(b.scalar_curvature[0]), float(b.sqrt_det_g[0]))


# --------------------------------------------------------------------------
# Geodesics and parallel transport (fixed-step classic RK4)
# --------------------------------------------------------------------------

def _geodesic_rhs(chart, x, v, w=None, cotangent=False):
    gamma = christoffels_at(chart, x[None, :])[0]
    acc = -np.einsum("kij,i,j->k", gamma, v, v)
    if w is None:
        return acc, None
    if cotangent:
        wdot = np.einsum("kij,i,k->j", gamma, v, w)
    else:
        wdot = -np.einsum("kij,i,j->k", gamma, v, w)
    return acc, wdot


def _check_inside(chart, x):
    if not chart.contains(x):
        raise GeometryError(
            f"path exits chart {chart.name!r} range at {x}")


def geodesic(chart, x0, v0, arc_length, steps=None):
    """Integrate the geodesic equation; returns [(x, v)] at uniform steps.

    v0 is rescaled so that the path has the requested arc length over unit
    parameter time; |v|_g is conserved by the equation.
    """
    x = np.asarray(x0, dtype=float)
    v = np.asarray(v0, dtype=float)
    g0 = metric_jets(chart, x[None, :], order=0)[0][0]
    speed = float(np.sqrt(v @ g0 @ v))
    if speed == 0.0:
        raise GeometryError("zero initial velocity")
    v = v * (arc_length / speed)
    if steps is None:
        steps = max(64, int(256 * abs(arc_length)))
    h = 1.0 / steps
    out = [(x.copy(), v.copy())]
    for _ in range(steps):
        x, v = _rk4_step(chart, x, v, h)
        x = chart.wrap(x)
        _check_inside(chart, x)
        out.append((x.copy(), v.copy()))
    return out


def _rk4_step(chart, x, v, h, w=None, cotangent=False):
    def f(xx, vv, ww):
        acc, wdot = _geodesic_rhs(chart, xx, vv, ww, cotangent)
        return vv, acc, wdot

    k1 = f(x, v, w)
    k2 = f(x + 0.5 * h * k1[0], v + 0.5 * h * k1[1],
           None if w is None else w + 0.5 * h * k1[2])
    k3 = f(x + 0.5 * h * k2[0], v + 0.5 * h * k2[1],
           None if w is None else w + 0.5 * h * k2[2])
    k4 = f(x + h * k3[0], v + h * k3[1],
           None if w is None else w + h * k3[2])
    xn = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    vn = v + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if w is None:
        return xn, vn
    wn = w + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return xn, vn, wn


def geodesic_batch(chart, x0, v0, steps):
    """Integrate many geodesics jointly over unit parameter time.

    x0, v0 are (N, d); the Christoffel evaluations are batched, which is
    what makes normal-coordinate stencils affordable.  Endpoints are
    wrapped on periodic axes and range-checked once at the end.
    """
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    h = 1.0 / steps

    def rhs(xx, vv):
        gamma = christoffels_at(chart, xx)
        return vv, -np.einsum("nkij,ni,nj->nk", gamma, vv, vv)

    for _ in range(steps):
        k1 = rhs(x, v)
        k2 = rhs(x + 0.5 * h * k1[0], v + 0.5 * h * k1[1])
        k3 = rhs(x + 0.5 * h * k2[0], v + 0.5 * h * k2[1])
        k4 = rhs(x + h * k3[0], v + h * k3[1])
        x = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        x = chart.wrap(x)
    for row in x:
        _check_inside(chart, row)
    return x, v


def geodesic_transport(chart, x0, v0, arc_length, w0, steps=None, cotangent=False):
    """Jointly integrate a geodesic and parallel transport of w along it."""
    x = np.asarray(x0, dtype=float)
    v = np.asarray(v0, dtype=float)
    w = np.asarray(w0, dtype=float)
    g0 = metric_jets(chart, x[None, :], order=0)[0][0]
    speed = float(np.sqrt(v @ g0 @ v))
    v = v * (arc_length / speed)
    if steps is None:
        steps = max(64, int(256 * abs(arc_length)))
    h = 1.0 / steps
    for _ in range(steps):
        x, v, w = _rk4_step(chart, x, v, h, w, cotangent)
        x = chart.wrap(x)
        _check_inside(chart, x)
    return x, v, w


def parallel_transport(chart, path, w0, steps=1000, cotangent=False):
    """Transport w0 along an explicit path t -> (x, xdot), t in [0, 1].

    Solves wdot^k + Gamma^k_ij xdot^i w^j = 0 (sign-flipped for cotangent
    vectors) with classic RK4; the path parametrization carries the speed.
    """
    w = np.asarray(w0, dtype=float)
    h = 1.0 / steps

    def wdot(t, ww):
        x, xd = path(t)
        gamma = christoffels_at(chart, np.asarray(x, dtype=float)[None, :])[0]
        if cotangent:
            return np.einsum("kij,i,k->j", gamma, xd, ww)
        return -np.einsum("kij,i,j->k", gamma, xd, ww)

    t = 0.0
    for _ in range(steps):
        k1 = wdot(t, w)
        k2 = wdot(t + 0.5 * h, w + 0.5 * h * k1)
        k3 = wdot(t + 0.5 * h, w + 0.5 * h * k2)
        k4 = wdot(t + h, w + h * k3)
        w = w + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return w


# --------------------------------------------------------------------------
# Normal coordinates
# --------------------------------------------------------------------------

class NormalCoordinates:
    """Exponential-map coordinates centered at a chart point.

    exp is geodesic shooting; log inverts it by damped Newton on the
    shooting map.  The radius guard keeps targets inside the configured
    injectivity-safe ball (default 0.4 of the smallest range extent).
    """

    def __init__(self, chart, x0, radius=None, steps=300):
        self.chart = chart
        self.x0 = np.asarray(x0, dtype=float)
        if not chart.contains(self.x0):
            raise GeometryError("center outside chart")
        extents = [hi - lo for lo, hi in chart.ranges]
        self.radius = radius if radius is not None else 0.4 * min(extents)
        self.steps = steps
        g0 = metric_jets(chart, self.x0[None, :], order=0)[0][0]
        self.g0 = g0
        # columns: orthonormal frame at the center; normal coordinates are
        # components in this frame, so the pulled-back metric at 0 is I
        self.frame0 = np.linalg.inv(np.linalg.cholesky(g0)).T

    def exp(self, u):
        """Map normal coordinates u (frame components) to chart coordinates."""
        u = np.asarray(u, dtype=float)
        r = float(np.linalg.norm(u))
        if r == 0.0:
            return self.x0.copy()
        if r > self.radius:
            raise GeometryError(f"normal radius {r:.3g} exceeds safe {self.radius:.3g}")
        v = self.frame0 @ u  # unit-speed in g thanks to orthonormal columns
        path = geodesic(self.chart, self.x0, v, r, steps=max(32, int(self.steps * r)))
        return path[-1][0]

    def exp_batch(self, us):
        """Batched exponential map; one joint integration for all targets."""
        us = np.asarray(us, dtype=float)
        radii = np.linalg.norm(us, axis=1)
        if radii.max() > self.radius:
            raise GeometryError("normal radius exceeds the safe radius")
        v = us @ self.frame0.T  # rows: frame0 @ u
        steps = max(32, int(self.steps * max(radii.max(), 1e-3)))
        out, _ = geodesic_batch(self.chart, np.tile(self.x0, (len(us), 1)), v, steps)
        out[radii == 0.0] = self.x0
        return out

    def det_g_batch(self, us, fd=5e-4):
        """det of the pulled-back metric at many normal points, one batch."""
        us = np.asarray(us, dtype=float)
        n, d = us.shape
        stencil = [us]
        for a in range(d):
            da = np.zeros(d)
            da[a] = fd
            stencil.extend([us + da, us - da])
        pts = self.exp_batch(np.concatenate(stencil))
        base = pts[:n]
        jac = np.empty((n, d, d))
        for a in range(d):
            plus = pts[(1 + 2 * a) * n:(2 + 2 * a) * n]
            minus = pts[(2 + 2 * a) * n:(3 + 2 * a) * n]
            jac[:, :, a] = (plus - minus) / (2 * fd)
        g = metric_jets(self.chart, base, order=0)[0]
        pulled = np.einsum("nia,nij,njb->nab", jac, g, jac)
        return np.linalg.det(pulled)

    def log(self, y, tol=1e-12, max_iter=50):
        """Invert the shooting map by damped Newton; returns normal coordinates."""
        y = np.asarray(y, dtype=float)
        d = self.chart.dim
        u = np.linalg.solve(self.frame0, y - self.x0)  # flat first guess
        nrm = np.linalg.norm(u)
        if nrm > 0.95 * self.radius:
            u *= 0.95 * self.radius / nrm
        fd = 1e-6

        def shoot_err(uu):
            return self.exp(uu) - y

        err = shoot_err(u)
        for _ in range(max_iter):
            if np.linalg.norm(err) < tol:
                return u
            jac = np.zeros((d, d))
            for a in range(d):
                du = np.zeros(d)
                du[a] = fd
                jac[:, a] = (shoot_err(u + du) - shoot_err(u - du)) / (2 * fd)
            try:
                step = np.linalg.solve(jac, err)
            except np.linalg.LinAlgError:
                raise GeometryError("singular shooting Jacobian")
            lam = 1.0
            for _ in range(30):
                cand = u - lam * step
                if np.linalg.norm(cand) <= self.radius:
                    cand_err = shoot_err(cand)
                    if np.linalg.norm(cand_err) < np.linalg.norm(err):
                        u, err = cand, cand_err
                        break
                lam *= 0.5
            else:
                raise GeometryError("Newton line search stalled in log map")
        if np.linalg.norm(err) >= tol:
            raise GeometryError("log map did not converge in 50 iterations")
        return u

    def distance(self, y):
        """Geodesic distance r(x0, y) = |log(y)|."""
        return float(np.linalg.norm(self.log(y)))

    def metric_at(self, u, fd=5e-4):
        """Pullback metric in normal coordinates by differentiating exp."""
        u = np.asarray(u, dtype=float)
        d = self.chart.dim
        jac = np.zeros((d, d))
        for a in range(d):
            du = np.zeros(d)
            du[a] = fd
            jac[:, a] = (self.exp(u + du) - self.exp(u - du)) / (2 * fd)
        g = metric_jets(self.chart, self.exp(u)[None, :], order=0)[0][0]
        return jac.T @ g @ jac

    def det_g(self, u):
        return float(np.linalg.det(self.metric_at(u)))
