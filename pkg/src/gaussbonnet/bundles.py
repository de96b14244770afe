"""Oriented Riemannian plane bundles over the two-chart sphere.

A bundle is clutching data on the standard north/south stereographic
presentation: a transition angle phi (k times the polar angle, wound
counterclockwise) and an analytic partition of unity rho.  Two
independent integral routes recover the clutching integer:

* transition route: the 2-form -(1/2pi) d(rho_other d phi_other,this)
  assembled from 2-jets of rho and phi;
* connection route: theta_this = sum_gamma rho_gamma d phi_gamma,this is
  a metric connection by construction, and -(1/2pi) d theta integrates to
  the same number (the d = 2 Pfaffian is the single curvature 2-form).

Sign convention: counterclockwise winding, fixed by requiring the k = 1
bundle to integrate to +1; the sign agrees with the curvature-density
calibration used for the tangent-bundle integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import eval_jet, parse
from .geometry import metric_jets
from .library import stereo_pair_atlas
from .quadrature import integrate_chart, richardson

__all__ = ["PlaneBundle", "make_plane_bundle", "euler_form_transition",
           "euler_form_transition_batch", "connection_form",
           "curvature_density_batch", "generalized_gbc", "winding_of_phi",
           "GeneralizedGbcResult"]


@dataclass
class PlaneBundle:
    """Clutching presentation of an oriented plane bundle over the sphere.

    phi[name] is the transition angle phi_{name,other} expressed in that
    chart's own coordinates; rho[name] is that chart's partition factor.
    """

    k: int
    atlas: object
    phi: dict
    rho: dict
    expected_euler: int = 0
    parsed_phi: dict = field(default_factory=dict, repr=False)
    parsed_rho: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in self.phi:
            chart = self.atlas.chart(name)
            self.parsed_phi[name] = (parse(self.phi[name], chart.var_names)
                                     if isinstance(self.phi[name], str) else self.phi[name])
            self.parsed_rho[name] = (parse(self.rho[name], chart.var_names)
                                     if isinstance(self.rho[name], str) else self.rho[name])

    def chart_names(self):
        return tuple(self.phi)

    def other(self, name):
        names = self.chart_names()
        return names[1] if name == names[0] else names[0]


def make_plane_bundle(k, sharpness=6, box=3.0):
    """k-clutched bundle: phi_{alpha beta} = k theta, counterclockwise.

    The polar angle flips sign across w~ = 1/w, and phi_{beta alpha} is
    minus phi_{alpha beta}; the two flips cancel, so the stored entry
    phi_{name,other} reads k theta in both charts' own coordinates.
    rho = 1/(1 + r^{2s}) in each chart's own radius is an exact analytic
    partition of unity.
    """
    atlas = stereo_pair_atlas(box=box, sharpness=sharpness)
    phi = {"north": f"{k}*atan2(x2, x1)", "south": f"{k}*atan2(x2, x1)"}
    rho = {"north": f"1/(1+(x1^2+x2^2)^{sharpness})",
           "south": f"1/(1+(x1^2+x2^2)^{sharpness})"}
    return PlaneBundle(k, atlas, phi, rho, expected_euler=k)


def _rho_other_jets(bundle, name, points):
    """Jets of the other chart's partition factor, seen in this chart.

    rho_alpha + rho_beta = 1 exactly, so the other factor is 1 - rho_this
    with negated derivatives.
    """
    chart = bundle.atlas.chart(name)
    jet = eval_jet(bundle.parsed_rho[name], points, chart.params, order=2)
    return 1.0 - jet.val, -jet.grad, -jet.hess


def euler_form_transition_batch(bundle, name, points):
    """Transition-function Euler 2-form as a density against the base area.

    e|_alpha = -(1/2pi) d(rho_beta d phi_beta,alpha); the dx^dy coefficient
    is the Jacobian-style pairing of the two gradients, divided by
    sqrt(det g) so quadrature can multiply the volume back in.
    """
    chart = bundle.atlas.chart(name)
    points = np.asarray(points, dtype=float)
    phi_jet = eval_jet(bundle.parsed_phi[name], points, chart.params, order=2)
    # phi stored per chart is phi_{this,other}; the formula needs
    # phi_{other,this} = -phi_{this,other}
    dphi = -phi_jet.grad
    _, drho, _ = _rho_other_jets(bundle, name, points)
    coeff = drho[:, 0] * dphi[:, 1] - drho[:, 1] * dphi[:, 0]
    g = metric_jets(chart, points, order=0)[0]
    sqrtg = np.sqrt(np.linalg.det(g))
    return -(1.0 / (2 * math.pi)) * coeff / sqrtg


def euler_form_transition(bundle, name, x):
    return float(euler_form_transition_batch(
        bundle, name, np.asarray(x, dtype=float)[None, :])[0])


def connection_form(bundle, name):
    """theta_alpha = sum_gamma rho_gamma d phi_gamma,alpha as a callable.

    Returns (N, 2) one-form components at (N, 2) points; an SO(2)
    connection by construction (single angle entry of the skew matrix).
    """
    def theta(points):
        points = np.asarray(points, dtype=float)
        chart = bundle.atlas.chart(name)
        phi_jet = eval_jet(bundle.parsed_phi[name], points, chart.params, order=1)
        rho_other = _rho_other_jets(bundle, name, points)[0]
        return -rho_other[:, None] * phi_jet.grad  # d phi_other,this = -d phi_this,other

    return theta


def curvature_density_batch(bundle, name, points):
    """-(1/2pi) d theta_alpha as a density against the base area.

    d theta = d rho_beta ^ d phi_beta,alpha because d^2 phi = 0; assembled
    from 2-jets of theta's ingredients (independent of the transition
    route only in code path, equal as forms).
    """
    chart = bundle.atlas.chart(name)
    points = np.asarray(points, dtype=float)
    phi_jet = eval_jet(bundle.parsed_phi[name], points, chart.params, order=2)
    rho_val, drho, rho_hess = _rho_other_jets(bundle, name, points)
    dphi = -phi_jet.grad
    hphi = -phi_jet.hess
    # d(rho dphi) coefficient of dx^dy:
    #   d_x(rho phi_y) - d_y(rho phi_x) = rho_x phi_y - rho_y phi_x
    #   (+ rho (phi_yx - phi_xy) = 0, kept for an honest jet assembly)
    coeff = (drho[:, 0] * dphi[:, 1] - drho[:, 1] * dphi[:, 0]
             + rho_val * (hphi[:, 0, 1] - hphi[:, 1, 0]))
    g = metric_jets(chart, points, order=0)[0]
    sqrtg = np.sqrt(np.linalg.det(g))
    return -(1.0 / (2 * math.pi)) * coeff / sqrtg


@dataclass
class GeneralizedGbcResult:
    pf_integral: float
    transition_integral: float
    k: int
    resolutions: list = field(default_factory=list)


def generalized_gbc(bundle, resolution=96, extrapolate=False):
    """Both Euler-number routes; each should equal the clutching integer."""
    table_pf, table_tr = [], []
    ladder = ([resolution // 2, 3 * resolution // 4, resolution]
              if extrapolate else [resolution])
    for n in ladder:
        pf = sum(integrate_chart(bundle.atlas.chart(name),
                                 lambda c, p, nm=name: curvature_density_batch(bundle, nm, p),
                                 n)
                 for name in bundle.chart_names())
        tr = sum(integrate_chart(bundle.atlas.chart(name),
                                 lambda c, p, nm=name: euler_form_transition_batch(bundle, nm, p),
                                 n)
                 for name in bundle.chart_names())
        table_pf.append((n, pf))
        table_tr.append((n, tr))
    if extrapolate and len(ladder) > 1:
        pf = richardson(table_pf)[0]
        tr = richardson(table_tr)[0]
    else:
        pf, tr = table_pf[-1][1], table_tr[-1][1]
    return GeneralizedGbcResult(pf, tr, bundle.k,
                                [(n, a, b) for (n, a), (_, b) in zip(table_pf, table_tr)])


def winding_of_phi(bundle, name="north", radius=1.0, samples=720):
    """Accumulated transition-angle increments around the overlap annulus.

    Must come out as k (in 2 pi units, counterclockwise in this chart).
    """
    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    chart = bundle.atlas.chart(name)
    vals = eval_jet(bundle.parsed_phi[name], pts, chart.params, order=0).val
    inc = np.diff(np.concatenate([vals, vals[:1]]))
    inc = (inc + math.pi) % (2 * math.pi) - math.pi
    return float(inc.sum() / (2 * math.pi))
