"""Sharpness-rate families and the stability-ratio scan.

Two constructed families probe the decay exponent alpha = max(2, p) from
opposite sides: an anisotropic stretch of the bubble approaches the manifold
at rate 1/i with deficit shrinking like i^{-2}, and a small far-away bump
carries deficit eps^p at distance eps from the manifold. The corpus scan
then measures the stability ratio deficit / distance^alpha directly and
reports its minimum and spread.

The bump rides at distances where the bubble is vanishingly small (up to
1e20), far beyond what the product grid can resolve angularly, so every
bump-region integral is evaluated on a dedicated ball-centered spherical
mesh and added to the grid values of the unperturbed integrals as an exact
correction.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize

from .bubbles import (Bubble, as_field, bubble_norms, grad_bubble, profile,
                      profile_prime, sobolev_constant, unit_bubble)
from .corpus import bump, bump_deriv, corpus_fields, stress_fields
from .deficit import deficit, grad_integral_p
from .errors import ConditionViolated, NumericalError
from .grids import AxisymField, integrate_axisym
from .parallel import pairwise_sum, run_indexed
from .projection import project_Fu

DEFICIT_FLOOR = -1e-7

ANISOTROPIC_RANGE = (4, 256)

DEFAULT_I_LIST = (4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256)

DEFAULT_EPS_LIST = tuple(np.geomspace(1e-3, 0.3, 8))

CORPUS_EPS = (0.1, 0.03, 0.01, 0.003)

STRESS_EPS = (0.1, 0.01)


# ---------------------------------------------------------------------------
# log-log slope fitting
# ---------------------------------------------------------------------------

def loglog_slope(xs, ys):
    """Least-squares slope of log10(y) against log10(x).

    Returns (slope, residual) with residual the root-mean-square misfit in
    log10. Requires at least 5 points spanning at least 1.5 decades in x,
    and strictly positive data on both axes.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 5:
        raise ValueError(f"slope fit needs >= 5 points, got {xs.size}")
    if not (np.all(xs > 0.0) and np.all(ys > 0.0)):
        raise ValueError("slope fit needs positive abscissae and values")
    span = math.log10(xs.max() / xs.min())
    if span < 1.5:
        raise ValueError(
            f"abscissae span {span:.3f} decades, need at least 1.5")
    lx = np.log10(xs)
    ly = np.log10(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(np.sqrt(np.mean(resid * resid)))


@dataclass(frozen=True)
class SlopeFit:
    """One sharpness family: its raw series and the fitted log-log rates."""

    label: str
    abscissae: tuple
    deficits: tuple
    distances: tuple
    deficit_slope: float
    deficit_residual: float
    distance_slope: float
    distance_residual: float
    proxy_distances: tuple = ()

    def as_dict(self):
        return {
            "label": self.label,
            "abscissae": list(self.abscissae),
            "deficits": list(self.deficits),
            "distances": list(self.distances),
            "proxy_distances": list(self.proxy_distances),
            "deficit_slope": self.deficit_slope,
            "deficit_residual": self.deficit_residual,
            "distance_slope": self.distance_slope,
            "distance_residual": self.distance_residual,
        }


def _family_fit(label, xs, deficits, distances, proxies=()):
    bad = [d for d in deficits if d < DEFICIT_FLOOR]
    if bad:
        raise ConditionViolated("family produced a negative deficit",
                                label=label, worst=min(bad))
    dslope, dres = loglog_slope(xs, deficits)
    rslope, rres = loglog_slope(xs, distances)
    return SlopeFit(label=label, abscissae=tuple(float(x) for x in xs),
                    deficits=tuple(float(d) for d in deficits),
                    distances=tuple(float(d) for d in distances),
                    deficit_slope=dslope, deficit_residual=dres,
                    distance_slope=rslope, distance_residual=rres,
                    proxy_distances=tuple(float(d) for d in proxies))


# ---------------------------------------------------------------------------
# anisotropic family u_i(x) = v(A_i x)
# ---------------------------------------------------------------------------

def anisotropic_field(dim, i, bub=None):
    """v(A_i x) for the axis stretch A_i = diag(1, ..., 1, 1 + 1/i).

    With tau = 2t + t^2, t = 1/i, the stretched radius is
    rho(r, mu) = r sqrt(1 + tau mu^2), and the chain rule gives gradient
    components v'(rho) g and -v'(rho) tau mu sqrt(1 - mu^2) / g for
    g = sqrt(1 + tau mu^2). Exactly axisymmetric about the n-th axis.
    """
    if bub is None:
        bub = Bubble(1.0, 1.0, 0.0)
    if bub.x0 != 0.0:
        raise ValueError("anisotropic family needs a centered bubble")
    t = 1.0 / float(i)
    tau = 2.0 * t + t * t

    def value(r, mu):
        g = np.sqrt(1.0 + tau * mu * mu)
        return profile(bub, dim, r * g)

    def grad_r(r, mu):
        g = np.sqrt(1.0 + tau * mu * mu)
        return profile_prime(bub, dim, r * g) * g

    def grad_theta(r, mu):
        g = np.sqrt(1.0 + tau * mu * mu)
        return -profile_prime(bub, dim, r * g) * tau * mu \
            * np.sqrt(1.0 - mu * mu) / g

    return AxisymField.analytic(dim.n, value, grad_r, grad_theta,
                                desc=f"anisotropic(i={i:g})")


def anisotropic_family(dim, i_list, rgrid, agrid):
    """Deficit and manifold-distance rates of the axis-stretch family.

    Evaluates each u_i on the grids, measures its deficit and its projected
    relative distance, and fits both log-log slopes against i. The deficit
    slope approaches -2 (the stretch is a curvature-direction deformation)
    and the distance slope -1.
    """
    i_list = [float(i) for i in i_list]
    lo, hi = ANISOTROPIC_RANGE
    if any(i < lo or i > hi for i in i_list):
        raise ValueError(f"stretch indices must lie in [{lo}, {hi}]")

    def one(i):
        u = anisotropic_field(dim, i).to_gridded(rgrid, agrid)
        rep = deficit(u, dim, rgrid, agrid)
        proj = project_Fu(u, dim, rgrid, agrid)
        return rep.deficit, proj.distance

    rows = run_indexed(one, [(i,) for i in i_list])
    deficits = [r[0] for r in rows]
    distances = [r[1] for r in rows]
    return _family_fit("anisotropic", i_list, deficits, distances)


# ---------------------------------------------------------------------------
# far-bump family u = v + eps * bump at axis distance x_far
# ---------------------------------------------------------------------------

def _ball_mesh(dim, x_far, agrid, K=96):
    """Quadrature mesh over the unit ball centered at x_far on the axis.

    Gauss-Legendre in the ball radius rho (weights absorbing rho^{n-1})
    crossed with the zonal surface rule of agrid. Returns the mesh
    dictionary used by every bump-region integral: the weights w, the bump
    profile and its slope at rho, the distance R to the origin, and the
    gradient frame components (axial, in-plane) of the bubble and bump
    directions.
    """
    nodes, gw = leggauss(K)
    rho = 0.5 * (nodes + 1.0)
    wr = 0.5 * gw * rho ** (dim.n - 1.0)
    nu = agrid.mu
    w = wr[:, None] * agrid.weights[None, :]
    rho2 = rho[:, None]
    nu2 = nu[None, :]
    sin2 = np.sqrt(1.0 - nu2 * nu2)
    R = np.sqrt(x_far * x_far + 2.0 * x_far * rho2 * nu2 + rho2 * rho2)
    return {
        "x_far": float(x_far), "w": w, "rho": rho2, "nu": nu2, "sin": sin2,
        "R": R,
        "phi": np.broadcast_to(bump(rho)[:, None], R.shape),
        "phip": np.broadcast_to(bump_deriv(rho)[:, None], R.shape),
        # unit vector components (axial, meridian) toward the gradients
        "bump_ax": nu2, "bump_pl": sin2,
        "v_ax": (x_far + rho2 * nu2) / R, "v_pl": rho2 * sin2 / R,
    }


def _ball_sum(mesh, integrand):
    return float(pairwise_sum((mesh["w"] * integrand).ravel()))


def _bubble_on_mesh(bub, dim, mesh):
    """(|Dw|, axial, in-plane) components of a candidate bubble's gradient
    on the ball mesh, for an axis center bub.x0."""
    c = mesh["x_far"] - bub.x0
    rho, nu, sin = mesh["rho"], mesh["nu"], mesh["sin"]
    Rw = np.sqrt(c * c + 2.0 * c * rho * nu + rho * rho)
    Rw = np.maximum(Rw, 1e-300)
    wp = profile_prime(bub, dim, Rw)
    return wp * (c + rho * nu) / Rw, wp * rho * sin / Rw


def bump_components(dim, eps, x_far, rgrid, agrid, mesh=None):
    """All integrals of u = v + eps * phi(. - x_far e_n) for v = v_{1,1,0}.

    The p and p* norms split as (grid integral of the pure bubble) plus a
    ball-mesh correction, which is exact and keeps the far bump fully
    resolved at any x_far. Returns a dict with the deficit, the norms, the
    bump's own norms, and the splitting remainders r1, r2 of

        |Du|_p^p  = |Dv|_p^p  + eps^p  |Dphi|_p^p   + r1,
        |u|_q^q   = |v|_q^q   + eps^q  |phi|_q^q    + r2   (q = p*).
    """
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    p, pstar = dim.p, dim.pstar
    bub = Bubble(1.0, 1.0, 0.0)
    if mesh is None:
        mesh = _ball_mesh(dim, x_far, agrid)
    gv, pv = bubble_norms(bub, dim, rgrid)

    vp = profile_prime(bub, dim, mesh["R"])
    dv_ax = vp * mesh["v_ax"]
    dv_pl = vp * mesh["v_pl"]
    du_ax = dv_ax + eps * mesh["phip"] * mesh["bump_ax"]
    du_pl = dv_pl + eps * mesh["phip"] * mesh["bump_pl"]
    dv_p = (dv_ax * dv_ax + dv_pl * dv_pl) ** (0.5 * p)
    dG = _ball_sum(mesh, (du_ax * du_ax + du_pl * du_pl) ** (0.5 * p) - dv_p)

    vval = profile(bub, dim, mesh["R"])
    uval = vval + eps * mesh["phi"]
    dP = _ball_sum(mesh, np.abs(uval) ** pstar - vval ** pstar)

    grad_phi_p = _ball_sum(mesh, np.abs(mesh["phip"]) ** p)
    func_phi_pstar = _ball_sum(mesh, mesh["phi"] ** pstar)

    G = gv + dG
    P = pv + dP
    delta = G ** (1.0 / p) / P ** (1.0 / pstar) - sobolev_constant(dim, rgrid)
    return {
        "deficit": delta, "grad_p": G, "func_pstar": P,
        "bump_grad_p": grad_phi_p, "bump_func_pstar": func_phi_pstar,
        "r1": dG - eps ** p * grad_phi_p,
        "r2": dP - eps ** pstar * func_phi_pstar,
        "v_far": float(profile(bub, dim, np.array([x_far]))[0]),
    }


def _bump_projected_distance(dim, eps, x_far, rgrid, agrid, mesh, grad_p):
    """min over bubbles w of |D(u - w)|_p / |Du|_p for the bump field.

    The objective splits like the norms: |D(v - w)|^p on the grid plus the
    ball-mesh correction that swaps v for v + eps phi there. Nelder-Mead in
    (log a, log b, x0) from w = v, with the function tolerance tied to the
    starting objective eps^p |Dphi|_p^p so small eps stay resolved.
    """
    p = dim.p
    base = Bubble(1.0, 1.0, 0.0)
    gr_v = np.broadcast_to(profile_prime(base, dim, rgrid.r)[:, None],
                           (rgrid.N, agrid.M))
    vp_mesh = profile_prime(base, dim, mesh["R"])
    dv_ax = vp_mesh * mesh["v_ax"]
    dv_pl = vp_mesh * mesh["v_pl"]
    b_ax = eps * mesh["phip"] * mesh["bump_ax"]
    b_pl = eps * mesh["phip"] * mesh["bump_pl"]

    def objective(x):
        la, lb, x0 = x
        if abs(la) > 50.0 or abs(lb) > 50.0 or abs(x0) > 1e6:
            return 1e300
        cand = Bubble(math.exp(la), math.exp(lb), float(x0))
        try:
            gr_w, gt_w = grad_components(cand, dim, rgrid, agrid)
            glob = integrate_axisym(
                ((gr_v - gr_w) ** 2 + gt_w * gt_w) ** (0.5 * p),
                rgrid, agrid, check_tail=False)
        except NumericalError:
            return 1e300
        w_ax, w_pl = _bubble_on_mesh(cand, dim, mesh)
        d_ax = dv_ax - w_ax
        d_pl = dv_pl - w_pl
        plain = (d_ax * d_ax + d_pl * d_pl) ** (0.5 * p)
        bumped = ((d_ax + b_ax) ** 2 + (d_pl + b_pl) ** 2) ** (0.5 * p)
        return glob + _ball_sum(mesh, bumped - plain)

    f0 = objective((0.0, 0.0, 0.0))
    res = minimize(objective, (0.0, 0.0, 0.0), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": max(1e-300, 1e-6 * f0),
                            "maxfev": 2000})
    best = min(f0, float(res.fun))
    return (max(best, 0.0) / grad_p) ** (1.0 / p)


def grad_components(bub, dim, rgrid, agrid):
    """(grad_r, grad_theta) arrays of a bubble on the product grid."""
    fld = as_field(bub, dim)
    return fld.grad_r(rgrid, agrid), fld.grad_theta(rgrid, agrid)


def bump_family(dim, eps_list, x_far, rgrid, agrid):
    """Deficit and distance rates of the far-bump family at fixed x_far.

    Requires the separation v(x_far) < 0.1 * min(eps): the construction
    only makes sense while the bubble is negligible against the bump, and
    the deficit rate eps^p is asserted downstream only for p >= 2.
    Records the projected distance and the first-order proxy
    eps |Dphi|_p / |Du|_p per member.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0.0 for e in eps_list):
        raise ValueError("eps values must be positive")
    if x_far <= 1.0:
        raise ValueError("the unit bump ball must sit beyond the origin")
    v_far = float(profile(Bubble(1.0, 1.0, 0.0), dim, np.array([x_far]))[0])
    if v_far >= 0.1 * min(eps_list):
        raise ConditionViolated(
            "bubble is not negligible at the bump location",
            v_far=v_far, min_eps=min(eps_list), x_far=x_far)
    mesh = _ball_mesh(dim, x_far, agrid)

    def one(eps):
        comp = bump_components(dim, eps, x_far, rgrid, agrid, mesh=mesh)
        dist = _bump_projected_distance(dim, eps, x_far, rgrid, agrid, mesh,
                                        comp["grad_p"])
        proxy = eps * comp["bump_grad_p"] ** (1.0 / dim.p) \
            / comp["grad_p"] ** (1.0 / dim.p)
        return comp["deficit"], dist, proxy

    rows = run_indexed(one, [(e,) for e in eps_list])
    return _family_fit("bump", eps_list, [r[0] for r in rows],
                       [r[1] for r in rows], proxies=[r[2] for r in rows])


# ---------------------------------------------------------------------------
# stability-ratio scan over a perturbation corpus
# ---------------------------------------------------------------------------

def perturbation_corpus(dim, rgrid, agrid, eps_values=CORPUS_EPS,
                        stress_eps=STRESS_EPS):
    """The scan corpus: u = v + eps * phi, gradient-normalized.

    phi runs over the zonal shells (every listed eps) and the off-center
    axis bumps (the stress subset), each rescaled so that
    |D(u - v)|_p = eps |Dv|_p exactly. The default sizes give 200 fields.
    """
    bub = unit_bubble(dim, rgrid)
    v = as_field(bub, dim)
    gv = grad_integral_p(v, dim, rgrid, agrid) ** (1.0 / dim.p)
    out = []
    pairs = [(phi, e) for phi in corpus_fields(dim.n) for e in eps_values]
    pairs += [(phi, e) for phi in stress_fields(dim.n) for e in stress_eps]
    for phi, eps in pairs:
        gp = grad_integral_p(phi, dim, rgrid, agrid) ** (1.0 / dim.p)
        u = v.plus(phi, eps * gv / gp).to_gridded(
            rgrid, agrid, desc=f"{phi.desc}|eps={eps:g}")
        out.append(u)
    return out


@dataclass(frozen=True)
class RatioScan:
    """Distribution of deficit / distance^alpha over a corpus."""

    alpha: float
    count: int
    failures: int
    descs: tuple
    deficits: tuple
    distances: tuple
    ratios: tuple
    min_ratio: float
    median_ratio: float

    def as_dict(self):
        return {
            "alpha": self.alpha, "count": self.count,
            "failures": self.failures, "descs": list(self.descs),
            "deficits": list(self.deficits),
            "distances": list(self.distances), "ratios": list(self.ratios),
            "min_ratio": self.min_ratio, "median_ratio": self.median_ratio,
        }


def stability_ratio_scan(dim, corpus, rgrid, agrid, alpha=None):
    """Measure deficit / distance^alpha on each corpus field.

    alpha defaults to max(2, p). Projection failures are excluded from the
    statistics but counted. Raises CONDITION_VIOLATED if the minimum ratio
    is not strictly positive, which is the theorem's checkable content.
    """
    if alpha is None:
        alpha = max(2.0, dim.p)

    def one(u):
        d = deficit(u, dim, rgrid, agrid).deficit
        try:
            proj = project_Fu(u, dim, rgrid, agrid, fan=False)
        except NumericalError:
            return None
        return u.desc, d, proj.distance

    rows = run_indexed(one, [(u,) for u in corpus])
    kept = [r for r in rows if r is not None]
    failures = len(rows) - len(kept)
    if not kept:
        raise ConditionViolated("every projection in the scan failed",
                                count=len(rows))
    descs = tuple(r[0] for r in kept)
    deficits = tuple(r[1] for r in kept)
    distances = tuple(r[2] for r in kept)
    ratios = tuple(d / dist ** alpha for d, dist in zip(deficits, distances))
    scan = RatioScan(alpha=float(alpha), count=len(rows), failures=failures,
                     descs=descs, deficits=deficits, distances=distances,
                     ratios=ratios, min_ratio=min(ratios),
                     median_ratio=float(np.median(ratios)))
    if not scan.min_ratio > 0.0:
        worst = descs[ratios.index(scan.min_ratio)]
        raise ConditionViolated("stability ratio is not positive",
                                min_ratio=scan.min_ratio, field=worst)
    return scan


__all__ = [
    "SlopeFit", "loglog_slope",
    "anisotropic_field", "anisotropic_family",
    "bump_components", "bump_family",
    "perturbation_corpus", "RatioScan", "stability_ratio_scan",
    "DEFAULT_I_LIST", "DEFAULT_EPS_LIST",
]
