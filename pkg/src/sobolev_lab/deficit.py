"""p-Sobolev deficit and the term-by-term second-order expansion chains.

The deficit of a field u is delta(u) = |Du|_p / |u|_{p*} - S, nonnegative by
the sharp Sobolev inequality and zero exactly on the extremal manifold. For
u = v + eps*phi with v an extremal bubble, the chain machinery evaluates every
integral appearing in the second-order expansion of both norms, cross-checks
the first-order terms through the Euler-Lagrange identity of v, and assembles
the regime-dependent lower bound for |Du|_p^p - S^p |u|_{p*}^p so that the
inequality can be audited numerically term by term.

All integrals are exact quadratures of the displayed integrands: the min-term
branch sets {eps|Dphi| >= |Dv|} are resolved pointwise on the grid, never
smoothed.
"""

from dataclasses import dataclass, field

import numpy as np

from .bubbles import Bubble, as_field, sobolev_constant
from .errors import ConditionViolated
from .grids import (GRAD_V_P_MINUS_2, ORLICZ, V_PSTAR_MINUS_2, AxisymField,
                    integrate_axisym, weighted_seminorm)
from .kernels import weight_w_pm2


def grad_integral_p(fld, dim, rgrid, agrid, return_tail=False):
    """integral |Df|^p, with tail estimate on request."""
    integrand = fld.grad_sq(rgrid, agrid) ** (0.5 * dim.p)
    return integrate_axisym(integrand, rgrid, agrid, return_tail=return_tail)


def func_integral_pstar(fld, dim, rgrid, agrid, return_tail=False):
    """integral |f|^{p*}, with tail estimate on request."""
    integrand = np.abs(fld.values(rgrid, agrid)) ** dim.pstar
    return integrate_axisym(integrand, rgrid, agrid, return_tail=return_tail)


@dataclass(frozen=True)
class DeficitReport:
    """delta(u) together with the norms and tails that produced it."""

    deficit: float
    grad_norm: float
    func_norm: float
    s_constant: float
    grad_tail: float
    func_tail: float

    def as_dict(self):
        return {
            "deficit": self.deficit,
            "grad_norm": self.grad_norm,
            "func_norm": self.func_norm,
            "s_constant": self.s_constant,
            "grad_tail": self.grad_tail,
            "func_tail": self.func_tail,
        }


def deficit(u, dim, rgrid, agrid):
    """Sobolev deficit delta(u) = |Du|_p / |u|_{p*} - S of an axisymmetric field.

    S is the quadrature value of the sharp constant on the same grids, so a
    bubble's deficit vanishes to quadrature precision rather than carrying
    the grid's truncation bias.
    """
    gp, gtail = grad_integral_p(u, dim, rgrid, agrid, return_tail=True)
    fp, ftail = func_integral_pstar(u, dim, rgrid, agrid, return_tail=True)
    if not (gp > 0.0 and fp > 0.0):
        raise ValueError("field must have positive norms")
    grad_norm = gp ** (1.0 / dim.p)
    func_norm = fp ** (1.0 / dim.pstar)
    s = sobolev_constant(dim, rgrid)
    return DeficitReport(deficit=grad_norm / func_norm - s,
                         grad_norm=grad_norm, func_norm=func_norm,
                         s_constant=s, grad_tail=gtail, func_tail=ftail)


@dataclass(frozen=True)
class PerturbedBubble:
    """A bubble plus a gradient-normalized axisymmetric perturbation.

    phi is rescaled on construction so that |Dphi|_{L^p} = 1; eps then
    measures the perturbation in the norm the expansion chain expects.
    """

    base: Bubble
    eps: float
    phi: AxisymField
    raw_grad_norm: float

    @classmethod
    def build(cls, base, eps, phi, dim, rgrid, agrid):
        if eps < 0.0:
            raise ValueError(f"eps must be >= 0, got {eps}")
        gp = grad_integral_p(phi, dim, rgrid, agrid)
        norm = gp ** (1.0 / dim.p)
        if not (np.isfinite(norm) and norm > 0.0):
            raise ValueError("perturbation must have positive finite |Dphi|_p")
        return cls(base=base, eps=float(eps), phi=phi.scaled(1.0 / norm),
                   raw_grad_norm=norm)

    def field(self, dim):
        return as_field(self.base, dim).plus(self.phi, self.eps)


@dataclass(frozen=True)
class ExpansionLedger:
    """Every integral of the second-order expansion, evaluated exactly once.

    Gradient side: grad_zeroth = int |Dv|^p, grad_first = p int |Dv|^{p-2}
    Dv.Dphi, the two quadratic-form pieces, the min-term, and int |Dphi|^p.
    Function side: the bubble mass, func_first = p* int v^{p*-1} phi, both
    second-order weights (Orlicz and v^{p*-2}), and int |phi|^{p*}. The
    perturbed norms int |Du|^p and int |u|^{p*} close the books.
    """

    n: int
    p: float
    pstar: float
    regime: str
    eps: float
    kappa: float
    C1: float
    s_constant: float
    v_mass: float
    v_norm_pstar: float
    grad_zeroth: float
    grad_first: float
    func_first: float
    el_rel_error: float
    quad_grad: float
    quad_weight: float
    min_term: float
    gradp_phi: float
    orlicz_term: float
    w2_term: float
    phi_pstar: float
    grad_u_p: float
    func_u_pstar: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def expansion_ledger(v, phi, eps, kappa, C1, dim, rgrid, agrid,
                     el_tol=1e-6):
    """Evaluate all expansion terms for u = v + eps*phi and audit first order.

    phi must arrive gradient-normalized (|Dphi|_p = 1 to 1e-6 relative, as
    PerturbedBubble.build produces). The first-order gradient and function
    terms are tied together by the Euler-Lagrange identity of v; a relative
    mismatch beyond el_tol raises ConditionViolated, since it means the
    gradients or the quadrature are wrong, and every chain conclusion would
    be garbage.
    """
    p, pstar = dim.p, dim.pstar
    v_field = as_field(v, dim)
    u_field = v_field.plus(phi, eps)
    s = sobolev_constant(dim, rgrid)

    gradp_phi = grad_integral_p(phi, dim, rgrid, agrid)
    if abs(gradp_phi - 1.0) > 1e-6 * max(1.0, gradp_phi):
        raise ValueError(
            f"phi must be gradient-normalized; int |Dphi|^p = {gradp_phi!r}")

    grad_zeroth = grad_integral_p(v_field, dim, rgrid, agrid)
    v_mass = func_integral_pstar(v_field, dim, rgrid, agrid)
    v_norm = v_mass ** (1.0 / pstar)

    dv = np.sqrt(v_field.grad_sq(rgrid, agrid))
    dphi_sq = phi.grad_sq(rgrid, agrid)
    dot = (v_field.grad_r(rgrid, agrid) * phi.grad_r(rgrid, agrid)
           + v_field.grad_theta(rgrid, agrid) * phi.grad_theta(rgrid, agrid))
    grad_first = p * integrate_axisym(dv ** (p - 2.0) * dot, rgrid, agrid,
                                      check_tail=False)

    vv = v_field.values(rgrid, agrid)
    ph = phi.values(rgrid, agrid)
    func_first = pstar * integrate_axisym(vv ** (pstar - 1.0) * ph,
                                          rgrid, agrid, check_tail=False)

    el_rhs = s**p * v_norm ** (p - pstar) * (p / pstar) * func_first
    # first-order terms below 1e-7 of the zeroth-order scale are quadrature
    # noise; the identity check compares against that floor instead of 0/0
    el_scale = max(abs(grad_first), abs(el_rhs), 1e-7 * grad_zeroth)
    el_rel = abs(grad_first - el_rhs) / el_scale
    if el_rel > el_tol:
        raise ConditionViolated(
            "first-order terms break the Euler-Lagrange identity",
            rel_error=el_rel, grad_first=grad_first, el_rhs=el_rhs)

    quad_grad = weighted_seminorm(phi, GRAD_V_P_MINUS_2, dim, rgrid, agrid,
                                  v_field)
    du = np.sqrt(u_field.grad_sq(rgrid, agrid))
    wpm2, _ = weight_w_pm2(dv, du, p)
    if eps > 0.0:
        quot = (du - dv) / eps
    else:
        quot = np.zeros_like(du)
    quad_weight = (p - 2.0) * integrate_axisym(wpm2 * quot * quot,
                                               rgrid, agrid)

    dphi = np.sqrt(dphi_sq)
    min_integrand = np.minimum(eps**p * dphi**p,
                               eps**2 * dv ** (p - 2.0) * dphi_sq)
    min_term = integrate_axisym(min_integrand, rgrid, agrid)

    orlicz_term = weighted_seminorm(phi, ORLICZ, dim, rgrid, agrid, v_field,
                                    eps=eps, C1=C1)
    w2_term = weighted_seminorm(phi, V_PSTAR_MINUS_2, dim, rgrid, agrid,
                                v_field)
    phi_pstar = func_integral_pstar(phi, dim, rgrid, agrid)

    grad_u_p = grad_integral_p(u_field, dim, rgrid, agrid)
    func_u_pstar = func_integral_pstar(u_field, dim, rgrid, agrid)

    return ExpansionLedger(
        n=dim.n, p=p, pstar=pstar, regime=dim.regime(), eps=float(eps),
        kappa=float(kappa), C1=float(C1), s_constant=s, v_mass=v_mass,
        v_norm_pstar=v_norm, grad_zeroth=grad_zeroth, grad_first=grad_first,
        func_first=func_first, el_rel_error=el_rel, quad_grad=quad_grad,
        quad_weight=quad_weight, min_term=min_term, gradp_phi=gradp_phi,
        orlicz_term=orlicz_term, w2_term=w2_term, phi_pstar=phi_pstar,
        grad_u_p=grad_u_p, func_u_pstar=func_u_pstar)


@dataclass(frozen=True)
class ChainCheck:
    """lhs >= rhs is the assembled second-order lower bound."""

    lhs: float
    rhs: float
    slack: float
    regime: str
    c0: float
    terms: dict = field(default_factory=dict)


def chain_lower_bound(ledger, c0):
    """Assemble the regime's lower bound for |Du|^p - S^p |u|_{p*}^p.

    The first-order terms cancel through the Euler-Lagrange identity, so
    the bound combines the quadratic form (gradient side) against the
    second-order function-side penalty; c0 multiplies the min-term (p < 2)
    or eps^p int |Dphi|^p (p >= 2).
    """
    p, pstar, eps, kappa = ledger.p, ledger.pstar, ledger.eps, ledger.kappa
    s_p = ledger.s_constant ** p
    lhs = ledger.grad_u_p - s_p * ledger.func_u_pstar ** (p / pstar)
    quad_sum = ledger.quad_grad + ledger.quad_weight
    base = eps**2 * p * (1.0 - kappa) / 2.0 * quad_sum
    vfac = s_p * ledger.v_norm_pstar ** (p - pstar)
    if ledger.regime == "I":
        penalty = (eps**2 * vfac
                   * (p * (pstar - 1.0) / 2.0 + p * kappa / pstar)
                   * ledger.orlicz_term)
        gain = c0 * ledger.min_term
    elif ledger.regime == "II":
        penalty = vfac * (p / pstar) * (
            eps**2 * (pstar * (pstar - 1.0) / 2.0 + kappa) * ledger.w2_term
            + eps**pstar * ledger.C1 * ledger.phi_pstar)
        gain = c0 * ledger.min_term
    else:
        penalty = vfac * (p / pstar) * (
            eps**2 * (pstar * (pstar - 1.0) / 2.0 + kappa) * ledger.w2_term
            + eps**pstar * ledger.C1 * ledger.phi_pstar)
        gain = c0 * eps**p * ledger.gradp_phi
    rhs = base + gain - penalty
    return ChainCheck(lhs=lhs, rhs=rhs, slack=lhs - rhs,
                      regime=ledger.regime, c0=float(c0),
                      terms={"quadratic": base, "gain": gain,
                             "penalty": penalty})


@dataclass(frozen=True)
class LowerEstimate:
    """delta(u) against the elementary mean-value lower bound."""

    lhs: float
    rhs: float
    constant: float
    applicable: bool
    holds: bool


def lower_estimate_check(u, dim, rgrid, agrid):
    """Check delta(u) >= c (|Du|_p^p - S^p) after normalizing |u|_{p*} = 1.

    The constant c = 1 / (p (S + 0.1)^{p-1}) comes from the mean-value
    theorem on t^p between S and |Du|_p, valid while delta(u) <= 0.1. Beyond
    that the hypothesis fails and the result is reported, not asserted.
    """
    rep = deficit(u, dim, rgrid, agrid)
    s = rep.s_constant
    grad_unit = rep.grad_norm / rep.func_norm
    c = 1.0 / (dim.p * (s + 0.1) ** (dim.p - 1.0))
    lhs = rep.deficit
    rhs = c * (grad_unit**dim.p - s**dim.p)
    applicable = rep.deficit <= 0.1
    return LowerEstimate(lhs=lhs, rhs=rhs, constant=c,
                         applicable=applicable, holds=lhs >= rhs)


def holder_min_bound(phi, eps, v, dim, rgrid, agrid):
    """Lower-bound the min-term by c (eps^p int |Dphi|^p)^{2/p} for p < 2.

    The constant c = 2^{1-2/p} min(1, |Dv|_p^{p-2}) follows from splitting
    at the branch set {eps|Dphi| >= |Dv|}, Hoelder on the small-gradient
    part, and the power mean inequality; the split needs |Dphi|_p = 1 and
    eps <= 1 so each branch integral stays below 1.
    """
    if dim.p >= 2.0:
        raise ValueError("the min-term bound is a p < 2 statement")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    gradp_phi = grad_integral_p(phi, dim, rgrid, agrid)
    if abs(gradp_phi - 1.0) > 1e-6:
        raise ValueError(
            f"phi must be gradient-normalized; int |Dphi|^p = {gradp_phi!r}")
    v_field = as_field(v, dim)
    dv = np.sqrt(v_field.grad_sq(rgrid, agrid))
    dphi_sq = phi.grad_sq(rgrid, agrid)
    dphi = np.sqrt(dphi_sq)
    p = dim.p
    min_integrand = np.minimum(eps**p * dphi**p,
                               eps**2 * dv ** (p - 2.0) * dphi_sq)
    lhs = integrate_axisym(min_integrand, rgrid, agrid)
    grad_v_p = grad_integral_p(v_field, dim, rgrid, agrid)
    c = 2.0 ** (1.0 - 2.0 / p) * min(1.0, grad_v_p ** ((p - 2.0) / p))
    rhs = c * (eps**p * gradp_phi) ** (2.0 / p)
    return lhs, rhs


__all__ = [
    "DeficitReport", "deficit", "PerturbedBubble", "ExpansionLedger",
    "expansion_ledger", "ChainCheck", "chain_lower_bound", "LowerEstimate",
    "lower_estimate_check", "holder_min_bound", "grad_integral_p",
    "func_integral_pstar",
]
