"""Extremal bubble geometry.

The extremals of the p-Sobolev inequality on R^n (1 < p < n) form the
(n+2)-parameter family

    v_{a,b,x0}(x) = a (1 + b |x - x0|^{p/(p-1)})^{-(n-p)/p},  a, b > 0,

all of which satisfy ||Dv||_{L^p} = S ||v||_{L^{p*}} with the sharp constant S
and p* = np/(n-p). This module provides the closed-form profiles, their
parameter and spatial derivatives (the tangent space of the family), the
quadrature Sobolev constant, and unit-norm reference bubbles.

Axisymmetric conventions: bubble centers sit on the symmetry axis, x0 is the
signed axial coordinate of the center, and fields are functions of
(r, mu = cos theta).
"""

from dataclasses import dataclass

import numpy as np

from .grids import AxisymField
from .parallel import pairwise_sum


@dataclass(frozen=True)
class Dimension:
    """Ambient dimension n and integrability exponent p with 1 < p < n."""

    n: int
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not (1.0 < self.p < self.n):
            raise ValueError(
                f"p must satisfy 1 < p < n, got p={self.p} at n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))

    @property
    def pstar(self):
        """Critical exponent np/(n-p)."""
        return self.n * self.p / (self.n - self.p)

    @property
    def q(self):
        """Radial profile exponent p/(p-1)."""
        return self.p / (self.p - 1.0)

    @property
    def m(self):
        """Profile decay power (n-p)/p."""
        return (self.n - self.p) / self.p

    @property
    def low_p_threshold(self):
        """2n/(n+2); below it p* <= 2 and the quadratic regime degenerates."""
        return 2.0 * self.n / (self.n + 2.0)

    def regime(self):
        """Perturbation-expansion regime: 'I' (p* <= 2), 'II', or 'III' (p >= 2)."""
        if self.p <= self.low_p_threshold:
            return "I"
        if self.p < 2.0:
            return "II"
        return "III"


@dataclass(frozen=True)
class Bubble:
    """One member of the extremal family; x0 is the axial center coordinate."""

    a: float
    b: float
    x0: float = 0.0

    def __post_init__(self):
        if not (self.a > 0.0 and np.isfinite(self.a)):
            raise ValueError(f"amplitude a must be positive, got {self.a}")
        if not (self.b > 0.0 and np.isfinite(self.b)):
            raise ValueError(f"concentration b must be positive, got {self.b}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "x0", float(self.x0))


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------

def profile(bub, dim, R):
    """v as a function of the distance R from the center."""
    R = np.asarray(R, dtype=np.float64)
    return bub.a * (1.0 + bub.b * R**dim.q) ** (-dim.m)


def profile_prime(bub, dim, R):
    """dv/dR (negative for R > 0)."""
    R = np.asarray(R, dtype=np.float64)
    return -bub.a * bub.b * dim.m * dim.q * R ** (dim.q - 1.0) \
        * (1.0 + bub.b * R**dim.q) ** (-dim.m - 1.0)


def profile_prime2(bub, dim, R):
    """d^2v/dR^2 (away from R = 0, where the profile is only C^1 for p > 2)."""
    R = np.asarray(R, dtype=np.float64)
    t = bub.b * R**dim.q
    return -bub.a * bub.b * dim.m * dim.q * R ** (dim.q - 2.0) \
        * (1.0 + t) ** (-dim.m - 2.0) \
        * ((dim.q - 1.0) * (1.0 + t) - (dim.m + 1.0) * dim.q * t)


def profile_db(bub, dim, R):
    """Parameter derivative dv/db at fixed R."""
    R = np.asarray(R, dtype=np.float64)
    return -bub.a * dim.m * R**dim.q * (1.0 + bub.b * R**dim.q) ** (-dim.m - 1.0)


def profile_db_prime(bub, dim, R):
    """d/dR of dv/db (for the gradient of the b-tangent field)."""
    R = np.asarray(R, dtype=np.float64)
    t = bub.b * R**dim.q
    return -bub.a * dim.m * dim.q * R ** (dim.q - 1.0) \
        * (1.0 + t) ** (-dim.m - 2.0) * (1.0 + t - (dim.m + 1.0) * t)


# ---------------------------------------------------------------------------
# pointwise evaluation in R^n
# ---------------------------------------------------------------------------

def eval_bubble(bub, dim, x):
    """v_{a,b,x0}(x) for a point or batch of points (last axis = coords)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[-1] != dim.n:
        raise ValueError(f"points have {x.shape[-1]} coords, expected {dim.n}")
    d = x.copy()
    d[..., -1] -= bub.x0
    R = np.sqrt(np.sum(d * d, axis=-1))
    out = profile(bub, dim, R)
    return out if out.size > 1 else float(out[0])

def grad_bubble(bub, dim, x):
    """Spatial gradient Dv at points x (shape like x)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = x.copy()
    d[..., -1] -= bub.x0
    R = np.sqrt(np.sum(d * d, axis=-1))
    Rsafe = np.maximum(R, 1e-300)
    vp = profile_prime(bub, dim, Rsafe)
    return vp[..., None] * d / Rsafe[..., None]


def tangent_basis_eval(bub, dim, x):
    """The n+2 tangent functions of the family at points x.

    Order: v, dv/db, then the n center derivatives d/d(x0_i) v, which equal
    minus the spatial gradient components. Returns shape (batch, n+2).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = x.copy()
    d[..., -1] -= bub.x0
    R = np.sqrt(np.sum(d * d, axis=-1))
    Rsafe = np.maximum(R, 1e-300)
    cols = [profile(bub, dim, R), profile_db(bub, dim, R)]
    vp = profile_prime(bub, dim, Rsafe)
    for i in range(dim.n):
        cols.append(-vp * d[..., i] / Rsafe)
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# axisymmetric fields
# ---------------------------------------------------------------------------

def _center_distance(bub, r, mu):
    rr = np.asarray(r, dtype=np.float64)
    return np.sqrt(np.maximum(rr * rr - 2.0 * rr * bub.x0 * mu + bub.x0**2,
                              0.0))


def as_field(bub, dim):
    """The bubble as an AxisymField (center on the symmetry axis)."""

    def value(r, mu):
        return profile(bub, dim, _center_distance(bub, r, mu)) + 0.0 * mu

    def grad_r(r, mu):
        R = _center_distance(bub, r, mu)
        Rsafe = np.maximum(R, 1e-300)
        return profile_prime(bub, dim, Rsafe) * (r - bub.x0 * mu) / Rsafe

    def grad_theta(r, mu):
        R = _center_distance(bub, r, mu)
        Rsafe = np.maximum(R, 1e-300)
        sin_t = np.sqrt(np.maximum(1.0 - mu * mu, 0.0))
        return profile_prime(bub, dim, Rsafe) * bub.x0 * sin_t / Rsafe

    return AxisymField.analytic(
        dim.n, value, grad_r, grad_theta,
        desc=f"bubble(a={bub.a:.6g}, b={bub.b:.6g}, x0={bub.x0:.6g})")


def tangent_fields(bub, dim):
    """Zonal tangent directions as fields: [v, dv/db, dv/dx0 (axial)].

    These are the only tangent functions with nonzero zonal pairing against
    axisymmetric perturbations. Value and gradient closures are exact.
    """
    v_field = as_field(bub, dim)

    def db_value(r, mu):
        return profile_db(bub, dim, _center_distance(bub, r, mu)) + 0.0 * mu

    def db_grad_r(r, mu):
        R = _center_distance(bub, r, mu)
        Rsafe = np.maximum(R, 1e-300)
        return profile_db_prime(bub, dim, Rsafe) * (r - bub.x0 * mu) / Rsafe

    def db_grad_theta(r, mu):
        R = _center_distance(bub, r, mu)
        Rsafe = np.maximum(R, 1e-300)
        sin_t = np.sqrt(np.maximum(1.0 - mu * mu, 0.0))
        return profile_db_prime(bub, dim, Rsafe) * bub.x0 * sin_t / Rsafe

    db_field = AxisymField.analytic(dim.n, db_value, db_grad_r, db_grad_theta,
                                    desc="d/db bubble")

    # translation along the axis: d/dx0 v = -d/dx_n v
    def tr_value(r, mu):
        R = _center_distance(bub, r, mu)
        Rsafe = np.maximum(R, 1e-300)
        return -profile_prime(bub, dim, Rsafe) * (r * mu - bub.x0) / Rsafe

    def _tr_unavailable(r, mu):
        raise NotImplementedError(
            "gradient of the translation tangent needs second derivatives; "
            "only value pairings are used")

    tr_field = AxisymField.analytic(dim.n, tr_value, _tr_unavailable,
                                    _tr_unavailable, desc="d/dx0 bubble")
    return [v_field, db_field, tr_field]


# ---------------------------------------------------------------------------
# norms and the Sobolev constant
# ---------------------------------------------------------------------------

def bubble_norms(bub, dim, rgrid):
    """(||Dv||_{L^p}^p, ||v||_{L^{p*}}^{p*}) by radial quadrature.

    Both norms are translation invariant, so the center plays no role.
    """
    from .grids import sphere_area
    area = sphere_area(dim.n)
    vp = profile_prime(bub, dim, rgrid.r)
    v = profile(bub, dim, rgrid.r)
    grad_p = area * pairwise_sum(np.abs(vp) ** dim.p * rgrid.weights)
    func_pstar = area * pairwise_sum(v ** dim.pstar * rgrid.weights)
    return grad_p, func_pstar


_S_CACHE = {}


def sobolev_constant(dim, rgrid):
    """Sharp constant S = ||Dv||_p / ||v||_{p*} from the reference bubble.

    Computed on the supplied grid so deficits of exact bubbles vanish to
    roundoff on the same grid. Cached per (n, p, grid signature).
    """
    key = (dim.n, dim.p, rgrid.N, rgrid.s_min, rgrid.s_max)
    hit = _S_CACHE.get(key)
    if hit is not None:
        return hit
    grad_p, func_pstar = bubble_norms(Bubble(1.0, 1.0), dim, rgrid)
    value = grad_p ** (1.0 / dim.p) / func_pstar ** (1.0 / dim.pstar)
    _S_CACHE[key] = value
    return value


def unit_bubble(dim, rgrid):
    """Reference extremal with b = 1, centered, normalized ||v||_{p*} = 1."""
    _, func_pstar = bubble_norms(Bubble(1.0, 1.0), dim, rgrid)
    return Bubble(a=func_pstar ** (-1.0 / dim.pstar), b=1.0, x0=0.0)


__all__ = [
    "Dimension", "Bubble", "profile", "profile_prime", "profile_prime2",
    "profile_db", "profile_db_prime", "eval_bubble", "grad_bubble",
    "tangent_basis_eval",
    "as_field", "tangent_fields", "bubble_norms", "sobolev_constant",
    "unit_bubble",
]
