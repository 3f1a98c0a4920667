"""Deterministic corpus of axisymmetric perturbation fields.

The standard corpus is the family of zonal shells f(r) P_l(mu) with f a
compactly supported bump in log-radius built from the exp(-1/(1-t^2))
profile, l in {0, 1, 2, 3}; the l = 0 members are annulus bumps. A separate
stress family of spherical bumps centered on the axis exercises
nonseparable angular structure.

Corpus order is fixed, so scans over it are reproducible without seeding.
"""

import numpy as np

from .grids import AxisymField


# ---------------------------------------------------------------------------
# Legendre polynomials (three-term recurrence)
# ---------------------------------------------------------------------------

def legendre(ell, mu):
    mu = np.asarray(mu, dtype=np.float64)
    if ell == 0:
        return np.ones_like(mu)
    pm2 = np.ones_like(mu)
    pm1 = mu.copy()
    for k in range(2, ell + 1):
        pm2, pm1 = pm1, ((2 * k - 1) * mu * pm1 - (k - 1) * pm2) / k
    return pm1


def legendre_deriv(ell, mu):
    """dP_l/dmu via (1-mu^2) P_l' = l (P_{l-1} - mu P_l)."""
    mu = np.asarray(mu, dtype=np.float64)
    if ell == 0:
        return np.zeros_like(mu)
    one_minus = 1.0 - mu * mu
    return ell * (legendre(ell - 1, mu) - mu * legendre(ell, mu)) \
        / np.maximum(one_minus, 1e-300)


# ---------------------------------------------------------------------------
# bump profiles
# ---------------------------------------------------------------------------

def bump(t):
    """exp(-1/(1-t^2)) on |t| < 1, zero outside; underflow-safe."""
    t = np.asarray(t, dtype=np.float64)
    inside = np.abs(t) < 1.0 - 1e-12
    tt = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - tt * tt)), 0.0)


def bump_deriv(t):
    """d/dt of the bump; the exp factor underflows before the pole matters."""
    t = np.asarray(t, dtype=np.float64)
    inside = np.abs(t) < 1.0 - 1e-12
    tt = np.where(inside, t, 0.0)
    one = 1.0 - tt * tt
    return np.where(inside, np.exp(-1.0 / one) * (-2.0 * tt / (one * one)), 0.0)


def zonal_shell(n, ell, s_center, width):
    """f(r) P_l(mu) with f = bump((log r - s_center)/width)."""

    def value(r, mu):
        t = (np.log(r) - s_center) / width
        return bump(t) * legendre(ell, mu)

    def grad_r(r, mu):
        t = (np.log(r) - s_center) / width
        return bump_deriv(t) / (width * r) * legendre(ell, mu)

    def grad_theta(r, mu):
        t = (np.log(r) - s_center) / width
        sin_t = np.sqrt(np.maximum(1.0 - mu * mu, 0.0))
        return -bump(t) / r * sin_t * legendre_deriv(ell, mu)

    return AxisymField.analytic(
        n, value, grad_r, grad_theta,
        desc=f"shell(l={ell}, s={s_center:g}, w={width:g})")


def axis_bump(n, center, width=1.0):
    """Spherical bump of radius `width` centered at distance `center` on the axis."""

    def _geometry(r, mu):
        rr = np.asarray(r, dtype=np.float64)
        rho = np.sqrt(np.maximum(
            rr * rr - 2.0 * rr * center * mu + center * center, 0.0))
        t = rho / width
        inside = t < 1.0 - 1e-12
        tt = np.where(inside, t, 0.0)
        one = 1.0 - tt * tt
        g = np.where(inside, np.exp(-1.0 / one), 0.0)
        # g'(rho)/rho stays finite at the center point
        gp_over_rho = np.where(
            inside, np.exp(-1.0 / one) * (-2.0 / (width * width)) / (one * one),
            0.0)
        return rho, g, gp_over_rho

    def value(r, mu):
        _, g, _ = _geometry(r, mu)
        return g

    def grad_r(r, mu):
        _, _, gpr = _geometry(r, mu)
        return gpr * (r - center * mu)

    def grad_theta(r, mu):
        _, _, gpr = _geometry(r, mu)
        sin_t = np.sqrt(np.maximum(1.0 - mu * mu, 0.0))
        return gpr * center * sin_t

    return AxisymField.analytic(
        n, value, grad_r, grad_theta,
        desc=f"axis-bump(c={center:g}, w={width:g})")


def origin_plateau(n, s_edge=0.0, width=1.0):
    """Field equal to 1 up to log r = s_edge, smoothstepped to 0 over `width`.

    Constant near the origin, so it is admissible for gradient weights that
    are not integrable there, while carrying genuine small-ball mass; shells
    vanish near zero and cannot probe small-ball decay rates.
    """

    def _sigma(r):
        return (np.log(np.asarray(r, dtype=np.float64)) - s_edge) / width

    def value(r, mu):
        sig = np.clip(_sigma(r), 0.0, 1.0)
        return ((2.0 * sig - 3.0) * sig * sig + 1.0) + 0.0 * mu

    def grad_r(r, mu):
        sig = _sigma(r)
        inside = (sig > 0.0) & (sig < 1.0)
        sig = np.where(inside, sig, 0.0)
        return np.where(inside, 6.0 * sig * (sig - 1.0) / (width * r), 0.0) \
            + 0.0 * mu

    def zero(r, mu):
        return 0.0 * r + 0.0 * mu

    return AxisymField.analytic(
        n, value, grad_r, zero,
        desc=f"plateau(s_edge={s_edge:g}, w={width:g})")


# ---------------------------------------------------------------------------
# the standard corpus
# ---------------------------------------------------------------------------

SHELL_PLACEMENTS = [
    (-1.2, 0.8), (-0.5, 0.5), (0.0, 1.0), (0.7, 0.5), (1.1, 0.8),
    (1.8, 0.7), (2.3, 1.0), (-1.8, 0.6), (0.3, 1.4), (2.9, 0.9),
    (1.4, 1.2), (-0.9, 1.0),
]

AXIS_BUMP_CENTERS = [0.8, 1.6, 3.2, 6.4]


def corpus_fields(n, ells=(0, 1, 2, 3)):
    """The standard deterministic corpus for dimension n (48 fields).

    Zonal shells f(r) P_l(mu) over all placements and sectors; the l = 0 row
    is the annulus-bump family. Every member is separable with polynomial
    angular dependence, so Gaussian angular quadrature is exact and
    cancellation-sensitive identities are resolvable on default grids.
    """
    return [zonal_shell(n, ell, s_center, width)
            for ell in ells for s_center, width in SHELL_PLACEMENTS]


def stress_fields(n):
    """Nonseparable spherical bumps on the axis, for quadrature stress tests.

    Far centers concentrate support in a narrow polar cap and make
    cancellation-heavy integrals (first-order expansion terms) quadrature
    limited, so these stay out of the standard corpus and out of identities
    asserted at tight relative tolerance.
    """
    return [axis_bump(n, center) for center in AXIS_BUMP_CENTERS]


__all__ = [
    "legendre", "legendre_deriv", "bump", "bump_deriv",
    "zonal_shell", "axis_bump", "origin_plateau",
    "corpus_fields", "stress_fields",
    "SHELL_PLACEMENTS", "AXIS_BUMP_CENTERS",
]
