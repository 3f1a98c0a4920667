"""Independent closed-form and finite-difference oracles.

Everything here is implemented from scratch against textbook formulas, not by
calling package code, so agreement between the two routes is meaningful.
"""

import math

import numpy as np
from scipy.special import beta as beta_fn


def sphere_area_oracle(n):
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def talenti_constant(n, p):
    """Sharp Sobolev constant S(n, p) via the Gamma closed form.

    The optimal constant C in ||u||_{p*} <= C ||Du||_p is

        C = pi^{-1/2} n^{-1/p} ((p-1)/(n-p))^{1-1/p}
            * ( Gamma(1 + n/2) Gamma(n) / (Gamma(n/p) Gamma(1 + n - n/p)) )^{1/n}

    and S = 1/C.
    """
    c = (math.pi ** -0.5) * n ** (-1.0 / p) \
        * ((p - 1.0) / (n - p)) ** (1.0 - 1.0 / p) \
        * (math.gamma(1.0 + n / 2.0) * math.gamma(n)
           / (math.gamma(n / p) * math.gamma(1.0 + n - n / p))) ** (1.0 / n)
    return 1.0 / c


def bubble_mass_oracle(n, p, a, b):
    """integral over R^n of v^{p*} for v = a (1 + b R^{p/(p-1)})^{-(n-p)/p}.

    Beta-function closed form after t = b R^{p/(p-1)}.
    """
    return sphere_area_oracle(n) * a ** (n * p / (n - p)) \
        * b ** (-n * (p - 1.0) / p) * ((p - 1.0) / p) \
        * beta_fn(n * (p - 1.0) / p, n / p)


def bubble_grad_oracle(n, p, a, b):
    """integral over R^n of |Dv|^p, same family, Beta closed form."""
    q = p / (p - 1.0)
    m = (n - p) / p
    A_over_q = 1.0 + n * (p - 1.0) / p
    return sphere_area_oracle(n) * (a * b * m * q) ** p \
        * b ** (-A_over_q) * (1.0 / q) * beta_fn(A_over_q, n / p - 1.0)


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def legendre_poly(ell, mu):
    """P_ell by the three-term recurrence (independent of package code)."""
    mu = np.asarray(mu, dtype=np.float64)
    pm2 = np.ones_like(mu)
    if ell == 0:
        return pm2
    pm1 = mu.copy()
    if ell == 1:
        return pm1
    for k in range(2, ell + 1):
        pm2, pm1 = pm1, ((2 * k - 1) * mu * pm1 - (k - 1) * pm2) / k
    return pm1
