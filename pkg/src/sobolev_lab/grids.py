"""Log-radial quadrature grids and axisymmetric fields.

Geometry
--------
Fields are axisymmetric about the n-th coordinate axis and are sampled on a
tensor grid: radii r = e^s with s uniform on [s_min, s_max] (trapezoid rule,
which converges superalgebraically for integrands analytic in s and decaying
at both ends), and mu = cos(theta) at Gauss-Jacobi nodes that absorb the zonal
surface weight (1 - mu^2)^{(n-3)/2} exactly. For n = 3 the Jacobi exponent is
zero and the nodes are plain Gauss-Legendre. The constant angular prefactor is
|S^{n-2}| = 2 pi^{(n-1)/2} / Gamma((n-1)/2).

Full integrals are then

    integral_{R^n} f = sum_k w_r[k] * sum_j w_mu[j] * f(r_k, mu_j),

with w_r[k] = trapz_s[k] * r_k^n (Jacobian dr = r ds and surface factor
r^{n-1} combined). All reductions use a fixed pairwise tree, so values are
bit-reproducible.

Every integral carries a truncation-tail estimate from a log-log slope fit on
the outermost decade of node contributions; integrals whose estimated tail
exceeds ``REL_TAIL_TOL`` times the value raise TailTooLarge. Weighted
seminorms additionally run a first-decade Cauchy test near the origin and
raise DivergentNearOrigin when the inner decade dominates.
"""

import math

import numpy as np
from scipy.special import roots_jacobi

from .errors import DivergentNearOrigin, TailTooLarge
from .parallel import pairwise_sum, pairwise_sum_axis

REL_TAIL_TOL = 1e-8

# ---------------------------------------------------------------------------
# radial grid
# ---------------------------------------------------------------------------


class RadialGrid:
    """Uniform grid in s = log r with trapezoid weights.

    Parameters
    ----------
    n : int
        Spatial dimension (enters through the r^{n-1} surface factor).
    N : int
        Number of nodes, endpoints included.
    s_min, s_max : float
        Log-radius bounds. The factory ``for_dimension`` widens s_max when p
        is close to n, where the extremal gradient integrand decays slowly.
    """

    def __init__(self, n, N=2048, s_min=-14.0, s_max=14.0, self_test=True):
        if n < 2:
            raise ValueError(f"spatial dimension must be >= 2, got {n}")
        if N < 16:
            raise ValueError(f"radial grid needs at least 16 nodes, got {N}")
        if not s_max > s_min:
            raise ValueError(f"empty radial range [{s_min}, {s_max}]")
        self.n = int(n)
        self.N = int(N)
        self.s_min = float(s_min)
        self.s_max = float(s_max)
        self.s = np.linspace(self.s_min, self.s_max, self.N)
        self.h = float(self.s[1] - self.s[0])
        self.r = np.exp(self.s)
        trapz = np.full(self.N, self.h)
        trapz[0] *= 0.5
        trapz[-1] *= 0.5
        self.trapz_s = trapz
        # weights for integral f(r) r^{n-1} dr, dr = r ds
        self.weights = trapz * self.r**self.n
        if self_test:
            self.self_test()

    @classmethod
    def for_dimension(cls, dim, N=2048):
        """Grid wide enough that extremal-bubble tails sit below tolerance.

        The gradient integrand |Dv|^p r^{n-1} decays like
        r^{-(n-p)/(p-1)} in the surface measure, so the required s_max grows
        like (p-1)/(n-p) as p approaches n.
        """
        s_max = max(14.0, 23.0 * (dim.p - 1.0) / (dim.n - dim.p))
        return cls(dim.n, N=N, s_min=-14.0, s_max=s_max)

    def refined(self):
        """Same bounds, twice the node count."""
        return RadialGrid(self.n, N=2 * self.N, s_min=self.s_min,
                          s_max=self.s_max, self_test=False)

    def self_test(self):
        """Moment check: integral r^{n-1} e^{-r} dr = Gamma(n) to 1e-8."""
        value = pairwise_sum(np.exp(-self.r) * self.weights)
        target = math.gamma(self.n)
        rel = abs(value - target) / target
        if rel > 1e-8:
            raise TailTooLarge(
                "radial grid failed the Gamma(n) moment self-test",
                n=self.n, N=self.N, rel_error=rel)

    def integrate(self, values, return_tail=False, check_tail=True):
        """Integrate f(r) r^{n-1} dr for node samples f(r_k)."""
        contrib = np.asarray(values, dtype=np.float64) * self.weights
        total = pairwise_sum(contrib)
        tail = _tail_from_contrib(contrib, self.h)
        if check_tail and tail > REL_TAIL_TOL * max(abs(total), 1e-300):
            raise TailTooLarge("radial integral tail above tolerance",
                               value=total, tail=tail, s_max=self.s_max)
        if return_tail:
            return total, tail
        return total

    def integrate_power(self, values, power, mask=None, check_tail=True,
                        tail_tol=None):
        """Integrate f(r) r^{power} dr (used by the weighted Hardy ratios).

        tail_tol overrides REL_TAIL_TOL for diagnostics whose integrands
        legitimately decay slowly; it still rejects divergent tails.
        """
        contrib = np.asarray(values, dtype=np.float64) * self.trapz_s \
            * self.r ** (power + 1.0)
        if mask is not None:
            contrib = np.where(mask, contrib, 0.0)
        total = pairwise_sum(contrib)
        tail = _tail_from_contrib(contrib, self.h)
        tol = REL_TAIL_TOL if tail_tol is None else tail_tol
        if check_tail and tail > tol * max(abs(total), 1e-300):
            raise TailTooLarge("radial integral tail above tolerance",
                               value=total, tail=tail, s_max=self.s_max)
        return total


def _tail_from_contrib(contrib, h):
    """Truncation estimate from a log-log slope fit on the outer node decade.

    Node contributions c_k that decay like e^{-beta s} beyond the grid sum to
    roughly |c_last| / (beta h). A non-decaying fit means the integral tail is
    not controlled and is reported as infinite.
    """
    c = np.abs(np.asarray(contrib, dtype=np.float64))
    m = max(int(0.1 * c.size), 4)
    tail_c = c[-m:]
    top = float(np.max(tail_c))
    if top <= 1e-300:
        return 0.0
    # ignore zero entries (compactly supported integrands with stray mass)
    good = tail_c > top * 1e-280
    if np.count_nonzero(good) < 3:
        return 0.0
    idx = np.nonzero(good)[0].astype(np.float64)
    logs = np.log(tail_c[good])
    k = idx - idx.mean()
    denom = float(k @ k)
    slope = float(k @ (logs - logs.mean())) / denom  # d log c / d node
    beta = -slope / h
    if beta <= 1e-2:
        return float("inf")
    return float(tail_c[-1] / (beta * h))


# ---------------------------------------------------------------------------
# angular grid
# ---------------------------------------------------------------------------

def sphere_area(n):
    """|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


class AngularGrid:
    """Gauss-Jacobi nodes in mu = cos(theta) absorbing (1-mu^2)^{(n-3)/2}.

    Weights include the full zonal surface measure, so for any f(mu)

        integral_{S^{n-1}} f(x . e_n / |x|) dsigma = sum_j weights[j] f(mu_j).

    For n = 3 this reduces exactly to Gauss-Legendre.
    """

    def __init__(self, n, M=64, self_test=True):
        if n < 2:
            raise ValueError(f"spatial dimension must be >= 2, got {n}")
        if M < 4:
            raise ValueError(f"angular grid needs at least 4 nodes, got {M}")
        self.n = int(n)
        self.M = int(M)
        beta = (n - 3) / 2.0
        nodes, w = roots_jacobi(self.M, beta, beta)
        prefactor = 2.0 * math.pi ** ((n - 1) / 2.0) / math.gamma((n - 1) / 2.0)
        self.mu = nodes
        self.weights = w * prefactor
        if self_test:
            self.self_test()

    def refined(self):
        return AngularGrid(self.n, M=2 * self.M, self_test=False)

    def self_test(self):
        """Surface area and second-moment checks (both exact for Jacobi)."""
        area = pairwise_sum(self.weights)
        target = sphere_area(self.n)
        if abs(area - target) / target > 1e-12:
            raise TailTooLarge("angular grid failed the surface-area self-test",
                               n=self.n, M=self.M, area=area, target=target)
        second = pairwise_sum(self.weights * self.mu**2)
        if abs(second - target / self.n) / (target / self.n) > 1e-10:
            raise TailTooLarge("angular grid failed the mu^2 moment self-test",
                               n=self.n, M=self.M)


# ---------------------------------------------------------------------------
# 2-d integration
# ---------------------------------------------------------------------------

def integrate_axisym(values, rgrid, agrid, return_tail=False, check_tail=True):
    """Integrate an axisymmetric integrand sampled as values[k, j] = f(r_k, mu_j).

    Angular reduction first (pairwise along axis 1), then the radial pairwise
    sum; the tail estimate runs on the angularly reduced contributions.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (rgrid.N, agrid.M):
        raise ValueError(
            f"integrand shape {arr.shape} does not match grid ({rgrid.N}, {agrid.M})")
    reduced = pairwise_sum_axis(arr * agrid.weights[None, :], axis=1)
    contrib = reduced * rgrid.weights
    total = pairwise_sum(contrib)
    tail = _tail_from_contrib(contrib, rgrid.h)
    if check_tail and tail > REL_TAIL_TOL * max(abs(total), 1e-300):
        raise TailTooLarge("axisymmetric integral tail above tolerance",
                           value=total, tail=tail, s_max=rgrid.s_max)
    if return_tail:
        return total, tail
    return total


def origin_cauchy_check(contrib, rgrid, what="integrand"):
    """First-decade Cauchy test for nonnegative radial contributions.

    Splits the innermost decade of nodes into four consecutive quarters
    Q1..Q4 (Q1 innermost) and requires Q1 + Q2 <= 0.75 (Q3 + Q4) up to a
    relative floor, i.e. the mass must decay toward the origin. Integrands
    violating this are treated as divergent there.
    """
    c = np.asarray(contrib, dtype=np.float64)
    decade = rgrid.s <= rgrid.s_min + math.log(10.0)
    idx = np.nonzero(decade)[0]
    if idx.size < 8:
        idx = np.arange(min(8, c.size))
    block = c[idx]
    quarter = max(idx.size // 4, 1)
    q1 = float(np.sum(block[:quarter]))
    q2 = float(np.sum(block[quarter:2 * quarter]))
    q3 = float(np.sum(block[2 * quarter:3 * quarter]))
    q4 = float(np.sum(block[3 * quarter:]))
    # the cushion is absolute and tiny on purpose: the test must stay local
    # to the decade (a large far-field integral must not mask divergence here)
    if q1 + q2 <= 0.75 * (q3 + q4) + 1e-280:
        return
    raise DivergentNearOrigin(
        f"first grid decade dominates the {what}",
        inner=q1 + q2, outer=q3 + q4, s_min=rgrid.s_min)


# ---------------------------------------------------------------------------
# axisymmetric fields
# ---------------------------------------------------------------------------


class AxisymField:
    """Axisymmetric scalar field with gradient, analytic or grid-sampled.

    Gradient components use the orthonormal polar frame:
    grad_r = du/dr and grad_theta = (1/r) du/dtheta. ANALYTIC fields carry
    vectorised closures of (r, mu); GRIDDED fields carry samples on a fixed
    (RadialGrid, AngularGrid) pair and refuse evaluation elsewhere.
    """

    def __init__(self, n, kind, desc=""):
        self.n = int(n)
        self.kind = kind
        self.desc = desc

    # -- constructors --------------------------------------------------

    @classmethod
    def analytic(cls, n, value, grad_r, grad_theta, desc=""):
        f = cls(n, "ANALYTIC", desc)
        f._value = value
        f._grad_r = grad_r
        f._grad_theta = grad_theta
        return f

    @classmethod
    def from_arrays(cls, n, rgrid, agrid, values, grad_r, grad_theta, desc=""):
        f = cls(n, "GRIDDED", desc)
        shape = (rgrid.N, agrid.M)
        for name, arr in (("values", values), ("grad_r", grad_r),
                          ("grad_theta", grad_theta)):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != grid shape {shape}")
        f.rgrid = rgrid
        f.agrid = agrid
        f._values = np.asarray(values, dtype=np.float64)
        f._gr = np.asarray(grad_r, dtype=np.float64)
        f._gt = np.asarray(grad_theta, dtype=np.float64)
        return f

    def to_gridded(self, rgrid, agrid, desc=None):
        return AxisymField.from_arrays(
            self.n, rgrid, agrid,
            self.values(rgrid, agrid), self.grad_r(rgrid, agrid),
            self.grad_theta(rgrid, agrid),
            desc=self.desc if desc is None else desc)

    # -- evaluation ----------------------------------------------------

    def _check_grid(self, rgrid, agrid):
        if rgrid is not self.rgrid and not (
                rgrid.N == self.rgrid.N
                and np.array_equal(rgrid.r, self.rgrid.r)):
            raise ValueError("GRIDDED field sampled on a different radial grid")
        if agrid is not self.agrid and not (
                agrid.M == self.agrid.M
                and np.array_equal(agrid.mu, self.agrid.mu)):
            raise ValueError("GRIDDED field sampled on a different angular grid")

    def values(self, rgrid, agrid):
        if self.kind == "GRIDDED":
            self._check_grid(rgrid, agrid)
            return self._values
        return np.broadcast_to(
            self._value(rgrid.r[:, None], agrid.mu[None, :]),
            (rgrid.N, agrid.M)).astype(np.float64, copy=True)

    def grad_r(self, rgrid, agrid):
        if self.kind == "GRIDDED":
            self._check_grid(rgrid, agrid)
            return self._gr
        return np.broadcast_to(
            self._grad_r(rgrid.r[:, None], agrid.mu[None, :]),
            (rgrid.N, agrid.M)).astype(np.float64, copy=True)

    def grad_theta(self, rgrid, agrid):
        if self.kind == "GRIDDED":
            self._check_grid(rgrid, agrid)
            return self._gt
        return np.broadcast_to(
            self._grad_theta(rgrid.r[:, None], agrid.mu[None, :]),
            (rgrid.N, agrid.M)).astype(np.float64, copy=True)

    def grad_sq(self, rgrid, agrid):
        gr = self.grad_r(rgrid, agrid)
        gt = self.grad_theta(rgrid, agrid)
        return gr * gr + gt * gt

    # -- algebra (closures compose; gridded fields combine samples) -----

    def scaled(self, factor, desc=None):
        desc = desc if desc is not None else f"{factor} * {self.desc}"
        if self.kind == "GRIDDED":
            return AxisymField.from_arrays(
                self.n, self.rgrid, self.agrid, factor * self._values,
                factor * self._gr, factor * self._gt, desc=desc)
        return AxisymField.analytic(
            self.n,
            lambda r, mu: factor * self._value(r, mu),
            lambda r, mu: factor * self._grad_r(r, mu),
            lambda r, mu: factor * self._grad_theta(r, mu),
            desc=desc)

    def plus(self, other, coeff=1.0, desc=None):
        if self.n != other.n:
            raise ValueError("cannot add fields of different spatial dimension")
        desc = desc if desc is not None else f"{self.desc} + {coeff} * {other.desc}"
        if self.kind == "GRIDDED" or other.kind == "GRIDDED":
            grids = self if self.kind == "GRIDDED" else other
            rgrid, agrid = grids.rgrid, grids.agrid
            return AxisymField.from_arrays(
                self.n, rgrid, agrid,
                self.values(rgrid, agrid) + coeff * other.values(rgrid, agrid),
                self.grad_r(rgrid, agrid) + coeff * other.grad_r(rgrid, agrid),
                self.grad_theta(rgrid, agrid) + coeff * other.grad_theta(rgrid, agrid),
                desc=desc)
        return AxisymField.analytic(
            self.n,
            lambda r, mu: self._value(r, mu) + coeff * other._value(r, mu),
            lambda r, mu: self._grad_r(r, mu) + coeff * other._grad_r(r, mu),
            lambda r, mu: self._grad_theta(r, mu) + coeff * other._grad_theta(r, mu),
            desc=desc)


# ---------------------------------------------------------------------------
# weighted seminorms
# ---------------------------------------------------------------------------

GRAD_V_P_MINUS_2 = "GRAD_V_P_MINUS_2"
V_PSTAR_MINUS_2 = "V_PSTAR_MINUS_2"
ORLICZ = "ORLICZ"


def weighted_seminorm(phi, kind, dim, rgrid, agrid, v_field,
                      eps=None, C1=None, check_origin=True, check_tail=True):
    """Degenerate-weight quadratic forms against a reference extremal v.

    kind GRAD_V_P_MINUS_2 : integral |Dv|^{p-2} |Dphi|^2
    kind V_PSTAR_MINUS_2  : integral v^{p*-2} phi^2
    kind ORLICZ           : integral (v + C1 |eps phi|)^{p*} / (v^2 + (eps phi)^2) phi^2

    For p < 2 the gradient weight blows up at the origin like
    r^{-(2-p)/(p-1)}; integrability there is enforced by the first-decade
    Cauchy test rather than assumed.
    """
    p, pstar = dim.p, dim.pstar
    phi_sq = None
    if kind == GRAD_V_P_MINUS_2:
        dv = np.sqrt(v_field.grad_sq(rgrid, agrid))
        integrand = dv ** (p - 2.0) * phi.grad_sq(rgrid, agrid)
    elif kind == V_PSTAR_MINUS_2:
        v = v_field.values(rgrid, agrid)
        phi_sq = phi.values(rgrid, agrid) ** 2
        integrand = v ** (pstar - 2.0) * phi_sq
    elif kind == ORLICZ:
        if eps is None or C1 is None:
            raise ValueError("ORLICZ seminorm needs eps and C1")
        v = v_field.values(rgrid, agrid)
        ph = phi.values(rgrid, agrid)
        ep = eps * ph
        integrand = (v + C1 * np.abs(ep)) ** pstar / (v * v + ep * ep) * ph * ph
    else:
        raise ValueError(f"unknown seminorm kind {kind!r}")

    reduced = pairwise_sum_axis(integrand * agrid.weights[None, :], axis=1)
    contrib = reduced * rgrid.weights
    if check_origin:
        origin_cauchy_check(contrib, rgrid, what=f"{kind} seminorm")
    total = pairwise_sum(contrib)
    tail = _tail_from_contrib(contrib, rgrid.h)
    if check_tail and tail > REL_TAIL_TOL * max(abs(total), 1e-300):
        raise TailTooLarge("weighted seminorm tail above tolerance",
                           kind=kind, value=total, tail=tail)
    return total


# ---------------------------------------------------------------------------
# finite differences (consistency checks for gridded gradients)
# ---------------------------------------------------------------------------

def fd_grad_r(values, rgrid):
    """4th-order centered d/dr of grid samples via d/ds and the 1/r factor.

    One-sided 2nd-order stencils at the two boundary pairs; used to validate
    stored gradients of GRIDDED fields, not for production gradients.
    """
    f = np.asarray(values, dtype=np.float64)
    h = rgrid.h
    dfds = np.empty_like(f)
    dfds[2:-2] = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)
    dfds[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    dfds[1] = (f[2] - f[0]) / (2.0 * h)
    dfds[-2] = (f[-1] - f[-3]) / (2.0 * h)
    dfds[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    shape = [1] * f.ndim
    shape[0] = rgrid.N
    return dfds / rgrid.r.reshape(shape)


# ---------------------------------------------------------------------------
# binary field container
# ---------------------------------------------------------------------------

def save_field(path, field):
    """Serialize a GRIDDED field: int64 n, N, M; float64 s_min, s_max; then
    values, grad_r, grad_theta as row-major float64 blocks."""
    if field.kind != "GRIDDED":
        raise ValueError("only GRIDDED fields are serializable")
    with open(path, "wb") as fh:
        np.asarray([field.n, field.rgrid.N, field.agrid.M],
                   dtype=np.int64).tofile(fh)
        np.asarray([field.rgrid.s_min, field.rgrid.s_max],
                   dtype=np.float64).tofile(fh)
        field._values.astype(np.float64).tofile(fh)
        field._gr.astype(np.float64).tofile(fh)
        field._gt.astype(np.float64).tofile(fh)


def load_field(path, desc=""):
    with open(path, "rb") as fh:
        head = np.fromfile(fh, dtype=np.int64, count=3)
        if head.size != 3:
            raise ValueError(f"truncated field container {path!r}")
        n, N, M = (int(x) for x in head)
        bounds = np.fromfile(fh, dtype=np.float64, count=2)
        blocks = np.fromfile(fh, dtype=np.float64, count=3 * N * M)
    if bounds.size != 2 or blocks.size != 3 * N * M:
        raise ValueError(f"truncated field container {path!r}")
    rgrid = RadialGrid(n, N=N, s_min=bounds[0], s_max=bounds[1], self_test=False)
    agrid = AngularGrid(n, M=M, self_test=False)
    vals, gr, gt = blocks.reshape(3, N, M)
    return AxisymField.from_arrays(n, rgrid, agrid, vals, gr, gt,
                                   desc=desc or f"loaded:{path}")


__all__ = [
    "REL_TAIL_TOL", "RadialGrid", "AngularGrid", "AxisymField",
    "integrate_axisym", "weighted_seminorm", "origin_cauchy_check",
    "sphere_area", "fd_grad_r", "save_field", "load_field",
    "GRAD_V_P_MINUS_2", "V_PSTAR_MINUS_2", "ORLICZ",
]
