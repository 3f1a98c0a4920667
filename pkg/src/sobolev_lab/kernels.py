"""Sharp pointwise vector inequalities and their empirical constant searches.

Three families are implemented, all dimension-independent in the sense that
they depend only on |x|, |y|, x.y (a two-plane reduction):

* the second-order lower expansion of |x+y|^p around x, with the branch-defined
  intermediate weight w and the regime-dependent remainder normalizer
  min{|y|^p, |x|^{p-2}|y|^2} (1 < p < 2) or |y|^p (p >= 2);
* the second-order upper expansion of |a+b|^{p*} for scalars, quadratic branch
  (p* <= 2) with an inhomogeneous Orlicz-type weight, and the p* > 2 branch
  with a separate |b|^{p*} remainder;
* the two weighted discrete inequalities behind the far-field absorption
  argument (the "inter" form carries an extra (1+r)^{-q} decay; the "young"
  form drops it and is therefore pointwise weaker).

None of the constants c0, C1, C is known in closed form (except c0 = kappa at
p = 2), so the search routines estimate them: seeded Sobol/uniform hybrid
sampling, simplex polish from the worst samples, then a 1e-4 relative safety
margin so that independently seeded verification passes stay nonnegative.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import ConditionViolated
from .parallel import run_indexed, thread_count

SAFETY_MARGIN = 1e-4

P_LESS_2 = "P_LESS_2"
P_GE_2 = "P_GE_2"


@dataclass(frozen=True)
class WeightBranch:
    """Which piecewise definition of the intermediate weight applies."""

    p: float
    branch: str

    @classmethod
    def from_p(cls, p):
        if not p > 1.0:
            raise ValueError(f"p must be > 1, got {p}")
        return cls(p=float(p), branch=P_LESS_2 if p < 2.0 else P_GE_2)


# ---------------------------------------------------------------------------
# the intermediate weight w
# ---------------------------------------------------------------------------

def weight_w_pm2(nx, nxy, p):
    """|w|^{p-2} from the branch rules, given |x| and |x+y|.

    For 1 < p < 2:  w = x when |x+y| <= |x|, else
    |w|^{p-2} = |x|^{p-2} |x+y| / ((2-p)|x+y| + (p-1)|x|).
    For p > 2:      w = x when |x| <= |x+y|, else w = (|x+y|/|x|)^{1/(p-2)}(x+y)
    so |w|^{p-2} = |x+y|^{p-1} / |x|.
    At p = 2 the weight multiplies a vanishing coefficient; returns ones.

    Returns (wpm2, degenerate). degenerate marks inputs outside the branch
    formulas' domain (|x| = 0, and additionally |x+y| = 0 for p > 2 in the
    shrinking branch); their wpm2 entries are limit values, to be excluded
    from any infimum statistics.
    """
    nx = np.asarray(nx, dtype=np.float64)
    nxy = np.asarray(nxy, dtype=np.float64)
    if p == 2.0:
        shape = np.broadcast(nx, nxy).shape
        return np.ones(shape), np.zeros(shape, dtype=bool)
    degenerate = nx == 0.0
    safe_nx = np.where(degenerate, 1.0, nx)
    with np.errstate(divide="ignore", invalid="ignore"):
        if p < 2.0:
            base = safe_nx ** (p - 2.0)
            ratio = nxy / ((2.0 - p) * nxy + (p - 1.0) * safe_nx)
            wpm2 = np.where(nxy <= nx, base, ratio * base)
            wpm2 = np.where(degenerate, np.inf, wpm2)
        else:
            lower = safe_nx ** (p - 2.0)
            upper = np.where(nxy > 0.0, nxy ** (p - 1.0) / safe_nx, 0.0)
            wpm2 = np.where(nx <= nxy, lower, upper)
            wpm2 = np.where(degenerate, 0.0, wpm2)
    return wpm2, degenerate


def weight_w(x, x_plus_y, p):
    """The intermediate point w between x and x+y, per branch.

    Returns (w, degenerate). Degenerate inputs (|x| = 0; also |x+y| = 0 in
    the p > 2 shrinking branch) get the limit value, the zero vector, and a
    True flag.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(x_plus_y, dtype=np.float64)
    nx = np.sqrt(np.sum(x * x, axis=-1))
    nz = np.sqrt(np.sum(z * z, axis=-1))
    degenerate = nx == 0.0
    safe_nx = np.where(degenerate, 1.0, nx)
    if p == 2.0:
        w = np.where(degenerate[..., None], 0.0, x)
        return w, degenerate
    if p < 2.0:
        ratio = nz / ((2.0 - p) * nz + (p - 1.0) * safe_nx)
        # ratio >= 1 here and 1/(p-2) < 0, so w shortens x
        scale = np.where(nz <= nx, 1.0, ratio ** (1.0 / (p - 2.0)))
        w = np.where(degenerate[..., None], 0.0, scale[..., None] * x)
        return w, degenerate
    degenerate = degenerate | ((nz == 0.0) & (nx > nz))
    safe_nz = np.where(nz == 0.0, 1.0, nz)
    shrink = (safe_nz / safe_nx) ** (1.0 / (p - 2.0))
    w = np.where((nx <= nz)[..., None], x, shrink[..., None] * z)
    return np.where(degenerate[..., None], 0.0, w), degenerate


# ---------------------------------------------------------------------------
# gradient-expansion inequality (second-order lower bound for |x+y|^p)
# ---------------------------------------------------------------------------

def _gap21_invariants(nx, ny, dot, nxy, p, kappa, c0):
    """Gap, G, and normalizer from the rotation invariants (|x|,|y|,x.y,|x+y|)."""
    wpm2, _ = weight_w_pm2(nx, nxy, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        nx_pm2 = nx ** (p - 2.0)
        G = p * nx_pm2 * ny**2 + p * (p - 2.0) * wpm2 * (nx - nxy) ** 2
        first = p * nx_pm2 * dot
        if p < 2.0:
            normalizer = np.minimum(ny**p, nx_pm2 * ny**2)
        else:
            normalizer = ny**p
        gap = nxy**p - nx**p - first - 0.5 * (1.0 - kappa) * G - c0 * normalizer
    return gap, G, normalizer


def quad_form_G(x, y, p):
    """G(x,y) = p|x|^{p-2}|y|^2 + p(p-2)|w|^{p-2}(|x| - |x+y|)^2.

    Nonnegative for 1 < p < 2 (and trivially for p >= 2, where both terms
    are). Requires |x| > 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.sqrt(np.sum(x * x, axis=-1))
    ny = np.sqrt(np.sum(y * y, axis=-1))
    xy = x + y
    nxy = np.sqrt(np.sum(xy * xy, axis=-1))
    dot = np.sum(x * y, axis=-1)
    _, G, _ = _gap21_invariants(nx, ny, dot, nxy, p, 0.0, 0.0)
    return G


def g_lower_bound(x, y, p):
    """Proven lower envelope p(p-1) (|x|/(|x|+|y|)) |x|^{p-2} |y|^2 for G.

    This is a 1 < p < 2 statement; for p >= 2 use G >= p|x|^{p-2}|y|^2, which
    holds term by term.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.sqrt(np.sum(x * x, axis=-1))
    ny = np.sqrt(np.sum(y * y, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return p * (p - 1.0) * nx / (nx + ny) * nx ** (p - 2.0) * ny**2


def lemma21_gap(x, y, p, kappa, c0=0.0):
    """Slack of the second-order lower expansion at (x, y); >= 0 iff admissible.

    Computes |x+y|^p - |x|^p - p|x|^{p-2} x.y - (1-kappa)/2 G(x,y)
    - c0 * normalizer, with the p-dependent remainder normalizer. Requires
    |x| > 0 and kappa in (0,1).
    """
    if not p > 1.0:
        raise ValueError(f"p must be > 1, got {p}")
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0,1), got {kappa}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.sqrt(np.sum(x * x, axis=-1))
    ny = np.sqrt(np.sum(y * y, axis=-1))
    xy = x + y
    nxy = np.sqrt(np.sum(xy * xy, axis=-1))
    dot = np.sum(x * y, axis=-1)
    gap, _, _ = _gap21_invariants(nx, ny, dot, nxy, p, kappa, c0)
    return gap


@dataclass(frozen=True)
class InequalityGapSample:
    """One evaluated admissibility sample of the gradient-expansion bound."""

    x: tuple
    y: tuple
    p: float
    kappa: float
    c0: float
    gap: float
    normalizer: float


def gap_sample(x, y, p, kappa, c0):
    """Evaluate one (x, y) pair and record it at full precision."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = float(np.sqrt(np.sum(x * x)))
    ny = float(np.sqrt(np.sum(y * y)))
    nxy = float(np.sqrt(np.sum((x + y) ** 2)))
    dot = float(np.sum(x * y))
    gap, _, normalizer = _gap21_invariants(
        np.array([nx]), np.array([ny]), np.array([dot]), np.array([nxy]),
        p, kappa, c0)
    return InequalityGapSample(
        x=tuple(float(c) for c in x), y=tuple(float(c) for c in y),
        p=float(p), kappa=float(kappa), c0=float(c0),
        gap=float(gap[0]), normalizer=float(normalizer[0]))


# ---------------------------------------------------------------------------
# searches
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    """Outcome of one empirical constant search, ready for reporting."""

    constant: float
    worst_gap: float
    samples: int
    seed: int
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "constant": self.constant,
            "worst_gap": self.worst_gap,
            "samples": self.samples,
            "seed": self.seed,
            "params": dict(self.params),
            "diagnostics": dict(self.diagnostics),
        }


def _hybrid_plane_samples(m, seed_seq, log_lo=-4.0, log_hi=4.0):
    """(log10 |y|, angle) pairs: half scrambled Sobol, half uniform."""
    sob_seq, unif_seq = seed_seq.spawn(2)
    m_sobol = m // 2
    sob = qmc.Sobol(d=2, scramble=True, seed=np.random.default_rng(sob_seq))
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties.*")
        u_sob = sob.random(m_sobol)
    rng = np.random.default_rng(unif_seq)
    u_unif = rng.random((m - m_sobol, 2))
    u = np.concatenate([u_sob, u_unif], axis=0)
    log_ny = log_lo + (log_hi - log_lo) * u[:, 0]
    angle = math.pi * u[:, 1]
    return log_ny, angle


def _ratio21(log_ny, angle, p, kappa):
    """Remainder ratio R at |x| = 1; the sharp c0 is inf R over the plane."""
    ny = 10.0**log_ny
    dot = ny * np.cos(angle)
    nxy = np.sqrt(np.maximum(1.0 + 2.0 * dot + ny * ny, 0.0))
    gap, _, normalizer = _gap21_invariants(
        np.ones_like(ny), ny, dot, nxy, p, kappa, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return gap / normalizer


def search_c0(p, kappa, sample_budget=1_000_000, seed=0, polish=100):
    """Empirical largest admissible c0 = inf of the remainder ratio.

    By homogeneity and rotation invariance the sampling lives on the
    (log |y|, angle) plane at |x| = 1. |y| is kept in [1e-4, 1e4] for the
    scan: below that the ratio is quadratic-degenerate and its directional
    infimum kappa/2 p(p-1) (relevant for p <= 2 only) is appended
    analytically; above, the ratio tends to 1.
    """
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0,1), got {kappa}")
    if sample_budget < 10_000:
        raise ValueError(f"sample_budget must be >= 10000, got {sample_budget}")
    workers = thread_count()
    chunk = max(sample_budget // workers, 1)
    seeds = np.random.SeedSequence(seed).spawn(workers)

    def chunk_worst(i):
        m = chunk if i < workers - 1 else sample_budget - chunk * (workers - 1)
        log_ny, angle = _hybrid_plane_samples(m, seeds[i])
        ratio = _ratio21(log_ny, angle, p, kappa)
        order = np.argsort(ratio)
        keep = order[: max(polish // workers + 1, 4)]
        return ratio[keep], log_ny[keep], angle[keep]

    parts = run_indexed(chunk_worst, [(i,) for i in range(workers)])
    ratios = np.concatenate([part[0] for part in parts])
    log_nys = np.concatenate([part[1] for part in parts])
    angles = np.concatenate([part[2] for part in parts])
    order = np.argsort(ratios)[:polish]

    def polish_objective(z):
        # below |y| ~ 1e-4 the ratio numerator is pure cancellation noise;
        # keep the simplex inside the trustworthy window
        if not -4.5 <= z[0] <= 4.5:
            return 1e300
        return float(_ratio21(np.array([z[0]]), np.array([z[1]]),
                              p, kappa)[0])

    def polished(j):
        res = minimize(polish_objective,
                       x0=np.array([log_nys[j], angles[j]]),
                       method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxfev": 400})
        return float(res.fun)

    polished_vals = run_indexed(polished, [(int(j),) for j in order])
    candidates = [float(np.min(ratios))] + polished_vals
    if p <= 2.0:
        candidates.append(0.5 * kappa * p * (p - 1.0))
    inf_ratio = min(candidates)
    if not inf_ratio > 0.0:
        raise ConditionViolated(
            "remainder ratio is not bounded below by a positive constant",
            p=p, kappa=kappa, inf_ratio=inf_ratio)
    c0 = inf_ratio * (1.0 - SAFETY_MARGIN)
    worst_gap, violations = verify_lemma21(
        p, kappa, c0, samples=min(sample_budget, 200_000), seed=seed + 1)
    return SearchResult(constant=c0, worst_gap=worst_gap,
                        samples=sample_budget, seed=seed,
                        params={"p": p, "kappa": kappa},
                        diagnostics={"inf_ratio": inf_ratio,
                                     "verify_violations": violations})


def verify_lemma21(p, kappa, c0, samples=1_000_000, seed=1, tol=-1e-12):
    """Fresh-seed admissibility check at |x| = 1.

    Returns (min gap, count of gaps below tol). Draws keep |y| >= 1e-8; below
    that the gap sits at roundoff scale and says nothing.
    """
    workers = thread_count()
    chunk = max(samples // workers, 1)
    seeds = np.random.SeedSequence(seed).spawn(workers)

    def chunk_min(i):
        m = chunk if i < workers - 1 else samples - chunk * (workers - 1)
        log_ny, angle = _hybrid_plane_samples(m, seeds[i],
                                              log_lo=-8.0, log_hi=4.0)
        ny = 10.0**log_ny
        dot = ny * np.cos(angle)
        nxy = np.sqrt(np.maximum(1.0 + 2.0 * dot + ny * ny, 0.0))
        gap, _, _ = _gap21_invariants(np.ones_like(ny), ny, dot, nxy,
                                      p, kappa, c0)
        return float(np.min(gap)), int(np.count_nonzero(gap < tol))

    parts = run_indexed(chunk_min, [(i,) for i in range(workers)])
    worst = min(part[0] for part in parts)
    violations = sum(part[1] for part in parts)
    return worst, violations


# ---------------------------------------------------------------------------
# function-expansion inequality (upper bound for |a+b|^{p*})
# ---------------------------------------------------------------------------

def lemma23_gap(a, b, dim, kappa, C1):
    """RHS - |a+b|^{p*} of the second-order upper expansion; >= 0 iff admissible.

    Branch follows dim: quadratic remainder with the inhomogeneous weight
    (|a| + C1|b|)^{p*} / (a^2 + b^2) when p* <= 2 (that is p <= 2n/(n+2)),
    separate C1|b|^{p*} remainder when p* > 2.
    """
    pstar = dim.pstar
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    abs_a = np.abs(a)
    base = abs_a**pstar + pstar * np.sign(a) * abs_a ** (pstar - 1.0) * b
    coef = 0.5 * pstar * (pstar - 1.0) + kappa
    if dim.p <= dim.low_p_threshold:
        denom = a * a + b * b
        weight = np.where(denom > 0.0,
                          (abs_a + C1 * np.abs(b)) ** pstar
                          / np.where(denom > 0.0, denom, 1.0),
                          0.0)
        rhs = base + coef * weight * b * b
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            quad = np.where(b != 0.0, abs_a ** (pstar - 2.0) * b * b, 0.0)
        rhs = base + coef * quad + C1 * np.abs(b) ** pstar
    return rhs - np.abs(a + b) ** pstar


def _c1_required(t, dim, kappa):
    """Minimal admissible C1 along the a = 1, b = t slice (homogeneity)."""
    pstar = dim.pstar
    coef = 0.5 * pstar * (pstar - 1.0) + kappa
    t = np.asarray(t, dtype=np.float64)
    lead = np.abs(1.0 + t) ** pstar - 1.0 - pstar * t
    if dim.p <= dim.low_p_threshold:
        X = (1.0 + t * t) * lead / (coef * t * t)
        req = np.where(X > 1.0,
                       (np.maximum(X, 1.0) ** (1.0 / pstar) - 1.0) / np.abs(t),
                       0.0)
    else:
        req = (lead - coef * t * t) / np.abs(t) ** pstar
    return req


def search_C1(dim, kappa, seed=0, grid=400_000):
    """Smallest workable C1 for the function-side expansion (sup over t = b/a).

    The scan stays away from |t| < 1e-4, where the requirement vanishes
    identically inside the Taylor window |t| <= 6 kappa / (p*(p*-1)|p*-2| + 1);
    kappa must be large enough for that window to cover the excluded range.
    """
    pstar = dim.pstar
    window = 6.0 * kappa / (pstar * (pstar - 1.0) * abs(pstar - 2.0) + 1.0)
    if window < 2e-4:
        raise ValueError(
            f"kappa={kappa} too small for the t-scan cutoff at 1e-4 "
            f"(Taylor window {window:.2e})")
    mags = np.logspace(-4.0, 9.0, grid // 4)
    t_log = np.concatenate([mags, -mags])
    rng = np.random.default_rng(seed)
    t_lin = rng.uniform(-8.0, 8.0, grid // 2)
    t_lin = t_lin[np.abs(t_lin) >= 1e-4]
    t = np.concatenate([t_log, t_lin])
    req = _c1_required(t, dim, kappa)
    j = int(np.argmax(req))

    def neg_req(z):
        # |t| below the grid cutoff is cancellation noise; fence it off
        if abs(z[0]) < 1e-4 or abs(z[0]) > 1e10:
            return 1e300
        return -float(_c1_required(np.array([z[0]]), dim, kappa)[0])

    res = minimize(neg_req, x0=np.array([t[j]]), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxfev": 400})
    sup_req = max(float(np.max(req)), float(-res.fun))
    c1 = max(sup_req * (1.0 + SAFETY_MARGIN), 1.0 / pstar)
    worst, violations = verify_lemma23(dim, kappa, c1, seed=seed + 1)
    return SearchResult(constant=c1, worst_gap=worst, samples=int(t.size),
                        seed=seed,
                        params={"n": dim.n, "p": dim.p, "kappa": kappa},
                        diagnostics={"sup_required": sup_req,
                                     "floor": 1.0 / pstar,
                                     "verify_violations": violations,
                                     "argmax_t": float(t[j])})


def verify_lemma23(dim, kappa, C1, samples=1_000_000, seed=1, tol=-1e-10):
    """Fresh-seed scaled check; returns (min normalized gap, violations).

    The gap is normalized by max(|a|, |b|)^{p*}, its natural homogeneity, so
    the tolerance means the same thing at every magnitude.
    """
    rng = np.random.default_rng(seed)
    a = np.where(rng.random(samples) < 0.5, -1.0, 1.0) \
        * 10.0 ** rng.uniform(-3.0, 3.0, samples)
    t = np.where(rng.random(samples) < 0.5, -1.0, 1.0) \
        * 10.0 ** rng.uniform(-8.0, 6.0, samples)
    b = t * a
    gap = lemma23_gap(a, b, dim, kappa, C1)
    scale = np.maximum(np.abs(a), np.abs(b)) ** dim.pstar
    normalized = gap / scale
    return float(np.min(normalized)), int(np.count_nonzero(normalized < tol))


# ---------------------------------------------------------------------------
# weighted discrete inequalities (far-field absorption)
# ---------------------------------------------------------------------------

INTER = "inter"
YOUNG = "young"


def zeta_for(eps0, p):
    """The canonical smallness parameter: zeta^p = eps0 / 3."""
    return (eps0 / 3.0) ** (1.0 / p)


def appendixB_gap(eps, r, a, b, eps0, zeta, C, dim, which=INTER):
    """RHS - LHS of the weighted discrete inequality; >= 0 iff admissible.

    which="inter" keeps the extra (1+r)^{-q} decay on the RHS (the stronger
    form); which="young" drops it. Requires the quadratic regime
    p <= 2n/(n+2) (hence n >= 3) and the hypothesis
    eps * a <= zeta (1+r^q)^{1-n/p}, eps in (0,1), a, b, r >= 0.
    """
    if dim.p > dim.low_p_threshold:
        raise ValueError(
            f"the weighted inequality needs p <= 2n/(n+2), "
            f"got p={dim.p}, n={dim.n}")
    which = str(which).lower()
    if which not in (INTER, YOUNG):
        raise ValueError(f"which must be 'inter' or 'young', got {which!r}")
    p, q, pstar = dim.p, dim.q, dim.pstar
    eps = np.asarray(eps, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(eps <= 0.0) or np.any(eps >= 1.0):
        raise ConditionViolated("eps must lie in (0, 1)", eps0=eps0)
    if np.any(a < 0.0) or np.any(b < 0.0) or np.any(r < 0.0):
        raise ConditionViolated("a, b, r must be nonnegative", eps0=eps0)
    envelope = zeta * (1.0 + r**q) ** (1.0 - dim.n / p)
    slack = eps * a - envelope
    if np.any(slack > 1e-12 * envelope):
        raise ConditionViolated(
            "constraint eps * a <= zeta (1+r^q)^{1-n/p} violated",
            worst=float(np.max(slack / envelope)))
    E = (1.0 - dim.n / p) * (pstar - 2.0)
    one_rq = 1.0 + r**q
    lhs = one_rq ** (E + p - 1.0) * (
        a * a * zeta**p * r**q * one_rq ** (-p)
        + a * a * eps**p * b**p * one_rq ** (dim.n - p)
        + a ** (2.0 - p) * b**p)
    W = one_rq ** (-dim.n / p) * r ** (1.0 / (p - 1.0)) + eps * b
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(b > 0.0, W ** (p - 2.0) * b * b, 0.0)
    rhs = eps0 * one_rq**E * a * a + C * quad * (
        (1.0 + r) ** (-q) if which == INTER else 1.0)
    return rhs - lhs


def _appendixB_draw(m, dim, eps0, seed):
    """Constrained tuples: r, eps, b log-uniform; a a fraction of the envelope."""
    rng = np.random.default_rng(seed)
    r = 10.0 ** rng.uniform(-6.0, 6.0, m)
    eps = 10.0 ** rng.uniform(-4.0, -1e-9, m)
    frac = rng.random(m)
    b = 10.0 ** rng.uniform(-6.0, 6.0, m)
    zeta = zeta_for(eps0, dim.p)
    a = frac * zeta * (1.0 + r**dim.q) ** (1.0 - dim.n / dim.p) / eps
    return eps, r, a, b


def _appendixB_required_C(eps, r, a, b, dim, eps0):
    """Per-sample minimal C for the 'inter' (stronger) form."""
    p, q, pstar = dim.p, dim.q, dim.pstar
    zeta = zeta_for(eps0, p)
    E = (1.0 - dim.n / p) * (pstar - 2.0)
    one_rq = 1.0 + r**q
    lhs = one_rq ** (E + p - 1.0) * (
        a * a * zeta**p * r**q * one_rq ** (-p)
        + a * a * eps**p * b**p * one_rq ** (dim.n - p)
        + a ** (2.0 - p) * b**p)
    need = lhs - eps0 * one_rq**E * a * a
    W = one_rq ** (-dim.n / p) * r ** (1.0 / (p - 1.0)) + eps * b
    denom = (1.0 + r) ** (-q) * W ** (p - 2.0) * b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        req = np.where((need > 0.0) & (denom > 0.0),
                       need / np.where(denom > 0.0, denom, 1.0), 0.0)
    return req


def search_appendixB_C(dim, eps0, sample_budget=1_000_000, seed=0, polish=100):
    """Empirical constant for the weighted inequalities (sup of required C).

    Search and verification both use the canonical zeta with zeta^p = eps0/3.
    The returned constant serves the 'inter' form and hence also 'young'.
    """
    if dim.p > dim.low_p_threshold:
        raise ValueError(
            f"the weighted inequality needs p <= 2n/(n+2), "
            f"got p={dim.p}, n={dim.n}")
    if sample_budget < 10_000:
        raise ValueError(f"sample_budget must be >= 10000, got {sample_budget}")
    workers = thread_count()
    chunk = max(sample_budget // workers, 1)
    seeds = np.random.SeedSequence(seed).spawn(workers)
    zeta = zeta_for(eps0, dim.p)

    def chunk_worst(i):
        m = chunk if i < workers - 1 else sample_budget - chunk * (workers - 1)
        eps, r, a, b = _appendixB_draw(m, dim, eps0, seeds[i])
        req = _appendixB_required_C(eps, r, a, b, dim, eps0)
        frac = a * eps / (zeta * (1.0 + r**dim.q) ** (1.0 - dim.n / dim.p))
        order = np.argsort(req)[::-1]
        keep = order[: max(polish // workers + 1, 4)]
        return req[keep], eps[keep], r[keep], b[keep], frac[keep]

    parts = run_indexed(chunk_worst, [(i,) for i in range(workers)])
    reqs = np.concatenate([part[0] for part in parts])
    epss = np.concatenate([part[1] for part in parts])
    rs = np.concatenate([part[2] for part in parts])
    bs = np.concatenate([part[3] for part in parts])
    fracs = np.concatenate([part[4] for part in parts])

    def polished(j):
        # unconstrained coords: log r, logit eps, logit frac, log b
        def neg_req(z):
            r = math.exp(z[0])
            eps = 1.0 / (1.0 + math.exp(-z[1]))
            frac = 1.0 / (1.0 + math.exp(-z[2]))
            b = math.exp(z[3])
            a = frac * zeta * (1.0 + r**dim.q) ** (1.0 - dim.n / dim.p) / eps
            return -float(_appendixB_required_C(
                np.array([eps]), np.array([r]), np.array([a]),
                np.array([b]), dim, eps0)[0])

        f = np.clip(fracs[j], 1e-9, 1.0 - 1e-9)
        e = np.clip(epss[j], 1e-9, 1.0 - 1e-9)
        z0 = np.array([math.log(rs[j]), math.log(e / (1.0 - e)),
                       math.log(f / (1.0 - f)), math.log(bs[j])])
        res = minimize(neg_req, x0=z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxfev": 800})
        return -float(res.fun)

    order = np.argsort(reqs)[::-1][:polish]
    polished_vals = run_indexed(polished, [(int(j),) for j in order])
    sup_req = max([float(np.max(reqs))] + polished_vals)
    C = sup_req * (1.0 + SAFETY_MARGIN)
    worst, violations = verify_appendixB(
        dim, eps0, C, samples=min(sample_budget, 200_000), seed=seed + 1)
    return SearchResult(constant=C, worst_gap=worst, samples=sample_budget,
                        seed=seed,
                        params={"n": dim.n, "p": dim.p, "eps0": eps0},
                        diagnostics={"sup_required": sup_req,
                                     "verify_violations": violations})


def verify_appendixB(dim, eps0, C, samples=1_000_000, seed=1, tol=-1e-10):
    """Fresh-seed check of the 'inter' form; returns (min scaled gap, violations).

    The gap is scaled by the eps0 a^2 RHS term so the tolerance is relative
    to the quantity being absorbed.
    """
    eps, r, a, b = _appendixB_draw(samples, dim, eps0, seed)
    zeta = zeta_for(eps0, dim.p)
    gap = appendixB_gap(eps, r, a, b, eps0, zeta, C, dim, which=INTER)
    one_rq = 1.0 + r**dim.q
    E = (1.0 - dim.n / dim.p) * (dim.pstar - 2.0)
    scale = np.maximum(eps0 * one_rq**E * a * a, 1e-300)
    normalized = gap / scale
    return float(np.min(normalized)), int(np.count_nonzero(normalized < tol))


__all__ = [
    "WeightBranch", "P_LESS_2", "P_GE_2", "weight_w", "weight_w_pm2",
    "quad_form_G", "g_lower_bound", "lemma21_gap", "InequalityGapSample",
    "gap_sample", "SearchResult", "search_c0", "verify_lemma21",
    "lemma23_gap", "search_C1", "verify_lemma23", "zeta_for", "INTER",
    "YOUNG", "appendixB_gap", "search_appendixB_C", "verify_appendixB",
    "SAFETY_MARGIN",
]
