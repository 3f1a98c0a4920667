import functools
import math

import numpy as np
import pytest

from conftest import cached_agrid, cached_rgrid
from sobolev_lab.bubbles import (Bubble, Dimension, profile, profile_db,
                                 profile_prime, profile_prime2,
                                 sobolev_constant, unit_bubble)
from sobolev_lab.corpus import (bump, bump_deriv, corpus_fields,
                                origin_plateau, stress_fields, zonal_shell)
from sobolev_lab.errors import ConditionViolated, SingularityUnresolved
from sobolev_lab.grids import RadialGrid, fd_grad_r
from sobolev_lab.spectrum import (RESIDUAL_TOL, RadialProfile,
                                  assemble_sector, check_perturbed_gap_bound,
                                  check_spectral_gap_bound, embedding_ratios,
                                  hardy_poincare_ratio, orlicz_poincare_ratio,
                                  orthogonalize, sector_ladders, solve_sector,
                                  spectral_gap, zonal_tangent_fields)

SUITE = [(3, 1.5), (3, 2.0), (4, 2.5), (5, 1.2)]
LOW_P = [(5, 1.2), (3, 1.2)]


def _setup(n, p, N=2048):
    dim = Dimension(n, p)
    return dim, cached_rgrid(n, p, N=N), cached_agrid(n)


@functools.lru_cache(maxsize=None)
def _ladders(n, p, N=2048, ells=(0, 1, 2, 3)):
    dim, rgrid, _ = _setup(n, p, N=N)
    return sector_ladders(dim, rgrid, ells=ells, k=3)


def _known_errors(n, p, N):
    """Relative errors of the three analytically known eigenvalues."""
    dim, rgrid, _ = _setup(n, p, N=N)
    c = sobolev_constant(dim, rgrid) ** p
    lad = _ladders(n, p, N=N)
    return (
        abs(lad[0].eigenvalues[0] - (p - 1) * c) / ((p - 1) * c),
        abs(lad[0].eigenvalues[1] - (dim.pstar - 1) * c)
        / ((dim.pstar - 1) * c),
        abs(lad[1].eigenvalues[0] - (dim.pstar - 1) * c)
        / ((dim.pstar - 1) * c),
    )


# ---------------------------------------------------------------------------
# tangent fields
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,p", SUITE)
def test_profile_prime2_matches_fd(n, p):
    dim = Dimension(n, p)
    bub = Bubble(1.3, 0.7, 0.0)
    r = np.linspace(0.3, 3.0, 41)
    h = 1e-5 * r
    fd = (profile_prime(bub, dim, r + h)
          - profile_prime(bub, dim, r - h)) / (2.0 * h)
    exact = profile_prime2(bub, dim, r)
    assert np.all(np.abs(fd - exact) <= 1e-6 * np.max(np.abs(exact)))


def test_tangent_fields_need_centered_bubble():
    dim, rgrid, _ = _setup(3, 2.0)
    with pytest.raises(ValueError):
        zonal_tangent_fields(Bubble(1.0, 1.0, 0.5), dim)


def test_tangent_translation_gradient_consistent():
    dim, rgrid, agrid = _setup(3, 2.0)
    bub = unit_bubble(dim, rgrid)
    tr = zonal_tangent_fields(bub, dim)[2]
    vals = tr.values(rgrid, agrid)
    approx = fd_grad_r(vals, rgrid)
    exact = tr.grad_r(rgrid, agrid)
    mask = (rgrid.r > 0.05) & (rgrid.r < 20.0)
    scale = np.max(np.abs(exact[mask, :]))
    assert np.max(np.abs((approx - exact)[mask, :])) < 1e-5 * scale


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_assembly_shapes_and_boundary_layout():
    dim, rgrid, _ = _setup(3, 2.0)
    p0 = assemble_sector(0, dim, rgrid)
    p1 = assemble_sector(1, dim, rgrid)
    for prob in (p0, p1):
        assert prob.k_diag.size == prob.size
        assert prob.k_off.size == prob.size - 1
        assert prob.m_diag.size == prob.size
        assert prob.first_node + prob.size == rgrid.N - 1
    assert p1.first_node >= 1
    with pytest.raises(ValueError):
        assemble_sector(-1, dim, rgrid)
    with pytest.raises(ValueError):
        assemble_sector(0, dim, rgrid, bub=Bubble(1.0, 1.0, 0.3))


@pytest.mark.parametrize("n,p", SUITE)
@pytest.mark.parametrize("ell", [0, 1, 2])
def test_mass_positive_stiffness_dominant(n, p, ell):
    dim, rgrid, _ = _setup(n, p)
    prob = assemble_sector(ell, dim, rgrid)
    assert np.all(prob.m_diag > 0.0)
    assert np.all(prob.k_off < 0.0)
    # diagonal dominance with nonpositive off-diagonals gives K PSD
    row = np.abs(prob.k_diag).copy()
    row[:-1] -= np.abs(prob.k_off)
    row[1:] -= np.abs(prob.k_off)
    assert np.all(row >= -1e-12 * prob.k_diag)


@pytest.mark.parametrize("n,p", SUITE)
def test_sector0_maps_constants_to_boundary_row(n, p):
    dim, rgrid, _ = _setup(n, p)
    prob = assemble_sector(0, dim, rgrid)
    ones = np.ones(prob.size)
    img = prob.k_diag * ones
    img[:-1] += prob.k_off
    img[1:] += prob.k_off
    assert np.all(np.abs(img[:-1]) <= 1e-10 * prob.k_diag[:-1])
    # the last active row carries the link to the Dirichlet boundary node
    assert img[-1] > 0.0


def test_p2_reduces_to_classical_link_coefficients():
    dim, rgrid, _ = _setup(3, 2.0)
    prob = assemble_sector(0, dim, rgrid)
    i0 = prob.first_node
    s_mid = 0.5 * (rgrid.s[:-1] + rgrid.s[1:])
    expected = -np.exp((dim.n - 2.0) * s_mid[i0:rgrid.N - 2]) / rgrid.h
    assert np.max(np.abs(prob.k_off / expected - 1.0)) < 1e-12


def test_unresolved_origin_raises():
    coarse = RadialGrid(3, N=256, s_min=-2.0, s_max=14.0, self_test=False)
    with pytest.raises(SingularityUnresolved):
        assemble_sector(0, Dimension(3, 1.5), coarse)


# ---------------------------------------------------------------------------
# eigensolver
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,p", SUITE)
def test_known_eigenvalues(n, p):
    e1, e2, e3 = _known_errors(n, p, 2048)
    assert e1 < 1e-3
    assert e2 < 1e-3
    assert e3 < 1e-3


def test_known_eigenvalues_improve_under_refinement():
    coarse = _known_errors(3, 2.0, 2048)
    fine = _known_errors(3, 2.0, 4096)
    assert all(f < c for f, c in zip(fine, coarse))


@pytest.mark.parametrize("n,p", SUITE)
def test_known_eigenvector_shapes(n, p):
    dim, rgrid, _ = _setup(n, p)
    bub = unit_bubble(dim, rgrid)
    lad = _ladders(n, p)

    def m_unit(prob, vec):
        return vec / math.sqrt(np.sum(prob.m_diag * vec * vec))

    def active_r(prob):
        return rgrid.r[prob.first_node:prob.first_node + prob.size]

    p0, p1 = lad[0].problem, lad[1].problem
    vvec = m_unit(p0, profile(bub, dim, active_r(p0)))
    cos_v = abs(np.sum(p0.m_diag * vvec * lad[0].vectors[:, 0]))
    assert 1.0 - cos_v < 1e-6

    tvec = m_unit(p1, -profile_prime(bub, dim, active_r(p1)))
    cos_t = abs(np.sum(p1.m_diag * tvec * lad[1].vectors[:, 0]))
    assert 1.0 - cos_t < 1e-6
    # sign convention: the translation mode |v'| comes out nonnegative
    assert lad[1].vectors[:, 0].min() > -1e-6

    # second radial mode lies in the span of v and the width derivative
    dbvec = m_unit(p0, profile_db(bub, dim, active_r(p0)))
    gram = np.array([
        [1.0, np.sum(p0.m_diag * vvec * dbvec)],
        [np.sum(p0.m_diag * dbvec * vvec), 1.0]])
    x1 = lad[0].vectors[:, 1]
    rhs = np.array([np.sum(p0.m_diag * vvec * x1),
                    np.sum(p0.m_diag * dbvec * x1)])
    coef = np.linalg.solve(gram, rhs)
    resid = x1 - coef[0] * vvec - coef[1] * dbvec
    assert math.sqrt(np.sum(p0.m_diag * resid * resid)) < 1e-3


@pytest.mark.parametrize("n,p", SUITE)
def test_eigen_result_invariants(n, p):
    for res in _ladders(n, p):
        assert list(res.eigenvalues) == sorted(res.eigenvalues)
        assert res.eigenvalues[0] > 0.0
        assert max(res.residuals) < RESIDUAL_TOL
        md = res.problem.m_diag
        gram = res.vectors.T @ (md[:, None] * res.vectors)
        assert np.max(np.abs(gram - np.eye(3))) < 1e-8
        d = res.as_dict()
        assert d["ell"] == res.problem.ell
        assert d["eigenvalues"] == list(res.eigenvalues)


def test_solve_sector_k_bounds():
    dim, rgrid, _ = _setup(3, 2.0)
    prob = assemble_sector(0, dim, rgrid)
    with pytest.raises(ValueError):
        solve_sector(prob, 0)
    with pytest.raises(ValueError):
        solve_sector(prob, prob.size + 1)


@pytest.mark.parametrize("n,p", [(3, 2.0), (5, 1.2)])
def test_sector_bottoms_increase_with_ell(n, p):
    lad = _ladders(n, p)
    bottoms = [res.eigenvalues[0] for res in lad]
    assert bottoms[1] < bottoms[2] < bottoms[3]


@pytest.mark.parametrize("n,p", SUITE)
def test_gap_positive_and_grid_stable(n, p):
    dim, rgrid, _ = _setup(n, p)
    lam = spectral_gap(dim, rgrid)
    assert lam > 0.0
    lam_fine = spectral_gap(dim, cached_rgrid(n, p, N=4096))
    assert abs(lam_fine - lam) / lam < 1e-3


# ---------------------------------------------------------------------------
# weighted orthogonalization
# ---------------------------------------------------------------------------

def test_orthogonalize_returns_gridded_nontangent_part():
    dim, rgrid, agrid = _setup(3, 2.0)
    phi = zonal_shell(3, 2, 0.7, 0.5)
    psi = orthogonalize(phi, dim, rgrid, agrid)
    assert psi.values(rgrid, agrid).shape == (rgrid.N, agrid.M)
    # adding tangent components back changes nothing after cleanup
    bub = unit_bubble(dim, rgrid)
    dressed = phi.plus(zonal_tangent_fields(bub, dim)[0], 0.5)
    psi2 = orthogonalize(dressed, dim, rgrid, agrid)
    diff = psi2.values(rgrid, agrid) - psi.values(rgrid, agrid)
    assert np.max(np.abs(diff)) < 1e-10 * np.max(np.abs(psi.values(rgrid, agrid)))


def test_orthogonalize_rejects_pure_tangent_input():
    dim, rgrid, agrid = _setup(3, 2.0)
    bub = unit_bubble(dim, rgrid)
    with pytest.raises(ConditionViolated):
        orthogonalize(zonal_tangent_fields(bub, dim)[0], dim, rgrid, agrid)


# ---------------------------------------------------------------------------
# coercivity scans
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,p", SUITE)
def test_transverse_coercivity_over_corpus(n, p):
    dim, rgrid, agrid = _setup(n, p)
    fields = corpus_fields(n) + stress_fields(n)
    assert len(fields) >= 50
    for fld in fields:
        lhs, rhs = check_spectral_gap_bound(fld, dim, rgrid, agrid)
        assert lhs >= rhs


@pytest.mark.parametrize("n,p", SUITE)
@pytest.mark.parametrize("scale", [1e-2, 1e-3])
def test_perturbed_coercivity_over_corpus(n, p, scale):
    dim, rgrid, agrid = _setup(n, p)
    case = dim.regime()
    fields = corpus_fields(n) + stress_fields(n)
    assert len(fields) >= 50
    for fld in fields:
        lhs, rhs = check_perturbed_gap_bound(
            fld, dim, case, 0.1, 1.0, rgrid, agrid, scale=scale)
        assert lhs >= rhs > 0.0


def test_perturbed_bound_input_guards():
    dim, rgrid, agrid = _setup(3, 2.0)
    phi = zonal_shell(3, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        check_perturbed_gap_bound(phi, dim, "nope", 0.1, 1.0, rgrid, agrid)
    with pytest.raises(ValueError):
        check_perturbed_gap_bound(phi, dim, "I", 0.1, 1.0, rgrid, agrid)
    with pytest.raises(ValueError):
        check_perturbed_gap_bound(phi, dim, "III", -0.1, 1.0, rgrid, agrid)
    with pytest.raises(ValueError):
        check_perturbed_gap_bound(phi, dim, "III", 0.1, 1.0, rgrid, agrid,
                                  scale=0.0)


def test_perturbed_bound_zero_field_short_circuits():
    dim, rgrid, agrid = _setup(3, 2.0)
    from sobolev_lab.grids import AxisymField

    def zero(r, mu):
        return 0.0 * r + 0.0 * mu

    lhs, rhs = check_perturbed_gap_bound(
        AxisymField.analytic(3, zero, zero, zero, desc="zero"),
        dim, "III", 0.1, 1.0, rgrid, agrid)
    assert lhs == 0.0 and rhs == 0.0


# ---------------------------------------------------------------------------
# embedding, Orlicz, Hardy ratios
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,p", SUITE)
def test_embedding_small_ball_exponent_positive(n, p):
    dim, rgrid, agrid = _setup(n, p)
    fld = origin_plateau(n)
    rhos = [0.5, 0.1, 0.02]
    triples = [embedding_ratios(fld, dim, rho, rgrid, agrid) for rho in rhos]
    for full, small, outer in triples:
        assert np.isfinite(full) and full > 0.0
        assert small >= 0.0 and outer >= 0.0
    theta = np.polyfit(np.log(rhos), np.log([t[1] for t in triples]), 1)[0]
    assert theta > 0.0
    assert abs(theta - dim.n) < 1.2


def test_embedding_outer_ratio_with_far_support():
    dim, rgrid, agrid = _setup(3, 2.0)
    fld = zonal_shell(3, 0, 2.9, 0.9)
    vals = [embedding_ratios(fld, dim, rho, rgrid, agrid)[2]
            for rho in (0.5, 0.1, 0.02)]
    assert vals[0] > 0.0
    assert all(np.isfinite(v) for v in vals)
    with pytest.raises(ValueError):
        embedding_ratios(fld, dim, 1.5, rgrid, agrid)


@pytest.mark.parametrize("n,p", LOW_P)
def test_orlicz_ratio_finite_and_continuous(n, p):
    dim, rgrid, agrid = _setup(n, p)
    fld = zonal_shell(n, 2, -0.5, 0.5)
    vals = [orlicz_poincare_ratio(fld, eps, dim, rgrid, agrid)
            for eps in (1e-1, 1e-2, 1e-3)]
    assert all(np.isfinite(v) and v > 0.0 for v in vals)
    quad = embedding_ratios(fld, dim, 0.5, rgrid, agrid)[0]
    assert abs(vals[-1] - quad) < 0.02 * quad


def test_orlicz_ratio_rejects_large_p():
    dim, rgrid, agrid = _setup(3, 2.0)
    fld = zonal_shell(3, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        orlicz_poincare_ratio(fld, 1e-2, dim, rgrid, agrid)
    dim_low, rgrid_low, agrid_low = _setup(5, 1.2)
    with pytest.raises(ValueError):
        orlicz_poincare_ratio(zonal_shell(5, 1, 0.0, 1.0), 0.0,
                              dim_low, rgrid_low, agrid_low)


def _annulus_profile(c, w=0.4):
    return RadialProfile(lambda r: bump((r - c) / w),
                         lambda r: bump_deriv((r - c) / w) / w,
                         desc=f"annulus({c:g})")


def test_hardy_ratio_profile_table():
    dim, rgrid, _ = _setup(3, 1.5)
    bub = unit_bubble(dim, rgrid)
    tail = RadialProfile(lambda r: profile(bub, dim, r),
                         lambda r: profile_prime(bub, dim, r),
                         desc="bubble tail")
    for R in (1.0, 2.0, 10.0):
        for alpha in (0.0, 1.0, dim.n - 1.5):
            for prof in (_annulus_profile(R + 0.5), tail):
                val = hardy_poincare_ratio(prof, alpha, R, dim, rgrid)
                assert np.isfinite(val) and val > 0.0


def test_hardy_ratio_scale_invariant():
    dim, rgrid, _ = _setup(3, 1.5)
    prof = _annulus_profile(2.5)
    doubled = RadialProfile(lambda r: 2.0 * prof.value(r),
                            lambda r: 2.0 * prof.prime(r))
    v1 = hardy_poincare_ratio(prof, 1.0, 2.0, dim, rgrid)
    v2 = hardy_poincare_ratio(doubled, 1.0, 2.0, dim, rgrid)
    assert abs(v1 - v2) <= 1e-13 * v1


def test_hardy_ratio_guards():
    dim, rgrid, _ = _setup(3, 1.5)
    prof = _annulus_profile(2.5)
    with pytest.raises(ValueError):
        hardy_poincare_ratio(prof, 3.0, 2.0, dim, rgrid)
    with pytest.raises(ValueError):
        hardy_poincare_ratio(prof, 1.0, 0.5, dim, rgrid)
    with pytest.raises(ValueError):
        hardy_poincare_ratio(prof, 1.0, 10.0, dim, rgrid)


def test_plateau_probe_gradient_consistent():
    dim, rgrid, agrid = _setup(3, 2.0)
    fld = origin_plateau(3)
    vals = fld.values(rgrid, agrid)
    approx = fd_grad_r(vals, rgrid)
    exact = fld.grad_r(rgrid, agrid)
    # smoothstep is C^1; compare away from its curvature kinks
    inside = (rgrid.s > 5 * rgrid.h) & (rgrid.s < 1.0 - 5 * rgrid.h)
    err = np.abs(approx - exact)[inside, :]
    assert np.max(err) < 1e-5 * np.max(np.abs(exact))
