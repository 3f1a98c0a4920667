import functools

import pytest

from sobolev_lab.bubbles import Dimension
from sobolev_lab.grids import AngularGrid, RadialGrid


@functools.lru_cache(maxsize=None)
def cached_rgrid(n, p, N=2048):
    return RadialGrid.for_dimension(Dimension(n, p), N=N)


@functools.lru_cache(maxsize=None)
def cached_agrid(n, M=64):
    return AngularGrid(n, M=M)


@pytest.fixture
def grid_factory():
    return cached_rgrid, cached_agrid


# Family sweeps and corpus scans cost minutes at production resolution, so
# they are computed once per session and shared between the module tests
# and the acceptance suite.

@functools.lru_cache(maxsize=None)
def cached_aniso_fit(n, p, N=2048):
    from sobolev_lab.experiments import DEFAULT_I_LIST, anisotropic_family

    dim = Dimension(n, p)
    return anisotropic_family(dim, DEFAULT_I_LIST, cached_rgrid(n, p, N),
                              cached_agrid(n))


@functools.lru_cache(maxsize=None)
def cached_bump_fit(n, p, x_far, N=2048):
    from sobolev_lab.experiments import DEFAULT_EPS_LIST, bump_family

    dim = Dimension(n, p)
    return bump_family(dim, DEFAULT_EPS_LIST, x_far, cached_rgrid(n, p, N),
                       cached_agrid(n))


@functools.lru_cache(maxsize=None)
def cached_ratio_scan(n, p, N):
    from sobolev_lab.experiments import (perturbation_corpus,
                                         stability_ratio_scan)

    dim = Dimension(n, p)
    rgrid = cached_rgrid(n, p, N)
    agrid = cached_agrid(n)
    corpus = perturbation_corpus(dim, rgrid, agrid)
    return stability_ratio_scan(dim, corpus, rgrid, agrid)
