"""Shared fixtures: the model gallery and cached pipeline stages."""

import numpy as np
import pytest
from fractions import Fraction

from chernlab.dichotomy import PipelineSettings, run_stage
from chernlab.models import ModelSpec, SiteGeometry
from chernlab.spectral import Projector

SETTINGS = PipelineSettings()

# 2D gallery used across the suite: lowest band unless stated otherwise.
GALLERY_2D = {
    "atomic": ModelSpec("atomic_limit"),
    "haldane_trivial": ModelSpec("haldane", {"t1": 1.0, "t2": 0.02,
                                             "phi": np.pi / 2, "mass": 3.0}),
    "haldane_trs": ModelSpec("haldane", {"t1": 1.0, "t2": 0.1,
                                         "phi": 0.0, "mass": 2.0}),
    "haldane_topo": ModelSpec("haldane", {"t1": 1.0, "t2": 0.1,
                                          "phi": np.pi / 2, "mass": 0.0}),
    "hofstadter": ModelSpec("hofstadter", {"flux": Fraction(1, 3)}),
}

#: gallery entries whose Hamiltonians are real (time-reversal symmetric)
REAL_MODELS = ("atomic", "haldane_trs")
#: gallery entries with a nonzero lowest-band Chern number
CHERN_MODELS = ("haldane_topo", "hofstadter")


@pytest.fixture(scope="session")
def stages():
    """Cached pipeline stages: stages(name, size, with_gwb=True) -> SizeStage."""
    cache = {}

    def get(name, size, with_gwb=True):
        key = (name, size, with_gwb)
        if key in cache:
            return cache[key]
        # a stage with GWB serves requests without one
        full = (name, size, True)
        if not with_gwb and full in cache:
            return cache[full]
        cache[key] = run_stage(GALLERY_2D[name], size, SETTINGS, with_gwb=with_gwb)
        return cache[key]

    return get


def square_geometry(m: int, orbitals: int = 1) -> SiteGeometry:
    """m x m unit-spacing square sample centered on the origin."""
    coords = np.arange(m) - (m - 1) / 2.0
    sites = np.array([(x, y) for x in coords for y in coords])
    return SiteGeometry(2, sites, orbitals, m, "open")


def random_projector(geometry: SiteGeometry, rank: int, seed: int) -> Projector:
    """Haar-frame random projector on the given geometry."""
    rng = np.random.default_rng(seed)
    n = geometry.n
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    q, _ = np.linalg.qr(g)
    return Projector(q @ q.conj().T, rank, geometry, frame=q)
