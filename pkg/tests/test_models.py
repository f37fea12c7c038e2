"""Model construction: geometry, hermiticity, flux, gauges, disorder, Bloch."""

import numpy as np
import pytest
from fractions import Fraction

from chernlab.models import (
    DisorderSpec,
    GeometryError,
    HermitianOperator,
    ModelError,
    ModelSpec,
    SiteGeometry,
    add_disorder,
    bloch_hamiltonian,
    build_model,
    position_operators,
)

from conftest import GALLERY_2D


def test_atomic_limit_spectrum_multiplicity():
    h = build_model(ModelSpec("atomic_limit"), 4)
    ev = np.linalg.eigvalsh(h.matrix)
    assert np.allclose(np.sort(ev)[:16], -1.0)
    assert np.allclose(np.sort(ev)[16:], 1.0)
    assert np.allclose(h.matrix, np.diag(np.diagonal(h.matrix)))


def test_atomic_limit_1d():
    spec = ModelSpec("atomic_limit", {"dimension": 1})
    h = build_model(spec, 6)
    assert h.geometry.dimension == 1
    assert h.geometry.n == 12


def test_ssh_dimer_spectrum():
    h = build_model(ModelSpec("ssh_1d", {"v": 0.0, "w": 1.0}), 10, "open")
    ev = np.linalg.eigvalsh(h.matrix)
    values = set(np.round(ev, 12))
    assert values == {-1.0, 0.0, 1.0}
    assert np.sum(np.abs(ev) < 1e-12) == 2  # two decoupled end orbitals


def test_haldane_gap_via_bloch_scan():
    spec = GALLERY_2D["haldane_topo"]
    bh = bloch_hamiltonian(spec)
    energies = bh.eigenvalues_on_grid(48)
    gap = energies[:, 1].min() - energies[:, 0].max()
    assert gap > 0.5


def test_hermiticity_of_gallery():
    for name, spec in GALLERY_2D.items():
        h = build_model(spec, 8)
        assert np.abs(h.matrix - h.matrix.conj().T).max() <= 1e-12, name


def test_non_hermitian_rejected():
    geom = SiteGeometry(1, np.array([[0.0], [1.0]]), 1, 2, "open")
    with pytest.raises(ValueError):
        HermitianOperator(np.array([[0.0, 1.0], [0.0, 0.0]]), geom)


def test_flux_quantization_per_plaquette():
    p, q = 1, 3
    spec = ModelSpec("hofstadter", {"flux": Fraction(p, q)})
    h = build_model(spec, 6)
    geom = h.geometry
    index = {tuple(pos): i for i, pos in enumerate(map(tuple, geom.sites))}
    coords = sorted({pos[0] for pos in index})
    t = 1.0
    target = np.exp(2j * np.pi * p / q)   # clockwise traversal
    for x in coords[:-1]:
        for y in coords[:-1]:
            a = index[(x, y)]
            b = index[(x + 1, y)]
            c = index[(x + 1, y + 1)]
            d = index[(x, y + 1)]
            m = h.matrix
            loop = m[a, d] * m[d, c] * m[c, b] * m[b, a] / t ** 4
            assert abs(loop - target) <= 1e-12


def test_gauge_covariance_hofstadter():
    sym = build_model(ModelSpec("hofstadter", {"flux": Fraction(1, 4)}), 8)
    lan = build_model(ModelSpec("hofstadter", {"flux": Fraction(1, 4),
                                               "gauge": "landau"}), 8)
    ev_s = np.linalg.eigvalsh(sym.matrix)
    ev_l = np.linalg.eigvalsh(lan.matrix)
    assert np.abs(ev_s - ev_l).max() <= 1e-10
    # explicit diagonal phase unitary: A_sym - A_lan = grad(-b x y / 2),
    # so H_sym = U^dag H_lan U with U = diag(e^{i chi})
    b = -2 * np.pi / 4
    x = sym.geometry.coordinate(0)
    y = sym.geometry.coordinate(1)
    u = np.exp(-1j * b * x * y / 2.0)
    conj = np.conj(u)[:, None] * lan.matrix * u[None, :]
    assert np.abs(conj - sym.matrix).max() <= 1e-10


def test_hofstadter_periodic_needs_divisible_size():
    spec = ModelSpec("hofstadter", {"flux": Fraction(1, 3)})
    with pytest.raises(ModelError):
        build_model(spec, 8, "periodic")
    build_model(spec, 9, "periodic")


def test_invalid_flux_and_family():
    with pytest.raises(ValueError):
        ModelSpec("hofstadter", {"flux": "1/0"})
    with pytest.raises(ModelError):
        ModelSpec("squarewell")
    with pytest.raises(ModelError):
        ModelSpec("haldane", {"tt": 1.0})


def test_determinism_same_spec_same_matrix():
    spec = ModelSpec("haldane", {"t1": 1.0, "t2": 0.1, "phi": 0.3, "mass": 0.5},
                     disorder=DisorderSpec("onsite_uniform", 0.4, seed=11))
    h1 = build_model(spec, 6)
    h2 = build_model(spec, 6)
    assert np.array_equal(h1.matrix, h2.matrix)


# --- disorder ---

def test_disorder_zero_strength_identity():
    h = build_model(ModelSpec("hofstadter", {"flux": Fraction(1, 3)}), 6)
    d = DisorderSpec("onsite_uniform", 0.0, seed=3)
    assert np.array_equal(add_disorder(h, d).matrix, h.matrix)


def test_disorder_uniform_bound_and_determinism():
    h = build_model(ModelSpec("atomic_limit"), 5)
    lam = 0.7
    d = DisorderSpec("onsite_uniform", lam, seed=9)
    h1 = add_disorder(h, d)
    h2 = add_disorder(h, d)
    assert np.abs(h1.matrix - h.matrix).max() <= lam
    assert np.array_equal(h1.matrix, h2.matrix)


def test_disorder_binary_values():
    h = build_model(ModelSpec("atomic_limit"), 4)
    d = DisorderSpec("onsite_binary", 0.3, seed=2)
    shift = np.real(np.diagonal(add_disorder(h, d).matrix - h.matrix))
    assert set(np.round(np.abs(shift), 12)) == {0.3}


def test_disorder_strength_scales_same_pattern():
    h = build_model(ModelSpec("atomic_limit"), 4)
    w1 = np.diagonal(add_disorder(h, DisorderSpec("onsite_uniform", 0.1, 5)).matrix - h.matrix)
    w2 = np.diagonal(add_disorder(h, DisorderSpec("onsite_uniform", 0.2, 5)).matrix - h.matrix)
    assert np.allclose(2 * w1, w2)


def test_disorder_rejects_bad_kind():
    with pytest.raises(ModelError):
        DisorderSpec("bond", 0.1)
    with pytest.raises(ModelError):
        DisorderSpec("onsite_uniform", -0.1)


# --- position operators ---

def test_position_single_site_zero():
    geom = SiteGeometry(2, np.array([[0.0, 0.0]]), 1, 1, "open")
    x1, x2 = position_operators(geom)
    assert np.all(x1.matrix == 0) and np.all(x2.matrix == 0)


def test_position_two_sites():
    geom = SiteGeometry(2, np.array([[0.0, 0.0], [1.0, 0.0]]), 1, 2, "open")
    x1, x2 = position_operators(geom)
    assert np.allclose(x1.matrix, np.diag([0.0, 1.0]))
    assert np.allclose(x2.matrix, np.diag([0.0, 0.0]))


def test_position_operators_commute():
    geom = GALLERY_2D and build_model(GALLERY_2D["haldane_trs"], 4).geometry
    x1, x2 = position_operators(geom)
    comm = x1.matrix @ x2.matrix - x2.matrix @ x1.matrix
    assert np.abs(comm).max() == 0.0


def test_geometry_rejects_coincident_sites():
    with pytest.raises(GeometryError):
        SiteGeometry(2, np.array([[0.0, 0.0], [0.0, 0.0]]), 1, 2, "open")


# --- Bloch Hamiltonians ---

def test_bloch_atomic_constant():
    bh = bloch_hamiltonian(ModelSpec("atomic_limit"))
    h0 = bh((0.0, 0.0))
    for f in ((0.3, 0.7), (0.9, 0.1)):
        assert np.allclose(bh(f), h0)
    assert np.allclose(h0, np.diag([-1.0, 1.0]))


def test_bloch_haldane_large_mass_sublattice_projector():
    spec = ModelSpec("haldane", {"t1": 1.0, "t2": 0.1, "phi": 1.0, "mass": 1e6})
    bh = bloch_hamiltonian(spec)
    for f in ((0.0, 0.0), (0.25, 0.5), (0.6, 0.8)):
        w, v = np.linalg.eigh(bh(f))
        p_low = np.outer(v[:, 0], v[:, 0].conj())
        assert np.abs(p_low - np.diag([0.0, 1.0])).max() < 1e-4


def test_bloch_hofstadter_three_separated_bands():
    bh = bloch_hamiltonian(ModelSpec("hofstadter", {"flux": Fraction(1, 3)}))
    assert bh.nb == 3
    energies = bh.eigenvalues_on_grid(60)
    assert energies.shape == (3600, 3)
    assert energies[:, 0].max() < energies[:, 1].min()
    assert energies[:, 1].max() < energies[:, 2].min()


def test_bloch_rejects_disorder():
    spec = ModelSpec("atomic_limit", disorder=DisorderSpec("onsite_uniform", 0.1, 1))
    with pytest.raises(ModelError):
        bloch_hamiltonian(spec)


def test_bloch_periodic_gauge_exactly_periodic():
    bh = bloch_hamiltonian(GALLERY_2D["haldane_topo"])
    f = np.array([0.37, 0.81])
    assert np.abs(bh(f) - bh(f + np.array([1.0, 0.0]))).max() < 1e-12
    assert np.abs(bh(f) - bh(f + np.array([0.0, 1.0]))).max() < 1e-12


def test_realspace_periodic_matches_bloch_eigenvalues():
    spec = GALLERY_2D["haldane_topo"]
    h = build_model(spec, 12, "periodic")
    bh = bloch_hamiltonian(spec)
    fs = np.arange(12) / 12
    bloch_ev = np.sort(np.concatenate(
        [np.linalg.eigvalsh(bh((f1, f2))) for f1 in fs for f2 in fs]))
    real_ev = np.sort(np.linalg.eigvalsh(h.matrix))
    assert np.abs(bloch_ev - real_ev).max() <= 1e-8


def test_build_model_size_validation():
    with pytest.raises(ModelError):
        build_model(ModelSpec("atomic_limit"), 1)
