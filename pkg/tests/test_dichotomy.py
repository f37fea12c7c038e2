"""Decomposition, mass estimates, series-vs-integral bound, transport, verdicts."""

import math

import numpy as np
import pytest
from fractions import Fraction

from chernlab.chern import chern_marker_boxed
from chernlab.dichotomy import (
    GapClosedError,
    MonotonicityError,
    PipelineSettings,
    TransportUndefinedError,
    commutator_decomposition,
    dichotomy_experiment,
    kato_nagy_transport,
    maclaurin_cauchy_check,
    mass_estimates,
    run_stage,
    select_island,
    stability_sweep,
    trace_bound_check,
    trs_defect,
)
from chernlab.gwb import GwbSet, WannierFunction, polynomial_localization
from chernlab.models import DisorderSpec, ModelSpec, build_model
from chernlab.spectral import Projector, diagonalize, fermi_projection, island_from_window

from conftest import GALLERY_2D, SETTINGS, random_projector, square_geometry


# --- commutator decomposition ---

def test_decomposition_atomic_all_zero(stages):
    st = stages("atomic", 8)
    rep = commutator_decomposition(st.projector, st.gwb, (2.0, 3.0))
    scale = st.projector.n * float(np.abs(st.projector.geometry.index_positions).max()) ** 2
    for traces in rep.traces:
        assert all(abs(t) <= 1e-10 * scale for t in traces)
    assert rep.exponents == (None, None, None)


def test_decomposition_identity_every_l(stages):
    for name in ("haldane_trivial", "hofstadter"):
        st = stages(name, 12)
        rep = commutator_decomposition(st.projector, st.gwb, (2.0, 3.0, 4.0))
        assert max(rep.identity_defects) <= 1e-9, name


def test_decomposition_trivial_haldane_scaling(stages):
    st = stages("haldane_trivial", 16)
    rep = commutator_decomposition(st.projector, st.gwb, (2.0, 3.0, 4.0, 5.0))
    for exponent in rep.exponents[1:]:
        assert exponent is None or exponent <= 1.2
    # the normalized sums are marker-negligible for the trivial model
    assert np.abs(rep.normalized_sum).max() <= 1e-4


def test_decomposition_chern_band_reproduces_marker(stages):
    st = stages("hofstadter", 12)
    ls = (2.0, 3.0, 4.0)
    rep = commutator_decomposition(st.projector, st.gwb, ls)
    seq = chern_marker_boxed(st.projector, ls)
    assert np.abs(rep.normalized_sum - seq.values).max() <= 1e-9


# --- mass estimates ---

def test_mass_atomic_interior_zero(stages):
    st = stages("atomic", 8)
    rep = mass_estimates(st.gwb, (2.0, 3.0))
    assert all(v == 0.0 for v in rep.mass_out)
    assert all(v == 0.0 for v in rep.mass_in)


def test_mass_single_function_straddling_box():
    geom = square_geometry(6)
    vec = np.zeros(geom.n, dtype=complex)
    inside_idx = 14           # some site inside [-2, 2]^2
    outside_idx = 0           # corner site
    vec[inside_idx] = np.sqrt(0.8)
    vec[outside_idx] = np.sqrt(0.2)
    center = geom.sites[inside_idx]
    w = WannierFunction(vec, center, 1, center)
    p = Projector(np.outer(vec, vec.conj()), 1, geom)
    gwb = GwbSet((w,), center[None, :], np.array([1]), 1, p, math.inf)
    assert np.all(np.abs(center) <= 2.0) and np.any(np.abs(geom.sites[outside_idx]) > 2.0)
    rep = mass_estimates(gwb, (2.0,))
    assert abs(rep.mass_out[0] - np.sqrt(0.2)) <= 1e-12
    assert rep.mass_in[0] == 0.0


def test_mass_trivial_haldane_linear(stages):
    st = stages("haldane_trivial", 16)
    rep = mass_estimates(st.gwb, (2.0, 3.0, 4.0, 5.0))
    assert rep.residual_out < 0.10
    assert rep.residual_in < 0.10
    assert rep.exponent_out is not None and rep.exponent_out <= 1.2
    assert rep.exponent_in is not None and rep.exponent_in <= 1.2


# --- Maclaurin-Cauchy ---

def test_maclaurin_single_point():
    rep = maclaurin_cauchy_check(np.array([[0.0, 0.0]]),
                                 lambda x: math.exp(-np.linalg.norm(x)), 5.0, r=1.0)
    assert abs(rep.series - 1.0) <= 1e-12
    assert rep.integral > 1.0
    assert rep.holds


def test_maclaurin_integer_lattice_power_law():
    grid = np.array([(i, j) for i in range(-10, 11) for j in range(-10, 11)], dtype=float)
    rep = maclaurin_cauchy_check(grid, lambda x: (1 + x @ x) ** -1.5, 10.0 - 1e-9, r=1.0)
    assert rep.holds
    assert rep.series > 1.0


def test_maclaurin_jittered_lattice_gaussian():
    rng = np.random.default_rng(8)
    base = np.array([(i, j) for i in range(-8, 9) for j in range(-8, 9)], dtype=float)
    jitter = rng.uniform(-0.25, 0.25, size=base.shape)
    pts = base + jitter
    rep = maclaurin_cauchy_check(pts, lambda x: math.exp(-0.5 * float(x @ x)), 6.0)
    assert rep.r >= 0.5
    assert rep.holds


def test_maclaurin_rejects_increasing_function():
    with pytest.raises(MonotonicityError):
        maclaurin_cauchy_check(np.array([[0.0, 0.0]]),
                               lambda x: float(np.linalg.norm(x)), 5.0, r=1.0)


def test_maclaurin_needs_l_over_2r():
    with pytest.raises(ValueError):
        maclaurin_cauchy_check(np.array([[0.0, 0.0]]),
                               lambda x: math.exp(-np.linalg.norm(x)), 1.5, r=1.0)


# --- trace bound ---

def test_trace_bound_identity_and_site():
    geom = square_geometry(8)
    p_eye = Projector(np.eye(geom.n, dtype=complex), geom.n, geom)
    rep = trace_bound_check(p_eye, (2.0, 3.0))
    assert all(t == 0.0 for t in rep.traces)
    assert rep.bound_ok
    vec = np.zeros(geom.n, dtype=complex)
    vec[0] = 1.0
    p1 = Projector(np.outer(vec, vec), 1, geom)
    rep1 = trace_bound_check(p1, (2.0, 3.0))
    assert all(t == 0.0 for t in rep1.traces)


def test_trace_bound_chern_band_quadratic(stages):
    st = stages("hofstadter", 18, with_gwb=False)
    rep = trace_bound_check(st.projector, (2.0, 3.0, 4.0, 5.0))
    assert rep.exponent is not None
    assert abs(rep.exponent - 2.0) <= 0.4
    assert rep.bound_ok


# --- Kato-Nagy transport ---

def test_transport_identity_exact(stages):
    st = stages("haldane_trivial", 8)
    res = kato_nagy_transport(st.projector, st.projector, st.gwb)
    assert res.unitary_defect == 0.0
    assert res.norm_distance == 0.0
    for w0, w1 in zip(st.gwb.functions, res.transported.functions):
        assert np.array_equal(w0.vector, w1.vector)


def test_transport_phase_unitary_preserves_moments(stages):
    # applying the diagonal phase unitary itself leaves every |w(x)| unchanged
    st = stages("haldane_trivial", 8)
    geom = st.projector.geometry
    rng = np.random.default_rng(4)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=st.projector.n))
    g = polynomial_localization(2.0)
    from chernlab.gwb import localization_moment
    for w in st.gwb.functions[:5]:
        moved = WannierFunction(phases * w.vector, w.center, w.band_index, w.centroid)
        assert abs(localization_moment(moved, g, geom)
                   - localization_moment(w, g, geom)) <= 1e-12
    # the Kato-Nagy unitary intertwining P and V P V* agrees with V only to
    # leading order, so moment preservation is exact only as the phases shrink
    eps = 1e-4
    small = np.exp(1j * eps * rng.uniform(-1, 1, size=st.projector.n))
    pm = small[:, None] * st.projector.matrix * np.conj(small)[None, :]
    p1 = Projector(pm, st.projector.rank, st.projector.geometry)
    res = kato_nagy_transport(st.projector, p1, st.gwb)
    assert res.unitary_defect <= 1e-9
    assert res.intertwining_defect <= 1e-8
    assert abs(res.moment_ratio - 1.0) <= 1e-6


def test_transport_disordered_trivial(stages):
    st = stages("haldane_trivial", 12)
    spec = GALLERY_2D["haldane_trivial"]
    h1 = build_model(ModelSpec(spec.family, spec.parameters,
                               DisorderSpec("onsite_uniform", 0.2, seed=5)), 12)
    sp1 = diagonalize(h1)
    isl1 = select_island(sp1, {"bloch_band": (0, 0)}, spec, 12)
    p1 = fermi_projection(sp1, isl1)
    res = kato_nagy_transport(st.projector, p1, st.gwb)
    assert res.norm_distance < 0.9
    assert res.unitary_defect <= 1e-8
    assert res.intertwining_defect <= 1e-8
    assert res.moment_ratio <= 2.0


def test_transport_undefined_for_orthogonal_projectors():
    geom = square_geometry(2)
    v0 = np.zeros(geom.n, dtype=complex)
    v0[0] = 1.0
    v1 = np.zeros(geom.n, dtype=complex)
    v1[1] = 1.0
    p0 = Projector(np.outer(v0, v0), 1, geom)
    p1 = Projector(np.outer(v1, v1), 1, geom)
    w = WannierFunction(v0, geom.sites[0], 1, geom.sites[0])
    gwb = GwbSet((w,), geom.sites[:1], np.array([1]), 1, p0, math.inf)
    with pytest.raises(TransportUndefinedError):
        kato_nagy_transport(p0, p1, gwb)


# --- TRS defect ---

def test_trs_defect_real_model(stages):
    assert trs_defect(stages("haldane_trs", 8, with_gwb=False).projector) <= 1e-12


def test_trs_defect_flux_model(stages):
    assert trs_defect(stages("hofstadter", 12, with_gwb=False).projector) > 1e-3


# --- dichotomy experiment ---

def test_dichotomy_atomic_consistent():
    rep = dichotomy_experiment(GALLERY_2D["atomic"], (6, 8), SETTINGS)
    assert rep.verdict == "consistent"
    assert abs(rep.chern.marker) <= 1e-9
    assert rep.gwb_localization.stable_alpha is not None
    assert rep.theorem_check["status"] == "verified"


def test_dichotomy_topological_consistent():
    rep = dichotomy_experiment(GALLERY_2D["haldane_topo"], (8, 12), SETTINGS)
    assert rep.verdict == "consistent"
    assert abs(rep.chern.marker) > 0.5
    assert rep.gwb_localization.stable_s is None or rep.gwb_localization.stable_s < 5
    assert rep.theorem_check["status"] == "vacuous"
    assert rep.chern.oracle_chern == 1


def test_dichotomy_trivial_consistent():
    rep = dichotomy_experiment(GALLERY_2D["haldane_trivial"], (8, 12), SETTINGS)
    assert rep.verdict == "consistent"
    assert abs(rep.chern.marker) <= 0.05
    assert rep.gwb_localization.stable_s is not None
    assert rep.theorem_check["status"] == "verified"
    assert rep.chern.oracle_chern == 0


def test_dichotomy_requires_ascending_sizes():
    with pytest.raises(ValueError):
        dichotomy_experiment(GALLERY_2D["atomic"], (8, 6), SETTINGS)


def test_dichotomy_gap_closure_names_size():
    spec = ModelSpec("haldane", {"t1": 1.0, "t2": 0.0, "phi": 0.0, "mass": 0.0})
    settings = PipelineSettings(island={"gap_tol": 0.5})
    with pytest.raises(GapClosedError) as err:
        dichotomy_experiment(spec, (6, 8), settings)
    assert err.value.size == 6


# --- stability sweep ---

def test_stability_single_lambda_baseline():
    res = stability_sweep(GALLERY_2D["haldane_trivial"], (0.0,), 10, SETTINGS)
    assert len(res.entries) == 1
    assert res.variation == 0.0
    assert res.variation_ok


def test_stability_trivial_sweep():
    res = stability_sweep(GALLERY_2D["haldane_trivial"], (0.0, 0.1, 0.2), 10, SETTINGS)
    markers = [rep.marker for _, rep in res.entries]
    assert max(abs(m) for m in markers) <= 0.1
    assert res.variation <= 0.1
    assert res.variation_ok


def test_stability_gap_closure_reports_lambda():
    spec = ModelSpec("haldane", {"t1": 1.0, "t2": 0.02, "phi": np.pi / 2, "mass": 3.0})
    settings = PipelineSettings(gap_floor=1.0)
    with pytest.raises(GapClosedError) as err:
        stability_sweep(spec, (0.0, 8.0), 8, settings)
    assert err.value.strength == 8.0
