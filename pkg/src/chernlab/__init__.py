"""chernlab: Chern markers, generalized Wannier bases, and localization
diagnostics on finite tight-binding lattices."""

__version__ = "0.1.0"

from .models import (
    BlochHamiltonian,
    DisorderSpec,
    HermitianOperator,
    ModelSpec,
    SiteGeometry,
    add_disorder,
    bloch_hamiltonian,
    build_model,
    position_operators,
)
from .spectral import (
    KernelDecayFit,
    Projector,
    SpectralIsland,
    Spectrum,
    detect_islands,
    diagonalize,
    fermi_projection,
    island_from_window,
    kernel_decay_fit,
)
from .chern import (
    ChernReport,
    SwitchFunction,
    TuvSequence,
    bloch_chern_number,
    chern_marker_boxed,
    commutator_identity_defect,
    hall_conductance_switch,
    local_chern_map,
    switch_function,
    tuv_extrapolate,
)
from .gwb import (
    GammaOperator,
    GwbSet,
    LocalizationFunction,
    WannierFunction,
    completeness_defect,
    construct_gwb_1d,
    construct_gwb_2d,
    exponential_localization,
    fit_localization,
    gamma_operator,
    linf_bound_check,
    localization_moment,
    off_diagonal_profile,
    polynomial_localization,
)
from .dichotomy import (
    DichotomyReport,
    commutator_decomposition,
    dichotomy_experiment,
    kato_nagy_transport,
    maclaurin_cauchy_check,
    mass_estimates,
    stability_sweep,
    trace_bound_check,
    trs_defect,
)

__all__ = [name for name in dir() if not name.startswith("_")]
