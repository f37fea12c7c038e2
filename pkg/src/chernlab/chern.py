"""Chern marker in position space, switch-function Hall conductance, local
marker maps, and the Bloch (plaquette link-variable) Chern number oracle.

Orientation convention, used everywhere: x-y right-handed, and the overall
sign is fixed so that the lowest band of a Hofstadter model at flux +1/q
carries Chern number +1.  The boxed marker, the switch-function conductance,
and the Bloch oracle all agree under this convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import BlochHamiltonian, SiteGeometry
from .spectral import Projector


class BoxError(ValueError):
    """Box not strictly interior to the sample, or wrong dimensionality."""


class BandCrossingError(ValueError):
    """The requested band range touches its complement at some grid k-point."""

    def __init__(self, f_point, gap):
        self.f_point = tuple(float(x) for x in f_point)
        self.gap = float(gap)
        super().__init__(f"band range not isolated at fractional k={self.f_point} (gap {gap:.3e})")


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxRestriction:
    """Characteristic function of the square [-L, L]^2 (optionally re-centered)."""

    l_half: float
    mask: np.ndarray             # boolean per matrix index
    sites_inside: int

    @property
    def area(self) -> float:
        return (2.0 * self.l_half) ** 2


def box_restriction(geometry: SiteGeometry, l_half: float,
                    center: Sequence[float] | None = None) -> BoxRestriction:
    if geometry.dimension != 2:
        raise BoxError("boxes are defined for 2D geometries only")
    if l_half <= 0:
        raise BoxError("box half-width must be positive")
    if l_half >= geometry.half_width(center):
        raise BoxError(
            f"box L={l_half} is not strictly interior to the sample "
            f"(half-width {geometry.half_width(center):.3g})")
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    mask = np.all(np.abs(geometry.index_positions - c) <= l_half, axis=1)
    return BoxRestriction(float(l_half), mask, int(mask.sum()))


# ---------------------------------------------------------------------------
# marker core
# ---------------------------------------------------------------------------

def _commutator_with_coordinate(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """[X, P] for diagonal X given as a coordinate vector (O(n^2))."""
    return x[:, None] * p - p * x[None, :]


def marker_diagonal(p: Projector) -> np.ndarray:
    """Diagonal of i P [[X1,P],[X2,P]] P per matrix index (real)."""
    if p.geometry.dimension != 2:
        raise BoxError("the Chern marker needs a 2D geometry")
    x1 = p.geometry.coordinate(0)
    x2 = p.geometry.coordinate(1)
    pm = p.matrix
    k1 = _commutator_with_coordinate(x1, pm)
    k2 = _commutator_with_coordinate(x2, pm)
    inner = k1 @ k2 - k2 @ k1
    core = pm @ inner @ pm
    return np.real(1j * np.diagonal(core)).copy()


@dataclass(frozen=True)
class TuvSequence:
    """Boxed trace-per-unit-volume sequence t_L with its 1/L extrapolation."""

    entries: tuple               # ((L, t_L), ...)  L strictly increasing
    extrapolated: float
    slope: float                 # coefficient of 1/L in the fit
    fit_residual: float

    @property
    def l_values(self) -> np.ndarray:
        return np.array([l for l, _ in self.entries])

    @property
    def values(self) -> np.ndarray:
        return np.array([t for _, t in self.entries])


def tuv_extrapolate(entries: Sequence[tuple]) -> tuple[float, float, float]:
    """Least-squares intercept of t_L against 1/L: (intercept, slope, rms residual)."""
    if len(entries) < 2:
        raise ValueError("extrapolation needs at least 2 (L, t_L) pairs")
    ls = np.array([l for l, _ in entries], dtype=float)
    ts = np.array([t for _, t in entries], dtype=float)
    a = np.column_stack([np.ones_like(ls), 1.0 / ls])
    coef, *_ = np.linalg.lstsq(a, ts, rcond=None)
    residual = float(np.sqrt(np.mean((ts - a @ coef) ** 2)))
    return float(coef[0]), float(coef[1]), residual


def chern_marker_boxed(p: Projector, l_values: Sequence[float],
                       center: Sequence[float] | None = None,
                       diagonal: np.ndarray | None = None) -> TuvSequence:
    """t_L = (2 pi / 4 L^2) Tr(chi_L i P[[X1,P],[X2,P]] P chi_L) for each L.

    The box is normalized by its geometric area (2L)^2, not by its site
    count, so rational site densities rescale the per-site values but not the
    extrapolated marker.  ``diagonal`` lets callers reuse a precomputed
    :func:`marker_diagonal`.
    """
    ls = sorted(float(l) for l in l_values)
    if len(ls) < 2:
        raise BoxError("need at least two box sizes")
    if any(b >= a for a, b in zip(ls[1:], ls[:-1])):
        raise BoxError("L values must be strictly increasing")
    d = marker_diagonal(p) if diagonal is None else diagonal
    entries = []
    for l in ls:
        box = box_restriction(p.geometry, l, center)
        t = 2.0 * np.pi * float(d[box.mask].sum()) / box.area
        entries.append((l, t))
    intercept, slope, residual = tuv_extrapolate(entries)
    return TuvSequence(tuple(entries), intercept, slope, residual)


def local_chern_map(p: Projector, diagonal: np.ndarray | None = None) -> np.ndarray:
    """Per-site marker: 2 pi times the orbital-summed diagonal of the marker core.

    Summing the map over a box and dividing by the box area reproduces the
    boxed marker exactly (identical arithmetic path).
    """
    d = marker_diagonal(p) if diagonal is None else diagonal
    nb = p.geometry.orbitals_per_site
    return 2.0 * np.pi * d.reshape(p.geometry.n_sites, nb).sum(axis=1)


def commutator_identity_defect(p: Projector, l_half: float,
                               center: Sequence[float] | None = None) -> float:
    """|Tr(chi_L cP chi_L) - Tr(chi_L i [X1~, X2~] chi_L)| with Xi~ = P Xi P.

    The two expressions are equal as finite matrices (using only P^2 = P and
    [X1, X2] = 0), so the defect is pure floating-point noise.
    """
    box = box_restriction(p.geometry, l_half, center)
    d = marker_diagonal(p)
    side_marker = float(d[box.mask].sum())

    pm = p.matrix
    x1 = p.geometry.coordinate(0)
    x2 = p.geometry.coordinate(1)
    x1t = pm @ (x1[:, None] * pm)
    x2t = pm @ (x2[:, None] * pm)
    comm = x1t @ x2t - x2t @ x1t
    side_reduced = float(np.real(1j * np.diagonal(comm))[box.mask].sum())
    return abs(side_marker - side_reduced)


# ---------------------------------------------------------------------------
# switch-function Hall conductance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchFunction:
    """Monotone profile with unit increment across the sample, one per direction."""

    direction: int               # 1 or 2
    values: np.ndarray           # per matrix index
    kind: str
    steepness: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def switch_function(geometry: SiteGeometry, direction: int, kind: str = "step",
                    steepness: float = 1.0, center: float = 0.0) -> SwitchFunction:
    """Build a switch profile sampled on the site coordinates.

    ``step`` jumps from 0 to 1 at ``center``; ``tanh`` is rescaled so the
    sampled increment across the sample is exactly 1.
    """
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    if geometry.dimension != 2:
        raise BoxError("switch functions are defined for 2D geometries")
    x = geometry.coordinate(direction - 1)
    if kind == "step":
        vals = (x >= center).astype(float)
    elif kind == "tanh":
        raw = np.tanh((x - center) / steepness)
        lo, hi = raw.min(), raw.max()
        if hi - lo <= 0:
            raise ValueError("degenerate tanh profile")
        vals = (raw - lo) / (hi - lo)
    else:
        raise ValueError(f"unknown switch kind {kind!r}")
    _check_monotone(x, vals)
    return SwitchFunction(direction, vals, kind, steepness)


def _check_monotone(x: np.ndarray, vals: np.ndarray) -> None:
    order = np.argsort(x, kind="stable")
    diffs = np.diff(vals[order])
    if np.any(diffs < -1e-12):
        raise ValueError("switch profile is not monotone non-decreasing")
    if abs((vals.max() - vals.min()) - 1.0) > 1e-10:
        raise ValueError("switch profile increment across the sample must be 1")


def hall_conductance_switch(p: Projector, s1: SwitchFunction, s2: SwitchFunction,
                            window_half: float | None = None) -> float:
    """Switch-function Hall conductance 2 pi Tr(i P [[P, Lambda_1], [P, Lambda_2]]).

    In infinite volume the double-commutator trace converges only
    conditionally; on a finite sample the unrestricted trace is identically
    zero by exact cyclicity (the boundary cancels the switch crossing).  The
    finite-volume realization therefore restricts the trace to an interior
    window containing the crossing of the two switch fronts:
    ``window_half`` defaults to 60% of the sample half-width.  Normalized so
    that a Chern projector returns (approximately) its integer.
    """
    if s1.direction != 1 or s2.direction != 2:
        raise ValueError("pass the direction-1 switch first and direction-2 second")
    _check_monotone(p.geometry.coordinate(0), s1.values)
    _check_monotone(p.geometry.coordinate(1), s2.values)
    if window_half is None:
        window_half = 0.6 * p.geometry.half_width()
    box = box_restriction(p.geometry, window_half)
    pm = p.matrix
    c1 = pm * s1.values[None, :] - s1.values[:, None] * pm   # [P, Lambda1]
    c2 = pm * s2.values[None, :] - s2.values[:, None] * pm
    inner = c1 @ c2 - c2 @ c1
    diag = np.diagonal(pm @ inner)
    val = 1j * np.sum(diag[box.mask])
    return 2.0 * np.pi * float(val.real)


# ---------------------------------------------------------------------------
# Bloch Chern number (plaquette link variables, manifestly integer)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlochChernResult:
    chern: int
    residual: float              # |pre-rounded sum - integer|
    grid: int                    # k-points per axis actually used


def bloch_chern_number(bh: BlochHamiltonian, band_range: tuple, grid: int = 12,
                       max_refinements: int = 3, gap_atol: float = 1e-9) -> BlochChernResult:
    """Chern number of the bands ``band_range = (lo, hi)`` (inclusive).

    Product-of-link-phases plaquette sum on a uniform fractional k-grid; the
    output is an exact integer by construction, and the residual measures how
    far the raw plaquette sum sits from it.  The grid doubles until the
    residual drops below 0.05 (up to ``max_refinements`` times).  A gap
    closing between the band range and its complement at any grid point
    raises :class:`BandCrossingError`.
    """
    if bh.dim != 2:
        raise ValueError("Chern numbers are computed for 2D Bloch Hamiltonians")
    lo, hi = int(band_range[0]), int(band_range[1])
    if not (0 <= lo <= hi < bh.nb):
        raise ValueError(f"band range {band_range} invalid for nb={bh.nb}")
    if grid < 6:
        raise ValueError("grid must be at least 6")
    g = int(grid)
    for attempt in range(max_refinements + 1):
        result = _fhs_sum(bh, lo, hi, g, gap_atol)
        total = result
        c = int(np.rint(total))
        residual = float(abs(total - c))
        if residual < 0.05 or attempt == max_refinements:
            return BlochChernResult(c, residual, g)
        g *= 2
    raise AssertionError("unreachable")  # pragma: no cover


def _fhs_sum(bh: BlochHamiltonian, lo: int, hi: int, g: int, gap_atol: float) -> float:
    fs = np.arange(g) / g
    nbands = hi - lo + 1
    frames = np.empty((g, g, bh.nb, nbands), dtype=complex)
    scale = 1.0
    for i, f1 in enumerate(fs):
        for j, f2 in enumerate(fs):
            w, v = np.linalg.eigh(bh((f1, f2)))
            scale = max(scale, float(np.abs(w).max()))
            if lo > 0 and w[lo] - w[lo - 1] <= gap_atol * scale:
                raise BandCrossingError((f1, f2), w[lo] - w[lo - 1])
            if hi < bh.nb - 1 and w[hi + 1] - w[hi] <= gap_atol * scale:
                raise BandCrossingError((f1, f2), w[hi + 1] - w[hi])
            frames[i, j] = v[:, lo:hi + 1]

    def link(a, b):
        return np.linalg.det(a.conj().T @ b)

    total = 0.0
    for i in range(g):
        for j in range(g):
            u1 = link(frames[i, j], frames[(i + 1) % g, j])
            u2 = link(frames[(i + 1) % g, j], frames[(i + 1) % g, (j + 1) % g])
            u3 = link(frames[(i + 1) % g, (j + 1) % g], frames[i, (j + 1) % g])
            u4 = link(frames[i, (j + 1) % g], frames[i, j])
            total += float(np.angle(u1 * u2 * u3 * u4))
    return total / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# report container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChernReport:
    """Marker sequence plus cross-checks, as produced by the pipelines."""

    marker: float
    sequence: TuvSequence
    commutator_identity_defect: float
    local_map: np.ndarray | None = None
    oracle_chern: int | None = None

    def to_jsonable(self) -> dict:
        out = {
            "marker": self.marker,
            "entries": [[l, t] for l, t in self.sequence.entries],
            "extrapolated": self.sequence.extrapolated,
            "slope": self.sequence.slope,
            "fit_residual": self.sequence.fit_residual,
            "commutator_identity_defect": self.commutator_identity_defect,
            "oracle_chern": self.oracle_chern,
        }
        return out
