"""Eigendecomposition, spectral-island detection, Fermi projections, and
empirical kernel-decay checks for the resulting projectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import GeometryError, HermitianOperator, NonHermitianError, SiteGeometry

#: eigenvalues closer than this are one degenerate cluster and are never split
DEGENERACY_TOL = 1e-10


class IslandError(ValueError):
    """Island/spectrum mismatch or invalid island request."""


@dataclass(frozen=True)
class Spectrum:
    """Full orthonormal eigensystem of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray     # orthonormal columns
    geometry: SiteGeometry

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        vec = np.asarray(self.eigenvectors, dtype=complex)
        ev.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "eigenvectors", vec)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def diagonalize(h: HermitianOperator) -> Spectrum:
    """Dense eigendecomposition; raises NonHermitianError beyond tolerance."""
    m = h.matrix
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.conj().T).max()) > 1e-10 * scale:
        raise NonHermitianError("matrix is not Hermitian within tolerance")
    eigenvalues, eigenvectors = np.linalg.eigh(m)
    return Spectrum(eigenvalues, eigenvectors, h.geometry)


@dataclass(frozen=True)
class SpectralIsland:
    """Contiguous eigenvalue cluster sigma0, isolated inside (e_minus, e_plus)."""

    indices: range
    sigma0: tuple                # (min, max) of the island
    enclosure: tuple             # (E-, E+), both in the resolvent set
    gap_below: float
    gap_above: float

    @property
    def size(self) -> int:
        return len(self.indices)


def detect_islands(spec: Spectrum, gap_tol: float) -> list[SpectralIsland]:
    """Maximal eigenvalue clusters separated by gaps larger than ``gap_tol``.

    Interior enclosure boundaries sit at gap midpoints; the outermost ones sit
    ``gap_tol`` beyond the extreme eigenvalues.  Numerically degenerate
    eigenvalues (within 1e-10) are never split.  Returns an empty list when no
    gap exceeds ``gap_tol`` (no isolated island; not an error).
    """
    if gap_tol <= 0:
        raise IslandError("gap_tol must be positive")
    ev = spec.eigenvalues
    threshold = max(gap_tol, DEGENERACY_TOL)
    gaps = np.diff(ev)
    cuts = np.nonzero(gaps > threshold)[0]          # split between i and i+1
    if len(cuts) == 0:
        return []
    starts = np.concatenate([[0], cuts + 1])
    stops = np.concatenate([cuts + 1, [len(ev)]])
    islands = []
    for s, t in zip(starts, stops):
        lo, hi = ev[s], ev[t - 1]
        e_minus = 0.5 * (ev[s - 1] + lo) if s > 0 else lo - gap_tol
        e_plus = 0.5 * (hi + ev[t]) if t < len(ev) else hi + gap_tol
        islands.append(SpectralIsland(range(int(s), int(t)), (float(lo), float(hi)),
                                      (float(e_minus), float(e_plus)),
                                      float(lo - e_minus), float(e_plus - hi)))
    return islands


def island_from_window(spec: Spectrum, e_minus: float, e_plus: float) -> SpectralIsland:
    """Island of all eigenvalues inside (e_minus, e_plus).

    Unlike :func:`detect_islands` this does not require a large gap, which is
    what open Chern samples need: edge modes fill the bulk gap, and the Fermi
    projection below a mid-gap energy is still the physically right object.
    """
    ev = spec.eigenvalues
    inside = np.nonzero((ev > e_minus) & (ev < e_plus))[0]
    if len(inside) == 0:
        raise IslandError(f"no eigenvalue inside ({e_minus}, {e_plus})")
    s, t = int(inside[0]), int(inside[-1]) + 1
    if t - s != len(inside):  # pragma: no cover - eigenvalues are sorted
        raise IslandError("window selection is not contiguous")
    lo, hi = float(ev[s]), float(ev[t - 1])
    return SpectralIsland(range(s, t), (lo, hi), (float(e_minus), float(e_plus)),
                          lo - float(e_minus), float(e_plus) - hi)


@dataclass(frozen=True)
class Projector:
    """Hermitian idempotent matrix with its geometry; ``frame`` spans its range."""

    matrix: np.ndarray
    rank: int
    geometry: SiteGeometry
    frame: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.frame is not None:
            f = np.asarray(self.frame, dtype=complex)
            f.setflags(write=False)
            object.__setattr__(self, "frame", f)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def algebra_defects(self) -> tuple[float, float, float]:
        """(idempotency, hermiticity, trace-rank) defects in max / abs norm."""
        m = self.matrix
        idem = float(np.abs(m @ m - m).max())
        herm = float(np.abs(m - m.conj().T).max())
        tr = abs(float(np.trace(m).real) - self.rank)
        return idem, herm, tr

    def orthonormal_frame(self) -> np.ndarray:
        """n x rank orthonormal basis of Ran P (stored frame, else from eigh)."""
        if self.frame is not None:
            return self.frame
        w, v = np.linalg.eigh(self.matrix)
        cols = v[:, w > 0.5]
        if cols.shape[1] != self.rank:
            raise IslandError("projector eigenvalues do not split at 1/2")
        return cols


def fermi_projection(spec: Spectrum, island: SpectralIsland) -> Projector:
    """Spectral projection onto the island: P = sum of v v* over island indices."""
    if island.indices.stop > spec.n or island.indices.start < 0:
        raise IslandError("island indices out of range for this spectrum")
    v = spec.eigenvectors[:, island.indices.start:island.indices.stop]
    p = v @ v.conj().T
    return Projector(p, island.size, spec.geometry, frame=v)


@dataclass(frozen=True)
class KernelDecayFit:
    """Exponential envelope fit |P(x,y)| <= C exp(-beta |x-y|).

    ``beta = inf`` with ``ultralocal=True`` marks a kernel with no off-diagonal
    weight at all.  ``ok`` is True when the log-residual stays below the
    configured threshold, i.e. the fitted beta deserves to be believed.
    """

    beta: float
    c: float
    residual: float
    pairs_used: int
    ok: bool
    ultralocal: bool = False


def kernel_decay_fit(p: Projector, min_distance: float = 2.0, bin_width: float = 1.0,
                     residual_threshold: float = 0.75, rel_threshold: float = 0.15,
                     central_fraction: float = 0.5,
                     noise_floor: float = 1e-10) -> KernelDecayFit:
    """Fit the decay rate of the projector kernel over binned site distances.

    Only sites in the central part of the sample enter (open boundaries
    pollute edge rows) and only pairs with distance >= ``min_distance``
    (the exponential envelope is asymptotic, not a near-field statement).
    Per site pair the kernel value is the max over orbital pairs; per distance
    bin the envelope value is the max over pairs; values under ``noise_floor``
    are eigensolver residue and are dropped.  The fit counts as believable
    (``ok``) when the RMS log-residual is below ``residual_threshold`` or
    below ``rel_threshold`` times the total fitted log-drop, whichever is
    more permissive (steep kernels span many decades, so a fixed absolute
    threshold alone would punish them).
    """
    geom = p.geometry
    if geom.n_sites < 2:
        raise GeometryError("kernel decay fit needs at least two sites")
    sites = geom.sites
    center = 0.5 * (sites.min(axis=0) + sites.max(axis=0))
    half = 0.5 * (sites.max(axis=0) - sites.min(axis=0))
    keep = np.all(np.abs(sites - center) <= central_fraction * half + 1e-9, axis=1)
    idx = np.nonzero(keep)[0]

    nb = geom.orbitals_per_site
    m = np.abs(p.matrix)
    # site-level kernel: max over the nb x nb orbital block
    blocks = m.reshape(geom.n_sites, nb, geom.n_sites, nb)
    site_kernel = blocks.max(axis=(1, 3))

    off = site_kernel.copy()
    np.fill_diagonal(off, 0.0)
    if float(off.max()) < 1e-14:
        return KernelDecayFit(math.inf, 0.0, 0.0, 0, True, ultralocal=True)

    sub = site_kernel[np.ix_(idx, idx)]
    d = np.linalg.norm(sites[idx][:, None, :] - sites[idx][None, :, :], axis=-1)
    mask = d >= min_distance
    dist = d[mask]
    vals = sub[mask]
    keep_nz = vals > noise_floor
    dist, vals = dist[keep_nz], vals[keep_nz]
    if len(dist) < 3:
        return KernelDecayFit(math.inf, 0.0, 0.0, int(len(dist)), False, ultralocal=True)

    bins = np.floor((dist - min_distance) / bin_width).astype(int)
    env_d, env_v = [], []
    for b in np.unique(bins):
        sel = bins == b
        j = np.argmax(vals[sel])
        env_d.append(dist[sel][j])
        env_v.append(vals[sel][j])
    env_d = np.asarray(env_d)
    env_v = np.asarray(env_v)
    if len(env_d) < 3:
        return KernelDecayFit(math.inf, 0.0, 0.0, int(len(dist)), False, ultralocal=True)

    a = np.column_stack([np.ones_like(env_d), env_d])
    coef, *_ = np.linalg.lstsq(a, np.log(env_v), rcond=None)
    fitted = a @ coef
    residual = float(np.sqrt(np.mean((np.log(env_v) - fitted) ** 2)))
    beta = float(-coef[1])
    total_drop = beta * (env_d.max() - env_d.min())
    ok = beta > 0 and residual < max(residual_threshold, rel_threshold * total_drop)
    return KernelDecayFit(beta, float(np.exp(coef[0])), residual, int(len(dist)), ok)


def export_spectrum_csv(spec: Spectrum) -> str:
    """CSV text (index, eigenvalue)."""
    lines = ["index,eigenvalue"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(spec.eigenvalues)]
    return "\n".join(lines) + "\n"
