"""Finite tight-binding models with explicit site geometry, disorder, and magnetic flux.

Families
--------
``atomic_limit``
    Decoupled square lattice (or chain), two orbitals per site with onsite
    energies ``e_a`` / ``e_b``.  Purely diagonal Hamiltonian.
``ssh_1d``
    Dimerized two-orbital chain: intra-cell hopping ``v``, inter-cell
    hopping ``w``.  Both orbitals of a cell share the cell coordinate, so a
    decoupled ``w``-dimer is centered exactly at the bond midpoint ``j + 1/2``.
``haldane``
    Honeycomb-connectivity Chern insulator: NN hopping ``t1``, complex NNN
    hopping ``t2 * exp(+/- i*phi)`` with the usual chirality, staggered mass
    ``mass`` (+ on A, - on B).  Drawn in a unit-square embedding (B offset
    (1/2, 1/2)), which leaves every topological quantity unchanged and makes
    integer marker boxes commensurate with the sites.
``hofstadter``
    Square lattice, hopping ``-t``, uniform flux ``p/q`` (in units of the
    flux quantum) per plaquette via Peierls phases.  Open samples use the
    symmetric gauge; periodic samples use the Landau gauge internally and
    require ``q | N``.  The sign convention is fixed so that the lowest band
    at flux ``+1/q`` carries Chern number +1 (see :mod:`chernlab.chern`).
``custom``
    Matrix loaded from a ``(row, col, re, im)`` triplet file plus a site
    table; see :func:`load_triplets` / :func:`load_sites`.

All constructors are pure functions of their inputs and return immutable
objects; building many models in parallel is safe.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

HERMITICITY_TOL = 1e-12

FAMILIES = ("haldane", "hofstadter", "atomic_limit", "ssh_1d", "custom")
#: families for which a Bloch Hamiltonian is available (no disorder, rational flux)
PERIODIC_CAPABLE = ("haldane", "hofstadter", "atomic_limit", "ssh_1d")

DISORDER_KINDS = ("onsite_uniform", "onsite_binary")


class ModelError(ValueError):
    """Invalid model specification (unknown family, bad flux, incompatible size...)."""


class GeometryError(ValueError):
    """Invalid site geometry (coincident sites, bad dimension...)."""


class NonHermitianError(ValueError):
    """A matrix violated the hermiticity tolerance."""


def derive_seed(master: int, stream: str) -> int:
    """Deterministic child seed for a named substream of a master seed."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFF, zlib.crc32(stream.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SiteGeometry:
    """Ordered site positions plus the (site, orbital) -> matrix-index mapping.

    Index ``site * orbitals_per_site + orbital`` addresses one matrix row;
    all orbitals of a site share the site coordinate.
    """

    dimension: int
    sites: np.ndarray            # (n_sites, dimension), lattice-constant units
    orbitals_per_site: int
    linear_size: int
    boundary: str                # "open" | "periodic"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise GeometryError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.boundary not in ("open", "periodic"):
            raise GeometryError(f"boundary must be open or periodic, got {self.boundary!r}")
        if self.orbitals_per_site < 1:
            raise GeometryError("orbitals_per_site must be positive")
        sites = np.asarray(self.sites, dtype=float).reshape(-1, self.dimension)
        sites.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        if len(sites) == 0:
            raise GeometryError("geometry needs at least one site")
        if len(sites) > 1 and self.min_spacing <= 0.0:
            raise GeometryError("site positions must be distinct")

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    @property
    def n(self) -> int:
        """Matrix dimension: sites times orbitals."""
        return self.n_sites * self.orbitals_per_site

    @cached_property
    def min_spacing(self) -> float:
        """Minimum pairwise site distance r (the set is r-uniformly discrete)."""
        if self.n_sites < 2:
            return float("inf")
        d = self.sites[:, None, :] - self.sites[None, :, :]
        dist = np.linalg.norm(d, axis=-1)
        np.fill_diagonal(dist, np.inf)
        return float(dist.min())

    @cached_property
    def index_positions(self) -> np.ndarray:
        """(n, dimension) array: position of every matrix index."""
        pos = np.repeat(self.sites, self.orbitals_per_site, axis=0)
        pos.setflags(write=False)
        return pos

    def coordinate(self, axis: int) -> np.ndarray:
        """Per-index coordinate along ``axis`` (diagonal of the position operator)."""
        return self.index_positions[:, axis]

    def half_width(self, center: Sequence[float] | None = None) -> float:
        """Distance from ``center`` (default origin) to the nearest sample face."""
        c = np.zeros(self.dimension) if center is None else np.asarray(center, dtype=float)
        lo = self.sites.min(axis=0) - c
        hi = self.sites.max(axis=0) - c
        return float(min(np.min(hi), np.min(-lo)))

    def translated(self, shift: Sequence[float]) -> "SiteGeometry":
        return SiteGeometry(self.dimension, self.sites + np.asarray(shift, dtype=float),
                            self.orbitals_per_site, self.linear_size, self.boundary)


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix tied to a SiteGeometry."""

    matrix: np.ndarray
    geometry: SiteGeometry

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.geometry.n, self.geometry.n):
            raise ModelError(f"matrix shape {m.shape} does not match geometry n={self.geometry.n}")
        defect = float(np.abs(m - m.conj().T).max()) if m.size else 0.0
        if defect > HERMITICITY_TOL:
            raise NonHermitianError(f"hermiticity defect {defect:.3e} exceeds {HERMITICITY_TOL}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DisorderSpec:
    """Diagonal (onsite) disorder: kind, strength and seed fix the realization."""

    kind: str
    strength: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DISORDER_KINDS:
            raise ModelError(f"unknown disorder kind {self.kind!r}; use one of {DISORDER_KINDS}")
        if self.strength < 0:
            raise ModelError("disorder strength must be >= 0")

    def onsite_values(self, n_sites: int) -> np.ndarray:
        """Per-site diagonal values lambda*W, reproducible from (kind, seed)."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed & 0xFFFFFFFF, 0x5EED]))
        if self.kind == "onsite_uniform":
            w = rng.uniform(-1.0, 1.0, size=n_sites)
        else:  # onsite_binary
            w = rng.choice([-1.0, 1.0], size=n_sites)
        return self.strength * w


_DEFAULT_PARAMETERS: dict[str, dict] = {
    "haldane": {"t1": 1.0, "t2": 0.0, "phi": 0.0, "mass": 0.0},
    "hofstadter": {"t": 1.0, "flux": Fraction(1, 3), "gauge": "symmetric"},
    "atomic_limit": {"e_a": -1.0, "e_b": 1.0, "dimension": 2},
    "ssh_1d": {"v": 0.5, "w": 1.0},
    "custom": {},
}


def _as_flux(value) -> Fraction:
    try:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, str):
            return Fraction(value)
        if isinstance(value, (tuple, list)) and len(value) == 2:
            return Fraction(int(value[0]), int(value[1]))
        if isinstance(value, int):
            return Fraction(value, 1)
    except (ZeroDivisionError, ValueError) as exc:
        raise ModelError(f"invalid flux {value!r}: {exc}") from exc
    raise ModelError(f"flux must be rational p/q, got {value!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus named parameters, optional disorder, and a seed."""

    family: str
    parameters: Mapping = field(default_factory=dict)
    disorder: DisorderSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}; use one of {FAMILIES}")
        params = dict(_DEFAULT_PARAMETERS[self.family])
        unknown = set(self.parameters) - set(params) if self.family != "custom" else set()
        if unknown:
            raise ModelError(f"unknown parameters for {self.family}: {sorted(unknown)}")
        params.update(self.parameters)
        if self.family == "hofstadter":
            params["flux"] = _as_flux(params["flux"])
            if params["flux"].denominator < 1:
                raise ModelError("hofstadter flux needs q >= 1")
            if params["gauge"] not in ("symmetric", "landau"):
                raise ModelError("hofstadter gauge must be 'symmetric' or 'landau'")
        if self.family == "atomic_limit" and params["dimension"] not in (1, 2):
            raise ModelError("atomic_limit dimension must be 1 or 2")
        object.__setattr__(self, "parameters", params)

    @property
    def dimension(self) -> int:
        if self.family == "ssh_1d":
            return 1
        if self.family == "atomic_limit":
            return int(self.parameters["dimension"])
        return 2

    @property
    def periodic_capable(self) -> bool:
        return self.family in PERIODIC_CAPABLE and self.disorder is None


# ---------------------------------------------------------------------------
# unit-cell description shared by the real-space and Bloch builders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Cell:
    """Periodic unit cell: lattice vectors, orbital positions, onsite, hoppings.

    ``hoppings`` lists each directed bond once as
    ``(cell_offset, orb_from, orb_to, amplitude)``; the Hermitian partner is
    filled automatically.  Consecutive groups of ``orbitals_per_site``
    orbitals share one site position.
    """

    vectors: np.ndarray          # (dim, dim) rows a_1[, a_2]
    orbital_positions: np.ndarray  # (nb, dim)
    onsite: np.ndarray           # (nb,) real
    hoppings: tuple              # ((offset tuple), int, int, complex)
    orbitals_per_site: int = 1

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def nb(self) -> int:
        return self.orbital_positions.shape[0]


def _recenter(positions: np.ndarray) -> np.ndarray:
    """Shift positions so the sample bounding box is centered on the origin."""
    return positions - 0.5 * (positions.min(axis=0) + positions.max(axis=0))


def _cell_atomic(params, dim: int) -> _Cell:
    vectors = np.eye(dim)
    return _Cell(vectors, np.zeros((2, dim)),
                 np.array([params["e_a"], params["e_b"]], dtype=float), (),
                 orbitals_per_site=2)


def _cell_ssh(params) -> _Cell:
    v, w = float(params["v"]), float(params["w"])
    hops = []
    if v != 0.0:
        hops.append(((0,), 0, 1, complex(v)))
    if w != 0.0:
        hops.append(((1,), 1, 0, complex(w)))
    return _Cell(np.array([[1.0]]), np.zeros((2, 1)), np.zeros(2), tuple(hops),
                 orbitals_per_site=2)


# Honeycomb connectivity in a unit-square embedding: A at the cell corner,
# B at (1/2, 1/2).  Chern numbers, markers, and conductances are invariant
# under this orientation-preserving re-embedding, and square cells keep
# integer marker boxes commensurate with the site lattice (no box-slicing
# noise in the trace-per-unit-volume sequences).
_HALDANE_A1 = np.array([1.0, 0.0])
_HALDANE_A2 = np.array([0.0, 1.0])
_HALDANE_DELTA = np.array([0.5, 0.5])


def _cell_haldane(params) -> _Cell:
    t1 = float(params["t1"])
    t2 = float(params["t2"])
    phi = float(params["phi"])
    mass = float(params["mass"])
    hops = []
    if t1 != 0.0:
        hops += [((0, 0), 0, 1, complex(t1)),
                 ((-1, 0), 0, 1, complex(t1)),
                 ((0, -1), 0, 1, complex(t1))]
    if t2 != 0.0:
        amp = t2 * np.exp(1j * phi)
        # chiral triple a1, a2-a1, -a2 on sublattice A; opposite phase on B
        for off in ((1, 0), (-1, 1), (0, -1)):
            hops.append((off, 0, 0, amp))
            hops.append((off, 1, 1, np.conj(amp)))
    orb = np.stack([np.zeros(2), _HALDANE_DELTA])
    return _Cell(np.stack([_HALDANE_A1, _HALDANE_A2]), orb,
                 np.array([mass, -mass]), tuple(hops))


def _cell_hofstadter(params) -> _Cell:
    """Magnetic unit cell (q x 1 sites) in Landau gauge a_y(x) = -b*x."""
    t = float(params["t"])
    flux = params["flux"]
    q = flux.denominator
    b = -2.0 * np.pi * float(flux)   # sign fixed so flux +1/q gives lowest-band Chern +1
    hops = []
    for j in range(q):
        # +x bond
        if j + 1 < q:
            hops.append(((0, 0), j, j + 1, complex(-t)))
        else:
            hops.append(((1, 0), j, 0, complex(-t)))
        # +y bond with Peierls phase exp(i*b*x_j)
        hops.append(((0, 1), j, j, -t * np.exp(1j * b * j)))
    orb = np.stack([np.array([float(j), 0.0]) for j in range(q)])
    vectors = np.array([[float(q), 0.0], [0.0, 1.0]])
    return _Cell(vectors, orb, np.zeros(q), tuple(hops))


def _cell_for(spec: ModelSpec) -> _Cell:
    if spec.family == "atomic_limit":
        return _cell_atomic(spec.parameters, spec.dimension)
    if spec.family == "ssh_1d":
        return _cell_ssh(spec.parameters)
    if spec.family == "haldane":
        return _cell_haldane(spec.parameters)
    if spec.family == "hofstadter":
        return _cell_hofstadter(spec.parameters)
    raise ModelError(f"family {spec.family!r} has no unit-cell description")


def _realspace_from_cell(cell: _Cell, counts: Sequence[int], boundary: str,
                         linear_size: int) -> HermitianOperator:
    """Tile a unit cell over a centered sample; wrap hoppings if periodic."""
    dim = cell.dim
    if dim == 1:
        cells = [(m,) for m in range(counts[0])]
    else:
        cells = [(m, n) for m in range(counts[0]) for n in range(counts[1])]
    cell_index = {c: i for i, c in enumerate(cells)}
    nb = cell.nb
    n = len(cells) * nb

    positions = np.empty((n, dim))
    for c, i in cell_index.items():
        base = np.asarray(c, dtype=float) @ cell.vectors
        positions[i * nb:(i + 1) * nb] = base + cell.orbital_positions
    positions = _recenter(positions)

    h = np.zeros((n, n), dtype=complex)
    diag = np.tile(cell.onsite, len(cells))
    h[np.diag_indices(n)] = diag

    spans = np.asarray(counts, dtype=int)
    for off, o1, o2, amp in cell.hoppings:
        off = np.asarray(off, dtype=int)
        for c, i in cell_index.items():
            target = np.asarray(c, dtype=int) + off
            if boundary == "periodic":
                target = target % spans
            tkey = tuple(int(x) for x in target)
            j = cell_index.get(tkey)
            if j is None:
                continue
            a, b_ = i * nb + o1, j * nb + o2
            h[a, b_] += amp
            h[b_, a] += np.conj(amp)

    ops = cell.orbitals_per_site
    geom = SiteGeometry(dim, _dedupe_positions(positions, ops), ops, linear_size, boundary)
    return HermitianOperator(h, geom)


def _dedupe_positions(positions: np.ndarray, orbitals_per_site: int) -> np.ndarray:
    """Collapse per-orbital positions to per-site rows (orbitals share positions)."""
    if orbitals_per_site == 1:
        return positions
    sites = positions.reshape(-1, orbitals_per_site, positions.shape[1])
    if not np.allclose(sites, sites[:, :1, :]):
        raise GeometryError("orbitals of one site must share a position")
    return sites[:, 0, :].copy()


def _hofstadter_open(params, size: int) -> HermitianOperator:
    """Open-boundary Hofstadter sample.

    The Peierls phase on a straight bond is the exact line integral of the
    vector potential (midpoint rule, exact for linear A), so every elementary
    plaquette encloses exactly 2*pi*p/q of flux in either gauge:
    symmetric A = (b/2)(-y, x), Landau A = (0, b x).
    """
    t = float(params["t"])
    flux = params["flux"]
    b = -2.0 * np.pi * float(flux)
    gauge = params.get("gauge", "symmetric")
    coords = np.arange(size) - (size - 1) / 2.0   # symmetric around 0
    n = size * size
    positions = np.empty((n, 2))
    h = np.zeros((n, n), dtype=complex)

    def idx(i, j):
        return i * size + j

    for i in range(size):
        for j in range(size):
            positions[idx(i, j)] = (coords[i], coords[j])
    for i in range(size):
        for j in range(size):
            x, y = coords[i], coords[j]
            for di, dj in ((1, 0), (0, 1)):
                if i + di >= size or j + dj >= size:
                    continue
                xm, ym = x + di / 2.0, y + dj / 2.0
                if gauge == "symmetric":
                    theta = 0.5 * b * (xm * dj - ym * di)
                else:
                    theta = b * xm * dj
                amp = -t * np.exp(1j * theta)
                a, b_ = idx(i, j), idx(i + di, j + dj)
                h[a, b_] += amp
                h[b_, a] += np.conj(amp)
    geom = SiteGeometry(2, positions, 1, size, "open")
    return HermitianOperator(h, geom)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def build_model(spec: ModelSpec, size: int, boundary: str = "open") -> HermitianOperator:
    """Build the dense Hamiltonian of ``spec`` on an N x N (or length-N) sample.

    ``size`` counts unit cells per axis; samples are centered on the origin.
    Hofstadter under periodic boundary requires ``size`` divisible by q.
    Disorder declared in the spec is applied on top of the clean Hamiltonian.
    """
    if boundary not in ("open", "periodic"):
        raise ModelError(f"boundary must be open or periodic, got {boundary!r}")
    if size < 2:
        raise ModelError("size must be at least 2")
    if spec.family == "custom":
        h = _build_custom(spec, size, boundary)
    elif spec.family == "hofstadter":
        flux = spec.parameters["flux"]
        q = flux.denominator
        if boundary == "periodic":
            if size % q != 0:
                raise ModelError(
                    f"periodic hofstadter needs size divisible by q={q}, got {size}")
            h = _realspace_from_cell(_cell_for(spec), (size // q, size), boundary, size)
        else:
            h = _hofstadter_open(spec.parameters, size)
    else:
        cell = _cell_for(spec)
        counts = (size,) if cell.dim == 1 else (size, size)
        h = _realspace_from_cell(cell, counts, boundary, size)
    if spec.disorder is not None:
        h = add_disorder(h, spec.disorder)
    return h


def _build_custom(spec: ModelSpec, size: int, boundary: str) -> HermitianOperator:
    params = spec.parameters
    try:
        matrix_path = params["matrix"]
        sites_path = params["sites"]
    except KeyError as exc:
        raise ModelError("custom family needs 'matrix' and 'sites' file parameters") from exc
    matrix = load_triplets(matrix_path)
    sites = load_sites(sites_path)
    orbitals = int(params.get("orbitals_per_site", matrix.shape[0] // len(sites)))
    geom = SiteGeometry(sites.shape[1], sites, orbitals, size, boundary)
    return HermitianOperator(matrix, geom)


def add_disorder(h: HermitianOperator, d: DisorderSpec) -> HermitianOperator:
    """Return h + lambda*W with W diagonal, drawn per site from ``d``'s seed."""
    values = d.onsite_values(h.geometry.n_sites)
    per_index = np.repeat(values, h.geometry.orbitals_per_site)
    matrix = h.matrix + np.diag(per_index.astype(complex))
    return HermitianOperator(matrix, h.geometry)


def position_operators(geometry: SiteGeometry) -> tuple[HermitianOperator, ...]:
    """Diagonal position operators X_1 (and X_2 in 2D); orbitals share the site coordinate."""
    ops = []
    for axis in range(geometry.dimension):
        ops.append(HermitianOperator(np.diag(geometry.coordinate(axis)).astype(complex), geometry))
    return tuple(ops)


@dataclass(frozen=True)
class BlochHamiltonian:
    """k -> H(k) over the (magnetic) unit cell, parameterized by fractional k.

    ``fn(f)`` takes fractional coordinates f in [0,1)^dim of
    k = f_1 b_1 + f_2 b_2 and returns the nb x nb Hermitian fiber, exactly
    periodic in each f_i with period 1.
    """

    nb: int
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    vectors: np.ndarray          # real-space cell vectors (rows)
    cells_per_axis: tuple        # how many cells tile one sample axis for size N=1 unit

    def __call__(self, f) -> np.ndarray:
        return self.fn(np.atleast_1d(np.asarray(f, dtype=float)))

    def eigenvalues_on_grid(self, grid: int) -> np.ndarray:
        """(grid^dim, nb) band energies on the uniform fractional grid."""
        fs = np.arange(grid) / grid
        if self.dim == 1:
            pts = fs[:, None]
        else:
            pts = np.array([(f1, f2) for f1 in fs for f2 in fs])
        return np.array([np.linalg.eigvalsh(self(f)) for f in pts])


def bloch_hamiltonian(spec: ModelSpec) -> BlochHamiltonian:
    """Bloch decomposition of a clean, periodic-capable model.

    Uses the periodic gauge (phases from integer cell offsets only), so the
    fibers are exactly periodic over the fractional Brillouin cell.
    """
    if spec.disorder is not None:
        raise ModelError("bloch_hamiltonian requires a disorder-free spec")
    if spec.family not in PERIODIC_CAPABLE:
        raise ModelError(f"family {spec.family!r} is not periodic-capable")
    cell = _cell_for(spec)
    nb, dim = cell.nb, cell.dim
    onsite = np.diag(cell.onsite.astype(complex))
    hops = [(np.asarray(off, dtype=float), o1, o2, amp) for off, o1, o2, amp in cell.hoppings]

    def fn(f: np.ndarray) -> np.ndarray:
        hk = onsite.copy()
        for off, o1, o2, amp in hops:
            phase = np.exp(2j * np.pi * float(np.dot(f, off)))
            hk[o1, o2] += amp * phase
            hk[o2, o1] += np.conj(amp * phase)
        return hk

    if spec.family == "hofstadter":
        cells = (spec.parameters["flux"].denominator, 1)
    else:
        cells = (1,) * dim
    return BlochHamiltonian(nb, dim, fn, cell.vectors, cells)


# ---------------------------------------------------------------------------
# matrix / site file exchange (triplet text format)
# ---------------------------------------------------------------------------

def save_triplets(matrix: np.ndarray, path) -> None:
    """Write a dense matrix as 'row col re im' lines."""
    m = np.asarray(matrix)
    with open(path, "w") as fh:
        fh.write(f"# n {m.shape[0]}\n")
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                v = complex(m[i, j])
                if v != 0:
                    fh.write(f"{i} {j} {v.real:.17g} {v.imag:.17g}\n")


def load_triplets(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split()
    if len(header) < 3 or header[0] != "#" or header[1] != "n":
        raise ModelError(f"{path}: expected '# n <dim>' header")
    n = int(header[2])
    m = np.zeros((n, n), dtype=complex)
    for line in lines[1:]:
        if not line.strip():
            continue
        r, c, re, im = line.split()
        m[int(r), int(c)] = float(re) + 1j * float(im)
    return m


def save_sites(geometry: SiteGeometry, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# dim {geometry.dimension}\n")
        for row in geometry.sites:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_sites(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    dim = int(lines[0].split()[2])
    rows = [tuple(float(x) for x in line.split()) for line in lines[1:] if line.strip()]
    return np.asarray(rows, dtype=float).reshape(-1, dim)
