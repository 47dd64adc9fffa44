"""Atomic-measure representation of the solution.

A ParticleEnsemble is the measure mu = sum_i m_i delta_{X_i}.  The method
moves particles and never reweights them, so masses are immutable and total
mass is conserved exactly by construction.

Initialization follows the grid rule: one particle per index i in the box
Q_R^h = {i in Z^d : |i h|_inf <= R}, at position i h, with mass
rho0(i h) h^d (midpoint rule) or the cell integral of rho0 (quadrature flag).
The blob density is the mollified ensemble, sum_i phi_eps(x - X_i) m_i.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .mollifier import Mollifier

__all__ = [
    "ParticleEnsemble",
    "GridSpec",
    "GridField",
    "discretize_density",
    "second_moment",
    "blob_density",
    "sample_on_grid",
]

# Particles lighter than DROP_FRACTION * max mass are dropped at
# initialization: they cost O(N^2) work and carry no dynamics.
DROP_FRACTION = 1e-14

# Nodes and weights of 3-point Gauss-Legendre on [-1/2, 1/2], used by the
# cell-integral mass rule.
_GL3_NODES = np.array([-0.5 * np.sqrt(3.0 / 5.0), 0.0, 0.5 * np.sqrt(3.0 / 5.0)])
_GL3_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ParticleEnsemble:
    """Positions X_i (N, d) and fixed masses m_i (N,)."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim == 1:
            pos = pos[:, None]
        mas = np.array(self.masses, dtype=float, copy=True)
        if pos.ndim != 2 or mas.ndim != 1 or pos.shape[0] != mas.shape[0]:
            raise ValueError(f"inconsistent ensemble shapes {pos.shape} / {mas.shape}")
        if pos.shape[0] == 0:
            raise ValueError("empty ensemble")
        if np.any(mas < 0):
            raise ValueError("negative particle mass")
        if not mas.sum() > 0:
            raise ValueError("total mass must be positive")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "masses", _frozen(mas))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def with_positions(self, positions: np.ndarray) -> "ParticleEnsemble":
        """Same masses (the identical array object), new positions."""
        new = object.__new__(ParticleEnsemble)
        pos = np.array(positions, dtype=float, copy=True)
        if pos.shape != self.positions.shape:
            raise ValueError(f"position shape changed: {pos.shape} != {self.positions.shape}")
        object.__setattr__(new, "positions", _frozen(pos))
        object.__setattr__(new, "masses", self.masses)
        return new

    def translated(self, shift) -> "ParticleEnsemble":
        shift = np.asarray(shift, dtype=float).reshape(1, -1)
        return self.with_positions(self.positions + shift)


@dataclass(frozen=True)
class GridSpec:
    """Regular grid i h for integer i with |i h|_inf <= R (a box of half-width R)."""

    spacing: float
    radius: float
    dimension: int

    def __post_init__(self):
        if not (self.spacing > 0 and self.radius > 0):
            raise ValueError("grid spacing and radius must be positive")
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.index_extent < 0:
            raise ValueError("grid contains no nodes")

    @property
    def index_extent(self) -> int:
        # Guard against float division shortfall (2.5/0.02 can round below 125).
        return int(np.floor(self.radius / self.spacing + 1e-9))

    @property
    def nodes_per_axis(self) -> int:
        return 2 * self.index_extent + 1

    @property
    def node_count(self) -> int:
        return self.nodes_per_axis**self.dimension

    def indices(self) -> np.ndarray:
        """Integer index tuples in lexicographic order, shape (node_count, d)."""
        n = self.index_extent
        axis = np.arange(-n, n + 1)
        if self.dimension == 1:
            return axis[:, None]
        a, b = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=1)

    def points(self) -> np.ndarray:
        return self.indices() * self.spacing


@dataclass(frozen=True)
class GridField:
    """Scalar field sampled at every node of a GridSpec, lexicographic order."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.node_count,):
            raise ValueError(f"expected {self.grid.node_count} values, got shape {vals.shape}")
        object.__setattr__(self, "values", _frozen(vals))

    def to_csv(self, path) -> None:
        coords = self.grid.points()
        header = ["x1", "x2"][: self.grid.dimension] + ["value"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row, val in zip(coords, self.values):
                w.writerow([repr(float(c)) for c in row] + [repr(float(val))])


def discretize_density(rho0, grid: GridSpec, normalize: float | None = None,
                       quadrature: str = "midpoint") -> ParticleEnsemble:
    """Place one particle per grid node with mass from the initial density.

    ``quadrature="midpoint"`` uses m_i = rho0(i h) h^d; ``"cell"`` integrates
    rho0 over the cell with a tensor 3-point Gauss rule.  ``normalize``
    rescales the masses to the given total.  Particles below
    DROP_FRACTION * max mass are dropped.
    """
    pts = grid.points()
    h, d = grid.spacing, grid.dimension
    if quadrature == "midpoint":
        vals = np.asarray(rho0(pts), dtype=float)
        masses = vals * h**d
    elif quadrature == "cell":
        masses = np.zeros(len(pts))
        if d == 1:
            for node, wgt in zip(_GL3_NODES, _GL3_WEIGHTS):
                masses += wgt * np.asarray(rho0(pts + node * h), dtype=float)
        else:
            for na, wa in zip(_GL3_NODES, _GL3_WEIGHTS):
                for nb, wb in zip(_GL3_NODES, _GL3_WEIGHTS):
                    shift = np.array([na * h, nb * h])
                    masses += wa * wb * np.asarray(rho0(pts + shift), dtype=float)
        masses *= h**d
    else:
        raise ValueError(f"unknown quadrature rule {quadrature!r}")

    if masses.shape != (len(pts),):
        raise ValueError("density must return one value per grid node")
    if np.any(masses < 0):
        raise ValueError("initial density returned negative values")
    top = masses.max()
    if not top > 0:
        raise ValueError("initial density vanishes on the whole grid")
    keep = masses > DROP_FRACTION * top
    pts, masses = pts[keep], masses[keep]
    if normalize is not None:
        if not normalize > 0:
            raise ValueError("normalization target must be positive")
        masses = masses * (normalize / masses.sum())
    return ParticleEnsemble(positions=pts, masses=masses)


def second_moment(e: ParticleEnsemble) -> float:
    """M2 = sum_i m_i |X_i|^2."""
    return float((e.masses * (e.positions * e.positions).sum(axis=1)).sum())


def blob_density(e: ParticleEnsemble, spec: Mollifier, x) -> np.ndarray:
    """(phi_eps * mu)(x) = sum_i phi_eps(x - X_i) m_i, for x of shape (..., d)."""
    pts = np.asarray(x, dtype=float)
    scalar = False
    if e.dimension == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.ndim == 1:
        pts, scalar = pts[None, :], True
    diff = pts[..., None, :] - e.positions
    vals = (spec.phi_of_r2((diff * diff).sum(axis=-1)) * e.masses).sum(axis=-1)
    return float(vals[0]) if scalar else vals


def sample_on_grid(e: ParticleEnsemble, spec: Mollifier, grid: GridSpec,
                   block: int = 4096) -> GridField:
    """Blob density at every grid node, evaluated in lexicographic order."""
    pts = grid.points()
    out = np.empty(len(pts))
    for a in range(0, len(pts), block):
        diff = pts[a:a + block, None, :] - e.positions[None, :, :]
        out[a:a + block] = (spec.phi_of_r2((diff * diff).sum(axis=-1)) * e.masses).sum(axis=1)
    return GridField(grid=grid, values=out)
