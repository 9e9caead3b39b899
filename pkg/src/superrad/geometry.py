"""Atomic sample geometries: regular lattices, atom removal and positional jitter.

Lengths are in micrometres, wavevectors in rad/um and rates in 1/us.

Random perturbations draw from ``numpy.random.Generator(PCG64(seed))``. PCG64
streams are stable across numpy releases, so a given seed always removes the
same atoms and produces the same jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

# 87Rb D1 line (5S1/2 -> 5P1/2).
RB87_D1_WAVELENGTH_UM = 0.795
# 87Rb D2 line (5S1/2 -> 5P3/2).
RB87_D2_WAVELENGTH_UM = 0.780
# Half the single-atom population decay rate, 2*gamma1 = 37 / us.
RB87_GAMMA1_PER_US = 18.5


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class SampleGeometry:
    """Atom positions together with the excitation wavevector and decay rate.

    ``k0_direction`` is normalised on construction. Coincident atoms are
    allowed here so that degenerate test configurations can be built; the
    kernel warns about them.
    """

    positions: np.ndarray
    k0_magnitude: float
    k0_direction: np.ndarray
    gamma1: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1 and pos.size == 0:
            pos = pos.reshape(0, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (N, 3), got {pos.shape}")
        if pos.shape[0] < 1:
            raise ValueError("a sample needs at least one atom")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if not (self.k0_magnitude > 0 and math.isfinite(self.k0_magnitude)):
            raise ValueError(f"k0_magnitude must be > 0, got {self.k0_magnitude}")
        if not (self.gamma1 > 0 and math.isfinite(self.gamma1)):
            raise ValueError(f"gamma1 must be > 0, got {self.gamma1}")
        direction = np.array(self.k0_direction, dtype=float).reshape(3)
        norm = np.linalg.norm(direction)
        if not norm > 0:
            raise ValueError("k0_direction must be a non-zero vector")
        direction = direction / norm
        pos.setflags(write=False)
        direction.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "k0_direction", direction)
        object.__setattr__(self, "k0_magnitude", float(self.k0_magnitude))
        object.__setattr__(self, "gamma1", float(self.gamma1))

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    @property
    def k0_vector(self) -> np.ndarray:
        return self.k0_magnitude * self.k0_direction

    @property
    def wavelength(self) -> float:
        return 2 * math.pi / self.k0_magnitude

    def replace_positions(self, positions) -> "SampleGeometry":
        return SampleGeometry(positions, self.k0_magnitude, self.k0_direction, self.gamma1)

    def min_pair_distance(self) -> float:
        """Smallest interatomic distance (``inf`` for a single atom)."""
        if self.n_atoms < 2:
            return math.inf
        d = _pair_distances(self.positions)
        return float(d[np.triu_indices(self.n_atoms, 1)].min())

    def max_pair_distance(self) -> float:
        if self.n_atoms < 2:
            return 0.0
        return float(_pair_distances(self.positions).max())

    def has_coincident_atoms(self) -> bool:
        return self.min_pair_distance() == 0.0

    def same_as(self, other: "SampleGeometry") -> bool:
        """Bit-for-bit equality of every field."""
        return (
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.k0_direction, other.k0_direction)
            and self.k0_magnitude == other.k0_magnitude
            and self.gamma1 == other.gamma1
        )


def _pair_distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class PerturbationSpec:
    removal_indices: Optional[Sequence[int]] = None
    removal_count: Optional[int] = None
    jitter_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.removal_indices is not None and self.removal_count is not None:
            raise ValueError("set at most one of removal_indices / removal_count")
        if self.removal_count is not None and self.removal_count < 0:
            raise ValueError(f"removal_count must be >= 0, got {self.removal_count}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def build_lattice(
    dims: Sequence[int],
    spacing: float,
    wavelength: float = RB87_D1_WAVELENGTH_UM,
    gamma1: float = RB87_GAMMA1_PER_US,
    k0_direction: Optional[Sequence[float]] = None,
) -> SampleGeometry:
    """Simple cubic lattice of ``dims[0] x dims[1] x dims[2]`` atoms centred on the origin.

    Atoms are ordered with the last axis varying fastest, so
    ``positions.reshape(*dims, 3)`` recovers the lattice. Without an explicit
    ``k0_direction`` the wavevector points along the longest lattice axis
    (the last one on ties).
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    if not spacing > 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    if not wavelength > 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    axes = [(np.arange(n) - (n - 1) / 2.0) * spacing for n in dims]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    if k0_direction is None:
        long_axis = max(range(3), key=lambda i: (dims[i], i))
        k0_direction = np.eye(3)[long_axis]
    return SampleGeometry(grid, 2 * math.pi / wavelength, k0_direction, gamma1)


def remove_atoms(sample: SampleGeometry, spec: PerturbationSpec) -> SampleGeometry:
    """Delete atoms by explicit index or by drawing ``removal_count`` of them at random.

    Random removal samples uniformly without replacement over all indices.
    Surviving atoms keep their original order.
    """
    n = sample.n_atoms
    if spec.removal_indices is not None:
        idx = np.asarray(spec.removal_indices, dtype=int).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError(f"removal index out of range for N={n}")
        if np.unique(idx).size >= n:
            raise ValueError("cannot remove every atom")
    elif spec.removal_count:
        if spec.removal_count >= n:
            raise ValueError(f"removal_count={spec.removal_count} must be < N={n}")
        idx = _rng(spec.seed).choice(n, size=spec.removal_count, replace=False)
    else:
        return sample
    keep = np.ones(n, dtype=bool)
    keep[idx] = False
    return sample.replace_positions(sample.positions[keep])


def jitter_positions(sample: SampleGeometry, sigma: float, seed: int) -> SampleGeometry:
    """Displace every coordinate by an independent N(0, sigma^2) draw."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return sample
    noise = _rng(seed).normal(0.0, sigma, size=sample.positions.shape)
    return sample.replace_positions(sample.positions + noise)


def perturb(sample: SampleGeometry, spec: PerturbationSpec) -> SampleGeometry:
    """Apply removal then jitter, using one seed for both."""
    out = remove_atoms(sample, spec)
    # offset keeps the jitter stream independent of the removal draw
    return jitter_positions(out, spec.jitter_sigma, spec.seed + 0x9E3779B9)


# ---------------------------------------------------------------------------
# text table import/export


def write_sample(sample: SampleGeometry, path) -> None:
    """One atom per line (x y z in um) below ``# k0`` and ``# gamma1`` header lines."""
    k = sample.k0_vector.tolist()
    lines = [
        f"# k0 {k[0]!r} {k[1]!r} {k[2]!r}",
        f"# gamma1 {sample.gamma1!r}",
    ]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in sample.positions.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sample(path) -> SampleGeometry:
    k0 = gamma1 = None
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "k0":
                k0 = np.array([float(v) for v in parts[1:4]])
            elif parts and parts[0] == "gamma1":
                gamma1 = float(parts[1])
            continue
        vals = line.split()
        if len(vals) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 coordinates, got {len(vals)}")
        rows.append([float(v) for v in vals])
    if k0 is None or gamma1 is None:
        raise ValueError(f"{path}: missing '# k0' or '# gamma1' header")
    mag = float(np.linalg.norm(k0))
    return SampleGeometry(np.array(rows), mag, k0, gamma1)
