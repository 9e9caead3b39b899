"""Far-field photon observables from the atomic eigenmodes.

Each eigenmode radiates into direction ``n`` with the far-field amplitude

    A_m(n) = sum_j exp(i (k0 - k0 n) . r_j) V_jm,

and the spectral amplitude of the emitted photon at detuning ``Delta`` is
``E(n, Delta) = sum_m A_m(n) c_m / (gamma1 lambda_m - i Delta)``. All
detuning integrals are done in closed form; only the solid-angle integral
uses quadrature. The density normalisation ``1/(2 pi)`` follows from
requiring emitted probability + surviving population = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import EigenSystem
from .errors import NumericalError
from .geometry import SampleGeometry

# Modes below this eigenvalue do not radiate at t = infinity.
DARK_MODE_THRESHOLD = 1e-12
# Polar nodes devoted to the cap when the grid is split at a cone boundary.
SPLIT_CAP_FRACTION = 0.25
_BLOCK = 2048


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Product quadrature on the unit sphere; ``theta``/``phi`` are measured from ``axis``."""

    directions: np.ndarray
    weights: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    axis: np.ndarray
    n_polar: int
    n_azimuth: int
    split_angle: Optional[float] = None

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values):
        return np.dot(self.weights, values).item()

    def matches(self, other: "AngularGrid") -> bool:
        return self is other or (
            np.array_equal(self.directions, other.directions)
            and np.array_equal(self.weights, other.weights)
        )


def _frame(axis: np.ndarray):
    e3 = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e2 = np.cross(e3, helper)
    e2 /= np.linalg.norm(e2)
    e1 = np.cross(e2, e3)
    return e1, e2, e3


def _gauss_legendre(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), w * half


def build_angular_grid(
    n_polar: int,
    n_azimuth: int,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    split_angle: Optional[float] = None,
) -> AngularGrid:
    """Gauss-Legendre nodes in cos(theta) times a uniform azimuthal rule.

    With ``split_angle`` the cos(theta) interval is cut at ``cos(split_angle)``
    and each piece gets its own Gauss-Legendre rule (a quarter of the polar
    nodes on the cap). A cone of that half-angle then coincides with a panel
    boundary, so cone integrals converge like smooth integrals.
    """
    if n_polar < 2 or n_azimuth < 2:
        raise ValueError(f"grid needs n_polar >= 2 and n_azimuth >= 2, got {n_polar}x{n_azimuth}")
    axis = np.asarray(axis, dtype=float).reshape(3)
    if not np.linalg.norm(axis) > 0:
        raise ValueError("grid axis must be non-zero")
    if split_angle is None:
        mu, wmu = _gauss_legendre(n_polar, -1.0, 1.0)
    else:
        if not 0 < split_angle < math.pi:
            raise ValueError(f"split_angle must lie in (0, pi), got {split_angle}")
        n_cap = max(2, int(round(SPLIT_CAP_FRACTION * n_polar)))
        n_rest = n_polar - n_cap
        if n_rest < 2:
            raise ValueError(f"n_polar={n_polar} too small for a split grid")
        cut = math.cos(split_angle)
        mu_rest, w_rest = _gauss_legendre(n_rest, -1.0, cut)
        mu_cap, w_cap = _gauss_legendre(n_cap, cut, 1.0)
        mu, wmu = np.concatenate([mu_rest, mu_cap]), np.concatenate([w_rest, w_cap])

    phi = 2 * math.pi * np.arange(n_azimuth) / n_azimuth
    mu_all = np.repeat(mu, n_azimuth)
    phi_all = np.tile(phi, mu.size)
    sin_t = np.sqrt(np.clip(1.0 - mu_all**2, 0.0, None))
    e1, e2, e3 = _frame(axis)
    dirs = (
        np.outer(sin_t * np.cos(phi_all), e1)
        + np.outer(sin_t * np.sin(phi_all), e2)
        + np.outer(mu_all, e3)
    )
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    weights = np.repeat(wmu, n_azimuth) * (2 * math.pi / n_azimuth)
    arrays = (dirs, weights, np.arccos(np.clip(mu_all, -1, 1)), phi_all, e3)
    for a in arrays:
        a.setflags(write=False)
    return AngularGrid(*arrays, n_polar=n_polar, n_azimuth=n_azimuth, split_angle=split_angle)


@dataclass(frozen=True, eq=False)
class ModeFunction:
    projections: np.ndarray  # (modes, directions)
    eigen: EigenSystem
    grid: AngularGrid
    gamma1: float


def mode_projection(sample: SampleGeometry, eigen: EigenSystem, grid: AngularGrid) -> ModeFunction:
    """Evaluate every A_m on every grid direction as one dense (D x N)(N x M) product."""
    pos = sample.positions
    if eigen.eigenvectors.shape[0] != pos.shape[0]:
        raise ValueError(
            f"eigen system has {eigen.eigenvectors.shape[0]} atoms, sample has {pos.shape[0]}"
        )
    base = pos @ sample.k0_vector
    out = np.empty((grid.size, eigen.n_modes), dtype=complex)
    for s in range(0, grid.size, _BLOCK):
        n_blk = grid.directions[s : s + _BLOCK]
        phase = base[None, :] - sample.k0_magnitude * (n_blk @ pos.T)
        out[s : s + _BLOCK] = np.exp(1j * phase) @ eigen.eigenvectors
    proj = out.T
    proj.setflags(write=False)
    return ModeFunction(proj, eigen, grid, sample.gamma1)


def quadrature_gram(modefn: ModeFunction, n_modes: int) -> np.ndarray:
    """(1/4pi) sum_i w_i A_m(n_i) A*_m'(n_i) over the leading ``n_modes`` modes."""
    a = modefn.projections[:n_modes]
    return (a * modefn.grid.weights) @ a.conj().T / (4 * math.pi)


def quadrature_orthogonality_error(modefn: ModeFunction, n_modes: int = 20) -> float:
    """Largest relative deviation of :func:`quadrature_gram` from diag(lambda)."""
    lam = modefn.eigen.eigenvalues[:n_modes]
    g = quadrature_gram(modefn, n_modes)
    scale = np.sqrt(np.outer(lam, lam))
    return float(np.max(np.abs(g - np.diag(lam)) / scale))


@dataclass(frozen=True, eq=False)
class EmissionProfile:
    """Emitted photon probability per steradian, accumulated up to ``time`` (us, or inf)."""

    density: np.ndarray
    time: float
    total: float
    grid: AngularGrid
    imag_residue: float = 0.0


def _time_kernel(lam: np.ndarray, gamma1: float, t: float) -> np.ndarray:
    # (1 - exp(-gamma1 (l + l') t)) / (l + l'), continuous at l + l' = 0
    s = lam[:, None] + lam[None, :]
    if math.isinf(t):
        return 1.0 / s
    x = gamma1 * t * s
    pos = s > 0
    out = np.full(s.shape, gamma1 * t)
    out[pos] = -np.expm1(-x[pos]) / s[pos]
    return out


def angular_density(modefn: ModeFunction, t: float) -> EmissionProfile:
    if not t >= 0:
        raise ValueError(f"t must be >= 0 or inf, got {t}")
    grid = modefn.grid
    if t == 0:
        return EmissionProfile(np.zeros(grid.size), 0.0, 0.0, grid)
    lam = modefn.eigen.eigenvalues
    c = modefn.eigen.mode_coefficients
    keep = lam > DARK_MODE_THRESHOLD if math.isinf(t) else np.ones(lam.size, dtype=bool)
    g = _time_kernel(lam[keep], modefn.gamma1, t)
    b = modefn.projections[keep] * c[keep, None]

    dens = np.empty(grid.size, dtype=complex)
    for s in range(0, grid.size, _BLOCK):
        blk = b[:, s : s + _BLOCK]
        dens[s : s + _BLOCK] = np.einsum("md,md->d", blk, g @ blk.conj())
    dens /= 2 * math.pi
    residue = float(np.max(np.abs(dens.imag))) if dens.size else 0.0
    if residue > 1e-9 * max(1.0, float(np.max(np.abs(dens.real)))):
        raise NumericalError(f"angular density has imaginary residue {residue:.3e}")
    density = dens.real.copy()
    density.setflags(write=False)
    return EmissionProfile(density, float(t), grid.integrate(density), grid, residue)


def cone_fraction(
    profile: EmissionProfile, axis: Sequence[float], half_angle: float, two_sided: bool = False
) -> float:
    """Share of the emitted probability within ``half_angle`` of ``axis``.

    With ``two_sided`` the backward cone around ``-axis`` is counted as well.
    """
    if not 0 < half_angle <= math.pi:
        raise ValueError(f"half_angle must lie in (0, pi], got {half_angle}")
    if not profile.total > 0:
        raise ValueError("profile carries no emitted probability")
    axis = np.asarray(axis, dtype=float).reshape(3)
    axis = axis / np.linalg.norm(axis)
    cosang = profile.grid.directions @ axis
    if two_sided:
        cosang = np.abs(cosang)
    inside = cosang >= math.cos(half_angle) - 1e-12
    w = profile.grid.weights
    return float(np.dot(w[inside], profile.density[inside]) / profile.total)


def _field_inner(a: ModeFunction, b: ModeFunction) -> complex:
    # <E_a, E_b> = (2pi/gamma1) sum_i w_i sum_mm' A^a*_m A^b_m' c^a*_m c^b_m' / (l^a_m + l^b_m')
    la, lb = a.eigen.eigenvalues, b.eigen.eigenvalues
    ka, kb = la > DARK_MODE_THRESHOLD, lb > DARK_MODE_THRESHOLD
    ba = a.projections[ka] * a.eigen.mode_coefficients[ka, None]
    bb = b.projections[kb] * b.eigen.mode_coefficients[kb, None]
    g = 1.0 / (la[ka][:, None] + lb[kb][None, :])
    w = a.grid.weights
    total = 0j
    for s in range(0, w.size, _BLOCK):
        q = g @ (bb[:, s : s + _BLOCK] * w[s : s + _BLOCK])
        total += np.vdot(ba[:, s : s + _BLOCK], q)
    return 2 * math.pi / a.gamma1 * total


def mode_overlap(modefn_a: ModeFunction, modefn_b: ModeFunction) -> float:
    """Normalised overlap |<E_a,E_b>|^2 / (<E_a,E_a><E_b,E_b>) of two emitted photon modes."""
    if not modefn_a.grid.matches(modefn_b.grid):
        raise ValueError("mode functions live on different angular grids")
    if modefn_a.gamma1 != modefn_b.gamma1:
        raise ValueError(f"gamma1 differs: {modefn_a.gamma1} vs {modefn_b.gamma1}")
    for name, m in (("a", modefn_a), ("b", modefn_b)):
        if not np.any(m.eigen.eigenvalues > DARK_MODE_THRESHOLD):
            raise ValueError(f"mode function {name} has no radiating modes")
    norm_a = _field_inner(modefn_a, modefn_a).real
    norm_b = _field_inner(modefn_b, modefn_b).real
    if not (norm_a > 0 and norm_b > 0):
        raise ValueError("cannot normalise an empty emitted field")
    cross = _field_inner(modefn_a, modefn_b)
    return float(abs(cross) ** 2 / (norm_a * norm_b))
