"""Pairwise decay kernel of the single-excitation amplitude equations.

In the phase-shifted amplitudes ``beta_j`` the dynamics read
``d beta / dt = -gamma1 F beta`` with

    F_jk = sinc(k0 |r_j - r_k|) exp(-i k0 . (r_j - r_k)).

F is the angular average of plane waves over the unit sphere, hence a
Hermitian positive semi-definite Gram matrix with unit diagonal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import SampleGeometry

_SINC_SERIES_CUTOFF = 1e-4


def sinc(x):
    """sin(x)/x with a Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SINC_SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def coupling_entry(r, k0_vector) -> complex:
    """Kernel element for separation vector ``r`` (um) and wavevector ``k0_vector`` (rad/um)."""
    r = np.asarray(r, dtype=float)
    k = np.asarray(k0_vector, dtype=float)
    kr = float(np.linalg.norm(k)) * float(np.linalg.norm(r))
    return complex(sinc(kr) * np.exp(-1j * float(k @ r)))


@dataclass(frozen=True, eq=False)
class CouplingKernel:
    matrix: np.ndarray
    sample: SampleGeometry

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[0]


def build_kernel(sample: SampleGeometry) -> CouplingKernel:
    """Dense N x N kernel; exactly Hermitian with an exact unit diagonal."""
    if sample.has_coincident_atoms():
        warnings.warn(
            "sample contains coincident atoms; their kernel entries are 1",
            RuntimeWarning,
            stacklevel=2,
        )
    pos = sample.positions
    n = pos.shape[0]
    k0 = sample.k0_magnitude
    iu, ju = np.triu_indices(n, 1)
    diff = pos[iu] - pos[ju]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    phase = diff @ sample.k0_vector
    upper = sinc(k0 * dist) * np.exp(-1j * phase)

    f = np.zeros((n, n), dtype=complex)
    f[iu, ju] = upper
    f[ju, iu] = upper.conj()
    f[np.diag_indices(n)] = 1.0
    f.setflags(write=False)
    return CouplingKernel(f, sample)


def collective_rate(kernel: CouplingKernel) -> float:
    """Decay rate (1/us) of the phase-matched symmetric state: gamma1 * <beta0|F|beta0>."""
    gamma1 = kernel.sample.gamma1
    total = kernel.matrix.sum() / kernel.n_atoms
    if abs(total.imag) > 1e-10:
        raise ValueError(f"kernel sum has imaginary part {total.imag:.3e}; kernel not Hermitian")
    return gamma1 * float(total.real)


def symmetric_state_residual(kernel: CouplingKernel) -> float:
    """Norm of F beta0 - (gamma_col/gamma1) beta0; zero iff beta0 is an eigenvector."""
    n = kernel.n_atoms
    beta0 = np.full(n, 1.0 / np.sqrt(n))
    ratio = collective_rate(kernel) / kernel.sample.gamma1
    return float(np.linalg.norm(kernel.matrix @ beta0 - ratio * beta0))
