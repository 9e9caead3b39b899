"""Eigenmode solution of the amplitude equations and population observables.

The initial state puts amplitude ``1/sqrt(N)`` on every atom (in the
phase-shifted picture), and

    beta(t) = sum_m c_m exp(-gamma1 lambda_m t) v_m,   c_m = v_m^H beta(0).

Times are in microseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError
from .geometry import SampleGeometry
from .kernel import CouplingKernel

EIGENVALUE_CLAMP_SCALE = 1e-10
# Early-decay fit window. A looser P >= 0.7 window picks up the curvature of
# ln P(t) and biases the paper-sample fit low by ~3 %.
EARLY_FIT_MIN_POPULATION = 0.9
EARLY_FIT_MIN_SAMPLES = 20


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral decomposition F = V diag(lambda) V^H, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mode_coefficients: np.ndarray
    clamped_count: int = 0

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True, eq=False)
class AmplitudeState:
    """Atomic amplitudes ``beta_j`` at ``time`` (us).

    The interaction-picture amplitudes are ``alpha_j = exp(i k0 . r_j) beta_j``;
    see :meth:`alpha`. Populations are the same in both pictures.
    """

    beta: np.ndarray
    time: float

    def alpha(self, sample: SampleGeometry) -> np.ndarray:
        return np.exp(1j * (sample.positions @ sample.k0_vector)) * self.beta


def diagonalize(kernel: CouplingKernel) -> EigenSystem:
    f = kernel.matrix
    n = f.shape[0]
    if not np.all(np.isfinite(f)):
        raise NumericalError(f"kernel (N={n}) contains non-finite entries")
    try:
        lam, vecs = np.linalg.eigh(f)
    except np.linalg.LinAlgError as exc:
        herm = float(np.max(np.abs(f - f.conj().T)))
        raise NumericalError(
            f"eigensolver failed for N={n} kernel (max Hermiticity defect {herm:.3e}): {exc}"
        ) from exc
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vecs = np.ascontiguousarray(vecs[:, order])

    floor = -EIGENVALUE_CLAMP_SCALE * n
    if lam[-1] < floor:
        raise NumericalError(
            f"kernel is not positive semi-definite: smallest eigenvalue {lam[-1]:.3e} < {floor:.3e}"
        )
    negative = lam < 0
    clamped = int(negative.sum())
    lam = np.where(negative, 0.0, lam)

    coeffs = vecs.conj().T @ np.full(n, 1.0 / math.sqrt(n))
    for a in (lam, vecs, coeffs):
        a.setflags(write=False)
    return EigenSystem(lam, vecs, coeffs, clamped)


def initial_amplitudes(sample: SampleGeometry) -> AmplitudeState:
    n = sample.n_atoms
    return AmplitudeState(np.full(n, 1.0 / math.sqrt(n), dtype=complex), 0.0)


def propagate(eigen: EigenSystem, t: float, gamma1: float) -> AmplitudeState:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        n = eigen.n_modes
        return AmplitudeState(np.full(n, 1.0 / math.sqrt(n), dtype=complex), 0.0)
    damped = eigen.mode_coefficients * np.exp(-gamma1 * eigen.eigenvalues * t)
    return AmplitudeState(eigen.eigenvectors @ damped, float(t))


def survival_probability(eigen: EigenSystem, t, gamma1: float):
    """sum_m |c_m|^2 exp(-2 gamma1 lambda_m t), vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    w = np.abs(eigen.mode_coefficients) ** 2
    return np.exp(-2 * gamma1 * np.multiply.outer(t, eigen.eigenvalues)) @ w


def _largest_eigenvalue_estimate(f: np.ndarray, iters: int = 500) -> float:
    # power iteration; keeps the oracle free of the LAPACK eigensolver
    v = np.ones(f.shape[0], dtype=complex) + np.linspace(0, 1, f.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = f @ v
        lam_new = float(np.real(np.vdot(v, w)))
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= 1e-12 * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return lam


def integrate_ode_oracle(kernel: CouplingKernel, t: float, dt: float) -> AmplitudeState:
    """Classical RK4 integration of d beta/dt = -gamma1 F beta from the uniform state.

    The last step is shortened to land exactly on ``t``. Only meant as a
    reference for :func:`propagate`.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    f = kernel.matrix
    gamma1 = kernel.sample.gamma1
    lam_max = _largest_eigenvalue_estimate(f)
    if gamma1 * lam_max * dt > 0.01 * (1 + 1e-9):
        raise ValueError(
            f"dt={dt} too large: gamma1*lambda_max*dt = {gamma1 * lam_max * dt:.4g} > 0.01"
        )
    a = -gamma1 * f
    n = f.shape[0]
    beta = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
    steps = int(math.floor(t / dt))
    remainder = t - steps * dt
    if remainder < 1e-12 * dt:
        remainder = 0.0

    def step(b, h):
        k1 = a @ b
        k2 = a @ (b + 0.5 * h * k1)
        k3 = a @ (b + 0.5 * h * k2)
        k4 = a @ (b + h * k3)
        return b + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    for _ in range(steps):
        beta = step(beta, dt)
    if remainder:
        beta = step(beta, remainder)
    return AmplitudeState(beta, float(t))


def excited_population(state: AmplitudeState) -> float:
    return float(np.vdot(state.beta, state.beta).real)


def per_atom_populations(state: AmplitudeState) -> np.ndarray:
    return np.abs(state.beta) ** 2


def fit_early_decay(
    times: Sequence[float],
    populations: Sequence[float],
    min_population: float = EARLY_FIT_MIN_POPULATION,
) -> float:
    """Population decay rate (1/us) from a straight-line fit of ln P(t) while P >= min_population.

    For ``P = exp(-2 gamma t)`` this returns ``2 gamma``.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float)
    if t.shape != p.shape:
        raise ValueError("times and populations must have the same length")
    if np.any(p <= 0):
        raise ValueError("populations must be positive to take logarithms")
    window = p >= min_population
    if window.sum() < EARLY_FIT_MIN_SAMPLES:
        raise ValueError(
            f"only {int(window.sum())} samples with P >= {min_population}; "
            f"need {EARLY_FIT_MIN_SAMPLES}"
        )
    slope, _ = np.polyfit(t[window], np.log(p[window]), 1)
    return float(-slope)
