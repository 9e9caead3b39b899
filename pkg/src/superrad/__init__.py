"""Cooperative spontaneous emission from small lattices of two-level atoms."""

from .geometry import (
    SampleGeometry,
    PerturbationSpec,
    build_lattice,
    remove_atoms,
    jitter_positions,
)
from .kernel import CouplingKernel, coupling_entry, build_kernel, collective_rate
from .dynamics import (
    EigenSystem,
    AmplitudeState,
    diagonalize,
    initial_amplitudes,
    propagate,
    integrate_ode_oracle,
    excited_population,
    per_atom_populations,
    fit_early_decay,
)
from .field import (
    AngularGrid,
    ModeFunction,
    EmissionProfile,
    build_angular_grid,
    mode_projection,
    angular_density,
    cone_fraction,
    mode_overlap,
)
from .errors import NumericalError

__version__ = "0.1.0"
