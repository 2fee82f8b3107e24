"""Collective-spin Ramsey and lock-in spectroscopy simulator.

Builds collective-spin Hamiltonians in the Dicke basis, evolves
interacting ensembles through Ramsey and pi-pulse-train sequences
(closed-system or with Lindblad dissipation), and sweeps detunings into
spectra whose antisymmetry and zero crossing mark the resonance.
"""

__version__ = "0.1.0"

from .errors import AccuracyError, InvariantFailure, SpinspectraError, ValidationError
from .operators import (
    Operator,
    SpinSystem,
    collective_operators,
    exchange_operator,
    expm_hermitian,
)
from .states import (
    DensityMatrix,
    PureState,
    dicke_state,
    ghz_state,
    is_symmetric,
    is_symmetric_density,
    x_polarized,
)
from .hamiltonians import (
    Coefficient,
    FourierCoefficients,
    GeneralCoefficients,
    LockinParams,
    NoiseModel,
    RamseyParams,
    cp_lineshape,
    effective_hamiltonian,
    fourier_coefficients,
    general_hamiltonian,
    lockin_lab_hamiltonian,
    pdd_lineshape,
    ramsey_hamiltonian,
    sinc2_lineshape,
    symmetry_residual,
)
from .evolution import (
    AffineDrive,
    LindbladChannel,
    Schedule,
    Segment,
    evolve_density,
    evolve_pure,
    expectation,
)
from .sequences import alpha_profile, lockin_schedule, ramsey_schedule
from .spectrum import (
    Spectrum,
    antisymmetry_residual,
    locate_peak,
    locate_zero_crossing,
    sweep_lockin,
    sweep_ramsey,
)

__all__ = [
    "AccuracyError",
    "AffineDrive",
    "Coefficient",
    "DensityMatrix",
    "FourierCoefficients",
    "GeneralCoefficients",
    "InvariantFailure",
    "LindbladChannel",
    "LockinParams",
    "NoiseModel",
    "Operator",
    "PureState",
    "RamseyParams",
    "Schedule",
    "Segment",
    "SpinSystem",
    "SpinspectraError",
    "Spectrum",
    "ValidationError",
    "alpha_profile",
    "antisymmetry_residual",
    "collective_operators",
    "cp_lineshape",
    "dicke_state",
    "effective_hamiltonian",
    "evolve_density",
    "evolve_pure",
    "exchange_operator",
    "expectation",
    "expm_hermitian",
    "fourier_coefficients",
    "general_hamiltonian",
    "ghz_state",
    "is_symmetric",
    "is_symmetric_density",
    "locate_peak",
    "locate_zero_crossing",
    "lockin_lab_hamiltonian",
    "lockin_schedule",
    "pdd_lineshape",
    "ramsey_hamiltonian",
    "ramsey_schedule",
    "sinc2_lineshape",
    "sweep_lockin",
    "sweep_ramsey",
    "symmetry_residual",
    "x_polarized",
]
