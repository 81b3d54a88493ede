"""mdlang: 1D Maxwell-density-matrix solver with Langevin noise.

A staggered-grid full-wave field solver coupled to multilevel
density-matrix dynamics with stochastic fluctuation terms, plus the
verification oracles for the underlying noise covariances and the
spectral analysis pipeline (intensity spectra, instantaneous frequency,
RF beatnote, relative intensity noise).
"""

__version__ = "0.1.0"

from .quantum import QuantumSystem, dephasing_rate, dissipator, hamiltonian, polarization
from .grid import BoundarySpec, GridState, MaterialParams, courant_timestep
from .noise import NoiseModel, initial_condition_2lvl, thermal_photon_number
from .propagator import CellPropagator, cayley_update
from .diffusion import (
    CNumberState,
    assemble_noise_matrix,
    classical_covariance_closed,
    classical_covariance_derived,
    einstein_check,
    factor_block,
    make_params,
    quantum_correlation,
)
from .scenarios import (
    Scenario,
    bloch_vector_metric,
    qcl_hfc_scenario,
    superfluorescence_scenario,
)
from .analysis import (
    TraceRecord,
    bandpass_extract,
    instantaneous_frequency,
    intensity_spectrum,
    power_trace,
    rf_spectrum,
    rin_spectrum,
)

__all__ = [name for name in dir() if not name.startswith("_")]  # noqa: PLE0604
