"""Numerical laboratory for the separated Ising unitary map U(chi, theta)."""

__version__ = "0.1.0"

from .modes import (  # noqa: F401
    Couplings,
    FourierCoeffs,
    IsingParams,
    MomentumGrid,
    Sector,
    antiperiodic_grid,
    assemble_parity_phases,
    d1_ground_phase,
    d2_ground_phase,
    fourier_coeffs,
    ground_phase,
    hbar_term_weights,
    ising_map,
    ising_quasi_energy,
    mode_block_oracle,
    mode_eta,
    mode_gamma,
    mode_kappa,
    periodic_grid,
    quasi_energy,
    spectral_gap,
    wrap_phase,
)
from .dense import (  # noqa: F401
    DenseUnitary,
    EigenDecomp,
    SpinState,
    build_map,
    build_x_layer,
    build_zz_layer,
    concurrence,
    eigendecompose,
    entanglement_sweep,
    ground_state,
    reduced_density,
    trace_moment,
)
from .spectro import (  # noqa: F401
    PowerSpectrum,
    ReconstructedSpectrum,
    TimeSeries,
    controlled_u_series,
    detect_peaks,
    dft,
    predicted_spectrum,
    reconstruct_from_traces,
    reconstruct_levels,
    simulate_series,
)
from .lm import (  # noqa: F401
    LeastSquaresProblem,
    LmResult,
    LmSettings,
    lm_minimize,
    numeric_jacobian,
)
