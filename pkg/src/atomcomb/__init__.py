"""Emission spectra and reflection of a driven multilevel atom on a line.

Steady-state physics of a multilevel ladder atom (a transmon) coupled
to a semi-infinite transmission line and driven by one or two coherent
tones.  The periodic steady state is found by harmonic balance of the
Bloch equations; the emitted power spectral density splits into an
elastic comb of Lorentzian lines at the mixing frequencies
(n+1)*omega1 - n*omega2 and an inelastic part computed with the
regression theorem in harmonic space.  A brute-force time-domain
integrator provides an independent cross-check, and a CLI drives
spectra, sweeps, and reflection maps from plain config files.
"""

from .errors import (
    AtomCombError,
    ConfigError,
    ConvergenceError,
    DegenerateDriveError,
    InvalidParameterError,
    SolverError,
    WindowError,
)
from .floquet import (
    FloquetGenerator,
    FourierState,
    assemble_generator,
    converge_harmonics,
    merge_degenerate_drives,
    solve_steady_state,
)
from .model import (
    HBAR,
    TWO_PI,
    DriveConfig,
    TransmonParams,
    calibrate_power_scale,
    decoherence_rate,
    derive_ladder,
    rabi_from_power,
    saturation_rabi,
)
from .spectroscopy import (
    TwoToneMap,
    reflection_from_state,
    reflection_single_tone,
    two_tone_map,
)
from .spectrum import (
    SpectrumConfig,
    SpectrumResult,
    coherent_spectrum,
    compute_spectrum,
    incoherent_spectrum,
    normalize_psd,
)
from .sweep import (
    Peak,
    PeakList,
    SweepGrid,
    SweepRow,
    SweepSpec,
    detect_peaks,
    run_sweep,
)
from .timedomain import (
    DensityMatrixTrajectory,
    default_dt,
    fourier_project,
    incoherent_spectrum_oracle,
    integrate_master_equation,
)
from .validate import CheckResult, run_validation_suite

__version__ = "0.1.0"

__all__ = [
    "AtomCombError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateDriveError",
    "InvalidParameterError",
    "SolverError",
    "WindowError",
    "FloquetGenerator",
    "FourierState",
    "assemble_generator",
    "converge_harmonics",
    "merge_degenerate_drives",
    "solve_steady_state",
    "HBAR",
    "TWO_PI",
    "DriveConfig",
    "TransmonParams",
    "calibrate_power_scale",
    "decoherence_rate",
    "derive_ladder",
    "rabi_from_power",
    "saturation_rabi",
    "TwoToneMap",
    "reflection_from_state",
    "reflection_single_tone",
    "two_tone_map",
    "SpectrumConfig",
    "SpectrumResult",
    "coherent_spectrum",
    "compute_spectrum",
    "incoherent_spectrum",
    "normalize_psd",
    "Peak",
    "PeakList",
    "SweepGrid",
    "SweepRow",
    "SweepSpec",
    "detect_peaks",
    "run_sweep",
    "DensityMatrixTrajectory",
    "default_dt",
    "fourier_project",
    "incoherent_spectrum_oracle",
    "integrate_master_equation",
    "CheckResult",
    "run_validation_suite",
    "__version__",
]
