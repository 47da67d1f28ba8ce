"""Self-validation: harmonic solver versus direct time integration.

The checks run on a reduced instance (the configured atom truncated to
three levels, moderate drive) so the whole suite finishes in well under
a minute while still exercising every solver path: steady-state
invariants, Fourier-amplitude agreement between the harmonic balance
and a brute-force integration of the master equation, and agreement of
the incoherent spectra from the resolvent and from two-time correlators.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List

import numpy as np

from .floquet import assemble_generator, solve_steady_state
from .model import TWO_PI, DriveConfig, TransmonParams
from .spectrum import SpectrumConfig, coherent_weights, incoherent_spectrum
from .timedomain import (
    beat_period,
    fourier_project,
    incoherent_spectrum_oracle,
    integrate_master_equation,
)

__all__ = ["CheckResult", "run_validation_suite"]


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a single validation check."""

    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error <= self.tolerance


def _small_instance(cfg) -> tuple:
    """Reduced (params, drive) pair used by all checks."""
    params = cfg.atom_params()
    if params.M > 3:
        params = replace(params, M=3)
    Gamma10 = params.relax_rate(1)
    drive = DriveConfig(
        omega1=params.omega10 + TWO_PI * 2.5e6,
        omega2=params.omega10 - TWO_PI * 2.5e6,
        Omega1=0.8 * Gamma10,
        Omega2=0.8 * Gamma10,
    )
    return params, drive


def run_validation_suite(cfg) -> List[CheckResult]:
    """Run all validation checks for a parsed run configuration.

    Parameters
    ----------
    cfg : RunConfig
        Parsed configuration; only the atom block is used, truncated to
        three levels.

    Returns
    -------
    list of CheckResult
    """
    params, drive = _small_instance(cfg)
    checks: List[CheckResult] = []

    L = 12
    gen = assemble_generator(params, drive, L=L)
    state = solve_steady_state(gen)

    checks.append(CheckResult("steady_state_trace", abs(state.trace() - 1.0), 1e-10))
    checks.append(CheckResult("hermiticity", state.hermiticity_defect(), 1e-10))
    checks.append(CheckResult("parity", state.parity_defect(), 1e-12))
    pops = np.array([state.population(m) for m in range(params.M)])
    pop_err = max(float(np.max(-pops.real, initial=0.0)),
                  float(np.max(pops.real - 1.0, initial=0.0)),
                  float(np.max(np.abs(pops.imag), initial=0.0)))
    checks.append(CheckResult("population_bounds", pop_err, 1e-10))

    weights = coherent_weights(state, params)
    w_err = max(0.0, -float(weights.min()))
    checks.append(CheckResult("coherent_weights_nonnegative", w_err, 1e-15))

    # direct integration to the periodic steady state, then harmonic projection
    Gamma10 = params.relax_rate(1)
    T = beat_period(drive)
    t_end = 30.0 / Gamma10 + 2.0 * T
    traj = integrate_master_equation(params, drive, t_end)
    projected = fourier_project(traj, L=L)
    ref = np.abs(state.amplitudes)
    mask = ref > 1e-10
    amp_err = float(
        np.max(np.abs(projected.amplitudes[mask] - state.amplitudes[mask]) / ref[mask])
    )
    checks.append(CheckResult("floquet_vs_timedomain_amplitudes", amp_err, 1e-6))

    grid = drive.omega_s + TWO_PI * np.linspace(-30e6, 30e6, 7)
    spec_cfg = SpectrumConfig(grid=grid)
    s_resolvent = incoherent_spectrum(state, gen, params, drive, spec_cfg)
    s_oracle = incoherent_spectrum_oracle(params, drive, grid)
    scale = float(np.max(np.abs(s_oracle)))
    spec_err = float(np.max(np.abs(s_resolvent - s_oracle))) / scale
    checks.append(CheckResult("incoherent_spectrum_match", spec_err, 1e-4))

    return checks
