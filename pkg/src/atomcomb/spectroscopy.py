"""Reflection spectroscopy of a ladder atom at the end of a transmission line.

Single-tone reflection coefficients and two-tone (pump/probe) reflection
maps, both computed from the harmonic steady state of the driven atom.
The atom sits at the end of a semi-infinite line, so the reflected field
is the sum of the incident field and the field radiated back by the
atomic dipole,

    r = 1 + 2i * sum_m sqrt(m) * Gamma_{m,m-1} * <sigma_{m-1,m}> / Omega_p,

where the coherences are evaluated in the steady state and at the
harmonic that oscillates in phase with the probe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateDriveError, InvalidParameterError
from .floquet import FourierState, assemble_generator, solve_steady_state
from .model import DriveConfig, TransmonParams

__all__ = [
    "reflection_from_state",
    "reflection_single_tone",
    "TwoToneMap",
    "two_tone_map",
]


def reflection_from_state(
    state: FourierState,
    params: TransmonParams,
    omega_probe: float,
    omega_s: float,
    delta: float,
    Omega_probe: float,
) -> complex:
    """Reflection coefficient for the probe tone given a harmonic steady state.

    The probe beats against the symmetric frame frequency ``omega_s`` at
    ``omega_probe - omega_s``, so the in-phase component of the lowering
    coherences lives at the harmonic ``l`` with ``l * delta`` equal to
    that offset.  For a single tone ``omega_probe == omega_s`` and the
    relevant harmonic is ``l = 0``.

    Parameters
    ----------
    state : FourierState
        Harmonic steady state of the driven atom.
    params : TransmonParams
        Ladder parameters used to build `state`.
    omega_probe : float
        Angular frequency of the probe tone (rad/s).
    omega_s : float
        Symmetric frame frequency of the harmonic expansion (rad/s).
    delta : float
        Half the tone splitting used for the expansion (rad/s).
    Omega_probe : float
        Probe Rabi amplitude (rad/s); must be positive.

    Returns
    -------
    complex
        Amplitude reflection coefficient of the probe.
    """
    if Omega_probe <= 0.0:
        raise InvalidParameterError("Omega_probe must be positive")
    offset = omega_probe - omega_s
    if abs(offset) < 1e-9 * max(abs(omega_s), 1.0):
        l = 0
    else:
        if delta == 0.0:
            raise InvalidParameterError(
                "probe offset from the frame requires a nonzero beat frequency"
            )
        ratio = offset / delta
        l = int(round(ratio))
        if abs(ratio - l) > 1e-6:
            raise InvalidParameterError(
                "probe frequency does not sit on the harmonic lattice"
            )
    dipole = 0.0 + 0.0j
    for m in range(1, params.M):
        dipole += np.sqrt(m) * params.relax_rate(m) * state.amp(m - 1, m, -l)
    return 1.0 + 2.0j * dipole / Omega_probe


def reflection_single_tone(
    params: TransmonParams,
    omega_probe: float,
    Omega_probe: float,
    phase: float = 0.0,
) -> complex:
    """Reflection coefficient of a single probe tone.

    Solves the time-independent (``L = 0``) steady state in the frame
    rotating at the probe frequency and reads the reflected amplitude
    off the lowering coherences.

    Parameters
    ----------
    params : TransmonParams
        Ladder parameters.
    omega_probe : float
        Probe angular frequency (rad/s).
    Omega_probe : float
        Probe Rabi amplitude (rad/s); must be positive.
    phase : float, optional
        Probe phase; the reflection coefficient is phase-independent,
        the parameter exists for interface symmetry.

    Returns
    -------
    complex
        Amplitude reflection coefficient, ``|r| <= 1`` up to numerical
        round-off.
    """
    drive = DriveConfig(
        omega1=omega_probe,
        omega2=omega_probe,
        Omega1=Omega_probe,
        Omega2=0.0,
        phase1=phase,
        phase2=0.0,
    )
    gen = assemble_generator(params, drive, L=0)
    state = solve_steady_state(gen)
    r = reflection_from_state(
        state, params, omega_probe, drive.omega_s, drive.delta, Omega_probe
    )
    if abs(r) > 1.0 + 1e-6:
        raise InvalidParameterError(
            f"unphysical reflection |r| = {abs(r):.6f} > 1; "
            "check the parameter set"
        )
    return r


@dataclass
class TwoToneMap:
    """Reflection map from a two-tone (pump/probe) frequency sweep.

    Attributes
    ----------
    probe_freqs : numpy.ndarray
        Probe angular frequencies, one per column (rad/s).
    pump_values : numpy.ndarray
        Pump sweep values, one per row; Rabi amplitudes (rad/s) or
        powers (dBm) depending on how the map was built.
    reflection : numpy.ndarray
        Complex reflection coefficients, shape
        ``(len(pump_values), len(probe_freqs))``.
    annotations : dict
        Metadata: probe amplitude, pump frequency, warnings raised.
    """

    probe_freqs: np.ndarray
    pump_values: np.ndarray
    reflection: np.ndarray
    annotations: dict = field(default_factory=dict)


def two_tone_map(
    params: TransmonParams,
    probe_freqs: np.ndarray,
    pump_freq: float,
    pump_rabis: np.ndarray,
    Omega_probe: float,
    L: int = 6,
    weak_probe_limit: Optional[float] = None,
) -> TwoToneMap:
    """Probe reflection versus probe frequency and pump amplitude.

    The probe is kept weak while a pump of varying strength dresses the
    ladder; the probe reflection is extracted from the harmonic of the
    lowering coherences that oscillates at the probe frequency.

    Parameters
    ----------
    params : TransmonParams
        Ladder parameters.
    probe_freqs : array_like
        Probe angular frequencies to sweep (rad/s).
    pump_freq : float
        Pump angular frequency (rad/s), held fixed.
    pump_rabis : array_like
        Pump Rabi amplitudes to sweep (rad/s).
    Omega_probe : float
        Probe Rabi amplitude (rad/s).
    L : int, optional
        Harmonic truncation order for each grid point.
    weak_probe_limit : float, optional
        If the probe amplitude exceeds this value (default: one tenth of
        the smallest nonzero decoherence scale) a warning is recorded,
        because the extracted reflection is then no longer a linear
        response quantity.

    Returns
    -------
    TwoToneMap
        Complex reflection on the (pump, probe) grid.
    """
    probe_freqs = np.asarray(probe_freqs, dtype=float)
    pump_rabis = np.asarray(pump_rabis, dtype=float)
    if Omega_probe <= 0.0:
        raise InvalidParameterError("Omega_probe must be positive")
    if weak_probe_limit is None:
        weak_probe_limit = 0.1 * max(params.relax_rate(1), 1.0)
    annotations: dict = {
        "Omega_probe": Omega_probe,
        "pump_freq": pump_freq,
        "warnings": [],
    }
    if Omega_probe > weak_probe_limit:
        msg = (
            "probe amplitude exceeds the weak-probe regime; the reflection "
            "map mixes in nonlinear probe response"
        )
        warnings.warn(msg, stacklevel=2)
        annotations["warnings"].append(msg)

    refl = np.empty((pump_rabis.size, probe_freqs.size), dtype=complex)
    for i, Omega_pump in enumerate(pump_rabis):
        for j, omega_p in enumerate(probe_freqs):
            if abs(omega_p - pump_freq) < 1e-9 * max(abs(pump_freq), 1.0):
                raise DegenerateDriveError(
                    "probe and pump frequencies coincide at a grid point; "
                    "two-tone extraction is ill-defined there"
                )
            drive = DriveConfig(
                omega1=omega_p,
                omega2=pump_freq,
                Omega1=Omega_probe,
                Omega2=float(Omega_pump),
            )
            gen = assemble_generator(params, drive, L=L)
            state = solve_steady_state(gen)
            r = reflection_from_state(
                state, params, omega_p, drive.omega_s, drive.delta, Omega_probe
            )
            if abs(r) > 1.0 + 1e-6:
                raise InvalidParameterError(
                    f"unphysical reflection |r| = {abs(r):.6f} at "
                    f"probe {omega_p:.6e}, pump Rabi {Omega_pump:.6e}"
                )
            refl[i, j] = r
    return TwoToneMap(
        probe_freqs=probe_freqs,
        pump_values=pump_rabis,
        reflection=refl,
        annotations=annotations,
    )
