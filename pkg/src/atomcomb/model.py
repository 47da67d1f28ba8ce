"""Physical parameters of the multilevel atom and the two drive tones.

All quantities are stored internally as angular frequencies (rad/s).
Constructors accepting ordinary frequencies in Hz are provided since
device parameters are usually quoted as f = omega / 2pi.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import InvalidParameterError

TWO_PI = 2.0 * math.pi
HBAR = 1.054571817e-34  # J s


def derive_ladder(omega10, Ec_over_h, M, gamma10_rel=0.0):
    """Build the anharmonic level ladder of a weakly nonlinear atom.

    The transition frequency drops by one charging-energy step per level,
    omega_{m,m-1} = omega10 - (m-1) * 2pi * Ec_over_h, and the relaxation
    rate of the m-th transition is m times the first one.

    Parameters
    ----------
    omega10 : float
        |0> <-> |1> transition frequency (rad/s), > 0.
    Ec_over_h : float
        Charging energy divided by Planck's constant (Hz).
    M : int
        Number of retained levels, >= 2.
    gamma10_rel : float
        Relaxation rate of the first transition (rad/s).

    Returns
    -------
    (transition_freqs, level_energies, relax_rates) : tuple of tuples
        Transition frequencies (length M-1), cumulative level energies
        with the ground state at zero (length M), and relaxation rates
        (length M-1), all in rad/s.
    """
    if M < 2:
        raise InvalidParameterError(f"need at least two levels, got M={M}")
    if omega10 <= 0:
        raise InvalidParameterError("omega10 must be positive")
    if gamma10_rel < 0:
        raise InvalidParameterError("gamma10_rel must be non-negative")
    if Ec_over_h < 0:
        warnings.warn(
            "negative charging energy: transition frequencies will increase "
            "with level index (inverted anharmonicity sign convention)",
            stacklevel=2,
        )
    transition_freqs = tuple(
        omega10 - (m - 1) * TWO_PI * Ec_over_h for m in range(1, M)
    )
    level_energies = (0.0,) + tuple(
        math.fsum(transition_freqs[:m]) for m in range(1, M)
    )
    relax_rates = tuple(m * gamma10_rel for m in range(1, M))
    return transition_freqs, level_energies, relax_rates


@dataclass(frozen=True)
class TransmonParams:
    """Level structure and decoherence rates of the multilevel atom.

    Attributes
    ----------
    M : int
        Number of retained levels (>= 2).
    omega10 : float
        |0> <-> |1> transition frequency (rad/s).
    Ec_over_h : float
        Charging energy / h (Hz); sets the anharmonicity.
    gamma10_rel : float
        Relaxation rate of the first transition (rad/s).
    gamma_phi : float
        Pure dephasing rate (rad/s).
    """

    M: int
    omega10: float
    Ec_over_h: float
    gamma10_rel: float
    gamma_phi: float
    transition_freqs: tuple = field(init=False)
    level_energies: tuple = field(init=False)
    relax_rates: tuple = field(init=False)

    def __post_init__(self):
        if self.gamma_phi < 0:
            raise InvalidParameterError("gamma_phi must be non-negative")
        tf, le, rr = derive_ladder(
            self.omega10, self.Ec_over_h, self.M, self.gamma10_rel
        )
        object.__setattr__(self, "transition_freqs", tf)
        object.__setattr__(self, "level_energies", le)
        object.__setattr__(self, "relax_rates", rr)

    @classmethod
    def from_frequencies(cls, f10_Hz, Ec_Hz, Gamma10_Hz, Gamma_phi_Hz, M=5):
        """Construct from ordinary frequencies in Hz (all quoted as f = omega/2pi)."""
        return cls(
            M=M,
            omega10=TWO_PI * f10_Hz,
            Ec_over_h=Ec_Hz,
            gamma10_rel=TWO_PI * Gamma10_Hz,
            gamma_phi=TWO_PI * Gamma_phi_Hz,
        )

    def relax_rate(self, m):
        """Relaxation rate of the |m> -> |m-1> transition (rad/s); zero for m <= 0."""
        if m <= 0:
            return 0.0
        return self.relax_rates[m - 1]


def decoherence_rate(m, n, params):
    """Decay rate of the <sigma_mn> coherence (rad/s).

    Half the sum of the total relaxation out of both levels plus a pure
    dephasing contribution (m - n)^2 * gamma_phi.  Symmetric in (m, n)
    and zero dephasing for populations (m == n).
    """
    if not (0 <= m < params.M and 0 <= n < params.M):
        raise InvalidParameterError(
            f"level indices ({m}, {n}) outside 0..{params.M - 1}"
        )
    relax = (n * params.relax_rate(n) + m * params.relax_rate(m)) / 2.0
    return relax + (m - n) ** 2 * params.gamma_phi


def rabi_from_power(P_dBm, k):
    """Rabi frequency (rad/s) for a source power in dBm.

    The field amplitude scales as the square root of the power in mW,
    Omega = k * sqrt(10**(P_dBm / 10)), so Omega doubles every +6.02 dB.
    """
    if k < 0:
        raise InvalidParameterError("calibration factor k must be non-negative")
    return k * math.sqrt(10.0 ** (P_dBm / 10.0))


def saturation_rabi(params):
    """Rabi frequency at which the reflection of a two-level atom crosses zero.

    Solves 1 - (Gamma/gamma) / (1 + Omega^2 / (Gamma gamma)) = 0 for Omega,
    using the first transition's rates.  Requires Gamma > gamma (i.e. some
    pure dephasing headroom below the radiative limit gamma = Gamma / 2).
    """
    Gamma = params.gamma10_rel
    gamma = decoherence_rate(0, 1, params)
    if Gamma <= gamma:
        raise InvalidParameterError(
            "no reflection zero exists: requires Gamma10 > gamma10"
        )
    return math.sqrt(Gamma * gamma * (Gamma / gamma - 1.0))


def calibrate_power_scale(params, P_zero_dBm=-130.0):
    """Calibration factor k (rad/s per sqrt-mW) placing the reflection zero at P_zero_dBm."""
    return saturation_rabi(params) / math.sqrt(10.0 ** (P_zero_dBm / 10.0))


@dataclass(frozen=True)
class DriveConfig:
    """Two continuous drive tones.

    Attributes
    ----------
    omega1, omega2 : float
        Carrier frequencies (rad/s).
    Omega1, Omega2 : float
        Rabi amplitudes (rad/s), >= 0.
    phase1, phase2 : float
        Drive phases (rad); both zero for an in-phase combiner.
    """

    omega1: float
    omega2: float
    Omega1: float
    Omega2: float
    phase1: float = 0.0
    phase2: float = 0.0

    def __post_init__(self):
        if self.Omega1 < 0 or self.Omega2 < 0:
            raise InvalidParameterError("Rabi amplitudes must be non-negative")

    @property
    def omega_s(self):
        """Rotating-frame frequency, the mean of the two carriers (rad/s)."""
        return (self.omega1 + self.omega2) / 2.0

    @property
    def delta(self):
        """Half the carrier difference (omega1 - omega2) / 2 (rad/s)."""
        return (self.omega1 - self.omega2) / 2.0

    @classmethod
    def from_rabi(cls, f1_Hz, f2_Hz, Omega1_Hz, Omega2_Hz, phase1=0.0, phase2=0.0):
        """Construct from frequencies and Rabi amplitudes in Hz."""
        return cls(
            omega1=TWO_PI * f1_Hz,
            omega2=TWO_PI * f2_Hz,
            Omega1=TWO_PI * Omega1_Hz,
            Omega2=TWO_PI * Omega2_Hz,
            phase1=phase1,
            phase2=phase2,
        )

    @classmethod
    def from_power(cls, f1_Hz, f2_Hz, P1_dBm, P2_dBm, k1, k2, phase1=0.0, phase2=0.0):
        """Construct from source powers in dBm with calibration factors k1, k2."""
        return cls(
            omega1=TWO_PI * f1_Hz,
            omega2=TWO_PI * f2_Hz,
            Omega1=rabi_from_power(P1_dBm, k1),
            Omega2=rabi_from_power(P2_dBm, k2),
            phase1=phase1,
            phase2=phase2,
        )

    def swapped(self):
        """The same physical drive with the tone labels exchanged."""
        return DriveConfig(
            omega1=self.omega2,
            omega2=self.omega1,
            Omega1=self.Omega2,
            Omega2=self.Omega1,
            phase1=self.phase2,
            phase2=self.phase1,
        )
