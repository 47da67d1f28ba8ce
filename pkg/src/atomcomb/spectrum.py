"""Emission spectra of the driven atom and their normalization to dB.

The emitted field couples to the transition coherences with weights
c_m = sqrt(m * omega_{m,m-1} * Gamma_{m,m-1}); the weight matrix
C_mn = c_m c_n factorizes, so both spectral components reduce to a
single "dipole" amplitude per harmonic (coherent part) or a single
resolvent solve per analyzer frequency (incoherent part).

The coherent part is a set of Lorentzian-broadened elastic lines at
omega_s + l * delta.  The incoherent part follows from the quantum
regression theorem carried out in harmonic space: the fluctuation
initial condition is expanded in harmonics of the beat, evolved under
the same Floquet generator, and only the harmonic-balanced (net zero)
combinations survive the long-time average over the beat period.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, SolverError
from .floquet import flat_index, merge_degenerate_drives, assemble_generator, converge_harmonics, solve_steady_state
from .model import HBAR, TWO_PI

#: tolerated relative negative excursion of an incoherent spectrum
NEGATIVE_CLIP = 1e-12


@dataclass(frozen=True)
class SpectrumConfig:
    """Analyzer settings for a spectrum computation.

    Attributes
    ----------
    grid : ndarray
        Strictly increasing lab-frame angular frequencies (rad/s).
    epsilon : float
        Default Lorentzian width of the elastic lines (rad/s).
    epsilon_overrides : dict
        Optional per-harmonic widths {l: eps_l} overriding the default.
    rbw : float
        Resolution bandwidth of the analyzer (rad/s).
    p_off : float
        Background noise power (W); normalization fit parameter.
    z0 : float
        Line impedance (ohm).  Cancels between the 1/(2 Z0) of the
        power spectrum and the sqrt(hbar Z0 / 4 pi) field prefactor,
        so it never enters the spectral kernel; kept for bookkeeping.
    """

    grid: np.ndarray
    epsilon: float = TWO_PI * 100e3
    epsilon_overrides: dict = field(default_factory=dict)
    rbw: float = TWO_PI * 910e3
    p_off: float = 1e-16
    z0: float = 50.0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
            raise ConfigError("grid must be one-dimensional and strictly increasing")
        if self.epsilon <= 0 or any(v <= 0 for v in self.epsilon_overrides.values()):
            raise ConfigError("Lorentzian widths must be positive")
        if self.rbw <= 0:
            raise ConfigError("resolution bandwidth must be positive")
        if self.p_off <= 0:
            raise ConfigError("background power p_off must be positive")

    def epsilon_for(self, l):
        return self.epsilon_overrides.get(l, self.epsilon)


@dataclass(frozen=True)
class SpectrumResult:
    """Spectral densities on the analyzer grid.

    ``s_coherent`` and ``s_incoherent`` are in W s/rad; ``psd_n_db`` is
    the normalized on/off power ratio in dB.
    """

    grid: np.ndarray
    s_coherent: np.ndarray
    s_incoherent: np.ndarray
    psd_n_db: np.ndarray
    metadata: dict

    @property
    def s_total(self):
        return self.s_coherent + self.s_incoherent


def emission_amplitudes(params):
    """Per-transition emission weights c_m, m = 1..M-1."""
    return np.array(
        [
            np.sqrt(m * params.transition_freqs[m - 1] * params.relax_rate(m))
            for m in range(1, params.M)
        ]
    )


def emission_coefficients(params):
    """(M-1) x (M-1) matrix C_mn = c_m c_n of emission weights."""
    c = emission_amplitudes(params)
    return np.outer(c, c)


def coherent_weights(state, params):
    """Per-harmonic elastic line weights w_l = |sum_m c_m <sigma_{m,m-1}>^(l)|^2.

    Returns an array of length 2L + 1 indexed by l + L; real and
    non-negative by construction.
    """
    c = emission_amplitudes(params)
    dip = np.zeros(2 * state.L + 1, dtype=complex)
    for m in range(1, state.M):
        dip += c[m - 1] * state.amplitudes[m, m - 1, :]
    return np.abs(dip) ** 2


def coherent_spectrum(state, params, drive, cfg):
    """Elastic (coherent) spectral density on the analyzer grid (W s/rad)."""
    weights = coherent_weights(state, params)
    omega_s, delta = drive.omega_s, drive.delta
    out = np.zeros_like(cfg.grid)
    for idx, w in enumerate(weights):
        if w == 0.0:
            continue
        l = idx - state.L
        eps = cfg.epsilon_for(l)
        out += w * eps / ((cfg.grid - (omega_s + l * delta)) ** 2 + eps**2)
    return HBAR / (4.0 * np.pi) * out


def _fluctuation_source(state, params):
    """Initial-condition lattice vector of the fluctuation correlator.

    The full product <sigma_ab B> with the summed emission operator
    B = sum_n c_n sigma_{n-1,n}, minus the product of steady-state means,
    expanded in harmonics of the beat and truncated at |l| <= L.
    """
    M, L = state.M, state.L
    v = state.amplitudes
    c = emission_amplitudes(params)

    b_full = np.zeros_like(v)
    for n in range(1, M):
        b_full[:, n - 1, :] += c[n - 1] * v[:, n, :]

    # d(l) = sum_n c_n <sigma_{n-1,n}>^(l)
    d = np.zeros(2 * L + 1, dtype=complex)
    for n in range(1, M):
        d += c[n - 1] * v[n - 1, n, :]

    b_mean = np.zeros_like(v)
    for idx in range(2 * L + 1):
        lp = idx - L
        if d[idx] == 0.0:
            continue
        # b_mean[..., l] += v[..., l - lp] * d(lp), truncated at the window
        if lp >= 0:
            b_mean[:, :, lp:] += v[:, :, : 2 * L + 1 - lp] * d[idx]
        else:
            b_mean[:, :, :lp] += v[:, :, -lp:] * d[idx]

    b = (b_full - b_mean).reshape(M, M, 2 * L + 1)
    # The trace of the fluctuation source vanishes at every beat harmonic
    # (Tr[B rho(t)] - Tr[rho(t)] <B>(t) = 0 for all t); truncation breaks
    # this, so project against every shifted copy of the steady state.
    # Each shift l0 of the steady state is an eigenvector of the lattice
    # generator at the purely imaginary eigenvalue -i l0 delta.
    for l0 in range(-L, L + 1):
        coeff = np.trace(b[:, :, l0 + L])
        if coeff != 0.0:
            b -= coeff * _shifted_state(v, l0)
    # exact cleanup of the leftover traces (truncation residue of the
    # projection above), spread evenly over the population sites
    for l0 in range(-L, L + 1):
        coeff = np.trace(b[:, :, l0 + L])
        if coeff != 0.0:
            b[np.arange(M), np.arange(M), l0 + L] -= coeff / M
    return b.reshape(-1)


def _shifted_state(amplitudes, l0):
    """Steady-state lattice vector shifted by l0 harmonics (zero filled)."""
    out = np.zeros_like(amplitudes)
    if l0 >= 0:
        out[:, :, l0:] = amplitudes[:, :, : amplitudes.shape[2] - l0]
    else:
        out[:, :, :l0] = amplitudes[:, :, -l0:]
    return out


def incoherent_spectrum(state, gen, params, drive, cfg, threads=1):
    """Inelastic (incoherent) spectral density on the analyzer grid (W s/rad).

    One sparse resolvent solve x = (i (omega - omega_s) I - A)^{-1} b per
    grid frequency, with the generator deflated on its kernel so the
    elastic point omega = omega_s stays regular.
    """
    M, L = gen.M, gen.L
    if state.L != L or state.M != M:
        raise SolverError("state and generator use different truncations")
    c = emission_amplitudes(params)
    b = _fluctuation_source(state, params)

    readout = np.zeros(gen.dim, dtype=complex)
    for m in range(1, M):
        readout[flat_index(m, m - 1, 0, M, L)] = c[m - 1]

    # The generator's kernel replicates at eigenvalue -i l0 delta for every
    # harmonic shift l0 (Floquet ladder), so the resolvent approaches a
    # singularity at every comb frequency.  The left null direction of
    # that replica is the trace at harmonic l0, and the exact solution is
    # orthogonal to it, so replace one row with that constraint (the same
    # regularization used for the steady state itself).
    delta = drive.delta
    eye = sp.identity(gen.dim, dtype=complex, format="csr")
    base = gen.matrix.tocsr()

    omega_s = drive.omega_s
    out = np.empty_like(cfg.grid)

    def solve_point(i):
        nu = cfg.grid[i] - omega_s
        l0 = 0 if delta == 0.0 else int(round(nu / delta))
        l0 = max(-L, min(L, l0))
        B = (1j * nu * eye - base).tolil()
        row = flat_index(0, 0, l0, M, L)
        B.rows[row] = [flat_index(m, m, l0, M, L) for m in range(M)]
        B.data[row] = [1.0 + 0.0j] * M
        rhs = b.copy()
        rhs[row] = 0.0
        try:
            lu = spla.splu(B.tocsc())
            x = lu.solve(rhs)
        except RuntimeError as exc:
            raise SolverError(
                f"resolvent solve failed at omega/2pi = {cfg.grid[i] / TWO_PI:.6e} Hz: {exc}"
            ) from exc
        out[i] = (HBAR / (4.0 * np.pi)) * float(np.real(readout @ x))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(solve_point, range(cfg.grid.size)))
    else:
        for i in range(cfg.grid.size):
            solve_point(i)
    return out


def clip_negative(s):
    """Zero out tiny negative excursions; large negatives are a bug."""
    s = np.asarray(s, dtype=float)
    smax = float(np.max(s, initial=0.0))
    floor = -NEGATIVE_CLIP * smax
    if np.any(s < floor):
        raise SolverError(
            f"spectrum has negative values below the clipping floor "
            f"(min {float(np.min(s)):.3e}, floor {floor:.3e})"
        )
    return np.where(s < 0.0, 0.0, s)


def normalize_psd(s_total, cfg):
    """Normalized power spectral density, 10 log10(1 + S * rbw / p_off), in dB."""
    if cfg.p_off <= 0:
        raise ConfigError("background power p_off must be positive")
    s = clip_negative(s_total)
    return 10.0 * np.log10(1.0 + s * cfg.rbw / cfg.p_off)


def compute_spectrum(params, drive, cfg, L=None, L0=4, tol=1e-9, L_max=512, threads=1):
    """Steady state plus full spectrum for one drive configuration.

    If ``L`` is given the harmonic cutoff is fixed; otherwise it is raised
    adaptively until converged.  Two tones at the same carrier are merged
    into one automatically.
    """
    if drive.omega1 == drive.omega2 and drive.Omega1 > 0.0 and drive.Omega2 > 0.0:
        drive = merge_degenerate_drives(drive)
    if L is None:
        state = converge_harmonics(params, drive, L0=L0, tol=tol, L_max=L_max)
        gen = assemble_generator(params, drive, state.L)
    else:
        gen = assemble_generator(params, drive, L)
        state = solve_steady_state(gen)
    s_co = coherent_spectrum(state, params, drive, cfg)
    s_inco = clip_negative(incoherent_spectrum(state, gen, params, drive, cfg, threads=threads))
    psd = normalize_psd(s_co + s_inco, cfg)
    metadata = {
        "L": state.L,
        "residual": state.residual,
        "omega1": drive.omega1,
        "omega2": drive.omega2,
        "omega_s": drive.omega_s,
        "delta": drive.delta,
        "Omega1": drive.Omega1,
        "Omega2": drive.Omega2,
        "M": params.M,
    }
    return SpectrumResult(
        grid=cfg.grid,
        s_coherent=s_co,
        s_incoherent=s_inco,
        psd_n_db=psd,
        metadata=metadata,
    )
