"""Harmonic-balance steady state of the bichromatically driven atom.

The rotating-frame operator averages <sigma_mn(t)> are expanded in integer
harmonics of half the carrier detuning, delta = (omega1 - omega2) / 2:

    <sigma_mn(t)> = sum_l <sigma_mn>^(l) exp(i l delta t).

On the truncated lattice (m, n, l) with |l| <= L this turns the optical
Bloch equations into a sparse linear system dX/dt = A X.  The periodic
steady state is the kernel of A, normalized to unit trace in the l = 0
populations.

Tone bookkeeping: tone 1 enters the rotating frame with phasor
exp(-i delta t), so it feeds the raising coherences at harmonic +1 and
the lowering coherences at harmonic -1; tone 2 is the mirror image.
Swapping the tones therefore maps X[m, n, l] -> X[m, n, -l].
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceError,
    DegenerateDriveError,
    InvalidParameterError,
    SolverError,
)
from .model import DriveConfig, decoherence_rate

#: population window for the physicality check of solved steady states
_POP_SLACK = 1e-8


def flat_index(m, n, l, M, L):
    """Position of lattice site (m, n, l) in the flattened state vector."""
    return (m * M + n) * (2 * L + 1) + (l + L)


@dataclass(frozen=True)
class FloquetGenerator:
    """Sparse generator A of the harmonic-space Bloch equations."""

    params: object
    drive: DriveConfig
    L: int
    M: int
    dim: int
    matrix: sp.csr_matrix
    detuning_terms: np.ndarray  # Theta_mn, shape (M, M)
    decay_terms: np.ndarray  # Xi_mn, shape (M, M)

    def index(self, m, n, l):
        return flat_index(m, n, l, self.M, self.L)


@dataclass(frozen=True)
class FourierState:
    """Steady-state Fourier amplitudes on the truncated harmonic lattice.

    ``amplitudes`` has shape (M, M, 2L + 1); entry [m, n, l + L] is
    <sigma_mn>^(l).  ``residual`` is the max-norm of A X.
    """

    amplitudes: np.ndarray
    L: int
    converged: bool
    residual: float

    @property
    def M(self):
        return self.amplitudes.shape[0]

    def amp(self, m, n, l):
        """<sigma_mn>^(l); zero outside the truncation window."""
        if abs(l) > self.L:
            return 0.0 + 0.0j
        return self.amplitudes[m, n, l + self.L]

    def population(self, m):
        """Steady (beat-averaged) population of level m."""
        return self.amplitudes[m, m, self.L].real

    def trace(self):
        """Sum of the l = 0 populations; unity for a physical state."""
        return sum(self.amplitudes[m, m, self.L] for m in range(self.M))

    def hermiticity_defect(self):
        """Max deviation of amplitudes[m, n, l] from conj(amplitudes[n, m, -l])."""
        flipped = self.amplitudes[:, :, ::-1]
        return float(
            np.max(np.abs(self.amplitudes - np.conj(flipped.transpose(1, 0, 2))))
        )

    def parity_defect(self):
        """Max magnitude on sites with odd (m - n) + l, which decouple from the drive."""
        M, L = self.M, self.L
        m = np.arange(M)[:, None, None]
        n = np.arange(M)[None, :, None]
        l = np.arange(-L, L + 1)[None, None, :]
        odd = ((m - n + l) % 2) != 0
        if not odd.any():
            return 0.0
        return float(np.max(np.abs(self.amplitudes[odd])))


def merge_degenerate_drives(drive):
    """Collapse two tones at the same carrier into one tone.

    The amplitudes add as complex phasors; the result is a single-tone
    configuration (Omega2 = 0) solvable with L = 0.
    """
    if drive.omega1 != drive.omega2:
        raise InvalidParameterError(
            "merge_degenerate_drives requires omega1 == omega2"
        )
    total = drive.Omega1 * cmath.exp(1j * drive.phase1) + drive.Omega2 * cmath.exp(
        1j * drive.phase2
    )
    return DriveConfig(
        omega1=drive.omega1,
        omega2=drive.omega2,
        Omega1=abs(total),
        Omega2=0.0,
        phase1=cmath.phase(total) if abs(total) > 0 else 0.0,
        phase2=0.0,
    )


def _tone_table(drive):
    """Per-tone (complex amplitude, harmonic offset of the raising terms)."""
    if drive.delta == 0.0:
        if drive.Omega1 > 0.0 and drive.Omega2 > 0.0:
            raise DegenerateDriveError(
                "delta = 0 with two distinct tones; merge them with "
                "merge_degenerate_drives() before assembling the generator"
            )
        # single tone (or no drive): no beat, everything sits at l = 0
        return (
            (drive.Omega1 * cmath.exp(-1j * drive.phase1), 0),
            (drive.Omega2 * cmath.exp(-1j * drive.phase2), 0),
        )
    return (
        (drive.Omega1 * cmath.exp(-1j * drive.phase1), +1),
        (drive.Omega2 * cmath.exp(-1j * drive.phase2), -1),
    )


def assemble_generator(params, drive, L):
    """Assemble the sparse harmonic-space Bloch generator.

    Parameters
    ----------
    params : TransmonParams
    drive : DriveConfig
    L : int
        Harmonic cutoff; amplitudes with |l| > L are treated as zero.
        L = 0 is only meaningful for an undriven atom or a single tone
        (delta = 0); a bichromatic drive needs L >= 1.

    Returns
    -------
    FloquetGenerator
    """
    M = params.M
    delta = drive.delta
    driven = drive.Omega1 > 0.0 or drive.Omega2 > 0.0
    tones = _tone_table(drive)
    if L < 0:
        raise InvalidParameterError("harmonic cutoff L must be >= 0")
    if L == 0 and driven and delta != 0.0:
        raise InvalidParameterError(
            "L = 0 cannot represent a driven bichromatic steady state"
        )
    if delta == 0.0 and L > 0:
        raise InvalidParameterError(
            "delta = 0 makes the harmonic blocks degenerate; use L = 0"
        )

    omega_s = drive.omega_s
    energies = np.asarray(params.level_energies)
    theta = (
        (np.arange(M)[None, :] - np.arange(M)[:, None]) * omega_s
        - (energies[None, :] - energies[:, None])
    )
    xi = np.array(
        [[decoherence_rate(m, n, params) for n in range(M)] for m in range(M)]
    )

    nharm = 2 * L + 1
    dim = M * M * nharm
    rows, cols, vals = [], [], []

    def add(m, n, l, ms, ns, ls, val):
        if 0 <= ms < M and 0 <= ns < M and -L <= ls <= L:
            rows.append(flat_index(m, n, l, M, L))
            cols.append(flat_index(ms, ns, ls, M, L))
            vals.append(val)

    sqrt = np.sqrt(np.arange(M + 2))
    for m in range(M):
        for n in range(M):
            for l in range(-L, L + 1):
                add(m, n, l, m, n, l, 1j * (theta[m, n] - l * delta) - xi[m, n])
                for amp, s in tones:
                    if amp == 0.0:
                        continue
                    # raising drive operator, phasor offset +s
                    add(m, n, l, m, n - 1, l + s, 0.5j * sqrt[n] * amp)
                    add(m, n, l, m + 1, n, l + s, -0.5j * sqrt[m + 1] * amp)
                    # lowering drive operator, conjugate amplitude, offset -s
                    add(m, n, l, m, n + 1, l - s, 0.5j * sqrt[n + 1] * amp.conjugate())
                    add(m, n, l, m - 1, n, l - s, -0.5j * sqrt[m] * amp.conjugate())
                if m + 1 < M and n + 1 < M:
                    feed = (
                        0.5
                        * sqrt[m + 1]
                        * sqrt[n + 1]
                        * (params.relax_rate(n + 1) + params.relax_rate(m + 1))
                    )
                    add(m, n, l, m + 1, n + 1, l, feed)

    matrix = sp.csr_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim)
    )
    matrix.sum_duplicates()
    return FloquetGenerator(
        params=params,
        drive=drive,
        L=L,
        M=M,
        dim=dim,
        matrix=matrix,
        detuning_terms=theta,
        decay_terms=xi,
    )


def _kernel_dimension_ok(matrix, rtol=1e-8):
    """True if the generator's numerical kernel is one-dimensional."""
    s = np.linalg.svd(matrix.toarray(), compute_uv=False)
    near_zero = int(np.sum(s <= rtol * s[0]))
    return near_zero == 1


def solve_steady_state(gen, check_kernel=False, cond_limit=1e14):
    """Solve A X = 0 with unit-trace normalization.

    The row of d<sigma_00>^(0)/dt is replaced by the trace constraint
    sum_m X[m, m, 0] = 1 and the resulting nonsingular sparse system is
    solved by LU factorization.

    Parameters
    ----------
    gen : FloquetGenerator
    check_kernel : bool
        Verify (dense SVD, small systems only) that the kernel of A is
        one-dimensional before solving.
    cond_limit : float
        1-norm condition-number estimate above which the replaced system
        is treated as degenerate.

    Returns
    -------
    FourierState
    """
    M, L, dim = gen.M, gen.L, gen.dim
    if check_kernel and not _kernel_dimension_ok(gen.matrix):
        raise SolverError("generator kernel is not one-dimensional")

    replaced = gen.index(0, 0, 0)
    A_mod = gen.matrix.tolil(copy=True)
    A_mod.rows[replaced] = [gen.index(m, m, 0) for m in range(M)]
    A_mod.data[replaced] = [1.0 + 0.0j] * M
    A_mod = A_mod.tocsc()
    rhs = np.zeros(dim, dtype=complex)
    rhs[replaced] = 1.0

    try:
        lu = spla.splu(A_mod)
    except RuntimeError as exc:
        raise SolverError(f"steady-state factorization failed: {exc}") from exc
    x = lu.solve(rhs)

    norm_A = spla.onenormest(A_mod)
    norm_Ainv = spla.onenormest(
        spla.LinearOperator(
            (dim, dim), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="H"), dtype=complex
        )
    )
    if norm_A * norm_Ainv > cond_limit:
        raise SolverError(
            f"degenerate steady state: condition estimate {norm_A * norm_Ainv:.3e}"
        )

    residual = float(np.max(np.abs(gen.matrix @ x)))
    amplitudes = x.reshape(M, M, 2 * L + 1)
    pops = np.array([amplitudes[m, m, L].real for m in range(M)])
    if pops.min() < -_POP_SLACK or pops.max() > 1.0 + _POP_SLACK:
        raise SolverError(
            f"non-physical steady state: populations in [{pops.min():.3e}, "
            f"{pops.max():.3e}]"
        )
    xmax = float(np.max(np.abs(x)))
    return FourierState(
        amplitudes=amplitudes,
        L=L,
        converged=residual <= 1e-9 * xmax,
        residual=residual,
    )


def converge_harmonics(params, drive, L0=4, tol=1e-9, L_max=512, **solve_kwargs):
    """Raise the harmonic cutoff until the retained amplitudes stop moving.

    Doubles L starting from L0 until the max-norm change of all amplitudes
    with |l| <= L0 between successive solves drops below ``tol``.  The
    returned state is the first one confirmed converged, with its L.
    """
    if drive.delta == 0.0:
        if drive.Omega1 > 0.0 and drive.Omega2 > 0.0:
            raise DegenerateDriveError(
                "delta = 0 with two distinct tones; merge them with "
                "merge_degenerate_drives() first"
            )
        return solve_steady_state(assemble_generator(params, drive, 0), **solve_kwargs)
    if L0 < 2:
        raise InvalidParameterError("initial cutoff L0 must be >= 2")

    def window(state):
        return state.amplitudes[:, :, state.L - L0 : state.L + L0 + 1]

    prev = solve_steady_state(assemble_generator(params, drive, L0), **solve_kwargs)
    L = L0
    change = float("inf")
    while True:
        L *= 2
        if L > L_max:
            raise ConvergenceError(
                f"harmonic cutoff exceeded L_max={L_max}; last change {change:.3e}"
            )
        nxt = solve_steady_state(assemble_generator(params, drive, L), **solve_kwargs)
        change = float(np.max(np.abs(window(nxt) - window(prev))))
        if change < tol:
            return prev
        prev = nxt
