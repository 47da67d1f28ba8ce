"""Brute-force time-domain oracle for the harmonic-balance machinery.

Integrates the rotating-frame master equation directly with a fixed-step
fourth-order Runge-Kutta scheme, projects the periodic steady state onto
beat harmonics, and computes the incoherent spectrum from explicitly
propagated two-time fluctuation correlators.  Everything here is
independent of the sparse harmonic-space solver and is used to validate
it on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, SolverError, WindowError
from .floquet import FourierState
from .model import HBAR, TWO_PI
from .spectrum import emission_amplitudes

_TRACE_DRIFT_LIMIT = 1e-7


def _liouvillian_pieces(params, drive):
    """Static matrices and drive phasor coefficients of the master equation."""
    M = params.M
    energies = np.asarray(params.level_energies)
    diag_h = np.diag(np.arange(M) * drive.omega_s - energies).astype(complex)

    lower = np.sqrt(np.arange(1, M))
    D_up = np.diag(lower, k=-1).astype(complex)  # sum_m sqrt(m) |m><m-1|
    D_dn = D_up.conj().T

    rates = np.array([0.0] + list(params.relax_rates))
    j = np.arange(M)
    decay = (j[:, None] * rates[j][:, None] + j[None, :] * rates[j][None, :]) / 2.0
    decay = decay + (j[:, None] - j[None, :]) ** 2 * params.gamma_phi

    mn = np.arange(1, M)
    feed = (
        np.sqrt(np.outer(mn, mn))
        * (rates[mn][None, :] + rates[mn][:, None])
        / 2.0
    )

    amp1 = 0.5 * drive.Omega1 * np.exp(-1j * drive.phase1)
    amp2 = 0.5 * drive.Omega2 * np.exp(-1j * drive.phase2)
    return diag_h, D_up, D_dn, decay, feed, amp1, amp2


def _superoperators(params, drive):
    """Dense superoperators with L(t) = L0 + a(t) K_up + conj(a(t)) K_dn.

    Row-major vectorization vec(rho)[j*M + k] = rho[j, k]; the drive
    phasor is a(t) = amp1 exp(-i delta t) + amp2 exp(+i delta t).
    """
    M = params.M
    diag_h, D_up, D_dn, decay, feed, amp1, amp2 = _liouvillian_pieces(params, drive)
    eye = np.eye(M, dtype=complex)

    def commutator_super(X):
        return 1j * (np.kron(X, eye) - np.kron(eye, X.T))

    L0 = commutator_super(diag_h)
    L0 -= np.diag(decay.reshape(-1).astype(complex))
    for m in range(M - 1):
        for n in range(M - 1):
            L0[m * M + n, (m + 1) * M + (n + 1)] += feed[m, n]
    K_up = commutator_super(D_up)
    K_dn = commutator_super(D_dn)
    return L0, K_up, K_dn, amp1, amp2


def _make_rhs(params, drive):
    """RHS d vec(rho)/dt = f(t, y) for a single vectorized density matrix."""
    L0, K_up, K_dn, amp1, amp2 = _superoperators(params, drive)
    delta = drive.delta

    def rhs(t, y):
        a = amp1 * np.exp(-1j * delta * t) + amp2 * np.exp(1j * delta * t)
        return L0 @ y + a * (K_up @ y) + np.conj(a) * (K_dn @ y)

    return rhs


def _make_batched_rhs(params, drive):
    """RHS over a batch of vectorized matrices with per-row absolute times."""
    L0, K_up, K_dn, amp1, amp2 = _superoperators(params, drive)
    L0T, K_upT, K_dnT = L0.T.copy(), K_up.T.copy(), K_dn.T.copy()
    delta = drive.delta

    def rhs(t_vec, y):
        a = amp1 * np.exp(-1j * delta * t_vec) + amp2 * np.exp(1j * delta * t_vec)
        out = y @ L0T
        out += (y @ K_upT) * a[:, None]
        out += (y @ K_dnT) * np.conj(a)[:, None]
        return out

    return rhs


def _rk4_step(rhs, t, rho, dt):
    k1 = rhs(t, rho)
    k2 = rhs(t + dt / 2.0, rho + dt / 2.0 * k1)
    k3 = rhs(t + dt / 2.0, rho + dt / 2.0 * k2)
    k4 = rhs(t + dt, rho + dt * k3)
    return rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def beat_period(drive):
    """Period of the rotating-frame steady state, 2 pi / |delta| (inf for one tone)."""
    if drive.delta == 0.0:
        return math.inf
    return TWO_PI / abs(drive.delta)


def _dt_ceiling(params, drive):
    """Largest step allowed by the integration contract."""
    scales = []
    if drive.delta != 0.0:
        scales.append(TWO_PI / abs(drive.delta))
    omega_max = max(drive.Omega1, drive.Omega2)
    if omega_max > 0.0:
        scales.append(TWO_PI / omega_max)
    gamma_max = max(max(params.relax_rates), params.gamma_phi)
    if gamma_max > 0.0:
        scales.append(1.0 / gamma_max)
    # rotating-frame oscillation of detuned coherences must be resolved too
    theta_max = max(
        abs(e - m * drive.omega_s) for m, e in enumerate(params.level_energies)
    )
    if theta_max > 0.0:
        scales.append(TWO_PI / theta_max)
    if not scales:
        raise InvalidParameterError("no dynamical time scale; nothing to integrate")
    return min(scales) / 50.0


def default_dt(params, drive, factor=200):
    """Step size well inside the contract, rounded to divide the beat period."""
    dt = 50.0 * _dt_ceiling(params, drive) / factor
    T = beat_period(drive)
    if math.isfinite(T):
        dt = T / math.ceil(T / dt)
        # keep at least 64 samples per beat period for the projection
        dt = min(dt, T / 64.0)
        dt = T / math.ceil(T / dt)
    return dt


@dataclass(frozen=True)
class DensityMatrixTrajectory:
    """Uniformly sampled density-matrix history in the rotating frame."""

    times: np.ndarray
    rhos: np.ndarray  # shape (nt, M, M)
    beat_period: float

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.rhos - np.conj(self.rhos.transpose(0, 2, 1)))))

    def trace_drift(self):
        return float(np.max(np.abs(np.trace(self.rhos, axis1=1, axis2=2) - 1.0)))

    def min_eigenvalue(self):
        herm = (self.rhos + np.conj(self.rhos.transpose(0, 2, 1))) / 2.0
        return float(np.min(np.linalg.eigvalsh(herm)))

    def periodicity_defect(self):
        """Max elementwise change over the final beat period (0 for one tone)."""
        if not math.isfinite(self.beat_period):
            return float(np.max(np.abs(self.rhos[-1] - self.rhos[-2])))
        steps = round(self.beat_period / self.dt)
        if steps >= len(self.times):
            raise InvalidParameterError("trajectory shorter than one beat period")
        return float(np.max(np.abs(self.rhos[-1] - self.rhos[-1 - steps])))


def integrate_master_equation(params, drive, t_end, dt=None, rho0=None):
    """Integrate the master equation from t = 0 with fixed-step RK4.

    Parameters
    ----------
    params : TransmonParams
    drive : DriveConfig
    t_end : float
        Final time (s); should cover the transient (several 1/Gamma10)
        plus at least one beat period if harmonics are to be projected.
    dt : float, optional
        Step size; defaults to :func:`default_dt`.  Must satisfy
        dt <= (1/50) min(2 pi/|delta|, 2 pi/Omega_max, 1/Gamma_max).
    rho0 : ndarray, optional
        Initial density matrix; ground state if omitted.

    Returns
    -------
    DensityMatrixTrajectory
    """
    M = params.M
    if dt is None:
        dt = default_dt(params, drive)
    ceiling = _dt_ceiling(params, drive)
    if dt > ceiling * (1.0 + 1e-12):
        raise InvalidParameterError(
            f"step size {dt:.3e} s exceeds the allowed ceiling {ceiling:.3e} s"
        )
    if rho0 is None:
        rho0 = np.zeros((M, M), dtype=complex)
        rho0[0, 0] = 1.0
    y = np.array(rho0, dtype=complex).reshape(-1)

    n_steps = int(math.ceil(t_end / dt - 1e-9))
    rhs = _make_rhs(params, drive)
    times = np.arange(n_steps + 1) * dt
    ys = np.empty((n_steps + 1, M * M), dtype=complex)
    ys[0] = y
    for i in range(n_steps):
        y = _rk4_step(rhs, times[i], y, dt)
        ys[i + 1] = y
    rhos = ys.reshape(n_steps + 1, M, M)

    traj = DensityMatrixTrajectory(
        times=times, rhos=rhos, beat_period=beat_period(drive)
    )
    if traj.trace_drift() > _TRACE_DRIFT_LIMIT:
        raise SolverError(
            f"trace drift {traj.trace_drift():.3e} exceeds {_TRACE_DRIFT_LIMIT}"
        )
    return traj


def fourier_project(traj, L, periodicity_tol=1e-6):
    """Project the final beat period of ``traj`` onto harmonics |l| <= L.

    <sigma_mn>^(l) = (1/T) integral over one period of rho_nm(t)
    exp(-i l delta t) dt, by the trapezoid rule on the sampled grid.
    """
    defect = traj.periodicity_defect()
    if defect > periodicity_tol:
        raise SolverError(
            f"trajectory not periodic over the final period (defect {defect:.3e})"
        )
    M = traj.rhos.shape[1]
    amps = np.zeros((M, M, 2 * L + 1), dtype=complex)

    if not math.isfinite(traj.beat_period):
        amps[:, :, L] = traj.rhos[-1].T  # <sigma_mn> = rho_nm
        return FourierState(amplitudes=amps, L=L, converged=True, residual=float("nan"))

    delta = TWO_PI / traj.beat_period
    steps = round(traj.beat_period / traj.dt)
    times = traj.times[-1 - steps :]
    sigma = traj.rhos[-1 - steps :].transpose(0, 2, 1)  # <sigma_mn(t)> = rho_nm
    weights = np.ones(steps + 1)
    weights[0] = weights[-1] = 0.5
    for idx in range(2 * L + 1):
        l = idx - L
        phase = np.exp(-1j * l * delta * times)
        amps[:, :, idx] = (
            np.tensordot(weights * phase, sigma, axes=(0, 0)) * traj.dt / traj.beat_period
        )
    return FourierState(amplitudes=amps, L=L, converged=True, residual=float("nan"))


def _linear_fourier_transform(g, dt, nus):
    """integral_0^tau_max g(tau) exp(-i nu tau) d tau, g piecewise linear.

    Filon-type quadrature: exact for a linear interpolant, so the step
    only needs to resolve g itself, not the analyzer frequency.
    """
    n = len(g)
    taus = np.arange(n) * dt
    out = np.empty(len(nus), dtype=complex)
    for k, nu in enumerate(nus):
        x = nu * dt
        if abs(x) < 1e-6:
            w_all = dt * np.ones(n)
            w_all[0] = w_all[-1] = dt / 2.0
            out[k] = np.sum(w_all * g * np.exp(-1j * nu * taus))
            continue
        # exact weights for linear interpolation on uniform steps
        ex = np.exp(-1j * x)
        w0 = dt * (1.0 - (1.0 - ex) / (1j * x)) / (1j * x)
        w1 = dt * ((1.0 - ex) / (1j * x) - ex) / (1j * x)
        phases = np.exp(-1j * nu * taus[:-1])
        out[k] = np.sum(phases * (w0 * g[:-1] + w1 * np.roll(g, -1)[:-1]))
    return out


def incoherent_spectrum_oracle(
    params,
    drive,
    grid,
    n_start=16,
    dt=None,
    t_transient=None,
    tau_cap=None,
    decay_target=1e-6,
):
    """Incoherent spectrum by direct propagation of fluctuation correlators.

    For a mesh of start times t over one beat period of the periodic
    steady state, propagates chi = B rho(t) and rho(t) side by side in
    tau, forms the fluctuation correlator, averages over start times,
    and Fourier transforms over tau.  Intended for small instances
    (M <= 3) as the semantics-defining check of the resolvent method.

    Parameters
    ----------
    grid : ndarray
        Lab-frame angular frequencies (rad/s).
    n_start : int
        Start-time mesh size over one beat period.
    decay_target : float
        Propagation stops once the correlator has decayed to this
        fraction of its initial magnitude; failing to reach 1e-4 of the
        initial value by the cap is a window error.
    """
    M = params.M
    if dt is None:
        dt = default_dt(params, drive)
    T = beat_period(drive)
    gamma_slow = max(params.gamma10_rel / 2.0, params.gamma_phi)
    if gamma_slow <= 0.0:
        raise InvalidParameterError("oracle needs a nonzero decay rate")
    if t_transient is None:
        t_transient = 30.0 / params.gamma10_rel if params.gamma10_rel > 0 else 30.0 / gamma_slow
    if tau_cap is None:
        tau_cap = 40.0 / gamma_slow

    t_end = t_transient + (2.0 * T if math.isfinite(T) else 0.0)
    traj = integrate_master_equation(params, drive, t_end, dt=dt)

    if math.isfinite(T):
        steps_per_period = round(T / traj.dt)
        stride = max(1, steps_per_period // n_start)
        n_start = steps_per_period // stride
        start_idx = len(traj.times) - 1 - steps_per_period + stride * np.arange(n_start)
    else:
        start_idx = np.array([len(traj.times) - 1])
        n_start = 1

    c = emission_amplitudes(params)
    A_op = np.zeros((M, M), dtype=complex)  # sum_m c_m |m><m-1|
    B_op = np.zeros((M, M), dtype=complex)  # sum_n c_n |n-1><n|
    for m in range(1, M):
        A_op[m, m - 1] = c[m - 1]
        B_op[m - 1, m] = c[m - 1]

    rho_starts = traj.rhos[start_idx]
    t_starts = traj.times[start_idx]
    b_means = np.trace(B_op @ rho_starts, axis1=1, axis2=2)

    # propagate chi = B rho(t) and rho(t) together; both obey the master equation
    stacked = np.concatenate([B_op @ rho_starts, rho_starts], axis=0).reshape(
        2 * len(start_idx), M * M
    )
    t_abs = np.concatenate([t_starts, t_starts])
    rhs = _make_batched_rhs(params, drive)
    ns = len(start_idx)
    # Tr[A rho] as a dot product against vec(rho)
    a_vec = A_op.T.reshape(-1)

    def correlator(y):
        g_full = y[:ns] @ a_vec
        g_mean = (y[ns:] @ a_vec) * b_means
        return complex(np.mean(g_full - g_mean))

    g = [correlator(stacked)]
    peak = abs(g[0])
    tau = 0.0
    n_cap = int(math.ceil(tau_cap / dt))
    for _ in range(n_cap):
        k1 = rhs(t_abs + tau, stacked)
        k2 = rhs(t_abs + tau + dt / 2.0, stacked + dt / 2.0 * k1)
        k3 = rhs(t_abs + tau + dt / 2.0, stacked + dt / 2.0 * k2)
        k4 = rhs(t_abs + tau + dt, stacked + dt * k3)
        stacked = stacked + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau += dt
        g.append(correlator(stacked))
        if abs(g[-1]) <= decay_target * peak:
            break
    g = np.asarray(g)
    if abs(g[-1]) > 1e-4 * peak:
        raise WindowError(
            f"correlation window too short: |g| decayed only to "
            f"{abs(g[-1]) / peak:.3e} of its initial value"
        )

    nus = np.asarray(grid) - drive.omega_s
    ft = _linear_fourier_transform(g, dt, nus)
    return (HBAR / (4.0 * np.pi)) * np.real(ft)
