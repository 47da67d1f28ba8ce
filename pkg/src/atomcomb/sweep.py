"""Parameter sweeps over drive settings and comb-peak detection.

A sweep varies one drive parameter (a power, a Rabi amplitude, a tone
frequency, or the tone splitting) while everything else is held fixed,
producing one emission spectrum per axis value.  Rows are independent
and may be evaluated concurrently; assembly is by row index so the
output does not depend on the worker count.  `detect_peaks` locates
local maxima of the normalized PSD and classifies them against the
mixing comb (n+1)*omega1 - n*omega2 / (n+1)*omega2 - n*omega1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy import signal

from .errors import InvalidParameterError
from .model import DriveConfig, TransmonParams, rabi_from_power
from .spectrum import SpectrumConfig, SpectrumResult, compute_spectrum

__all__ = [
    "SWEEP_AXES",
    "SweepSpec",
    "SweepRow",
    "SweepGrid",
    "run_sweep",
    "Peak",
    "PeakList",
    "detect_peaks",
]

SWEEP_AXES = (
    "P1",
    "P2",
    "P_both",
    "omega1",
    "omega2",
    "delta_omega",
    "Omega1",
    "Omega2",
)


@dataclass(frozen=True)
class SweepSpec:
    """Definition of a one-dimensional drive-parameter sweep.

    Parameters
    ----------
    axis : str
        Swept parameter, one of `SWEEP_AXES`.  Powers (``P1``, ``P2``,
        ``P_both``) are in dBm and require the corresponding calibration
        factors; frequencies and Rabi amplitudes are angular (rad/s).
        ``delta_omega`` sweeps ``omega2 = omega1 + value`` with
        ``omega1`` fixed.
    values : numpy.ndarray
        Axis values in sweep order.
    params : TransmonParams
        Ladder parameters, fixed across the sweep.
    drive : DriveConfig
        Base drive configuration; the swept field is overridden per row.
    spectrum_cfg : SpectrumConfig
        Frequency grid and emission settings shared by all rows.
    k1, k2 : float, optional
        Power-to-Rabi calibration factors, required for power axes.
    adaptive_L : bool
        If True the harmonic truncation is converged per row; otherwise
        `L` is used as given.
    L : int
        Fixed truncation order when ``adaptive_L`` is False.
    """

    axis: str
    values: np.ndarray
    params: TransmonParams
    drive: DriveConfig
    spectrum_cfg: SpectrumConfig
    k1: Optional[float] = None
    k2: Optional[float] = None
    adaptive_L: bool = True
    L: int = 20

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise InvalidParameterError(
                f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}"
            )
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.size == 0:
            raise InvalidParameterError("sweep axis has no values")
        object.__setattr__(self, "values", values)
        if self.axis in ("P1", "P_both") and self.k1 is None:
            raise InvalidParameterError(f"axis {self.axis!r} requires k1")
        if self.axis in ("P2", "P_both") and self.k2 is None:
            raise InvalidParameterError(f"axis {self.axis!r} requires k2")

    def resolve_drive(self, value: float) -> DriveConfig:
        """Drive configuration for one axis value."""
        d = self.drive
        if self.axis == "P1":
            return replace(d, Omega1=rabi_from_power(value, self.k1))
        if self.axis == "P2":
            return replace(d, Omega2=rabi_from_power(value, self.k2))
        if self.axis == "P_both":
            return replace(
                d,
                Omega1=rabi_from_power(value, self.k1),
                Omega2=rabi_from_power(value, self.k2),
            )
        if self.axis == "omega1":
            return replace(d, omega1=value)
        if self.axis == "omega2":
            return replace(d, omega2=value)
        if self.axis == "delta_omega":
            return replace(d, omega2=d.omega1 + value)
        if self.axis == "Omega1":
            return replace(d, Omega1=value)
        if self.axis == "Omega2":
            return replace(d, Omega2=value)
        raise InvalidParameterError(f"unknown sweep axis {self.axis!r}")


@dataclass
class SweepRow:
    """One evaluated sweep row (or its failure record)."""

    axis_value: float
    result: Optional[SpectrumResult]
    failed: bool = False
    reason: str = ""

    @property
    def L(self) -> Optional[int]:
        if self.result is None:
            return None
        return self.result.metadata.get("L")


@dataclass
class SweepGrid:
    """Assembled sweep output: axis values plus one spectrum per row."""

    spec: SweepSpec
    rows: List[SweepRow]

    @property
    def axis_values(self) -> np.ndarray:
        return self.spec.values

    @property
    def n_failed(self) -> int:
        return sum(row.failed for row in self.rows)

    def psd_matrix(self) -> np.ndarray:
        """Normalized PSD map, shape (rows, grid points); NaN for failed rows."""
        n = self.spec.spectrum_cfg.grid.size
        out = np.full((len(self.rows), n), np.nan)
        for i, row in enumerate(self.rows):
            if not row.failed and row.result is not None:
                out[i] = row.result.psd_n_db
        return out


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepGrid:
    """Evaluate an emission spectrum at every value of the sweep axis.

    Rows that fail to converge are recorded with the failure reason and
    the sweep continues.  With ``threads > 1`` rows are evaluated in a
    thread pool; results are assembled by row index, so the output is
    identical for any worker count.
    """

    def one_row(value: float) -> SweepRow:
        drive = spec.resolve_drive(value)
        try:
            if spec.adaptive_L:
                result = compute_spectrum(
                    spec.params, drive, spec.spectrum_cfg, L=None
                )
            else:
                result = compute_spectrum(
                    spec.params, drive, spec.spectrum_cfg, L=spec.L
                )
        except Exception as exc:  # row failure must not kill the sweep
            return SweepRow(axis_value=value, result=None, failed=True,
                            reason=f"{type(exc).__name__}: {exc}")
        return SweepRow(axis_value=value, result=result)

    values = [float(v) for v in spec.values]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_row, values))
    else:
        rows = [one_row(v) for v in values]
    return SweepGrid(spec=spec, rows=rows)


@dataclass(frozen=True)
class Peak:
    """A detected spectral peak.

    ``label`` names the comb line the peak sits on ("omega1",
    "2omega1-omega2", ...) or is "unclassified" if the peak is not
    within half a grid step of any comb line.
    """

    frequency: float
    height_db: float
    prominence_db: float
    label: str

    @property
    def classified(self) -> bool:
        return self.label != "unclassified"


@dataclass
class PeakList:
    """Peaks of one spectrum, sorted by ascending frequency."""

    peaks: List[Peak] = field(default_factory=list)

    def __iter__(self):
        return iter(self.peaks)

    def __len__(self):
        return len(self.peaks)

    def classified(self) -> List[Peak]:
        return [p for p in self.peaks if p.classified]

    def labels(self) -> List[str]:
        return [p.label for p in self.peaks]


def _comb_label(l: int) -> str:
    """Label of the comb line at omega_s + l*delta for odd l.

    Harmonic l = 2n+1 sits at (n+1)*omega1 - n*omega2 and l = -(2n+1)
    at (n+1)*omega2 - n*omega1, independent of the sign of delta.
    """
    if l > 0:
        n = (l - 1) // 2
        hi, lo = "omega1", "omega2"
    else:
        n = (-l - 1) // 2
        hi, lo = "omega2", "omega1"
    if n == 0:
        return hi
    if n == 1:
        return f"2{hi}-{lo}"
    return f"{n + 1}{hi}-{n}{lo}"


def detect_peaks(
    result: SpectrumResult, min_prominence_db: float = 0.05
) -> PeakList:
    """Locate and classify peaks of the normalized PSD.

    Local maxima of ``psd_n_db`` with prominence at least
    ``min_prominence_db`` are classified to the nearest comb line
    ``omega_s + l*delta`` (odd ``l``) when they fall within half a grid
    step of it, and labeled ``unclassified`` otherwise.

    Parameters
    ----------
    result : SpectrumResult
        Spectrum on a uniform frequency grid.
    min_prominence_db : float, optional
        Prominence threshold in dB.

    Returns
    -------
    PeakList
        Peaks sorted by ascending frequency.
    """
    grid = result.grid
    if grid.size < 3:
        return PeakList()
    steps = np.diff(grid)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise InvalidParameterError("peak detection requires a uniform grid")
    step = float(steps[0])

    psd = result.psd_n_db
    idx, props = signal.find_peaks(psd, prominence=min_prominence_db)

    omega_s = result.metadata.get("omega_s")
    delta = result.metadata.get("delta", 0.0)
    peaks: List[Peak] = []
    for i, k in enumerate(idx):
        freq = float(grid[k])
        label = "unclassified"
        if omega_s is not None:
            if delta == 0.0:
                if abs(freq - omega_s) <= 0.5 * step:
                    label = "omega1"
            else:
                l = int(round((freq - omega_s) / delta))
                if l % 2 == 0:
                    l += 1 if freq >= omega_s + l * delta else -1
                comb = omega_s + l * delta
                # search the two neighbouring odd lines as well
                for cand in (l, l - 2, l + 2):
                    if abs(freq - (omega_s + cand * delta)) < abs(freq - comb):
                        l, comb = cand, omega_s + cand * delta
                if abs(freq - comb) <= 0.5 * step:
                    label = _comb_label(l)
        peaks.append(
            Peak(
                frequency=freq,
                height_db=float(psd[k]),
                prominence_db=float(props["prominences"][i]),
                label=label,
            )
        )
    peaks.sort(key=lambda p: p.frequency)
    return PeakList(peaks=peaks)
