"""Command-line interface: config parsing, dispatch, deterministic outputs.

Commands
--------
spectrum
    One emission spectrum; writes ``spectrum.csv`` and ``peaks.csv``.
sweep
    One-dimensional drive-parameter sweep; writes ``map.csv`` (long
    format) and ``peaks.csv`` with one block per row.
spectroscopy
    Two-tone reflection map; writes ``r_map.csv``.
validate
    Cross-checks the harmonic solver against direct time integration on
    a small instance; writes ``validate.json``.

All runs also write ``effective_config.ini`` (the configuration after
defaults, which parses back to the same run) and serialize every number
as ``%.16e`` so reruns are byte-identical.  Exit codes: 0 success, 2
configuration error, 3 solver failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import AtomCombError, ConfigError
from .model import TWO_PI, DriveConfig, TransmonParams, rabi_from_power
from .spectroscopy import two_tone_map
from .spectrum import SpectrumConfig, SpectrumResult, compute_spectrum
from .sweep import SWEEP_AXES, SweepSpec, detect_peaks, run_sweep
from . import validate as _validate_mod

__all__ = ["RunConfig", "parse_config", "write_config", "run_command", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4

THREADS_ENV = "ATOMCOMB_THREADS"
NUM_FMT = "%.16e"

# section -> key -> (required, kind) with kind in {float, int, str, bool}
_SCHEMA: Dict[str, Dict[str, tuple]] = {
    "atom": {
        "M": (False, int),
        "f10_Hz": (True, float),
        "Ec_Hz": (True, float),
        "Gamma10_Hz": (True, float),
        "Gamma_phi_Hz": (False, float),
    },
    "drive": {
        "f1_Hz": (True, float),
        "f2_Hz": (True, float),
        "Omega1_Hz": (False, float),
        "Omega2_Hz": (False, float),
        "P1_dBm": (False, float),
        "P2_dBm": (False, float),
        "k1": (False, float),
        "k2": (False, float),
        "phase1_rad": (False, float),
        "phase2_rad": (False, float),
    },
    "spectrum": {
        "f_start_Hz": (True, float),
        "f_stop_Hz": (True, float),
        "points": (True, int),
        "rbw_Hz": (False, float),
        "epsilon_Hz": (False, float),
        "p_off_W": (False, float),
    },
    "solver": {
        "L": (False, str),
        "L0": (False, int),
        "L_max": (False, int),
        "tol": (False, float),
    },
    "sweep": {
        "axis": (True, str),
        "start": (True, float),
        "stop": (True, float),
        "points": (True, int),
        "adaptive_L": (False, bool),
        "L": (False, int),
    },
    "spectroscopy": {
        "probe_f_start_Hz": (True, float),
        "probe_f_stop_Hz": (True, float),
        "probe_points": (True, int),
        "probe_Omega_Hz": (True, float),
        "pump_f_Hz": (True, float),
        "P_start_dBm": (True, float),
        "P_stop_dBm": (True, float),
        "P_points": (True, int),
        "k": (True, float),
        "L": (False, int),
    },
}

_DEFAULTS: Dict[str, Dict[str, object]] = {
    "atom": {"M": 5, "Gamma_phi_Hz": 0.0},
    "drive": {"phase1_rad": 0.0, "phase2_rad": 0.0},
    "spectrum": {"rbw_Hz": 910e3, "epsilon_Hz": 100e3, "p_off_W": 1e-16},
    "solver": {"L": "adaptive", "L0": 4, "L_max": 512, "tol": 1e-9},
    "sweep": {"adaptive_L": True, "L": 20},
    "spectroscopy": {"L": 6},
}


def _find_line(text: str, section: str, key: Optional[str]) -> Optional[int]:
    """Best-effort line number of a section header or key for error messages."""
    in_section = section is None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if key is None and name == section:
                return lineno
            in_section = name == section
        elif in_section and key is not None:
            head = stripped.split("=", 1)[0].strip()
            if head == key:
                return lineno
    return None


def _convert(raw: str, kind, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from exc


@dataclass
class RunConfig:
    """Validated run configuration: one parsed dict per section.

    Values are stored in the config's own units (Hz, dBm, W); the
    accessor methods convert to the angular-frequency quantities the
    library works in.
    """

    sections: Dict[str, Dict[str, object]] = field(default_factory=dict)

    def atom_params(self) -> TransmonParams:
        a = self.sections["atom"]
        return TransmonParams.from_frequencies(
            f10_Hz=a["f10_Hz"],
            Ec_Hz=a["Ec_Hz"],
            Gamma10_Hz=a["Gamma10_Hz"],
            Gamma_phi_Hz=a["Gamma_phi_Hz"],
            M=a["M"],
        )

    def drive_config(self) -> DriveConfig:
        d = self.sections["drive"]
        if "Omega1_Hz" in d:
            O1 = TWO_PI * d["Omega1_Hz"]
            O2 = TWO_PI * d["Omega2_Hz"]
        else:
            O1 = rabi_from_power(d["P1_dBm"], d["k1"])
            O2 = rabi_from_power(d["P2_dBm"], d["k2"])
        return DriveConfig(
            omega1=TWO_PI * d["f1_Hz"],
            omega2=TWO_PI * d["f2_Hz"],
            Omega1=O1,
            Omega2=O2,
            phase1=d["phase1_rad"],
            phase2=d["phase2_rad"],
        )

    def spectrum_config(self) -> SpectrumConfig:
        s = self.sections["spectrum"]
        grid = TWO_PI * np.linspace(s["f_start_Hz"], s["f_stop_Hz"], s["points"])
        return SpectrumConfig(
            grid=grid,
            epsilon=TWO_PI * s["epsilon_Hz"],
            rbw=TWO_PI * s["rbw_Hz"],
            p_off=s["p_off_W"],
        )

    def solver_L(self) -> Optional[int]:
        raw = self.sections["solver"]["L"]
        if isinstance(raw, str):
            if raw == "adaptive":
                return None
            return int(raw)
        return int(raw)

    def sweep_spec(self) -> SweepSpec:
        if "sweep" not in self.sections:
            raise ConfigError("config has no [sweep] section")
        sw = self.sections["sweep"]
        d = self.sections["drive"]
        axis = sw["axis"]
        values = np.linspace(sw["start"], sw["stop"], sw["points"])
        if axis in ("omega1", "omega2", "delta_omega", "Omega1", "Omega2"):
            values = TWO_PI * values  # config sweeps are in Hz
        return SweepSpec(
            axis=axis,
            values=values,
            params=self.atom_params(),
            drive=self.drive_config(),
            spectrum_cfg=self.spectrum_config(),
            k1=d.get("k1"),
            k2=d.get("k2"),
            adaptive_L=sw["adaptive_L"],
            L=sw["L"],
        )


def parse_config(path: str, strict: bool = True) -> RunConfig:
    """Read and validate a run configuration file.

    Parameters
    ----------
    path : str
        Path to a sectioned ``key = value`` text file.
    strict : bool, optional
        If True (default) unknown sections or keys are errors; if False
        they produce warnings and are dropped.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        Missing file, unknown key (strict), missing required key,
        conflicting amplitude modes, malformed values, or violated
        range invariants.  Messages carry the key path and, where
        possible, the line number.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r") as fh:
        text = fh.read()

    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    sections: Dict[str, Dict[str, object]] = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            line = _find_line(text, sec, None)
            msg = f"{path}:{line}: unknown section [{sec}]"
            if strict:
                raise ConfigError(msg)
            warnings.warn(msg, stacklevel=2)
            continue
        out: Dict[str, object] = {}
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                line = _find_line(text, sec, key)
                msg = f"{path}:{line}: unknown key {sec}.{key}"
                if strict:
                    raise ConfigError(msg)
                warnings.warn(msg, stacklevel=2)
                continue
            _, kind = _SCHEMA[sec][key]
            out[key] = _convert(raw, kind, f"{path}: {sec}.{key}")
        sections[sec] = out

    for required_sec in ("atom", "drive", "spectrum"):
        if required_sec not in sections:
            raise ConfigError(f"{path}: missing required section [{required_sec}]")

    for sec, keys in _SCHEMA.items():
        if sec not in sections:
            continue
        for key, (required, _) in keys.items():
            if key in sections[sec]:
                continue
            if key in _DEFAULTS.get(sec, {}):
                sections[sec][key] = _DEFAULTS[sec][key]
            elif required:
                raise ConfigError(f"{path}: missing required key {sec}.{key}")

    d = sections["drive"]
    rabi_mode = "Omega1_Hz" in d or "Omega2_Hz" in d
    power_mode = any(k in d for k in ("P1_dBm", "P2_dBm", "k1", "k2"))
    if rabi_mode and power_mode:
        raise ConfigError(
            f"{path}: drive block mixes Omega*_Hz with P*_dBm/k*; "
            "exactly one amplitude mode is allowed"
        )
    if rabi_mode:
        for key in ("Omega1_Hz", "Omega2_Hz"):
            if key not in d:
                raise ConfigError(f"{path}: missing required key drive.{key}")
    elif power_mode:
        for key in ("P1_dBm", "P2_dBm", "k1", "k2"):
            if key not in d:
                raise ConfigError(f"{path}: missing required key drive.{key}")
    else:
        raise ConfigError(
            f"{path}: drive block needs Omega1_Hz/Omega2_Hz or P1_dBm/P2_dBm with k1, k2"
        )

    s = sections["spectrum"]
    if not s["f_start_Hz"] < s["f_stop_Hz"]:
        raise ConfigError(
            f"{path}: spectrum.f_start_Hz must be < spectrum.f_stop_Hz"
        )
    if s["points"] < 2:
        raise ConfigError(f"{path}: spectrum.points must be >= 2")

    sol = sections["solver"]
    if isinstance(sol["L"], str) and sol["L"] != "adaptive":
        try:
            sol["L"] = int(sol["L"])
        except ValueError:
            raise ConfigError(
                f"{path}: solver.L must be an integer or 'adaptive'"
            ) from None

    if "sweep" in sections and sections["sweep"]["axis"] not in SWEEP_AXES:
        raise ConfigError(
            f"{path}: sweep.axis must be one of {SWEEP_AXES}"
        )

    cfg = RunConfig(sections=sections)
    # trigger the model-level validation early so errors surface as config errors
    try:
        cfg.atom_params()
        cfg.drive_config()
        cfg.spectrum_config()
    except AtomCombError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def write_config(cfg: RunConfig, path: str) -> None:
    """Write the effective configuration; the file parses back to `cfg`."""
    params = cfg.atom_params()
    gamma10 = (params.relax_rate(1) / 2.0 + params.gamma_phi) / TWO_PI
    lines = [
        "# effective configuration (defaults applied)",
        f"# derived gamma10_Hz = {NUM_FMT % gamma10}",
    ]
    for sec in ("atom", "drive", "spectrum", "solver", "sweep", "spectroscopy"):
        if sec not in cfg.sections:
            continue
        lines.append("")
        lines.append(f"[{sec}]")
        for key in _SCHEMA[sec]:
            if key not in cfg.sections[sec]:
                continue
            val = cfg.sections[sec][key]
            if isinstance(val, bool):
                rendered = "true" if val else "false"
            elif isinstance(val, float):
                rendered = NUM_FMT % val
            else:
                rendered = str(val)
            lines.append(f"{key} = {rendered}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, str):
                    cells.append(cell)
                else:
                    cells.append(NUM_FMT % cell)
            fh.write(",".join(cells) + "\n")


def _spectrum_rows(result: SpectrumResult):
    for i, w in enumerate(result.grid):
        yield (
            w / TWO_PI,
            result.s_coherent[i],
            result.s_incoherent[i],
            result.s_total[i],
            result.psd_n_db[i],
        )


def _peak_rows(peaks, prefix=()):
    for p in peaks:
        yield prefix + (p.frequency / TWO_PI, p.height_db, p.prominence_db, p.label)


def _cmd_spectrum(cfg: RunConfig, out_dir: str, threads: int) -> int:
    result = compute_spectrum(
        cfg.atom_params(),
        cfg.drive_config(),
        cfg.spectrum_config(),
        L=cfg.solver_L(),
        L0=cfg.sections["solver"]["L0"],
        tol=cfg.sections["solver"]["tol"],
        L_max=cfg.sections["solver"]["L_max"],
        threads=threads,
    )
    peaks = detect_peaks(result)
    _write_csv(
        os.path.join(out_dir, "spectrum.csv"),
        ["f_Hz", "s_co", "s_inco", "s_total", "psd_n_db"],
        _spectrum_rows(result),
    )
    _write_csv(
        os.path.join(out_dir, "peaks.csv"),
        ["f_Hz", "height_db", "prominence_db", "label"],
        _peak_rows(peaks),
    )
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig, out_dir: str, threads: int) -> int:
    spec = cfg.sweep_spec()
    grid = run_sweep(spec, threads=threads)
    map_rows = []
    peak_rows = []
    failed_rows = []
    for row in grid.rows:
        if row.failed or row.result is None:
            failed_rows.append({"axis_value": row.axis_value, "reason": row.reason})
            continue
        for i, w in enumerate(row.result.grid):
            map_rows.append((row.axis_value, w / TWO_PI, row.result.psd_n_db[i]))
        peak_rows.extend(_peak_rows(detect_peaks(row.result), (row.axis_value,)))
    _write_csv(
        os.path.join(out_dir, "map.csv"),
        ["axis_value", "f_Hz", "psd_n_db"],
        map_rows,
    )
    _write_csv(
        os.path.join(out_dir, "peaks.csv"),
        ["axis_value", "f_Hz", "height_db", "prominence_db", "label"],
        peak_rows,
    )
    if failed_rows:
        with open(os.path.join(out_dir, "failed_rows.json"), "w") as fh:
            json.dump(failed_rows, fh, indent=2, sort_keys=True)
    return EXIT_OK


def _cmd_spectroscopy(cfg: RunConfig, out_dir: str, threads: int) -> int:
    if "spectroscopy" not in cfg.sections:
        raise ConfigError("config has no [spectroscopy] section")
    sp = cfg.sections["spectroscopy"]
    probe = TWO_PI * np.linspace(
        sp["probe_f_start_Hz"], sp["probe_f_stop_Hz"], sp["probe_points"]
    )
    powers = np.linspace(sp["P_start_dBm"], sp["P_stop_dBm"], sp["P_points"])
    pump_rabis = np.array([rabi_from_power(p, sp["k"]) for p in powers])
    result = two_tone_map(
        cfg.atom_params(),
        probe_freqs=probe,
        pump_freq=TWO_PI * sp["pump_f_Hz"],
        pump_rabis=pump_rabis,
        Omega_probe=TWO_PI * sp["probe_Omega_Hz"],
        L=sp["L"],
    )
    rows = []
    for i, p_dbm in enumerate(powers):
        for j, wp in enumerate(probe):
            r = result.reflection[i, j]
            rows.append((wp / TWO_PI, p_dbm, abs(r), float(np.angle(r))))
    _write_csv(
        os.path.join(out_dir, "r_map.csv"),
        ["probe_f_Hz", "drive_P_dBm", "abs_r", "arg_r"],
        rows,
    )
    return EXIT_OK


def _cmd_validate(cfg: RunConfig, out_dir: str, threads: int) -> int:
    checks = _validate_mod.run_validation_suite(cfg)
    payload = [
        {
            "name": c.name,
            "error": c.error,
            "tolerance": c.tolerance,
            "pass": c.passed,
        }
        for c in checks
    ]
    with open(os.path.join(out_dir, "validate.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "sweep": _cmd_sweep,
    "spectroscopy": _cmd_spectroscopy,
    "validate": _cmd_validate,
}


def run_command(cmd: str, cfg: RunConfig, out_dir: str, threads: int = 1) -> int:
    """Execute one CLI command against a parsed configuration.

    Writes the command outputs plus ``effective_config.ini`` into
    ``out_dir`` and returns the process exit code.  On failure an
    ``error.json`` record is written instead.
    """
    if cmd not in _COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}")
    os.makedirs(out_dir, exist_ok=True)
    write_config(cfg, os.path.join(out_dir, "effective_config.ini"))
    try:
        return _COMMANDS[cmd](cfg, out_dir, threads)
    except ConfigError:
        raise
    except AtomCombError as exc:
        record = {"command": cmd, "error": type(exc).__name__, "message": str(exc)}
        with open(os.path.join(out_dir, "error.json"), "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return EXIT_SOLVER


def _resolve_threads(flag: Optional[int]) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring non-integer {THREADS_ENV}={env!r}")
    return 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="atomcomb",
        description=(
            "Steady-state emission spectra and reflection spectroscopy of a "
            "driven multilevel atom at the end of a transmission line."
        ),
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"worker threads (overrides ${THREADS_ENV}; default 1)",
    )
    parser.add_argument(
        "--strict",
        action="store_true",
        default=True,
        help="reject unknown config keys (default on)",
    )
    parser.add_argument(
        "--no-strict",
        dest="strict",
        action="store_false",
        help="downgrade unknown config keys to warnings",
    )
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config, strict=args.strict)
        code = run_command(
            args.command, cfg, args.out, threads=_resolve_threads(args.threads)
        )
    except ConfigError as exc:
        record = {"error": "ConfigError", "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
