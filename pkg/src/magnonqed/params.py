"""System parameters and the YAML parameter-file format.

Frequencies and rates are linear frequencies in MHz throughout. Powers are
watts, times are microseconds, currents are milliamperes. Dimensional values
in parameter files must carry a unit suffix, e.g. ``"9.2 aW"``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import InputError
from .fock import ModeLayout

TRANSMON = "transmon"
KITTEL = "kittel"

_UNITS = {
    "frequency": {"Hz": 1e-6, "kHz": 1e-3, "MHz": 1.0, "GHz": 1e3},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9,
              "pW": 1e-12, "fW": 1e-15, "aW": 1e-18, "zW": 1e-21},
    "time": {"s": 1e6, "ms": 1e3, "us": 1.0, "µs": 1.0, "ns": 1e-3},
    "current": {"A": 1e3, "mA": 1.0, "uA": 1e-3},
    "tuning": {"MHz/mA": 1.0, "GHz/A": 1.0, "GHz/mA": 1e3},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d[\d_,]*\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d]+)\s*$")


def parse_quantity(value: Any, kind: str, key: str = "value") -> float:
    """Convert ``"<number> <unit>"`` to the internal unit of `kind`."""
    if not isinstance(value, str):
        raise InputError(f"{key}: missing unit (got {value!r}); expected a {kind} such as '1.0 "
                         f"{next(iter(_UNITS[kind]))}'")
    m = _QUANTITY.match(value)
    if not m:
        raise InputError(f"{key}: cannot parse quantity {value!r}")
    number, unit = m.groups()
    table = _UNITS[kind]
    if unit not in table:
        raise InputError(f"{key}: unit {unit!r} is not a {kind} unit ({', '.join(table)})")
    return float(number.replace(",", "").replace("_", "")) * table[unit]


@dataclass(frozen=True)
class SystemParams:
    """Bare parameters of the cavity-mode / transmon / Kittel-mode system (MHz)."""

    cavity_names: tuple[str, ...]
    cavity_freqs: tuple[float, ...]
    g_qubit: tuple[float, ...]
    g_magnon: tuple[float, ...]
    qubit_freq: float
    anharmonicity: float
    magnon_freq: float
    kappa_int: tuple[float | None, ...] = ()
    kappa_cpl: tuple[float | None, ...] = ()
    gamma_q0: float = 0.0
    gamma_m: float = 0.0

    def __post_init__(self):
        n = len(self.cavity_names)
        for name in ("cavity_freqs", "g_qubit", "g_magnon"):
            if len(getattr(self, name)) != n:
                raise InputError(f"{name} must have one entry per cavity mode")
        for name in ("kappa_int", "kappa_cpl"):
            vals = tuple(getattr(self, name)) or (None,) * n
            if len(vals) != n:
                raise InputError(f"{name} must have one entry per cavity mode")
            if any(v is not None and v < 0 for v in vals):
                raise InputError(f"{name} must be non-negative")
            object.__setattr__(self, name, vals)
        if self.anharmonicity >= 0:
            raise InputError("transmon anharmonicity must be negative")
        if self.gamma_q0 < 0 or self.gamma_m < 0:
            raise InputError("linewidths must be non-negative")

    @property
    def n_cavity(self) -> int:
        return len(self.cavity_names)

    @property
    def kappa(self) -> tuple[float | None, ...]:
        """Total cavity linewidths, internal + coupling."""
        return tuple(None if a is None or b is None else a + b
                     for a, b in zip(self.kappa_int, self.kappa_cpl))

    def mode(self, name: str) -> int:
        try:
            return self.cavity_names.index(name)
        except ValueError:
            raise InputError(f"unknown cavity mode {name!r}") from None

    def with_magnon_freq(self, freq: float) -> "SystemParams":
        return replace(self, magnon_freq=float(freq))

    def scaled_couplings(self, qubit: float = 1.0, magnon: float | None = None) -> "SystemParams":
        magnon = qubit if magnon is None else magnon
        return replace(self, g_qubit=tuple(qubit * g for g in self.g_qubit),
                       g_magnon=tuple(magnon * g for g in self.g_magnon))

    def default_layout(self, cavity: int = 3, transmon: int = 3, magnon: int = 3) -> ModeLayout:
        return ModeLayout(self.cavity_names + (TRANSMON, KITTEL),
                          (cavity,) * self.n_cavity + (transmon, magnon))


@dataclass(frozen=True)
class Experiment:
    """Measurement constants that are not part of the Hamiltonian."""

    probe_mode: str = "te103"
    coupler_mode: str = "te102"
    readout_power: float = 0.0
    readout_freq: float = 0.0
    spectroscopy_power: float = 0.0
    kittel_drive_freq: float = 0.0
    kittel_drive_detuning: float = 0.0
    kittel_drive_power: float = 0.0
    measured_g_qm: float | None = None
    t1: float | None = None
    t2_star: float | None = None
    drive_sum_modes: int = 3
    stark_shifted_qubit_freq: float | None = None
    broadened_qubit_linewidth: float | None = None
    photon_weight: float = 0.0
    coupler_freq_no_magnon: float | None = None
    crossing_current: float | None = None
    magnon_tuning: float | None = None


@dataclass(frozen=True)
class ParameterFile:
    system: SystemParams
    experiment: Experiment
    truncation: dict[str, int]
    uncertainties: dict[str, float] = field(default_factory=dict)
    source: str | None = None

    def layout(self, dims: list[int] | None = None) -> ModeLayout:
        if dims is None:
            t = self.truncation
            return self.system.default_layout(t["cavity"], t["transmon"], t["magnon"])
        n = self.system.n_cavity + 2
        if len(dims) == 3:
            return self.system.default_layout(*dims)
        if len(dims) != n:
            raise InputError(f"--truncation needs 3 or {n} integers, got {len(dims)}")
        return ModeLayout(self.system.cavity_names + (TRANSMON, KITTEL), tuple(dims))


_CAVITY_KEYS = {"name": None, "freq": "frequency", "g_qubit": "frequency",
                "g_magnon": "frequency", "kappa_int": "frequency", "kappa_cpl": "frequency"}
_CAVITY_REQUIRED = {"name", "freq", "g_qubit", "g_magnon"}
_QUBIT_KEYS = {"freq": "frequency", "anharmonicity": "frequency", "linewidth": "frequency"}
_MAGNON_KEYS = {"freq": "frequency", "linewidth": "frequency"}
_EXPERIMENT_KEYS = {
    "probe_mode": None, "coupler_mode": None,
    "readout_power": "power", "readout_freq": "frequency",
    "spectroscopy_power": "power", "kittel_drive_freq": "frequency",
    "kittel_drive_detuning": "frequency", "kittel_drive_power": "power",
    "measured_g_qm": "frequency", "t1": "time", "t2_star": "time", "drive_sum_modes": int,
    "stark_shifted_qubit_freq": "frequency", "broadened_qubit_linewidth": "frequency",
    "photon_weight": float, "coupler_freq_no_magnon": "frequency",
    "crossing_current": "current", "magnon_tuning": "tuning",
}
_TRUNCATION_KEYS = {"cavity", "transmon", "magnon"}
_TOP_KEYS = {"cavity_modes", "qubit", "magnon", "experiment", "truncation", "uncertainties"}
_TOP_REQUIRED = {"cavity_modes", "qubit", "magnon"}


def _check_keys(section: Mapping, allowed, required, where: str):
    if not isinstance(section, Mapping):
        raise InputError(f"{where}: expected a mapping")
    unknown = set(section) - set(allowed)
    if unknown:
        raise InputError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(section)
    if missing:
        raise InputError(f"{where}: missing required key(s) {sorted(missing)}")


def _section(raw: Mapping, spec: Mapping, where: str) -> dict:
    out = {}
    for key, val in raw.items():
        kind = spec[key]
        name = f"{where}.{key}"
        if kind is None:
            out[key] = str(val)
        elif kind is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise InputError(f"{name}: expected a dimensionless number")
            out[key] = float(val)
        elif kind is int:
            if not isinstance(val, int) or isinstance(val, bool):
                raise InputError(f"{name}: expected an integer")
            out[key] = val
        else:
            out[key] = parse_quantity(val, kind, name)
    return out


def _uncertainty_kind(key: str) -> str:
    field_name = key.rsplit(".", 1)[-1]
    for spec in (_CAVITY_KEYS, _QUBIT_KEYS, _MAGNON_KEYS, _EXPERIMENT_KEYS):
        kind = spec.get(field_name)
        if isinstance(kind, str):
            return kind
    raise InputError(f"uncertainties.{key}: not a dimensional parameter")


def parse_parameters(doc: Mapping, source: str | None = None) -> ParameterFile:
    _check_keys(doc, _TOP_KEYS, _TOP_REQUIRED, "parameter file")
    modes = doc["cavity_modes"]
    if not isinstance(modes, list) or not modes:
        raise InputError("cavity_modes: expected a non-empty list")
    cav = []
    for i, m in enumerate(modes):
        where = f"cavity_modes[{i}]"
        _check_keys(m, _CAVITY_KEYS, _CAVITY_REQUIRED, where)
        cav.append(_section(m, _CAVITY_KEYS, where))
    _check_keys(doc["qubit"], _QUBIT_KEYS, {"freq", "anharmonicity"}, "qubit")
    qubit = _section(doc["qubit"], _QUBIT_KEYS, "qubit")
    _check_keys(doc["magnon"], _MAGNON_KEYS, {"freq"}, "magnon")
    magnon = _section(doc["magnon"], _MAGNON_KEYS, "magnon")

    system = SystemParams(
        cavity_names=tuple(c["name"] for c in cav),
        cavity_freqs=tuple(c["freq"] for c in cav),
        g_qubit=tuple(c["g_qubit"] for c in cav),
        g_magnon=tuple(c["g_magnon"] for c in cav),
        kappa_int=tuple(c.get("kappa_int") for c in cav),
        kappa_cpl=tuple(c.get("kappa_cpl") for c in cav),
        qubit_freq=qubit["freq"],
        anharmonicity=qubit["anharmonicity"],
        gamma_q0=qubit.get("linewidth", 0.0),
        magnon_freq=magnon["freq"],
        gamma_m=magnon.get("linewidth", 0.0),
    )

    exp_raw = doc.get("experiment") or {}
    _check_keys(exp_raw, _EXPERIMENT_KEYS, (), "experiment")
    experiment = Experiment(**_section(exp_raw, _EXPERIMENT_KEYS, "experiment"))
    for key in ("probe_mode", "coupler_mode"):
        system.mode(getattr(experiment, key))

    trunc_raw = doc.get("truncation") or {}
    _check_keys(trunc_raw, _TRUNCATION_KEYS, (), "truncation")
    truncation = {"cavity": 3, "transmon": 3, "magnon": 3}
    for key, val in trunc_raw.items():
        if not isinstance(val, int) or val < 2:
            raise InputError(f"truncation.{key}: expected an integer >= 2")
        truncation[key] = val

    unc_raw = doc.get("uncertainties") or {}
    if not isinstance(unc_raw, Mapping):
        raise InputError("uncertainties: expected a mapping")
    uncertainties = {k: parse_quantity(v, _uncertainty_kind(k), f"uncertainties.{k}")
                     for k, v in unc_raw.items()}
    return ParameterFile(system, experiment, truncation, uncertainties, source)


def load_parameters(path: str | Path) -> ParameterFile:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read parameter file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: invalid YAML: {exc}") from exc
    if doc is None:
        raise InputError(f"{path}: empty parameter file")
    return parse_parameters(doc, source=str(path))


def canonical_path() -> Path:
    return Path(str(resources.files("magnonqed") / "data" / "canonical.yaml"))


def canonical() -> ParameterFile:
    return load_parameters(canonical_path())
