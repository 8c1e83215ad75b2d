"""Input-output models: avoided crossing, reflection, drive strengths and occupancies.

Inputs are linear frequencies in MHz, powers in W, currents in mA. Conversions
to angular SI rates happen only where hbar appears.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import hbar

from .errors import InputError
from .params import SystemParams

MHZ_TO_RAD = 2 * math.pi * 1e6
FEMTOWATT = 1e-15


@dataclass(frozen=True)
class CrossingParams:
    """Avoided-crossing fit parameters: p1 in MHz/mA, p2..p4 in MHz."""

    p1: float
    p2: float
    p3: float
    p4: float

    @property
    def omega_c_bare(self) -> float:
        return self.p2 + self.p3

    @property
    def coupling(self) -> float:
        return abs(self.p4)

    @property
    def magnon_slope(self) -> float:
        return 2 * self.p1

    @property
    def magnon_intercept(self) -> float:
        return self.p2 - self.p3

    def magnon_bare(self, current):
        return self.magnon_intercept + self.magnon_slope * np.asarray(current, dtype=float)

    @property
    def current_at_crossing(self) -> float:
        if self.p1 == 0:
            raise InputError("p1 = 0: the magnon line never crosses the cavity line")
        return self.p3 / self.p1


def crossing_branch(current, p: CrossingParams):
    """Dressed cavity frequency w_c^g(I); sgn(0) is taken as +1."""
    current = np.asarray(current, dtype=float)
    sign = np.where(current - p.current_at_crossing >= 0, 1.0, -1.0)
    return p.p1 * current + p.p2 - sign * np.hypot(p.p1 * current - p.p3, p.p4)


def crossing_branches(current, p: CrossingParams):
    """(lower, upper) eigenbranches of the two coupled lines."""
    current = np.asarray(current, dtype=float)
    mid = p.p1 * current + p.p2
    half = np.hypot(p.p1 * current - p.p3, p.p4)
    return mid - half, mid + half


@dataclass(frozen=True)
class ReflectionParams:
    omega_c: float
    kappa_int: float
    kappa_cpl: float
    g: float
    gamma_m: float
    omega_m: float

    def __post_init__(self):
        if min(self.kappa_int, self.kappa_cpl, self.gamma_m) < 0:
            raise InputError("rates must be non-negative")

    @property
    def kappa(self) -> float:
        return self.kappa_int + self.kappa_cpl


def reflection(omega_r, rp: ReflectionParams):
    """Complex reflection coefficient of the coupler mode hybridized with the magnon."""
    w = np.asarray(omega_r, dtype=float)
    self_energy = abs(rp.g) ** 2 / (w - rp.omega_m + 0.5j * rp.gamma_m)
    det = w - rp.omega_c - self_energy
    num = det + 0.5j * (rp.kappa_int - rp.kappa_cpl)
    den = det + 0.5j * rp.kappa
    return num / den


def probe_occupancy(p_r: float, omega_p: float, kappa_cpl: float, kappa: float) -> float:
    """Mean photon number of a mode driven on resonance through its coupling port."""
    if min(omega_p, kappa_cpl, kappa) <= 0 or p_r < 0:
        raise InputError("frequencies and rates must be positive, power non-negative")
    flux = p_r / (hbar * omega_p * MHZ_TO_RAD)
    return flux * kappa_cpl * MHZ_TO_RAD / (kappa * MHZ_TO_RAD / 2) ** 2


def _drive_sum(params: SystemParams, g_qm: float, modes: int) -> float:
    """Sum over cavity modes of sqrt(kappa_cpl) [g_m/D_m + g_qm g_q / (D_qm sqrt(D_m^2 + kappa^2))].

    Returned in sqrt(rad/s).
    """
    if modes > params.n_cavity:
        raise InputError(f"requested {modes} modes, parameters have {params.n_cavity}")
    d_qm = params.qubit_freq - params.magnon_freq
    if d_qm == 0:
        raise InputError("qubit and magnon are resonant; the dispersive drive formula is invalid")
    total = 0.0
    for p in range(modes):
        name = params.cavity_names[p]
        kappa, kappa_cpl = params.kappa[p], params.kappa_cpl[p]
        if kappa is None or kappa_cpl is None:
            raise InputError(f"cavity mode {name!r} needs kappa_int and kappa_cpl")
        d_m = params.cavity_freqs[p] - params.magnon_freq
        if d_m == 0:
            raise InputError(f"magnon is resonant with {name!r}")
        bracket = (params.g_magnon[p] / d_m
                   + g_qm * params.g_qubit[p] / (d_qm * math.hypot(d_m, kappa)))
        total += math.sqrt(kappa_cpl * MHZ_TO_RAD) * bracket
    return total


def kittel_drive_strength(p_mw: float, params: SystemParams, omega_mw: float,
                          g_qm: float, modes: int = 3) -> float:
    """Kittel-mode drive strength (MHz) for microwave power `p_mw` (W) at `omega_mw` (MHz)."""
    if p_mw < 0 or omega_mw <= 0:
        raise InputError("power must be non-negative and frequency positive")
    amplitude = math.sqrt(p_mw / (hbar * omega_mw * MHZ_TO_RAD))
    return amplitude * _drive_sum(params, g_qm, modes) / MHZ_TO_RAD


def linear_occupancy(omega, gamma: float, delta: float):
    """Steady-state occupancy Omega^2 / ((gamma/2)^2 + delta^2) of a driven damped mode."""
    if gamma <= 0:
        raise InputError("gamma must be positive")
    return np.asarray(omega, dtype=float) ** 2 / ((gamma / 2) ** 2 + delta ** 2)


def occupancy_slope(params: SystemParams, gamma_m: float, delta_mw: float, omega_mw: float,
                    g_qm: float, modes: int = 3) -> float:
    """Magnons per femtowatt of Kittel-mode drive power."""
    omega = kittel_drive_strength(FEMTOWATT, params, omega_mw, g_qm, modes)
    return float(linear_occupancy(omega, gamma_m, delta_mw))


def occupancy_slope_bounds(params: SystemParams, gamma_m, delta_mw, omega_mw: float,
                           g_qm: float, kappa_cpl_ranges: dict | None = None,
                           modes: int = 3) -> tuple[float, float]:
    """Extremal slope over the corners of the given (low, high) ranges.

    `gamma_m` and `delta_mw` are (low, high) pairs; `kappa_cpl_ranges` maps a
    cavity mode name to a (low, high) pair for its coupling rate.
    """
    kappa_cpl_ranges = kappa_cpl_ranges or {}
    names = list(kappa_cpl_ranges)
    values = []
    for combo in itertools.product(*(kappa_cpl_ranges[n] for n in names), gamma_m, delta_mw):
        kcpl = list(params.kappa_cpl)
        for name, val in zip(names, combo[:len(names)]):
            kcpl[params.mode(name)] = val
        varied = replace(params, kappa_cpl=tuple(kcpl))
        values.append(occupancy_slope(varied, combo[-2], combo[-1], omega_mw, g_qm, modes))
    return min(values), max(values)
