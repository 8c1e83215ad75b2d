"""Analytical qubit spectrum of a qubit dispersively coupled to a driven oscillator.

Every frequency and rate is a linear frequency in MHz. Linewidths enter the
Lorentzian factors 1 / (gamma - i (w - w_n)) directly, so ``gamma`` is a
half width at half maximum.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import factorial

from .errors import InputError, RegimeWarning, TruncationWarning

NEGATIVE_WEIGHT_TOL = 1e-12
# the full ladder sums to one; a larger gap means n_max is too small for |A|
WEIGHT_SUM_TOL = 1e-3


@dataclass(frozen=True)
class SpectrumModel:
    omega_q: float
    gamma_q: float
    chi: float
    kappa: float
    delta_d: float = 0.0
    omega_d: float = 0.0
    n_max: int = 10

    def __post_init__(self):
        if not self.gamma_q > 0:
            raise InputError("gamma_q must be positive")
        if not self.kappa > 0:
            raise InputError("kappa must be positive")
        if self.n_max < 1:
            raise InputError("n_max must be >= 1")

    @classmethod
    def from_occupancy(cls, nbar_g: float, *, omega_q, gamma_q, chi, kappa, delta_d=0.0,
                       n_max=10) -> "SpectrumModel":
        """Build a model whose drive strength gives ground-state occupancy `nbar_g`."""
        if nbar_g < 0:
            raise InputError("occupancy must be non-negative")
        drive = math.sqrt(nbar_g * ((kappa / 2) ** 2 + delta_d ** 2))
        return cls(omega_q, gamma_q, chi, kappa, delta_d, drive, n_max)


@dataclass(frozen=True)
class SpectrumComponents:
    A: complex
    B: float
    D_ss: float
    nbar_g: float
    nbar_e: float
    peak_freqs: np.ndarray
    peak_widths: np.ndarray
    weights: np.ndarray


def spectrum_components(m: SpectrumModel) -> SpectrumComponents:
    half = m.kappa / 2
    drive2 = m.omega_d ** 2
    nbar_g = drive2 / (half ** 2 + m.delta_d ** 2)
    nbar_e = drive2 / (half ** 2 + (m.delta_d + 2 * m.chi) ** 2)
    d_ss = 2 * (nbar_g + nbar_e) * m.chi ** 2 / (half ** 2 + m.chi ** 2 + (m.chi + m.delta_d) ** 2)
    step = 2 * m.chi + m.delta_d
    a = d_ss * (half - 1j * step) / (half + 1j * step)
    b = m.chi * (nbar_g + nbar_e - d_ss)
    n = np.arange(m.n_max + 1)
    freqs = m.omega_q + b + n * step
    widths = m.gamma_q + m.kappa * (n + d_ss)
    return SpectrumComponents(a, b, d_ss, nbar_g, nbar_e, freqs, widths, _ladder_weights(a, m.n_max))


def _ladder_weights(a: complex, n_max: int) -> np.ndarray:
    """Complex coefficients (-A)^n e^A / n!; their real parts are the integrated weights."""
    n = np.arange(n_max + 1)
    return (-a) ** n * np.exp(a) / factorial(n)


def _lorentz_sum(omega_s, coeffs, freqs, widths) -> np.ndarray:
    w = np.asarray(omega_s, dtype=float)[..., None]
    return np.real(coeffs / (widths - 1j * (w - freqs))) / np.pi


def spectrum(m: SpectrumModel, omega_s) -> tuple[np.ndarray, np.ndarray]:
    """Return the total spectrum S(w) and its per-number components S_n(w).

    Components have shape ``omega_s.shape + (n_max + 1,)``.
    """
    c = spectrum_components(m)
    parts = _lorentz_sum(omega_s, c.weights, c.peak_freqs, c.peak_widths)
    return parts.sum(axis=-1), parts


@dataclass(frozen=True)
class CompositeModel:
    """Magnon-ladder spectrum plus the one-photon replica from the probe mode.

    ``magnon.omega_q`` and ``magnon.gamma_q`` are the qubit frequency and width
    with the probe mode in vacuum. ``conversion`` maps S(w) onto Re(dr).
    """

    magnon: SpectrumModel
    chi_qp: float
    kappa_p: float
    photon_weight: float = 0.0
    conversion: float = 1.0
    offset: float = 0.0
    delta_p: float = 0.0

    def __post_init__(self):
        if self.photon_weight < 0:
            raise InputError("relative one-photon weight must be non-negative")


def composite_components(c: CompositeModel, omega_s) -> np.ndarray:
    """Components S_{n_m, n_p}; shape ``omega_s.shape + (2, n_max + 1)``, already weighted."""
    base = spectrum_components(c.magnon)
    out = []
    for n_p, weight in ((0, 1.0), (1, c.photon_weight)):
        freqs = base.peak_freqs + n_p * (2 * c.chi_qp + c.delta_p)
        widths = base.peak_widths + n_p * c.kappa_p
        out.append(weight * _lorentz_sum(omega_s, base.weights, freqs, widths))
    return np.stack(out, axis=-2)


def composite_spectrum(c: CompositeModel, omega_s) -> np.ndarray:
    parts = composite_components(c, omega_s)
    return c.conversion * parts.sum(axis=(-1, -2)) + c.offset


def number_probabilities(model: SpectrumModel | CompositeModel) -> np.ndarray:
    """Probabilities p_n as normalized integrated weights of the spectral components.

    The integral of S_n over all frequencies is Re[(-A)^n e^A] / n!, which
    does not depend on the peak positions or widths. For a composite model both
    probe-photon replicas carry the same magnon weights, so only the magnon
    ladder matters; conversion factor and offset never enter.
    """
    m = model.magnon if isinstance(model, CompositeModel) else model
    w = np.real(spectrum_components(m).weights)
    if abs(w.sum() - 1) > WEIGHT_SUM_TOL:
        warnings.warn(f"integrated weights up to n={m.n_max} sum to {w.sum():.6g}; "
                      "raise n_max", TruncationWarning, stacklevel=2)
    if np.any(w < -NEGATIVE_WEIGHT_TOL):
        bad = np.flatnonzero(w < -NEGATIVE_WEIGHT_TOL).tolist()
        warnings.warn(f"negative integrated weights at n={bad}; model is outside the "
                      "dispersive regime, clipped to zero", RegimeWarning, stacklevel=2)
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def poisson_reference(d_ss: float, n_max: int = 10) -> np.ndarray:
    if d_ss < 0:
        raise InputError("Poisson mean must be non-negative")
    n = np.arange(n_max + 1)
    return d_ss ** n * np.exp(-d_ss) / factorial(n)


def probability_extrema(model: CompositeModel | SpectrumModel, nbar_ci, chi_ci, delta_ci):
    """Min/max of p_n over the corners of the (occupancy, chi, detuning) CI box."""
    m = model.magnon if isinstance(model, CompositeModel) else model
    rows = []
    for nbar in nbar_ci:
        for chi in chi_ci:
            for delta in delta_ci:
                corner = SpectrumModel.from_occupancy(
                    max(nbar, 0.0), omega_q=m.omega_q, gamma_q=m.gamma_q, chi=chi,
                    kappa=m.kappa, delta_d=delta, n_max=m.n_max)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RegimeWarning)
                    rows.append(number_probabilities(corner))
    rows = np.array(rows)
    return rows.min(axis=0), rows.max(axis=0)


def power_broadened_linewidth(p_s, eta: float, gamma0: float):
    """gamma(P) = sqrt(eta P + gamma0^2); eta in MHz^2 / W, P in W."""
    p_s = np.asarray(p_s, dtype=float)
    if np.any(p_s < 0):
        raise InputError("power must be non-negative")
    if gamma0 <= 0:
        raise InputError("gamma0 must be positive")
    return np.sqrt(eta * p_s + gamma0 ** 2)


def rabi_from_linewidth(gamma_p, gamma0: float):
    """Spectroscopy Rabi frequency 0.5 sqrt(gamma(P)^2 - gamma0^2)."""
    gamma_p = np.asarray(gamma_p, dtype=float)
    if np.any(gamma_p < gamma0):
        raise InputError("broadened linewidth is below the intrinsic linewidth")
    return 0.5 * np.sqrt(gamma_p ** 2 - gamma0 ** 2)


def linewidth_from_t2(t2_star_us: float) -> float:
    """Linewidth (MHz) 1 / (pi T2*) for T2* in microseconds."""
    if t2_star_us <= 0:
        raise InputError("T2* must be positive")
    return 1.0 / (math.pi * t2_star_us)

