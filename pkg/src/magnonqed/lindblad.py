"""Steady states of a driven Kerr oscillator under single-mode relaxation.

Rotating-frame Hamiltonian (linear MHz):

    H = (delta + K/2) n - (K/2) n^2 + Omega (c + c^+)

Vectorization is column stacking, vec(A rho B) = (B^T kron A) vec(rho). The
Liouvillian is multiplied by 2 pi so it acts in angular units; the steady
state does not depend on that overall scale.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .errors import InputError, NumericalError, TruncationWarning

LEAKAGE_TOL = 1e-6
MAX_FOCK_DIM = 80


@dataclass(frozen=True)
class KerrModel:
    delta_mw: float
    kerr: float
    omega_mw: float
    gamma_m: float
    fock_dim: int = 30

    def __post_init__(self):
        if not self.gamma_m > 0:
            raise InputError("gamma_m must be positive")
        if self.fock_dim < 5:
            raise InputError("fock_dim must be >= 5")


@dataclass
class SteadyState:
    rho: np.ndarray
    occupancy: float
    residual: float
    fock_dim: int
    leakage: float


def _mode_ops(dim: int):
    c = sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, format="csr").astype(complex)
    n = sp.diags(np.arange(dim, dtype=float), 0, format="csr").astype(complex)
    return c, n


def _superop_parts(dim: int, delta: float, kerr: float, gamma: float):
    """Drive-independent Liouvillian and the superoperator multiplying Omega."""
    c, n = _mode_ops(dim)
    eye = sp.identity(dim, dtype=complex, format="csr")
    h0 = (delta + kerr / 2) * n - (kerr / 2) * (n @ n)
    x = c + c.T

    def commutator(h):
        return -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))

    diss = gamma * (sp.kron(c.conj(), c) - 0.5 * sp.kron(eye, n) - 0.5 * sp.kron(n.T, eye))
    scale = 2 * math.pi
    return (scale * (commutator(h0) + diss)).tocsr(), (scale * commutator(x)).tocsr()


def build_liouvillian(m: KerrModel) -> sp.csr_matrix:
    l0, l1 = _superop_parts(m.fock_dim, m.delta_mw, m.kerr, m.gamma_m)
    return (l0 + m.omega_mw * l1).tocsr()


def _trace_row(dim: int) -> np.ndarray:
    row = np.zeros(dim * dim, dtype=complex)
    row[np.arange(dim) * (dim + 1)] = 1.0
    return row


def _solve(liou: sp.csr_matrix, dim: int) -> tuple[np.ndarray, float]:
    a = liou.tolil(copy=True)
    a[0, :] = _trace_row(dim)
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", sp.linalg.MatrixRankWarning)
        try:
            x = spsolve(a.tocsc(), rhs)
        except (sp.linalg.MatrixRankWarning, RuntimeError) as exc:
            raise NumericalError(f"steady-state solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError("steady-state solve produced non-finite values")
    rho = x.reshape((dim, dim), order="F")
    residual = float(np.linalg.norm(liou @ x))
    return rho, residual


def _state(liou, dim) -> SteadyState:
    rho, residual = _solve(liou, dim)
    pops = np.real(np.diag(rho))
    occ = float(np.dot(np.arange(dim), pops))
    return SteadyState(rho, occ, residual, dim, float(pops[-2:].sum()))


def steady_state(m: KerrModel, auto_truncation: bool = True) -> SteadyState:
    """Solve L rho = 0 with unit trace (one row of L replaced by the trace constraint).

    When the top two Fock levels hold more than 1e-6 population the truncation
    is raised (x1.5) up to 80 levels; past that a TruncationWarning is issued.
    """
    while True:
        state = _state(build_liouvillian(m), m.fock_dim)
        if state.leakage <= LEAKAGE_TOL:
            return state
        if not auto_truncation or m.fock_dim >= MAX_FOCK_DIM:
            warnings.warn(f"population {state.leakage:.2e} in the top Fock levels at "
                          f"dimension {m.fock_dim}", TruncationWarning, stacklevel=2)
            return state
        m = replace(m, fock_dim=min(MAX_FOCK_DIM, int(math.ceil(m.fock_dim * 1.5))))


def liouvillian_norm(liou) -> float:
    return float(sp.linalg.norm(liou))


def kerr_sweep(gamma_m: float, delta_mw: float, kerr_list, omega_grid,
               fock_dim: int = 30) -> np.ndarray:
    """Steady-state occupancy for every (K, Omega); shape (len(kerr_list), len(omega_grid))."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    out = np.empty((len(kerr_list), len(omega_grid)))
    for i, kerr in enumerate(kerr_list):
        dim = fock_dim
        parts = _superop_parts(dim, delta_mw, kerr, gamma_m)
        for j, omega in enumerate(omega_grid):
            while True:
                st = _state((parts[0] + omega * parts[1]).tocsr(), dim)
                if st.leakage <= LEAKAGE_TOL or dim >= MAX_FOCK_DIM:
                    break
                dim = min(MAX_FOCK_DIM, int(math.ceil(dim * 1.5)))
                parts = _superop_parts(dim, delta_mw, kerr, gamma_m)
            if st.leakage > LEAKAGE_TOL:
                warnings.warn(f"truncation leakage {st.leakage:.2e} at K={kerr}, Omega={omega}",
                              TruncationWarning, stacklevel=2)
            out[i, j] = st.occupancy
    return out


@dataclass
class KerrFit:
    kerr: float
    proportionality: float
    r2: float
    kerr_grid: np.ndarray
    proportionality_grid: np.ndarray
    r2_surface: np.ndarray
    kerr_bounds: tuple[float, float] | None = None


def r_squared(data, model) -> float:
    data = np.asarray(data, dtype=float)
    ss_tot = np.sum((data - data.mean()) ** 2)
    return 1.0 - np.sum((data - model) ** 2) / ss_tot


def _occupancy_curve(gamma_m, delta_mw, kerr, omega2_max, points, fock_dim):
    omega2 = np.linspace(0.0, omega2_max, points)
    occ = kerr_sweep(gamma_m, delta_mw, [kerr], np.sqrt(omega2), fock_dim)[0]
    return CubicSpline(omega2, occ)


def _r2_surface(power, nbar, gamma_m, delta_mw, kerr_grid, prop_grid, points, fock_dim):
    omega2_max = prop_grid.max() * power.max()
    surface = np.empty((len(kerr_grid), len(prop_grid)))
    for i, kerr in enumerate(kerr_grid):
        curve = _occupancy_curve(gamma_m, delta_mw, kerr, omega2_max, points, fock_dim)
        model = curve(np.outer(prop_grid, power))
        resid = ((nbar[None, :] - model) ** 2).sum(axis=1)
        surface[i] = 1.0 - resid / np.sum((nbar - nbar.mean()) ** 2)
    return surface


def fit_kerr(power, nbar, gamma_m: float, delta_mw: float, kerr_grid=None,
             prop_steps: int = 101, prop_span: float = 0.5, extremes=None,
             curve_points: int = 41, fock_dim: int = 30) -> KerrFit:
    """Grid search over (K, Omega^2 / P) maximizing R^2 against measured occupancies.

    The proportionality grid spans +/- `prop_span` around the value implied by a
    zero-intercept linear fit. `extremes` is an optional list of (gamma_m,
    delta_mw) pairs; the best K at each one gives the reported K bounds.
    """
    power = np.asarray(power, dtype=float)
    nbar = np.asarray(nbar, dtype=float)
    if power.shape != nbar.shape or power.ndim != 1:
        raise InputError("power and occupancy must be 1-D arrays of equal length")
    if len(power) < 4:
        raise InputError("need at least 4 data points")
    if np.ptp(nbar) == 0:
        raise InputError("occupancy data is constant")
    if np.any(power < 0):
        raise InputError("powers must be non-negative")
    kerr_grid = np.round(np.arange(-0.6, 0.2 + 1e-9, 0.01), 10) if kerr_grid is None \
        else np.asarray(kerr_grid, dtype=float)
    slope = np.dot(power, nbar) / np.dot(power, power)
    center = slope * ((gamma_m / 2) ** 2 + delta_mw ** 2)
    prop_grid = center * np.linspace(1 - prop_span, 1 + prop_span, prop_steps)

    surface = _r2_surface(power, nbar, gamma_m, delta_mw, kerr_grid, prop_grid,
                          curve_points, fock_dim)
    i, j = np.unravel_index(np.argmax(surface), surface.shape)
    bounds = None
    if extremes:
        ks = [float(kerr_grid[i])]
        for g, d in extremes:
            s = _r2_surface(power, nbar, g, d, kerr_grid,
                            slope * ((g / 2) ** 2 + d ** 2)
                            * np.linspace(1 - prop_span, 1 + prop_span, prop_steps),
                            curve_points, fock_dim)
            ks.append(float(kerr_grid[np.unravel_index(np.argmax(s), s.shape)[0]]))
        bounds = (min(ks), max(ks))
    return KerrFit(float(kerr_grid[i]), float(prop_grid[j]), float(surface[i, j]),
                   kerr_grid, prop_grid, surface, bounds)
