"""Nonlinear least squares with confidence intervals, plus one adapter per fitted model.

Confidence intervals are 1.96 * sqrt(diag(cov)) with cov = s^2 (J^T J)^-1 and
s^2 = RSS / (N - k). When a parameter sits on a bound the interval is clipped
to that bound, which is the only source of asymmetric intervals.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize
from scipy.signal import find_peaks

from . import spectrum as spec
from .errors import InputError, RegimeWarning
from .io_response import CrossingParams, ReflectionParams, crossing_branch, reflection

Z95 = 1.96


@dataclass
class FitResult:
    names: list[str]
    values: np.ndarray
    covariance: np.ndarray
    ci95: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    rss: float
    n_data: int
    iterations: int
    converged: bool
    gradient_norm: float
    message: str = ""
    fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    singular: bool = False
    at_bound: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def ci(self, name: str) -> tuple[float, float]:
        i = self.names.index(name)
        return float(self.ci_lower[i]), float(self.ci_upper[i])

    def as_dict(self) -> dict:
        return {
            "parameters": {
                n: {"value": float(v), "ci95": [float(lo), float(hi)], "fixed": bool(f)}
                for n, v, lo, hi, f in zip(self.names, self.values, self.ci_lower,
                                           self.ci_upper, self.fixed)
            },
            "rss": self.rss,
            "n_data": self.n_data,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "singular": self.singular,
            "message": self.message,
        }


def fd_jacobian(fun: Callable, x: np.ndarray, f0: np.ndarray | None = None) -> np.ndarray:
    """Central differences with step max(1e-6 |x_i|, 1e-9)."""
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = max(1e-6 * abs(x[i]), 1e-9)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h)
    return jac


def least_squares(residual: Callable, x0: Sequence[float], names: Sequence[str] | None = None,
                  bounds: Sequence[tuple[float, float]] | None = None,
                  fixed: Sequence[bool] | None = None, max_nfev: int = 2000,
                  tol: float = 1e-12) -> FitResult:
    """Minimize sum(residual(x)**2) over the free entries of x.

    `residual` takes the full parameter vector. Fixed entries are never
    touched and come back bit-identical.
    """
    x0 = np.array(x0, dtype=float)
    k_all = x0.size
    names = list(names) if names is not None else [f"p{i}" for i in range(k_all)]
    fixed = np.zeros(k_all, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
    lb = np.full(k_all, -np.inf)
    ub = np.full(k_all, np.inf)
    if bounds is not None:
        for i, (lo, hi) in enumerate(bounds):
            lb[i] = -np.inf if lo is None else lo
            ub[i] = np.inf if hi is None else hi
    free = np.flatnonzero(~fixed)

    def full(z):
        x = x0.copy()
        x[free] = z
        return x

    def fun(z):
        return np.asarray(residual(full(z)), dtype=float).ravel()

    r0 = fun(x0[free])
    if not np.all(np.isfinite(r0)):
        raise InputError("residuals are not finite at the initial guess")
    n = r0.size
    if free.size > n:
        raise InputError(f"{free.size} free parameters but only {n} data points")

    z0 = np.clip(x0[free], lb[free], ub[free])
    bounded = np.any(np.isfinite(lb[free])) or np.any(np.isfinite(ub[free]))
    if free.size == 0:
        z, nfev, status, msg = z0, 0, 1, "no free parameters"
    else:
        if bounded:
            inside = (z0 > lb[free]) & (z0 < ub[free])
            span = np.where(np.isfinite(ub[free] - lb[free]), ub[free] - lb[free], 1.0)
            z0 = np.where(inside, z0, np.clip(z0, lb[free] + 1e-9 * span, ub[free] - 1e-9 * span))
        res = scipy.optimize.least_squares(
            fun, z0, jac=lambda z: fd_jacobian(fun, z),
            bounds=(lb[free], ub[free]) if bounded else (-np.inf, np.inf),
            method="trf" if bounded else "lm",
            xtol=tol, ftol=tol, gtol=tol, max_nfev=max_nfev,
        )
        z, nfev, status, msg = res.x, res.nfev, res.status, res.message

    x = full(z)
    r = fun(z)
    rss = float(r @ r)
    cov = np.zeros((k_all, k_all))
    singular = False
    grad_norm = 0.0
    at_bound = np.zeros(k_all, dtype=bool)
    if free.size:
        jac = fd_jacobian(fun, z, r)
        grad = jac.T @ r
        # trf keeps iterates strictly inside, so allow a small slack
        slack = 1e-7 * np.maximum(1.0, np.abs(z))
        at_bound[free] = (z <= lb[free] + slack) | (z >= ub[free] - slack)
        grad_norm = float(np.linalg.norm(grad[~at_bound[free]]))
        jtj = jac.T @ jac
        dof = n - free.size
        s2 = rss / dof if dof > 0 else 0.0
        if np.linalg.matrix_rank(jtj) < free.size:
            singular = True
            inv = np.linalg.pinv(jtj)
        else:
            inv = np.linalg.inv(jtj)
        cov[np.ix_(free, free)] = s2 * inv
    ci = Z95 * np.sqrt(np.clip(np.diag(cov), 0, None))
    lower = np.maximum(x - ci, lb)
    upper = np.minimum(x + ci, ub)
    return FitResult(names, x, cov, ci, lower, upper, rss, n, int(nfev), bool(status > 0),
                     grad_norm, str(msg), fixed, singular, at_bound)


def _fix_mask(names, fix: dict | None, x0):
    fix = fix or {}
    unknown = set(fix) - set(names)
    if unknown:
        raise InputError(f"cannot fix unknown parameter(s) {sorted(unknown)}")
    x0 = list(x0)
    mask = []
    for i, n in enumerate(names):
        if n in fix:
            x0[i] = float(fix[n])
        mask.append(n in fix)
    return x0, mask


# ---------------------------------------------------------------- avoided crossing

@dataclass
class CrossingFit:
    params: CrossingParams
    result: FitResult
    warnings: list[str]


def _crossing_split(current, omega):
    """Indices sorted by current and the position of the largest frequency jump."""
    order = np.argsort(current, kind="stable")
    jumps = np.diff(np.asarray(omega, float)[order])
    return order, int(np.argmax(np.abs(jumps)))


def crossing_guess(current, omega) -> list[float]:
    """Initial (p1..p4) from the jump at the crossing and the two-mode relation.

    For a cavity-like branch shifted by x from the bare cavity, the magnon
    detuning is x - g^2/x, so each point away from the jump yields one sample of
    the bare magnon line, which is then fitted by a straight line.
    """
    order, j = _crossing_split(current, omega)
    i_s, w_s = np.asarray(current, float)[order], np.asarray(omega, float)[order]
    g = abs(w_s[j + 1] - w_s[j]) / 2
    w_c = 0.5 * (w_s[j] + w_s[j + 1])
    x = w_s - w_c
    keep = np.abs(x) > 0.2 * g
    if keep.sum() < 2:
        raise InputError("not enough points away from the crossing to seed the fit")
    w_m = w_c + x[keep] - g ** 2 / x[keep]
    slope, intercept = np.polyfit(i_s[keep], w_m, 1)
    p1 = slope / 2
    p2 = 0.5 * (w_c + intercept)
    p3 = 0.5 * (w_c - intercept)
    return [p1, p2, p3, g]


def fit_crossing(current, omega, fix: dict | None = None, x0=None) -> CrossingFit:
    """Fit the dressed coupler frequency (MHz) against coil current (mA).

    The sign term switches where the data jumps from one branch to the other;
    holding that partition fixed during the fit keeps the objective smooth.
    Afterwards the fitted crossing current must fall inside the jump, which
    makes the result identical to the formula with sgn(I - I0).
    """
    current = np.asarray(current, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if current.size != omega.size or current.size < 5:
        raise InputError("crossing fit needs at least 5 (current, frequency) pairs")
    names = ["p1", "p2", "p3", "p4"]
    guess = list(x0) if x0 is not None else crossing_guess(current, omega)
    guess, mask = _fix_mask(names, fix, guess)
    order, j = _crossing_split(current, omega)
    split = 0.5 * (current[order[j]] + current[order[j + 1]])
    side = np.where(current >= split, 1.0, -1.0)
    if guess[0] < 0:
        side = -side

    def residual(p):
        return p[0] * current + p[1] - side * np.hypot(p[0] * current - p[2], p[3]) - omega

    result = least_squares(residual, guess, names, fixed=mask,
                           bounds=[(None, None)] * 3 + [(0.0, None)])
    cp = CrossingParams(*result.values)
    notes = []
    i0 = cp.current_at_crossing if cp.p1 else math.nan
    if not (current.min() < i0 < current.max()):
        notes.append(f"data does not straddle the crossing current {i0:.4g} mA; "
                     "fit is ill-conditioned")
    elif not (current[order[j]] - 1e-6 <= i0 <= current[order[j + 1]] + 1e-6):
        notes.append("fitted crossing current lies outside the observed branch jump")
    for n in notes:
        warnings.warn(n, RegimeWarning, stacklevel=2)
    return CrossingFit(cp, result, notes)


# ---------------------------------------------------------------- reflection

@dataclass
class ReflectionFit:
    gamma_m: float
    g: float
    omega_m: np.ndarray
    currents: np.ndarray
    result: FitResult


def _two_dips(omega_r, re_r):
    peaks, props = find_peaks(-np.asarray(re_r), prominence=0)
    if len(peaks) == 0:
        return [omega_r[int(np.argmin(re_r))]]
    top = peaks[np.argsort(-props["prominences"])[:2]]
    return sorted(omega_r[top])


def fit_reflection_global(spectra, omega_c: float, kappa_int: float, kappa_cpl: float,
                          g0: float | None = None, gamma0: float = 1.0,
                          omega_m0: Sequence[float] | None = None) -> ReflectionFit:
    """Joint fit of Re(r) curves: shared (gamma_m, g), one bare magnon frequency per curve.

    `spectra` is a sequence of (current, omega_r, re_r). Without explicit
    guesses, each curve's two deepest dips x1, x2 seed the magnon frequency
    (x1 + x2 - omega_c) and the coupling (sqrt((x2 - omega_c)(omega_c - x1))).
    """
    spectra = [(float(i), np.asarray(w, float), np.asarray(r, float)) for i, w, r in spectra]
    if len(spectra) < 2:
        raise InputError("global reflection fit needs at least two currents")
    seeds_m, seeds_g = [], []
    for _, w, r in spectra:
        dips = _two_dips(w, r)
        if len(dips) == 2:
            x1, x2 = dips
            seeds_m.append(x1 + x2 - omega_c)
            prod = (x2 - omega_c) * (omega_c - x1)
            if prod > 0:
                seeds_g.append(math.sqrt(prod))
        else:
            seeds_m.append(dips[0])
    if omega_m0 is not None:
        seeds_m = list(omega_m0)
    if g0 is None:
        g0 = float(np.median(seeds_g)) if seeds_g else 10.0
    names = ["gamma_m", "g"] + [f"omega_m[{k}]" for k in range(len(spectra))]
    x0 = [gamma0, g0] + list(seeds_m)

    def residual(p):
        out = []
        for k, (_, w, r) in enumerate(spectra):
            rp = ReflectionParams(omega_c, kappa_int, kappa_cpl, p[1], abs(p[0]), p[2 + k])
            out.append(np.real(reflection(w, rp)) - r)
        return np.concatenate(out)

    result = least_squares(residual, x0, names,
                           bounds=[(0.0, None), (0.0, None)] + [(None, None)] * len(spectra))
    return ReflectionFit(result["gamma_m"], result["g"], result.values[2:].copy(),
                         np.array([s[0] for s in spectra]), result)


# ---------------------------------------------------------------- qubit spectra

def _peak_seed(omega_s, y):
    omega_s = np.asarray(omega_s, float)
    y = np.asarray(y, float)
    edge = max(3, y.size // 20)
    offset = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    dev = y - offset
    sign = 1.0 if dev.max() >= -dev.min() else -1.0
    i = int(np.argmax(sign * dev))
    height = sign * dev[i]
    above = np.flatnonzero(sign * dev >= height / 2)
    fwhm = max(omega_s[above.max()] - omega_s[above.min()], np.min(np.diff(omega_s)) * 2)
    gamma = fwhm / 2
    return offset, sign * height * math.pi * gamma, float(omega_s[i]), gamma


@dataclass
class QubitFit:
    model: spec.CompositeModel | spec.SpectrumModel
    result: FitResult
    probabilities: np.ndarray | None = None
    prob_lower: np.ndarray | None = None
    prob_upper: np.ndarray | None = None


def vacuum_model(p, kappa_p, delta_p=0.0, n_max=10) -> spec.SpectrumModel:
    omega_q, gamma_q, chi_qp, nbar_p = p[:4]
    return spec.SpectrumModel.from_occupancy(
        max(nbar_p, 0.0), omega_q=omega_q, gamma_q=abs(gamma_q), chi=chi_qp, kappa=kappa_p,
        delta_d=delta_p, n_max=n_max)


def fit_qubit_spectrum_vacuum(omega_s, re_dr, kappa_p: float, delta_p: float = 0.0,
                              n_max: int = 10, chi0: float = -0.5, nbar0: float = 0.1,
                              fix: dict | None = None) -> QubitFit:
    """Fit Re(dr) = A * S(w) + offset with the probe-photon ladder (frequencies in MHz).

    Free: qubit frequency, qubit linewidth, qubit-probe dispersive shift,
    probe occupancy, conversion factor and offset. Seeds come from the highest
    peak (position and half width) and the spectrum edges (offset).
    """
    omega_s = np.asarray(omega_s, float)
    re_dr = np.asarray(re_dr, float)
    offset, conv, w_peak, gamma = _peak_seed(omega_s, re_dr)
    names = ["omega_q", "gamma_q", "chi_qp", "nbar_p", "conversion", "offset"]
    x0, mask = _fix_mask(names, fix, [w_peak, gamma, chi0, nbar0, conv, offset])

    def residual(p):
        s, _ = spec.spectrum(vacuum_model(p, kappa_p, delta_p, n_max), omega_s)
        return p[4] * s + p[5] - re_dr

    bounds = [(None, None), (1e-6, None), (None, None), (0.0, None), (None, None), (None, None)]
    result = least_squares(residual, x0, names, bounds=bounds, fixed=mask)
    model = vacuum_model(result.values, kappa_p, delta_p, n_max)
    return QubitFit(model, result)


def magnon_model(p, *, omega_q0, gamma_q0, gamma_m, photon_weight, chi_qp, kappa_p,
                 delta_p=0.0, n_max=10) -> spec.CompositeModel:
    chi_qm, delta_mw, nbar_m, conversion, offset = p
    ladder = spec.SpectrumModel.from_occupancy(
        max(nbar_m, 0.0), omega_q=omega_q0, gamma_q=gamma_q0, chi=chi_qm, kappa=gamma_m,
        delta_d=delta_mw, n_max=n_max)
    return spec.CompositeModel(ladder, chi_qp, kappa_p, photon_weight, conversion, offset, delta_p)


def fit_qubit_spectrum_magnon(omega_s, re_dr, *, omega_q0: float, gamma_q0: float,
                              gamma_m: float, photon_weight: float, chi_qp: float,
                              kappa_p: float, n_max: int = 10, fix: dict | None = None,
                              x0=None) -> QubitFit:
    """Fit the composite magnon x probe-photon spectrum.

    Free: qubit-magnon dispersive shift, drive detuning, magnon occupancy,
    conversion factor and offset. The peak spacing 2 chi + delta seeds chi with
    delta = 0; a few detuning starts are tried and the lowest RSS kept. Number
    probabilities come with extremal values over the CI box of (occupancy,
    chi, detuning).
    """
    omega_s = np.asarray(omega_s, float)
    re_dr = np.asarray(re_dr, float)
    offset, conv, w_peak, _ = _peak_seed(omega_s, re_dr)
    sign = math.copysign(1.0, conv)
    peaks, props = find_peaks(sign * (re_dr - offset), prominence=0)
    spacing = 2.6
    if len(peaks) >= 2:
        best = np.sort(omega_s[peaks[np.argsort(-props["prominences"])[:2]]])
        spacing = float(best[1] - best[0])
    fixed_kw = dict(omega_q0=omega_q0, gamma_q0=gamma_q0, gamma_m=gamma_m,
                    photon_weight=photon_weight, chi_qp=chi_qp, kappa_p=kappa_p, n_max=n_max)
    names = ["chi_qm", "delta_mw", "nbar_m", "conversion", "offset"]

    def residual(p):
        return spec.composite_spectrum(magnon_model(p, **fixed_kw), omega_s) - re_dr

    bounds = [(None, None), (None, None), (0.0, None), (None, None), (None, None)]
    starts = [x0] if x0 is not None else [
        [(spacing - d) / 2, d, 0.5, conv, offset] for d in (0.0, -0.5, 0.5)]
    result = None
    for start in starts:
        start, mask = _fix_mask(names, fix, start)
        r = least_squares(residual, start, names, bounds=bounds, fixed=mask)
        if result is None or r.rss < result.rss:
            result = r
    model = magnon_model(result.values, **fixed_kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        probs = spec.number_probabilities(model)
    lo, hi = spec.probability_extrema(model, result.ci("nbar_m"), result.ci("chi_qm"),
                                      result.ci("delta_mw"))
    return QubitFit(model, result, probs, lo, hi)


# ---------------------------------------------------------------- power broadening

@dataclass
class BroadeningFit:
    eta: float
    gamma0: float
    floor: float
    result: FitResult


def t1_floor(t1_us: float) -> float:
    """Smallest intrinsic linewidth (MHz) allowed by T1 (us): 1 / (2 pi T1)."""
    if t1_us <= 0:
        raise InputError("T1 must be positive")
    return 1.0 / (2 * math.pi * t1_us)


def fit_power_broadening(power, gamma, t1_us: float | None = None,
                         fix: dict | None = None) -> BroadeningFit:
    """Fit gamma(P) = sqrt(eta P + gamma0^2) with gamma0 >= 1/(2 pi T1).

    The slope seed comes from a straight-line fit of gamma^2 against P.
    """
    power = np.asarray(power, float)
    gamma = np.asarray(gamma, float)
    floor = t1_floor(t1_us) if t1_us is not None else 1e-9
    slope, intercept = np.polyfit(power, gamma ** 2, 1)
    names = ["eta", "gamma0"]
    x0, mask = _fix_mask(names, fix, [max(slope, 1e-12), math.sqrt(max(intercept, floor ** 2))])

    def residual(p):
        return np.sqrt(p[0] * power + p[1] ** 2) - gamma

    result = least_squares(residual, x0, names, bounds=[(0.0, None), (floor, None)], fixed=mask)
    return BroadeningFit(result["eta"], result["gamma0"], floor, result)


# ---------------------------------------------------------------- linear

def fit_linear(x, y, through_origin: bool = False) -> FitResult:
    """Ordinary least squares y = slope x + intercept, with 95% intervals."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    k = 1 if through_origin else 2
    if x.size < k or x.size != y.size:
        raise InputError(f"linear fit needs at least {k} points")
    design = x[:, None] if through_origin else np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = design @ coef - y
    rss = float(resid @ resid)
    dof = x.size - k
    s2 = rss / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.pinv(design.T @ design)
    names = ["slope"] if through_origin else ["slope", "intercept"]
    if through_origin:
        coef = np.array([coef[0], 0.0])
        full = np.zeros((2, 2))
        full[0, 0] = cov[0, 0]
        cov = full
        names = ["slope", "intercept"]
    ci = Z95 * np.sqrt(np.diag(cov))
    fixed = np.array([False, through_origin])
    return FitResult(names, coef, cov, ci, coef - ci, coef + ci, rss, x.size, 1, True, 0.0,
                     "closed form", fixed, False, np.zeros(2, dtype=bool))


