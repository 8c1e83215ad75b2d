"""Command-line front end.

Every subcommand reads a YAML parameter file (the shipped canonical file by
default), optionally a CSV data file, and writes either a JSON report or CSV
plot data. Frequencies are MHz in parameter files and GHz in CSV files.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fitting, hybrid, io_response, lindblad, params, spectrum
from .errors import InputError, NumericalError
from .report import dumps, make_report

GHZ = 1e3

# Reference values (MHz) printed next to the derived ones.
REFERENCE = {
    "chi_qm": 1.27,
    "chi_qp": -0.73,
    "kerr_m": -0.12,
    "g_qm": 6.67,
    "lamb_shift_m": 1.88,
    "dressed_qubit_freq": 7990.5,
    "dressed_anharmonicity": -120.2,
}

CSV_SCHEMAS = {
    "crossing": ("current_mA", "omega_GHz"),
    "reflection": ("current_mA", "omega_r_GHz", "re_r"),
    "qubit-vacuum": ("omega_s_GHz", "re_delta_r"),
    "qubit-magnon": ("omega_s_GHz", "re_delta_r"),
    "broadening": ("p_s_aW", "gamma_MHz"),
    "kerr": ("p_mw_fW", "n_bar"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- flag parsing

def parse_fix(text: str | None) -> dict[str, float]:
    """``"a=1,b=-2.5"`` -> {"a": 1.0, "b": -2.5}."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise InputError(f"--fix: expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise InputError(f"--fix: value of {key.strip()!r} is not a number") from None
    return out


def parse_grid(text: str | None) -> dict[str, np.ndarray]:
    """``"kerr=0,-0.1;omega2=0:3:20"`` -> arrays; ``lo:hi:n`` means n evenly spaced points."""
    out = {}
    if not text:
        return out
    for item in text.split(";"):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InputError(f"--grid: expected name=values, got {item!r}")
        try:
            if ":" in val:
                lo, hi, n = val.split(":")
                if int(n) < 1:
                    raise ValueError
                out[key] = np.linspace(float(lo), float(hi), int(n))
            else:
                out[key] = np.array([float(v) for v in val.split(",")])
        except ValueError:
            raise InputError(f"--grid: cannot parse {item!r}") from None
    return out


def parse_truncation(text: str | None) -> list[int] | None:
    if not text:
        return None
    try:
        dims = [int(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"--truncation: expected comma-separated integers, got {text!r}") from None
    return dims


def read_table(path: str | Path, columns: Sequence[str]) -> dict[str, np.ndarray]:
    """Read a headed CSV file, skipping ``#`` comment lines, and return the named columns."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read data file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError(f"{path}: no header and no data")
    rows = list(csv.reader(lines))
    header = [h.strip() for h in rows[0]]
    missing = [c for c in columns if c not in header]
    if missing:
        raise InputError(f"{path}: missing column(s) {missing}; expected {list(columns)}")
    if len(rows) < 2:
        raise InputError(f"{path}: no data rows")
    idx = {c: header.index(c) for c in columns}
    out = {c: np.empty(len(rows) - 1) for c in columns}
    for r, row in enumerate(rows[1:], start=2):
        for c, i in idx.items():
            try:
                out[c][r - 2] = float(row[i])
            except (IndexError, ValueError):
                raise InputError(f"{path}: row {r}, column {c!r}: not a number") from None
    return out


def write_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, (float, np.floating)) else v
                    for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- shared helpers

def _load(args) -> params.ParameterFile:
    return params.load_parameters(args.params) if args.params else params.canonical()


def _inputs(args) -> dict:
    out = {"params": args.params or params.canonical_path()}
    if getattr(args, "data", None):
        out["data"] = args.data
    return out


def _derived(pf: params.ParameterFile, args, with_coupling=True) -> hybrid.DerivedParams:
    layout = pf.layout(parse_truncation(args.truncation))
    return hybrid.derive(pf.system, layout, pf.experiment.probe_mode, with_coupling)


def _uncertainty(pf, key: str) -> float:
    return pf.uncertainties.get(key, 0.0)


def _g_qm(pf, fix, args) -> float:
    if "g_qm" in fix:
        return fix["g_qm"]
    if pf.experiment.measured_g_qm is not None:
        return pf.experiment.measured_g_qm
    return hybrid.extract_coupling_qm(pf.system, pf.layout(parse_truncation(args.truncation)))


def _crossing_params(pf, fix) -> io_response.CrossingParams:
    exp = pf.experiment
    for key in ("coupler_freq_no_magnon", "crossing_current", "magnon_tuning"):
        if getattr(exp, key) is None and key not in fix:
            raise InputError(f"experiment.{key} is required for the avoided crossing")
    w_c = fix.get("omega_c", exp.coupler_freq_no_magnon)
    slope = fix.get("magnon_tuning", exp.magnon_tuning)
    i_c = fix.get("crossing_current", exp.crossing_current)
    g = fix.get("g", pf.system.g_magnon[pf.system.mode(exp.coupler_mode)])
    intercept = w_c - slope * i_c
    return io_response.CrossingParams(slope / 2, (w_c + intercept) / 2, (w_c - intercept) / 2, g)


def _coupler_rates(pf) -> tuple[float, float]:
    k = pf.system.mode(pf.experiment.coupler_mode)
    kint, kcpl = pf.system.kappa_int[k], pf.system.kappa_cpl[k]
    if kint is None or kcpl is None:
        raise InputError(f"coupler mode {pf.experiment.coupler_mode!r} needs kappa_int and kappa_cpl")
    return kint, kcpl


def _probe_kappa(pf) -> float:
    kappa = pf.system.kappa[pf.system.mode(pf.experiment.probe_mode)]
    if kappa is None:
        raise InputError(f"probe mode {pf.experiment.probe_mode!r} needs kappa_int and kappa_cpl")
    return kappa


def _fit_summary(result: fitting.FitResult) -> dict:
    return result.as_dict()


def _fit_rows(result: fitting.FitResult):
    for n, v, lo, hi, f in zip(result.names, result.values, result.ci_lower, result.ci_upper,
                               result.fixed):
        yield n, float(v), float(lo), float(hi), int(bool(f))


FIT_HEADER = ("parameter", "value", "ci95_low", "ci95_high", "fixed")


# ---------------------------------------------------------------- subcommands
# Each returns (results dict, csv text or None).

def cmd_params(args):
    pf = _load(args)
    d = _derived(pf, args)
    values = d.as_dict()
    values["probe_pull"] = 2 * d.chi_qp
    table = {}
    for key, val in values.items():
        ref = REFERENCE.get(key)
        entry = {"value": val}
        if ref is not None:
            entry["reference"] = ref
            entry["deviation_pct"] = 100 * (val - ref) / abs(ref)
        table[key] = entry
    results = {"derived_MHz": table}
    if args.check_convergence:
        results["convergence"] = hybrid.convergence_check(
            pf.system, pf.layout(parse_truncation(args.truncation)), pf.experiment.probe_mode)
    for note in d.warnings:
        warnings.warn(note)
    rows = [(k, e["value"], e.get("reference", ""), e.get("deviation_pct", ""))
            for k, e in table.items()]
    return results, write_csv(("quantity", "value_MHz", "reference_MHz", "deviation_pct"), rows)


def _spectrum_setup(pf, args, fix):
    exp, system = pf.experiment, pf.system
    need = {"chi_qm", "chi_qp"} - set(fix)
    derived = _derived(pf, args, with_coupling=False) if need else None
    gamma_m = fix.get("gamma_m", system.gamma_m)
    delta = fix.get("delta_mw", exp.kittel_drive_detuning)
    if "nbar_m" in fix:
        nbar = fix["nbar_m"]
    else:
        g_qm = _g_qm(pf, fix, args)
        omega = io_response.kittel_drive_strength(
            exp.kittel_drive_power, system, exp.kittel_drive_freq, g_qm, exp.drive_sum_modes)
        nbar = float(io_response.linear_occupancy(omega, gamma_m, delta))
    omega_q = fix.get("omega_q", exp.stark_shifted_qubit_freq or system.qubit_freq)
    gamma_q = fix.get("gamma_q", exp.broadened_qubit_linewidth or system.gamma_q0)
    magnon = spectrum.SpectrumModel.from_occupancy(
        nbar, omega_q=omega_q, gamma_q=gamma_q,
        chi=fix.get("chi_qm", derived.chi_qm if derived else 0.0), kappa=gamma_m, delta_d=delta,
        n_max=int(fix.get("n_max", 10)))
    return spectrum.CompositeModel(
        magnon, fix.get("chi_qp", derived.chi_qp if derived else 0.0),
        fix.get("kappa_p", _probe_kappa(pf)), fix.get("photon_weight", exp.photon_weight))


def cmd_spectrum(args):
    pf = _load(args)
    fix = parse_fix(args.fix)
    model = _spectrum_setup(pf, args, fix)
    m = model.magnon
    grid = parse_grid(args.grid)
    if "omega" in grid:
        omega_s = grid["omega"] * GHZ
    else:
        top = m.omega_q + max(0.0, (2 * m.chi + m.delta_d) * 6)
        bottom = m.omega_q + min(0.0, (2 * m.chi + m.delta_d) * 6)
        omega_s = np.linspace(bottom - 5, top + 5, 1001)
    parts = spectrum.composite_components(model, omega_s)
    total = parts.sum(axis=(-1, -2))
    comps = spectrum.spectrum_components(m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        probs = spectrum.number_probabilities(model)
    rows = [(w / GHZ, s, "total") for w, s in zip(omega_s, total)]
    n_series = m.n_max + 1 if m.omega_d > 0 else 1
    for n in range(n_series):
        comp = parts[..., 0, n] + parts[..., 1, n]
        rows += [(w / GHZ, s, f"n={n}") for w, s in zip(omega_s, comp)]
    results = {
        "model": {"omega_q": m.omega_q, "gamma_q": m.gamma_q, "chi_qm": m.chi,
                  "gamma_m": m.kappa, "delta_mw": m.delta_d, "drive": m.omega_d,
                  "chi_qp": model.chi_qp, "kappa_p": model.kappa_p,
                  "photon_weight": model.photon_weight},
        "nbar_m": comps.nbar_g,
        "D_ss": comps.D_ss,
        "stark_shift_B": comps.B,
        "peak_freqs": comps.peak_freqs[:n_series],
        "number_probabilities": probs,
        "poisson_reference": spectrum.poisson_reference(comps.D_ss, m.n_max),
    }
    return results, write_csv(("omega_s_GHz", "value", "series"), rows)


def cmd_crossing(args):
    pf = _load(args)
    fix = parse_fix(args.fix)
    cp = _crossing_params(pf, fix)
    kint, kcpl = _coupler_rates(pf)
    gamma_m = fix.get("gamma_m", pf.system.gamma_m)
    grid = parse_grid(args.grid)
    i_c = cp.current_at_crossing
    span = 3 * cp.coupling / cp.magnon_slope if cp.magnon_slope else 1.0
    currents = grid.get("current", np.linspace(i_c - abs(span), i_c + abs(span), 41))
    w_c = cp.omega_c_bare
    omega_r = grid["omega"] * GHZ if "omega" in grid else \
        np.linspace(w_c - 3 * cp.coupling, w_c + 3 * cp.coupling, 601)
    rows = []
    for i in currents:
        rp = io_response.ReflectionParams(w_c, kint, kcpl, cp.coupling, gamma_m,
                                          float(cp.magnon_bare(i)))
        re_r = np.real(io_response.reflection(omega_r, rp))
        rows += [(float(i), w / GHZ, r) for w, r in zip(omega_r, re_r)]
    lower, upper = io_response.crossing_branches(currents, cp)
    results = {
        "crossing_params": {"p1": cp.p1, "p2": cp.p2, "p3": cp.p3, "p4": cp.p4},
        "omega_c_bare": w_c, "g_mc": cp.coupling, "current_at_crossing": i_c,
        "currents_mA": currents,
        "coupler_branch_MHz": io_response.crossing_branch(currents, cp),
        "lower_branch_MHz": lower, "upper_branch_MHz": upper,
    }
    return results, write_csv(("current_mA", "omega_r_GHz", "re_r"), rows)


def cmd_kerr_sweep(args):
    pf = _load(args)
    fix = parse_fix(args.fix)
    grid = parse_grid(args.grid or "kerr=0,-0.1,-0.2;omega2=0:3:20")
    kerr = grid.get("kerr", np.array([0.0, -0.1, -0.2]))
    if "omega2" in grid:
        omega2 = grid["omega2"]
    elif "omega" in grid:
        omega2 = grid["omega"] ** 2
    else:
        omega2 = np.linspace(0.0, 3.0, 20)
    if np.any(omega2 < 0):
        raise InputError("--grid: omega2 must be non-negative")
    gamma_m = fix.get("gamma_m", pf.system.gamma_m)
    delta = fix.get("delta_mw", pf.experiment.kittel_drive_detuning)
    occ = lindblad.kerr_sweep(gamma_m, delta, kerr, np.sqrt(omega2),
                              int(fix.get("fock_dim", 30)))
    linear = io_response.linear_occupancy(np.sqrt(omega2), gamma_m, delta)
    rows = []
    for k, curve in zip(kerr, occ):
        rows += [(w2, n, float(k)) for w2, n in zip(omega2, curve)]
    results = {"gamma_m": gamma_m, "delta_mw": delta, "kerr_MHz": kerr, "omega2_MHz2": omega2,
               "occupancy": occ, "linear_occupancy": linear}
    return results, write_csv(("omega2_MHz2", "n_bar", "kerr_MHz"), rows)


def cmd_occupancy(args):
    pf = _load(args)
    fix = parse_fix(args.fix)
    exp, system = pf.experiment, pf.system
    k = system.mode(exp.probe_mode)
    if system.kappa_cpl[k] is None:
        raise InputError(f"probe mode {exp.probe_mode!r} needs kappa_int and kappa_cpl")
    p_r = fix.get("readout_power_aW", exp.readout_power / 1e-18) * 1e-18
    n_probe = io_response.probe_occupancy(p_r, exp.readout_freq, system.kappa_cpl[k],
                                          system.kappa[k])
    g_qm = _g_qm(pf, fix, args)
    gamma_m = fix.get("gamma_m", system.gamma_m)
    delta = fix.get("delta_mw", exp.kittel_drive_detuning)
    slope = io_response.occupancy_slope(system, gamma_m, delta, exp.kittel_drive_freq, g_qm,
                                        exp.drive_sum_modes)
    dg = _uncertainty(pf, "magnon.linewidth")
    dd = _uncertainty(pf, "experiment.kittel_drive_detuning")
    ranges = {}
    for name in system.cavity_names:
        u = pf.uncertainties.get(f"{name}.kappa_cpl")
        if u:
            kc = system.kappa_cpl[system.mode(name)]
            ranges[name] = (kc - u, kc + u)
    lo, hi = io_response.occupancy_slope_bounds(
        system, (gamma_m - dg, gamma_m + dg), (delta - dd, delta + dd), exp.kittel_drive_freq,
        g_qm, ranges, exp.drive_sum_modes)
    p_fw = exp.kittel_drive_power / io_response.FEMTOWATT
    drive = io_response.kittel_drive_strength(exp.kittel_drive_power, system,
                                              exp.kittel_drive_freq, g_qm, exp.drive_sum_modes)
    results = {
        "probe_occupancy": n_probe,
        "g_qm_MHz": g_qm,
        "occupancy_slope_per_fW": slope,
        "occupancy_slope_bounds_per_fW": [lo, hi],
        "drive_power_fW": p_fw,
        "drive_strength_MHz": drive,
        "magnon_occupancy_at_drive": slope * p_fw,
    }
    powers = parse_grid(args.grid).get("power", np.linspace(0.0, 2 * max(p_fw, 1.0), 51))
    rows = [(p, slope * p, lo * p, hi * p) for p in powers]
    return results, write_csv(("p_mw_fW", "n_bar", "n_bar_low", "n_bar_high"), rows)


def _fit_crossing(pf, data, fix, args):
    table = read_table(data, CSV_SCHEMAS["crossing"])
    fit = fitting.fit_crossing(table["current_mA"], table["omega_GHz"] * GHZ, fix=fix)
    cp = fit.params
    results = {"fit": _fit_summary(fit.result), "g_mc": cp.coupling,
               "g_mc_ci95": list(fit.result.ci("p4")), "omega_c_bare": cp.omega_c_bare,
               "magnon_slope": cp.magnon_slope, "current_at_crossing": cp.current_at_crossing}
    return results, fit.result


def _fit_reflection(pf, data, fix, args):
    table = read_table(data, CSV_SCHEMAS["reflection"])
    kint, kcpl = _coupler_rates(pf)
    w_c = fix.get("omega_c", pf.experiment.coupler_freq_no_magnon)
    if w_c is None:
        raise InputError("experiment.coupler_freq_no_magnon (or --fix omega_c=...) is required")
    spectra = []
    for i in np.unique(table["current_mA"]):
        sel = table["current_mA"] == i
        order = np.argsort(table["omega_r_GHz"][sel])
        spectra.append((i, table["omega_r_GHz"][sel][order] * GHZ, table["re_r"][sel][order]))
    fit = fitting.fit_reflection_global(spectra, w_c, kint, kcpl, g0=fix.get("g"),
                                        gamma0=fix.get("gamma_m", 1.0))
    results = {"fit": _fit_summary(fit.result), "gamma_m": fit.gamma_m, "g": fit.g,
               "gamma_m_ci95": list(fit.result.ci("gamma_m")), "g_ci95": list(fit.result.ci("g")),
               "currents_mA": fit.currents, "omega_m_MHz": fit.omega_m}
    return results, fit.result


def _fit_qubit_vacuum(pf, data, fix, args):
    table = read_table(data, CSV_SCHEMAS["qubit-vacuum"])
    kappa_p = fix.pop("kappa_p", _probe_kappa(pf))
    delta_p = fix.pop("delta_p", 0.0)
    fit = fitting.fit_qubit_spectrum_vacuum(table["omega_s_GHz"] * GHZ, table["re_delta_r"],
                                            kappa_p, delta_p, fix=fix)
    return {"fit": _fit_summary(fit.result), "kappa_p": kappa_p, "delta_p": delta_p}, fit.result


_MAGNON_CONSTANTS = ("omega_q0", "gamma_q0", "gamma_m", "photon_weight", "chi_qp", "kappa_p")


def _fit_qubit_magnon(pf, data, fix, args):
    table = read_table(data, CSV_SCHEMAS["qubit-magnon"])
    exp, system = pf.experiment, pf.system
    const = {k: fix.pop(k) for k in _MAGNON_CONSTANTS if k in fix}
    if "chi_qp" not in const:
        const["chi_qp"] = _derived(pf, args, with_coupling=False).chi_qp
    const.setdefault("omega_q0", exp.stark_shifted_qubit_freq or system.qubit_freq)
    const.setdefault("gamma_q0", exp.broadened_qubit_linewidth or system.gamma_q0)
    const.setdefault("gamma_m", system.gamma_m)
    const.setdefault("photon_weight", exp.photon_weight)
    const.setdefault("kappa_p", _probe_kappa(pf))
    fit = fitting.fit_qubit_spectrum_magnon(table["omega_s_GHz"] * GHZ, table["re_delta_r"],
                                            fix=fix, **const)
    results = {"fit": _fit_summary(fit.result), "constants": const,
               "nbar_m": fit.result["nbar_m"],
               "number_probabilities": {"p": fit.probabilities, "lower": fit.prob_lower,
                                        "upper": fit.prob_upper}}
    return results, fit.result


def _fit_broadening(pf, data, fix, args):
    table = read_table(data, CSV_SCHEMAS["broadening"])
    t1 = pf.experiment.t1
    fit = fitting.fit_power_broadening(table["p_s_aW"], table["gamma_MHz"], t1, fix=fix)
    results = {"fit": _fit_summary(fit.result), "eta_MHz2_per_aW": fit.eta,
               "gamma0_MHz": fit.gamma0, "t1_floor_MHz": fit.floor}
    if pf.experiment.spectroscopy_power:
        p = pf.experiment.spectroscopy_power / 1e-18
        gamma = float(spectrum.power_broadened_linewidth(p, fit.eta, fit.gamma0))
        results["linewidth_at_spectroscopy_power"] = gamma
        results["rabi_at_spectroscopy_power"] = float(spectrum.rabi_from_linewidth(gamma,
                                                                                   fit.gamma0))
    return results, fit.result


def _fit_kerr(pf, data, fix, args):
    table = read_table(data, CSV_SCHEMAS["kerr"])
    gamma_m = fix.get("gamma_m", pf.system.gamma_m)
    delta = fix.get("delta_mw", pf.experiment.kittel_drive_detuning)
    grid = parse_grid(args.grid)
    extremes = None
    if args.extremes:
        dg = _uncertainty(pf, "magnon.linewidth")
        dd = _uncertainty(pf, "experiment.kittel_drive_detuning")
        extremes = [(gamma_m + a * dg, delta + b * dd) for a in (-1, 1) for b in (-1, 1)]
    fit = lindblad.fit_kerr(table["p_mw_fW"], table["n_bar"], gamma_m, delta,
                            kerr_grid=grid.get("kerr"), extremes=extremes)
    results = {"kerr_MHz": fit.kerr, "proportionality_MHz2_per_fW": fit.proportionality,
               "r2": fit.r2, "kerr_bounds_MHz": list(fit.kerr_bounds) if fit.kerr_bounds else None,
               "gamma_m": gamma_m, "delta_mw": delta}
    return results, None


def _fit_linear(pf, data, fix, args):
    path = Path(data)
    try:
        table = read_table(path, ("x", "y"))
        x, y = table["x"], table["y"]
    except InputError:
        table = read_table(path, ("p_mw_fW", "n_bar"))
        x, y = table["p_mw_fW"], table["n_bar"]
    if fix and set(fix) - {"intercept"}:
        raise InputError("linear fit can only fix the intercept")
    if fix.get("intercept", 0.0) != 0.0:
        y = y - fix["intercept"]
    result = fitting.fit_linear(x, y, through_origin="intercept" in fix)
    if "intercept" in fix:
        result.values[1] = fix["intercept"]
        result.ci_lower[1] = result.ci_upper[1] = fix["intercept"]
    return {"fit": _fit_summary(result), "slope": result["slope"],
            "slope_ci95": list(result.ci("slope"))}, result


FITTERS = {
    "crossing": _fit_crossing,
    "reflection": _fit_reflection,
    "qubit-vacuum": _fit_qubit_vacuum,
    "qubit-magnon": _fit_qubit_magnon,
    "broadening": _fit_broadening,
    "kerr": _fit_kerr,
    "linear": _fit_linear,
}


def cmd_fit(args):
    if not args.data:
        raise InputError("fit needs --data <file>")
    pf = _load(args)
    fix = parse_fix(args.fix)
    results, result = FITTERS[args.kind](pf, args.data, fix, args)
    results = {"kind": args.kind, **results}
    text = write_csv(FIT_HEADER, _fit_rows(result)) if result is not None else \
        write_csv(("parameter", "value"), [("kerr", results["kerr_MHz"]),
                                           ("proportionality", results["proportionality_MHz2_per_fW"]),
                                           ("r2", results["r2"])])
    return results, text


COMMANDS = {
    "params": cmd_params,
    "spectrum": cmd_spectrum,
    "crossing": cmd_crossing,
    "kerr-sweep": cmd_kerr_sweep,
    "occupancy": cmd_occupancy,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--params", help="YAML parameter file (default: shipped canonical file)")
    common.add_argument("--data", help="CSV data file")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--truncation", help="Fock dimensions: cavity,transmon,magnon or one per mode")
    common.add_argument("--fix", help="overrides / fixed parameters, key=value,...")
    common.add_argument("--grid", help="sweep grid, e.g. 'kerr=0,-0.1;omega2=0:3:20'")

    parser = _Parser(prog="magnonqed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("params", parents=[common], help="derived Hamiltonian parameters")
    p.add_argument("--check-convergence", action="store_true",
                   help="also compare against truncation + 1")
    sub.add_parser("spectrum", parents=[common], help="qubit spectrum with a driven magnon")
    sub.add_parser("crossing", parents=[common], help="reflection map of the avoided crossing")
    sub.add_parser("kerr-sweep", parents=[common], help="Kerr steady-state occupancy sweep")
    sub.add_parser("occupancy", parents=[common], help="probe and magnon occupancies")
    p = sub.add_parser("fit", parents=[common], help="fit a data file")
    p.add_argument("kind", choices=sorted(FITTERS))
    p.add_argument("--extremes", action="store_true",
                   help="kerr fit: report K bounds over the uncertainty corners")
    return parser


def run(argv: Sequence[str] | None = None):
    """Parse arguments, run the command and return (report, csv text, parsed args)."""
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results, text = COMMANDS[args.command](args)
    notes = list(dict.fromkeys(str(w.message) for w in caught))
    return make_report(args.command if args.command != "fit" else f"fit {args.kind}",
                       _inputs(args), results, notes), text, args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        report, text, args = run(argv)
        payload = dumps(report) if args.format == "json" else text
        if args.out:
            Path(args.out).write_text(payload)
        else:
            sys.stdout.write(payload)
        for note in report["warnings"]:
            print(f"warning: {note}", file=sys.stderr)
        return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
