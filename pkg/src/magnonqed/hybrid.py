"""Full hybrid Hamiltonian: construction, diagonalization, dressed parameters.

The Hamiltonian is in linear-frequency units (MHz):

    H = sum_p w_p a_p^+ a_p + (w_q - alpha/2) b^+ b + (alpha/2) (b^+ b)^2 + w_m c^+ c
        + sum_p [g_qp (a_p^+ b + a_p b^+) + g_mp (a_p^+ c + a_p c^+)]

It conserves the total excitation number, which :func:`diagonalize` exploits by
solving each excitation block separately.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, LabelingError, NumericalError, RegimeWarning
from .fock import ModeLayout, annihilation, is_hermitian, number_op
from .params import KITTEL, TRANSMON, SystemParams

LOW_OVERLAP = 0.5


@lru_cache(maxsize=16)
def _terms(layout: ModeLayout) -> dict:
    """Sparse operator building blocks of the Hamiltonian, cached per layout."""
    ops = {label: annihilation(layout, label, sparse=True) for label in layout.labels}
    nums = {label: number_op(layout, label, sparse=True) for label in layout.labels}
    b, c = ops.get(TRANSMON), ops.get(KITTEL)
    terms = {"n": nums}
    if b is not None:
        terms["n2_transmon"] = nums[TRANSMON] @ nums[TRANSMON]
    hop = {}
    for label, a in ops.items():
        for other, target in ((TRANSMON, b), (KITTEL, c)):
            if target is None or label in (TRANSMON, KITTEL):
                continue
            x = a.conj().T @ target
            hop[label, other] = (x + x.conj().T).tocsr()
    terms["hop"] = hop
    return terms


def _check_layout(params: SystemParams, layout: ModeLayout):
    expected = set(params.cavity_names) | {TRANSMON, KITTEL}
    if set(layout.labels) != expected:
        raise InputError(f"layout modes {layout.labels} do not match parameters "
                         f"{params.cavity_names + (TRANSMON, KITTEL)}")


def build_hamiltonian(params: SystemParams, layout: ModeLayout) -> np.ndarray:
    _check_layout(params, layout)
    t = _terms(layout)
    nums, hop = t["n"], t["hop"]
    h = (params.qubit_freq - params.anharmonicity / 2) * nums[TRANSMON]
    h += (params.anharmonicity / 2) * t["n2_transmon"]
    h += params.magnon_freq * nums[KITTEL]
    for name, w, gq, gm in zip(params.cavity_names, params.cavity_freqs,
                               params.g_qubit, params.g_magnon):
        h += w * nums[name]
        if gq:
            h += gq * hop[name, TRANSMON]
        if gm:
            h += gm * hop[name, KITTEL]
    return h.toarray()


@dataclass
class DressedLevels:
    """Eigenvalues (MHz, ground = 0) with the bare state each one is assigned to."""

    layout: ModeLayout
    energies: np.ndarray
    vectors: np.ndarray
    labels: list[tuple[int, ...]]
    overlaps: np.ndarray
    conflicts: set[tuple[int, ...]] = field(default_factory=set)

    def __post_init__(self):
        self._by_label = {lab: i for i, lab in enumerate(self.labels)}

    def _occupations(self, state) -> tuple[int, ...]:
        if isinstance(state, Mapping):
            occ = [0] * len(self.layout.labels)
            for label, n in state.items():
                occ[self.layout.index(label)] = int(n)
            state = occ
        state = tuple(int(n) for n in state)
        if len(state) != len(self.layout.dims) or any(
                not 0 <= n < d for n, d in zip(state, self.layout.dims)):
            raise InputError(f"state {state} is not inside truncation {self.layout.dims}")
        return state

    def index(self, state) -> int:
        return self._by_label[self._occupations(state)]

    def energy(self, state) -> float:
        return float(self.energies[self.index(state)])

    def overlap(self, state) -> float:
        return float(self.overlaps[self.index(state)])

    def check(self, states: Sequence) -> list[str]:
        """Return warning strings for states with low overlap or contested labels."""
        issues = []
        for s in states:
            occ = self._occupations(s)
            ov = self.overlap(occ)
            if ov < LOW_OVERLAP:
                issues.append(f"state {occ} has overlap {ov:.3f} < {LOW_OVERLAP}")
            if occ in self.conflicts:
                issues.append(f"state {occ} was claimed by more than one eigenstate")
        return issues


def _excitation_blocks(h: np.ndarray, layout: ModeLayout):
    totals = np.array([sum(s) for s in layout.basis_states()])
    blocks = [np.flatnonzero(totals == n) for n in np.unique(totals)]
    mask = totals[:, None] != totals[None, :]
    if np.any(np.abs(h[mask]) > 0):
        return None
    return blocks


def diagonalize(h: np.ndarray, layout: ModeLayout, strict: bool = False) -> DressedLevels:
    """Full Hermitian eigendecomposition with greedy max-overlap labeling.

    Pairs (bare, dressed) are visited in descending |overlap|^2 and accepted when
    both are still free. An eigenstate whose accepted label differs from its own
    maximum-overlap bare state is recorded in ``conflicts``; ``strict`` turns that
    into a :class:`LabelingError`.
    """
    dim = layout.total_dim
    if h.shape != (dim, dim):
        raise InputError(f"Hamiltonian shape {h.shape} does not match layout dimension {dim}")
    if not is_hermitian(h):
        raise InputError("Hamiltonian is not Hermitian")
    energies = np.empty(dim)
    vectors = np.zeros((dim, dim), dtype=complex)
    blocks = _excitation_blocks(h, layout) or [np.arange(dim)]
    col = 0
    try:
        for idx in blocks:
            e, v = np.linalg.eigh(h[np.ix_(idx, idx)])
            k = len(idx)
            energies[col:col + k] = e
            vectors[idx, col:col + k] = v
            col += k
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(energies, kind="stable")
    energies, vectors = energies[order], vectors[:, order]

    weights = np.abs(vectors) ** 2
    # Weights between different excitation blocks are exactly zero, so only
    # non-zero pairs need sorting.
    rows, cols = np.nonzero(weights > 1e-300)
    ranking = np.argsort(-weights[rows, cols], kind="stable")
    bare_of = np.full(dim, -1)
    taken = np.zeros(dim, dtype=bool)
    assigned = 0
    for r, c in zip(rows[ranking], cols[ranking]):
        if bare_of[c] >= 0 or taken[r]:
            continue
        bare_of[c] = r
        taken[r] = True
        assigned += 1
        if assigned == dim:
            break
    if assigned != dim:
        raise LabelingError("could not build a one-to-one bare/dressed labeling")

    basis = layout.basis_states()
    best = np.argmax(weights, axis=0)
    conflicts = {basis[bare_of[c]] for c in range(dim) if best[c] != bare_of[c]}
    if strict and conflicts:
        raise LabelingError(f"{len(conflicts)} contested labels, e.g. {sorted(conflicts)[0]}")
    labels = [basis[r] for r in bare_of]
    overlaps = weights[bare_of, np.arange(dim)]
    ground = labels.index(tuple([0] * len(layout.dims)))
    return DressedLevels(layout, energies - energies[ground], vectors, labels,
                         overlaps, conflicts)


def _warn(issues: list[str], what: str):
    if issues:
        warnings.warn(f"{what}: reduced confidence; " + "; ".join(issues), RegimeWarning,
                      stacklevel=3)


def _require(levels: DressedLevels, states, what: str):
    try:
        for s in states:
            levels.index(s)
    except InputError as exc:
        raise InputError(f"{what}: truncation too small ({exc})") from None


def extract_dispersive(levels: DressedLevels, probe_mode: str = "te103") -> tuple[float, float]:
    """Return (chi_qp, chi_qm): half the shift of the probe-mode and magnon
    frequencies when the transmon goes from g to e."""
    q, m, p = TRANSMON, KITTEL, probe_mode
    states = [{}, {q: 1}, {p: 1}, {p: 1, q: 1}, {m: 1}, {m: 1, q: 1}]
    _require(levels, states, "extract_dispersive")
    _warn(levels.check(states), "extract_dispersive")
    e = levels.energy
    w_q = e({q: 1})
    chi_qp = 0.5 * ((e({p: 1, q: 1}) - w_q) - e({p: 1}))
    chi_qm = 0.5 * ((e({m: 1, q: 1}) - w_q) - e({m: 1}))
    return chi_qp, chi_qm


def extract_kerr(levels: DressedLevels) -> float:
    """K_m = 2 w_(0->1) - w_(0->2) for the magnon with the transmon in g."""
    states = [{}, {KITTEL: 1}, {KITTEL: 2}]
    _require(levels, states, "extract_kerr")
    _warn(levels.check(states), "extract_kerr")
    return 2 * levels.energy({KITTEL: 1}) - levels.energy({KITTEL: 2})


def dressed_qubit(levels: DressedLevels) -> tuple[float, float]:
    states = [{}, {TRANSMON: 1}, {TRANSMON: 2}]
    _require(levels, states, "dressed_qubit")
    _warn(levels.check(states), "dressed_qubit")
    w_q = levels.energy({TRANSMON: 1})
    return w_q, levels.energy({TRANSMON: 2}) - 2 * w_q


def dressed_magnon(levels: DressedLevels) -> float:
    _require(levels, [{KITTEL: 1}], "dressed_magnon")
    return levels.energy({KITTEL: 1})


def golden_section(f, lo: float, hi: float, tol: float = 1e-3, max_iter: int = 200):
    """Minimize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def qubit_magnon_gap(params: SystemParams, layout: ModeLayout | None = None) -> float:
    """Splitting of the two dressed levels with the most |e,0> + |g,1_m> weight."""
    layout = layout or params.default_layout()
    levels = diagonalize(build_hamiltonian(params, layout), layout)
    e_idx = layout.state_index([1 if lab == TRANSMON else 0 for lab in layout.labels])
    m_idx = layout.state_index([1 if lab == KITTEL else 0 for lab in layout.labels])
    weight = np.abs(levels.vectors[e_idx]) ** 2 + np.abs(levels.vectors[m_idx]) ** 2
    j, k = np.argsort(-weight)[:2]
    return abs(float(levels.energies[j] - levels.energies[k]))


def extract_coupling_qm(params: SystemParams, layout: ModeLayout | None = None,
                        bracket: tuple[float, float] | None = None,
                        tol: float = 1e-3) -> float:
    """Half the minimum qubit-magnon splitting as the bare magnon frequency is swept.

    The default bracket is the bare qubit frequency +/- 50 MHz; `tol` is in MHz.
    """
    if not any(params.g_magnon) or not any(params.g_qubit):
        return 0.0
    layout = layout or params.default_layout()
    lo, hi = bracket or (params.qubit_freq - 50.0, params.qubit_freq + 50.0)
    x, gap = golden_section(lambda w: qubit_magnon_gap(params.with_magnon_freq(w), layout),
                            lo, hi, tol=tol)
    if min(x - lo, hi - x) <= 2 * tol:
        raise NumericalError(f"qubit-magnon gap minimum at bracket edge ({x:.3f} MHz); "
                             f"widen the bracket {lo, hi}")
    return 0.5 * gap


@dataclass(frozen=True)
class DerivedParams:
    chi_qp: float
    chi_qm: float
    kerr_m: float
    g_qm: float
    lamb_shift_m: float
    dressed_qubit_freq: float
    dressed_anharmonicity: float
    dressed_magnon_freq: float
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "chi_qp", "chi_qm", "kerr_m", "g_qm", "lamb_shift_m",
            "dressed_qubit_freq", "dressed_anharmonicity", "dressed_magnon_freq")}


def derive(params: SystemParams, layout: ModeLayout | None = None, probe_mode: str = "te103",
           with_coupling: bool = True) -> DerivedParams:
    layout = layout or params.default_layout()
    levels = diagonalize(build_hamiltonian(params, layout), layout)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        chi_qp, chi_qm = extract_dispersive(levels, probe_mode)
        kerr = extract_kerr(levels)
        w_q, alpha = dressed_qubit(levels)
    w_m = dressed_magnon(levels)
    g_qm = extract_coupling_qm(params, layout) if with_coupling else float("nan")
    notes = tuple(dict.fromkeys(str(w.message) for w in caught))
    return DerivedParams(chi_qp, chi_qm, kerr, g_qm, params.magnon_freq - w_m,
                         w_q, alpha, w_m, notes)


def convergence_check(params: SystemParams, base_layout: ModeLayout | None = None,
                      probe_mode: str = "te103", threshold: float = 0.01) -> dict:
    """Compare derived parameters at the base truncation and with every dim + 1."""
    base_layout = base_layout or params.default_layout()
    base = derive(params, base_layout, probe_mode, with_coupling=False)
    bigger = derive(params, base_layout.bumped(1), probe_mode, with_coupling=False)
    changes = {}
    for key, old in base.as_dict().items():
        if key == "g_qm":
            continue
        new = getattr(bigger, key)
        diff = abs(new - old)
        scale = abs(old)
        changes[key] = 0.0 if diff <= 1e-9 else (diff / scale if scale > 0 else math.inf)
    flagged = sorted(k for k, v in changes.items() if v > threshold)
    notes = list(base.warnings)
    return {
        "max_relative_change": max(changes.values()),
        "relative_changes": changes,
        "flagged": flagged,
        "warnings": notes,
        "ok": not flagged and not notes,
    }


def perturbative_energy(params: SystemParams, layout: ModeLayout, state) -> float:
    """Bare energy plus 2nd- and 4th-order Rayleigh-Schrodinger corrections.

    Independent of :func:`diagonalize`; valid only when every coupled bare
    state is far detuned. Odd orders vanish because the coupling graph is
    bipartite (cavity modes on one side, transmon and magnon on the other).
    """
    h = build_hamiltonian(params, layout)
    h0 = np.real(np.diag(h)).copy()
    v = h - np.diag(h0)
    if isinstance(state, Mapping):
        occ = [0] * len(layout.labels)
        for label, n in state.items():
            occ[layout.index(label)] = n
        state = occ
    n = layout.state_index(state)
    denom = h0[n] - h0
    with np.errstate(divide="ignore"):
        r = np.where(np.arange(len(h0)) == n, 0.0, 1.0 / denom)
    vn = v[:, n]
    rv = r * vn
    e2 = float(np.real(vn.conj() @ rv))
    x = r * (v @ rv)
    e4 = float(np.real(rv.conj() @ (v @ x))) - e2 * float(np.real(np.vdot(rv, rv)))
    return h0[n] + e2 + e4
