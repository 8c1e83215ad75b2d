"""Operators on truncated multi-mode Fock spaces, dense by default or sparse on request.

The first label of a :class:`ModeLayout` is the slowest-varying tensor index,
so ``tensor_embed([("A", X)], layout)`` equals ``X ⊗ I ⊗ ...``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class ModeLayout:
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise InputError("labels and dims must have the same length")
        if len(set(self.labels)) != len(self.labels):
            raise InputError(f"duplicate mode labels in {self.labels}")
        for label, d in zip(self.labels, self.dims):
            if d < 2:
                raise InputError(f"mode {label!r} has dimension {d} < 2")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, int]]) -> "ModeLayout":
        labels, dims = zip(*pairs) if pairs else ((), ())
        return cls(tuple(labels), tuple(dims))

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"unknown mode {label!r}; layout has {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def basis_states(self) -> list[tuple[int, ...]]:
        """All occupation tuples in the same order as the matrix rows."""
        return list(itertools.product(*(range(d) for d in self.dims)))

    def state_index(self, occupations: Sequence[int]) -> int:
        if len(occupations) != len(self.dims):
            raise InputError("occupation tuple length does not match layout")
        idx = 0
        for n, d in zip(occupations, self.dims):
            if not 0 <= n < d:
                raise InputError(f"occupation {tuple(occupations)} outside truncation {self.dims}")
            idx = idx * d + n
        return idx

    def bumped(self, increment: int = 1) -> "ModeLayout":
        return ModeLayout(self.labels, tuple(d + increment for d in self.dims))


def ladder(dim: int) -> np.ndarray:
    """Single-mode annihilation matrix with a[n-1, n] = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def tensor_embed(ops: Sequence[tuple[str, np.ndarray]], layout: ModeLayout,
                 sparse: bool = False):
    """Kronecker product in layout order, identities on modes not listed.

    With ``sparse=True`` the result is a CSR matrix.
    """
    factors: list[np.ndarray] = [np.eye(d, dtype=complex) for d in layout.dims]
    seen = set()
    for label, mat in ops:
        i = layout.index(label)
        if label in seen:
            raise InputError(f"mode {label!r} given twice")
        seen.add(label)
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (layout.dims[i], layout.dims[i]):
            raise InputError(
                f"operator for {label!r} has shape {mat.shape}, expected {(layout.dims[i],) * 2}"
            )
        factors[i] = mat
    if sparse:
        return reduce(lambda x, y: sp.kron(x, y, format="csr"), factors).tocsr()
    return reduce(np.kron, factors)


def annihilation(layout: ModeLayout, mode: str, sparse: bool = False):
    return tensor_embed([(mode, ladder(layout.dim(mode)))], layout, sparse)


def creation(layout: ModeLayout, mode: str, sparse: bool = False):
    return annihilation(layout, mode, sparse).conj().T


def number_op(layout: ModeLayout, mode: str, sparse: bool = False):
    d = layout.dim(mode)
    return tensor_embed([(mode, np.diag(np.arange(d, dtype=complex)))], layout, sparse)


def identity(layout: ModeLayout) -> np.ndarray:
    return np.eye(layout.total_dim, dtype=complex)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(np.linalg.norm(m), 1.0)
    return float(np.max(np.abs(m - m.conj().T), initial=0.0)) <= rtol * scale
