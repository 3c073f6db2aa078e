"""Operator algebra on the truncated spin (x) mode-a (x) mode-b Hilbert space.

Operators are ``scipy.sparse.csr_matrix`` (complex128); density matrices are
dense ``numpy`` arrays.  The basis is ordered spin (x) a (x) b with the last
slot varying fastest.  Spin index 0 is the NV ground state |0>, index 1 the
excited state |-1>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from nvcool.errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    NumericalConsistencyError,
)

SPIN, MODE_A, MODE_B = "spin", "a", "b"

TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered subsystem names and dimensions of a tensor-product space."""

    names: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.dims) or not self.names:
            raise InvalidDimensionError("layout needs one dimension per subsystem name")
        if len(set(self.names)) != len(self.names):
            raise InvalidDimensionError(f"duplicate subsystem names in {self.names}")
        for name, d in zip(self.names, self.dims):
            if name == SPIN and d != 2:
                raise InvalidDimensionError(f"spin slot must have dimension 2, got {d}")
            if name != SPIN and d < 2:
                raise InvalidDimensionError(f"mode {name!r} needs dimension >= 2, got {d}")

    @classmethod
    def full(cls, dim_a: int, dim_b: int) -> "SpaceLayout":
        return cls((SPIN, MODE_A, MODE_B), (2, int(dim_a), int(dim_b)))

    @classmethod
    def reduced(cls, dim_b: int) -> "SpaceLayout":
        """Spin (x) mode b, the space left after eliminating mode a."""
        return cls((SPIN, MODE_B), (2, int(dim_b)))

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def slot_dim(self, slot: str) -> int:
        return self.dims[self.index(slot)]

    def index(self, slot: str) -> int:
        try:
            return self.names.index(slot)
        except ValueError:
            raise InvalidDimensionError(f"layout {self.names} has no slot {slot!r}") from None

    def quantum_numbers(self, slot: str) -> np.ndarray:
        """Occupation of ``slot`` for every basis state, in basis order."""
        i = self.index(slot)
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids[i]


def kron(A, B):
    """Kronecker product; sparse if either factor is sparse."""
    if sp.issparse(A) or sp.issparse(B):
        return sp.kron(A, B, format="csr")
    return np.kron(np.asarray(A), np.asarray(B))


def identity(dim: int) -> sp.csr_matrix:
    return sp.identity(dim, dtype=complex, format="csr")


def annihilation(dim: int) -> sp.csr_matrix:
    """Truncated bosonic lowering operator with a[n-1, n] = sqrt(n)."""
    if dim < 2:
        raise InvalidDimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), offsets=1,
                    shape=(dim, dim), format="csr", dtype=complex)


def creation(dim: int) -> sp.csr_matrix:
    return annihilation(dim).conj().T.tocsr()


def number(dim: int) -> sp.csr_matrix:
    return sp.diags(np.arange(dim, dtype=float), format="csr", dtype=complex)


def sigma_minus() -> sp.csr_matrix:
    # |-1> (index 1) -> |0> (index 0)
    return sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))


def sigma_plus() -> sp.csr_matrix:
    return sigma_minus().conj().T.tocsr()


def sigma_z() -> sp.csr_matrix:
    return sp.csr_matrix(np.diag([-1.0, 1.0]).astype(complex))


def sigma_x() -> sp.csr_matrix:
    return (sigma_plus() + sigma_minus()).tocsr()


def embed(op, slot: str, layout: SpaceLayout) -> sp.csr_matrix:
    """Place ``op`` on ``slot`` with identities on every other subsystem."""
    op = sp.csr_matrix(op, dtype=complex)
    target = layout.slot_dim(slot)
    if op.shape != (target, target):
        raise DimensionMismatchError(
            f"operator of shape {op.shape} cannot act on slot {slot!r} of dimension {target}")
    factors = [op if name == slot else identity(d) for name, d in zip(layout.names, layout.dims)]
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), factors).tocsr()


def thermal_state(dim: int, nbar: float) -> np.ndarray:
    """Truncated Bose-Einstein state, renormalised to unit trace."""
    if dim < 1:
        raise InvalidDimensionError(f"thermal state needs dim >= 1, got {dim}")
    if nbar < 0:
        raise InvalidParameterError(f"thermal occupation must be >= 0, got {nbar}")
    if nbar == 0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        p = (nbar / (1.0 + nbar)) ** np.arange(dim)
        p /= p.sum()
    return np.diag(p).astype(complex)


def ground_state(dim: int) -> np.ndarray:
    return thermal_state(dim, 0.0)


def is_hermitian(M, tol: float = 1e-12) -> bool:
    if sp.issparse(M):
        diff = (M - M.conj().T)
        return diff.nnz == 0 or float(abs(diff).max()) <= tol
    M = np.asarray(M)
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True)
class DensityMatrix:
    """A validated state on ``layout``.

    Construction checks unit trace and Hermiticity; positivity is only
    checked through :meth:`min_eigenvalue` because it costs a full
    diagonalisation.
    """

    layout: SpaceLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.layout.dim
        if m.shape != (n, n):
            raise DimensionMismatchError(f"density matrix shape {m.shape} does not match layout dim {n}")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise NumericalConsistencyError(f"density matrix trace {tr} deviates from 1")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise NumericalConsistencyError("density matrix is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def product(cls, layout: SpaceLayout, factors: Iterable[np.ndarray]) -> "DensityMatrix":
        """Tensor product of per-slot states given in layout order."""
        return cls(layout, reduce(np.kron, [np.asarray(f, dtype=complex) for f in factors]))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def is_positive(self, tol: float = POSITIVITY_TOL) -> bool:
        return self.min_eigenvalue() >= -tol


def initial_state(layout: SpaceLayout, nbar_a: float = 0.0, nbar_b: float = 0.0) -> DensityMatrix:
    """Spin in |0><0| and each mode thermal at its bath occupation."""
    occupations = {MODE_A: nbar_a, MODE_B: nbar_b}
    factors = []
    for name, d in zip(layout.names, layout.dims):
        factors.append(ground_state(2) if name == SPIN else thermal_state(d, occupations.get(name, 0.0)))
    return DensityMatrix.product(layout, factors)


def _as_array(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)


def expectation(rho, op) -> float:
    """Re tr(op rho) for a Hermitian ``op``."""
    m = _as_array(rho)
    if op.shape != m.shape:
        raise DimensionMismatchError(f"operator shape {op.shape} does not match state shape {m.shape}")
    if sp.issparse(op):
        value = op.multiply(m.T).sum()
    else:
        value = np.einsum("ij,ji->", np.asarray(op), m)
    if abs(value.imag) > 1e-8:
        raise NumericalConsistencyError(f"expectation value has imaginary part {value.imag:.3e}")
    return float(value.real)


def partial_trace(rho, keep: Iterable[str], layout: SpaceLayout | None = None) -> np.ndarray:
    """Reduced matrix on the ``keep`` slots, in their layout order."""
    if isinstance(rho, DensityMatrix):
        layout = rho.layout
    if layout is None:
        raise InvalidDimensionError("partial_trace needs a layout for a bare matrix")
    keep = set(keep)
    if not keep:
        raise InvalidDimensionError("partial_trace needs at least one slot to keep")
    for slot in keep:
        layout.index(slot)
    m = _as_array(rho)
    k = len(layout.dims)
    t = m.reshape(layout.dims + layout.dims)
    # einsum labels: ket indices 0..k-1, bra indices k..2k-1; traced slots share a label
    ket = list(range(k))
    bra = [i if layout.names[i] not in keep else k + i for i in range(k)]
    kept = [i for i in range(k) if layout.names[i] in keep]
    out = np.einsum(t, ket + bra, kept + [k + i for i in kept])
    d = int(np.prod([layout.dims[i] for i in kept]))
    return out.reshape(d, d)
