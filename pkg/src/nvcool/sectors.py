"""Symmetry-blocked Lindblad propagation.

If an integer charge Q (here n_a + n_b) commutes with H and every collapse
operator shifts Q by a fixed amount, the Liouvillian never couples the
Q-diagonal blocks of rho to its off-diagonal coherences.  States that start
block-diagonal (thermal modes, spin in |0>) therefore stay block-diagonal,
and only the blocks need to be propagated.  Blocks are zero-padded to a
common size so that every product is one batched matmul.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from nvcool.errors import DimensionMismatchError, InvalidParameterError
from nvcool.model import LindbladTerm


def charge_shift(op, charge: np.ndarray) -> int | None:
    """Fixed amount by which ``op`` changes the charge; None if ``op`` is zero.

    Raises InvalidParameterError when the shift is not uniform.
    """
    coo = sp.coo_matrix(op)
    mask = coo.data != 0
    if not mask.any():
        return None
    shifts = np.unique(charge[coo.row[mask]] - charge[coo.col[mask]])
    if len(shifts) != 1:
        raise InvalidParameterError(f"operator changes the charge by several amounts: {shifts[:5]}")
    return int(shifts[0])


class SectorBasis:
    def __init__(self, charge):
        charge = np.asarray(charge)
        if charge.ndim != 1 or not np.issubdtype(charge.dtype, np.integer):
            raise InvalidParameterError("charge must be a 1-d integer array")
        self.charge = charge
        self.dim = len(charge)
        self.values = np.unique(charge)
        self.position = {int(q): t for t, q in enumerate(self.values)}
        self.members = [np.flatnonzero(charge == q) for q in self.values]
        self.sizes = np.array([len(m) for m in self.members])
        self.m = int(self.sizes.max())
        self.n_sectors = len(self.values)

    def _block(self, dense_like, t_out, t_in):
        M = np.zeros((self.m, self.m), dtype=complex)
        rows, cols = self.members[t_out], self.members[t_in]
        sub = dense_like[rows][:, cols]
        M[:len(rows), :len(cols)] = sub.toarray() if sp.issparse(sub) else sub
        return M

    def supports(self, H, terms: Sequence[LindbladTerm]) -> bool:
        try:
            if charge_shift(H, self.charge) not in (None, 0):
                return False
            for term in terms:
                charge_shift(term.operator, self.charge)
        except InvalidParameterError:
            return False
        return True

    def holds(self, rho: np.ndarray, tol: float = 0.0) -> bool:
        """True iff ``rho`` has no weight between different sectors."""
        off = self.charge[:, None] != self.charge[None, :]
        return bool(np.max(np.abs(rho[off]), initial=0.0) <= tol)

    def pack(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim, self.dim):
            raise DimensionMismatchError(f"state shape {rho.shape} does not match charge length {self.dim}")
        out = np.zeros((self.n_sectors, self.m, self.m), dtype=complex)
        for t, idx in enumerate(self.members):
            out[t, :len(idx), :len(idx)] = rho[np.ix_(idx, idx)]
        return out

    def unpack(self, blocks: np.ndarray) -> np.ndarray:
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        for t, idx in enumerate(self.members):
            rho[np.ix_(idx, idx)] = blocks[t, :len(idx), :len(idx)]
        return rho

    def blocks(self, op) -> np.ndarray:
        """Diagonal blocks of ``op``; only these act on a block-diagonal state."""
        op = sp.csr_matrix(op)
        return np.stack([self._block(op, t, t) for t in range(self.n_sectors)])

    def expectation(self, state: np.ndarray, op_blocks: np.ndarray) -> float:
        return float(np.einsum("tij,tji->", op_blocks, state).real)

    def compile(self, H, terms: Sequence[LindbladTerm]) -> "SectorRHS":
        return SectorRHS(self, H, terms)


class SectorRHS:
    """Blocked version of :class:`nvcool.liouville.DenseLindbladRHS`.

    Collapse operators with at most one nonzero per row (ladder and spin
    operators) are applied as a weighted gather, x rho x^dag [i, j] =
    c_i conj(c_j) rho[p_i, p_j]; anything else falls back to batched matmul.
    """

    def __init__(self, basis: SectorBasis, H, terms: Sequence[LindbladTerm]):
        self.basis = basis
        H = sp.csr_matrix(H, dtype=complex)
        if H.shape != (basis.dim, basis.dim):
            raise DimensionMismatchError(f"Hamiltonian shape {H.shape} does not match basis dim {basis.dim}")
        if charge_shift(H, basis.charge) not in (None, 0):
            raise InvalidParameterError("Hamiltonian does not conserve the charge")
        n, m = basis.n_sectors, basis.m
        K = H.copy()
        gather_idx, gather_w, mat_blocks, mat_src = [], [], [], []
        for term in terms:
            x = sp.csr_matrix(term.operator, dtype=complex)
            shift = charge_shift(x, basis.charge)
            if term.weight == 0 or shift is None:
                continue
            K = K - 1j * term.weight * (x.conj().T @ x)
            xs = np.sqrt(2.0 * term.weight) * x
            src = np.array([basis.position.get(int(q) - shift, n) for q in basis.values])
            blocks = np.stack([basis._block(xs, t, s) if s < n else np.zeros((m, m), complex)
                               for t, s in enumerate(src)])
            if np.all(np.count_nonzero(blocks, axis=2) <= 1):
                col = np.argmax(blocks != 0, axis=2)                      # p_i per (t, i)
                c = np.take_along_axis(blocks, col[..., None], axis=2)[..., 0]
                flat = src[:, None, None] * m * m + col[:, :, None] * m + col[:, None, :]
                gather_idx.append(flat)
                gather_w.append(c[:, :, None] * c[:, None, :].conj())
            else:
                mat_blocks.append(blocks)
                mat_src.append(src)
        self.K = basis.blocks(K)
        self.Kd = np.swapaxes(self.K, -1, -2).conj()
        self._ext = np.zeros((n + 1, m, m), dtype=complex)
        self.gather = None
        if gather_idx:
            # all monomial jumps folded into one sparse map on the flattened blocks;
            # entries pointing at the padding block have zero weight and are dropped
            idx, w = np.stack(gather_idx).ravel(), np.stack(gather_w).ravel()
            rows = np.tile(np.arange(n * m * m), len(gather_idx))
            keep = w != 0
            self.gather = sp.csr_matrix((w[keep], (rows[keep], idx[keep])), shape=(n * m * m, n * m * m))
        self.mat = [(X, np.swapaxes(X, -1, -2).conj(), s) for X, s in zip(mat_blocks, mat_src)]

    def __call__(self, state: np.ndarray) -> np.ndarray:
        out = -1j * (self.K @ state)
        out += 1j * (state @ self.Kd)
        if self.gather is not None:
            out += (self.gather @ state.ravel()).reshape(state.shape)
        if self.mat:
            ext = self._ext
            ext[:-1] = state
            for X, Xd, src in self.mat:
                out += X @ ext[src] @ Xd
        return out
