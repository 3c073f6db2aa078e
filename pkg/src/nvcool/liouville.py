"""Lindblad right-hand side, fixed-step RK4 propagation and adjoint maps.

Dissipators use the convention D_x(rho) = 2 x rho x^dag - x^dag x rho - rho x^dag x,
with the full rate (e.g. gamma (1 + nbar)) carried by :class:`LindbladTerm`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from nvcool.errors import DimensionMismatchError, IntegratorInstabilityError, InvalidParameterError
from nvcool.hilbert import DensityMatrix, expectation
from nvcool.model import LindbladTerm

log = logging.getLogger(__name__)

TRACE_INSTABILITY_TOL = 1e-6
STATIONARY_TOL = 1e-3


@dataclass(frozen=True)
class IntegratorSpec:
    dt: float
    t_final: float
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if not self.t_final >= self.dt:
            raise InvalidParameterError(f"t_final must be >= dt, got {self.t_final}")
        if self.record_stride < 1:
            raise InvalidParameterError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    def scaled_time(self, factor: float) -> "IntegratorSpec":
        return IntegratorSpec(self.dt * factor, self.t_final * factor, self.record_stride)


@dataclass
class Trajectory:
    """Recorded observables with per-record trace and Hermiticity diagnostics."""

    times: np.ndarray
    records: dict[str, np.ndarray]
    trace_error: np.ndarray
    hermiticity_drift: np.ndarray = None
    stationary_at: float | None = None
    final_state: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for name, values in self.records.items():
            if len(values) != len(self.times):
                raise ValueError(f"record {name!r} has {len(values)} entries for {len(self.times)} times")
        if self.hermiticity_drift is None:
            self.hermiticity_drift = np.zeros_like(self.times)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.records[name]

    def final(self, name: str) -> float:
        return float(self.records[name][-1])


def _check_square(x, rho):
    if x.shape[0] != x.shape[1] or x.shape[1] != rho.shape[-1]:
        raise DimensionMismatchError(f"operator shape {x.shape} incompatible with matrix shape {rho.shape}")


def dissipator(x, rho) -> np.ndarray:
    """D_x(rho) = 2 x rho x^dag - x^dag x rho - rho x^dag x."""
    rho = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho)
    _check_square(x, rho)
    x = sp.csr_matrix(x)
    xd = x.conj().T.tocsr()
    xdx = (xd @ x).tocsr()
    jump = x @ (x @ rho.conj().T).conj().T
    return 2.0 * jump - xdx @ rho - (xdx.T @ rho.T).T


def adjoint_dissipator(x, op) -> np.ndarray:
    """Heisenberg-picture dual D_x^dag(O) = 2 x^dag O x - x^dag x O - O x^dag x."""
    O = op.toarray() if sp.issparse(op) else np.asarray(op)
    _check_square(x, O)
    x = sp.csr_matrix(x)
    xd = x.conj().T.tocsr()
    xdx = (xd @ x).tocsr()
    return 2.0 * (xd @ (x.T @ O.T).T) - xdx @ O - (xdx.T @ O.T).T


def adjoint_liouvillian(op, H, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """L^dag(O) = i[H, O] + sum_k w_k D_{x_k}^dag(O)."""
    O = op.toarray() if sp.issparse(op) else np.asarray(op, dtype=complex)
    _check_square(H, O)
    H = sp.csr_matrix(H)
    out = 1j * (H @ O - (H.T @ O.T).T)
    for term in terms:
        if term.weight:
            out = out + term.weight * adjoint_dissipator(term.operator, O)
    return out


class DenseLindbladRHS:
    """Callable rho -> L(rho) built from sparse H and collapse terms.

    Uses the non-Hermitian effective Hamiltonian K = H - i sum w x^dag x so
    that L(rho) = -i K rho + i rho K^dag + 2 sum w x rho x^dag, evaluated as
    sparse x dense products only.
    """

    def __init__(self, H, terms: Sequence[LindbladTerm]):
        H = sp.csr_matrix(H, dtype=complex)
        n = H.shape[0]
        K = H.copy()
        self.jumps = []
        for term in terms:
            x = sp.csr_matrix(term.operator, dtype=complex)
            if x.shape != (n, n):
                raise DimensionMismatchError(f"collapse operator {term.label!r} has shape {x.shape}, expected {(n, n)}")
            if term.weight == 0:
                continue
            K = K - 1j * term.weight * (x.conj().T @ x)
            self.jumps.append((2.0 * term.weight, x))
        self.K = K.tocsr()
        self.KdT = self.K.conj().tocsr()  # (rho K^dag) = (K^* rho^T)^T
        self.dim = n

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.dim, self.dim):
            raise DimensionMismatchError(f"state shape {rho.shape} does not match operator dim {self.dim}")
        out = -1j * (self.K @ rho) + 1j * (self.KdT @ rho.T).T
        for w, x in self.jumps:
            out += w * (x @ (x @ rho.conj().T).conj().T)
        return out


def lindblad_rhs(rho, H, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """-i[H, rho] + sum_k w_k D_{x_k}(rho)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return DenseLindbladRHS(H, terms)(m)


def _dagger(state: np.ndarray) -> np.ndarray:
    return np.swapaxes(state, -1, -2).conj()


def _trace(state: np.ndarray) -> complex:
    return np.trace(state, axis1=-2, axis2=-1).sum()


def rk4_step(rho, dt: float, rhs: Callable[[np.ndarray], np.ndarray], *,
             t: float | None = None, info: dict | None = None):
    """One classical RK4 step followed by Hermitian re-symmetrisation.

    ``rho`` may be a :class:`DensityMatrix`, a dense matrix, or a stack of
    blocks (leading axes are batch axes).  If ``info`` is given it receives
    the pre-symmetrisation Hermiticity drift and the trace error.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    wrapped = isinstance(rho, DensityMatrix)
    y = rho.matrix if wrapped else rho
    k1 = rhs(y)
    k2 = rhs(y + (0.5 * dt) * k1)
    k3 = rhs(y + (0.5 * dt) * k2)
    k4 = rhs(y + dt * k3)
    new = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    adj = _dagger(new)
    drift = float(np.max(np.abs(new - adj))) if new.size else 0.0
    new = 0.5 * (new + adj)
    trace_error = float(abs(_trace(new) - 1.0))
    if not math.isfinite(trace_error) or trace_error > TRACE_INSTABILITY_TOL:
        raise IntegratorInstabilityError(f"trace deviation {trace_error:.3e} after RK4 step", time=t)
    if drift > 1e-12:
        log.debug("hermiticity drift %.3e re-symmetrised at t=%s", drift, t)
    if info is not None:
        info["hermiticity_drift"] = drift
        info["trace_error"] = trace_error
    return DensityMatrix(rho.layout, new) if wrapped else new


def first_stationary_time(times: np.ndarray, values: np.ndarray, window: float, tol: float) -> float | None:
    """Earliest recorded time whose trailing ``window`` has spread < ``tol``."""
    times = np.asarray(times)
    values = np.asarray(values)
    eps = 1e-9 * max(window, 1.0)
    for i in range(len(times)):
        if times[i] - times[0] < window - eps:
            continue
        mask = (times >= times[i] - window - eps) & (times <= times[i])
        seg = values[mask]
        if seg.max() - seg.min() < tol:
            return float(times[i])
    return None


def steady_state_reached(traj: Trajectory, observable: str, window: float, tol: float = STATIONARY_TOL) -> bool:
    """True iff the observable's spread over the trailing ``window`` is below ``tol``."""
    if observable not in traj.records:
        raise KeyError(f"trajectory has no observable {observable!r}; known: {sorted(traj.records)}")
    span = traj.times[-1] - traj.times[0]
    if window > span + 1e-12 * max(span, 1.0):
        raise InvalidParameterError(f"window {window} exceeds recorded span {span}")
    mask = traj.times >= traj.times[-1] - window - 1e-9 * max(window, 1.0)
    seg = traj.records[observable][mask]
    return bool(seg.max() - seg.min() < tol)


def integrate(state0: np.ndarray, rhs, spec: IntegratorSpec,
              measure: Callable[[np.ndarray], dict[str, float]],
              stationarity: tuple[str, float, float] | None = None) -> Trajectory:
    """Drive ``rk4_step`` over ``spec`` and record ``measure(state)``.

    Shared by the dense and the sector-blocked propagators.
    """
    n = spec.n_steps
    state = np.array(state0, dtype=complex)
    times, rows, traces, drifts = [], [], [], []

    def record(k, drift):
        times.append(k * spec.dt)
        rows.append(measure(state))
        traces.append(float(abs(_trace(state) - 1.0)))
        drifts.append(drift)

    record(0, 0.0)
    info = {}
    worst_drift = 0.0
    for k in range(1, n + 1):
        state = rk4_step(state, spec.dt, rhs, t=k * spec.dt, info=info)
        worst_drift = max(worst_drift, info["hermiticity_drift"])
        if k % spec.record_stride == 0 or k == n:
            record(k, worst_drift)
            worst_drift = 0.0
    keys = rows[0].keys()
    records = {key: np.array([r[key] for r in rows]) for key in keys}
    traj = Trajectory(np.array(times), records, np.array(traces), np.array(drifts), final_state=state)
    if stationarity is not None:
        name, window, tol = stationarity
        if name in records:
            traj.stationary_at = first_stationary_time(traj.times, records[name], window, tol)
    return traj


def default_stationarity(spec: IntegratorSpec, observable: str = "n_b") -> tuple[str, float, float]:
    return observable, 0.1 * spec.t_final, STATIONARY_TOL


def evolve(rho0, H, terms: Sequence[LindbladTerm], spec: IntegratorSpec,
           observables: Mapping[str, object], *, charge: np.ndarray | None = None,
           method: str = "auto", stationarity: tuple[str, float, float] | None = None) -> Trajectory:
    """Propagate rho0 with fixed-step RK4 and record expectation values.

    ``method="sector"`` (or ``"auto"`` with a compatible ``charge``) uses the
    symmetry-blocked propagator from :mod:`nvcool.sectors`; ``"dense"``
    always propagates the full matrix.
    """
    from nvcool import sectors

    rho0 = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if stationarity is None:
        stationarity = default_stationarity(spec, "n_b")
    if method not in ("auto", "dense", "sector"):
        raise InvalidParameterError(f"unknown propagation method {method!r}")

    if method != "dense" and charge is not None:
        basis = sectors.SectorBasis(charge)
        compatible = basis.supports(H, terms) and basis.holds(rho0)
        if compatible:
            rhs = basis.compile(H, terms)
            obs = {name: basis.blocks(op) for name, op in observables.items()}
            traj = integrate(basis.pack(rho0), rhs, spec,
                             lambda s: {name: basis.expectation(s, blocks) for name, blocks in obs.items()},
                             stationarity)
            traj.final_state = basis.unpack(traj.final_state)
            return traj
        if method == "sector":
            raise InvalidParameterError("operators or initial state do not respect the supplied charge")
    elif method == "sector":
        raise InvalidParameterError("sector propagation needs a charge vector")

    rhs = DenseLindbladRHS(H, terms)
    return integrate(rho0, rhs, spec,
                     lambda s: {name: expectation(s, op) for name, op in observables.items()},
                     stationarity)
