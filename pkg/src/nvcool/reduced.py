"""Spin (x) mode-b master equation left after adiabatically eliminating mode a."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
import scipy.sparse as sp

from nvcool import hilbert as hb
from nvcool.errors import InvalidParameterError, InvalidRegimeError
from nvcool.hilbert import MODE_B, SPIN, DensityMatrix, SpaceLayout
from nvcool.liouville import IntegratorSpec, Trajectory, evolve
from nvcool.model import LindbladTerm, SystemParams, number_observables


@dataclass(frozen=True)
class ReducedParams:
    omega_z: float
    delta: float
    g_a: float
    g_ab: float
    gamma_a: float
    gamma_b: float
    Gamma: float
    nbar_a: float
    nbar_b: float
    # replaces the computed effective spin occupation when set
    ns_prime_override: float | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{f.name} must be finite and >= 0, got {value}")
        if self.kappa <= 0:
            raise InvalidParameterError("gamma_a + gamma_b + Gamma must be > 0")
        if not math.isclose(self.delta, self.omega_z, rel_tol=1e-9):
            raise InvalidParameterError(
                f"reduced model assumes resonance delta == omega_z, got {self.delta} vs {self.omega_z}")

    @classmethod
    def from_system(cls, params: SystemParams, **overrides) -> "ReducedParams":
        values = {f.name: getattr(params, f.name) for f in fields(cls) if hasattr(params, f.name)}
        values.update(overrides)
        return cls(**values)

    @property
    def kappa(self) -> float:
        return self.gamma_a + self.gamma_b + self.Gamma

    @property
    def cooling_strength(self) -> float:
        """g_ab^2 / kappa, the prefactor of the eliminated-mode Liouvillian."""
        return self.g_ab ** 2 / self.kappa

    def replace(self, **changes) -> "ReducedParams":
        return replace(self, **changes)


def ns_prime(p: ReducedParams) -> float:
    """Effective thermal excitation of the spin induced by the g_a coupling."""
    if p.ns_prime_override is not None:
        return p.ns_prime_override
    if p.Gamma <= 0:
        raise InvalidRegimeError("effective spin occupation needs Gamma > 0")
    rate = 2 * p.gamma_a + p.Gamma
    return rate * p.g_a ** 2 * (p.nbar_a ** 2 + p.nbar_a) / (p.Gamma * (p.omega_z ** 2 + rate ** 2))


def build_reduced_terms(p: ReducedParams, layout: SpaceLayout) -> list[LindbladTerm]:
    b = hb.embed(hb.annihilation(layout.slot_dim(MODE_B)), MODE_B, layout)
    bd = b.conj().T.tocsr()
    sm = hb.embed(hb.sigma_minus(), SPIN, layout)
    spl = sm.conj().T.tocsr()
    r = p.cooling_strength
    nsp = ns_prime(p) if p.Gamma > 0 else 0.0
    return [
        LindbladTerm(sp.csr_matrix(b @ spl), r * (1 + p.nbar_a), "b_sigma_plus"),
        LindbladTerm(sp.csr_matrix(bd @ sm), r * p.nbar_a, "b_dag_sigma_minus"),
        LindbladTerm(sm, (1 + nsp) * p.Gamma, "sigma_minus"),
        LindbladTerm(spl, nsp * p.Gamma, "sigma_plus"),
        LindbladTerm(b, p.gamma_b * (1 + p.nbar_b), "b"),
        LindbladTerm(bd, p.gamma_b * p.nbar_b, "b_dag"),
    ]


def build_reduced_h0(p: ReducedParams, layout: SpaceLayout) -> sp.csr_matrix:
    h = 0.5 * p.omega_z * hb.embed(hb.sigma_z(), SPIN, layout)
    h = h + p.delta * hb.embed(hb.number(layout.slot_dim(MODE_B)), MODE_B, layout)
    return sp.csr_matrix(h)


def reduced_charge(layout: SpaceLayout) -> np.ndarray:
    """n_b + n_s, conserved by H0 and shifted uniformly by every reduced jump."""
    return layout.quantum_numbers(MODE_B) + layout.quantum_numbers(SPIN)


def reduced_initial_state(dim_b: int, nbar_b: float) -> DensityMatrix:
    layout = SpaceLayout.reduced(dim_b)
    return DensityMatrix.product(layout, [hb.ground_state(2), hb.thermal_state(dim_b, nbar_b)])


def evolve_reduced(rho0: DensityMatrix, p: ReducedParams, spec: IntegratorSpec, *,
                   method: str = "auto", stationarity=None) -> Trajectory:
    """Propagate the reduced model; records n_b and n_s."""
    layout = rho0.layout
    if layout.names != (SPIN, MODE_B):
        raise InvalidParameterError(f"reduced model needs a (spin, b) layout, got {layout.names}")
    return evolve(rho0, build_reduced_h0(p, layout), build_reduced_terms(p, layout), spec,
                  number_observables(layout), charge=reduced_charge(layout), method=method,
                  stationarity=stationarity)
