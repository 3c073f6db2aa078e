"""Hamiltonians, collapse operators and physical-parameter conversions.

All rates and frequencies are angular with hbar = 1.  SI constants only
appear in the conversion helpers at the bottom of the module.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
import scipy.constants as const
import scipy.sparse as sp

from nvcool import hilbert as hb
from nvcool.errors import InvalidParameterError
from nvcool.hilbert import MODE_A, MODE_B, SPIN, SpaceLayout

HBAR = const.hbar
K_B = const.k
# CODATA 2018; pinned so derived couplings do not shift with the scipy release
MU_B = 9.2740100783e-24
G_S = 2.0

# "much less than" in the regime checks
REGIME_FACTOR = 100.0

RATE_FIELDS = ("omega_z", "delta", "g_a", "g_b", "g_ab", "gamma_a", "gamma_b", "Gamma")
OCCUPATION_FIELDS = ("nbar_a", "nbar_b")


@dataclass(frozen=True)
class SystemParams:
    omega_z: float
    delta: float
    g_a: float
    g_b: float
    g_ab: float
    gamma_a: float
    gamma_b: float
    Gamma: float
    nbar_a: float
    nbar_b: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{f.name} must be finite and >= 0, got {value}")
        if self.omega_z <= 0:
            raise InvalidParameterError(f"omega_z must be > 0, got {self.omega_z}")

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def scaled(self, factor: float) -> "SystemParams":
        """Multiply every rate and frequency by ``factor``; occupations unchanged."""
        return replace(self, **{name: getattr(self, name) * factor for name in RATE_FIELDS})

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def on_resonance(self) -> bool:
        return math.isclose(self.delta, self.omega_z, rel_tol=1e-12)


@dataclass(frozen=True)
class PhysicalParams:
    """SI-unit device description used to derive :class:`SystemParams`."""

    mass_a: float
    mass_b: float
    omega_a_mech: float
    omega_b_mech: float
    G2: float
    temperature: float
    quality_factor: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidParameterError(f"{f.name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class LindbladTerm:
    """Collapse operator ``operator`` entering the master equation as ``weight * D_x``."""

    operator: sp.csr_matrix
    weight: float
    label: str = ""

    def __post_init__(self):
        if not self.weight >= 0:
            raise InvalidParameterError(f"Lindblad weight must be >= 0, got {self.weight} ({self.label})")


def _spin_op(op, layout):
    return hb.embed(op, SPIN, layout)


def build_h0(params: SystemParams, layout: SpaceLayout) -> sp.csr_matrix:
    """Rotating-frame free Hamiltonian (omega_z/2) sigma_z + delta b^dag b."""
    h = 0.5 * params.omega_z * _spin_op(hb.sigma_z(), layout)
    h = h + params.delta * hb.embed(hb.number(layout.slot_dim(MODE_B)), MODE_B, layout)
    return sp.csr_matrix(h)


def build_h1_full(params: SystemParams, layout: SpaceLayout) -> sp.csr_matrix:
    """Static coupling (g_a a^dag a + g_b b^dag b + g_ab (a^dag b + a b^dag)) sigma_x."""
    a = hb.embed(hb.annihilation(layout.slot_dim(MODE_A)), MODE_A, layout)
    b = hb.embed(hb.annihilation(layout.slot_dim(MODE_B)), MODE_B, layout)
    ad, bd = a.conj().T, b.conj().T
    mode_part = params.g_a * (ad @ a) + params.g_b * (bd @ b) + params.g_ab * (ad @ b + a @ bd)
    h = mode_part @ _spin_op(hb.sigma_x(), layout)
    h.eliminate_zeros()
    return sp.csr_matrix(h)


def build_h1_rwa(params: SystemParams, layout: SpaceLayout) -> sp.csr_matrix:
    """Simplified coupling g_a (a^dag a - nbar_a) sigma_x + g_ab (a^dag b sigma_+ + a b^dag sigma_-)."""
    a = hb.embed(hb.annihilation(layout.slot_dim(MODE_A)), MODE_A, layout)
    b = hb.embed(hb.annihilation(layout.slot_dim(MODE_B)), MODE_B, layout)
    ad, bd = a.conj().T, b.conj().T
    sp_, sm = _spin_op(hb.sigma_plus(), layout), _spin_op(hb.sigma_minus(), layout)
    fluct = ad @ a - params.nbar_a * hb.identity(layout.dim)
    h = params.g_a * fluct @ (sp_ + sm) + params.g_ab * (ad @ b @ sp_ + a @ bd @ sm)
    h.eliminate_zeros()
    return sp.csr_matrix(h)


def build_hamiltonian(params: SystemParams, layout: SpaceLayout) -> sp.csr_matrix:
    """H0' + H1, the Hamiltonian propagated by the full model."""
    return (build_h0(params, layout) + build_h1_full(params, layout)).tocsr()


def build_collapse_terms(params: SystemParams, layout: SpaceLayout) -> list[LindbladTerm]:
    a = hb.embed(hb.annihilation(layout.slot_dim(MODE_A)), MODE_A, layout)
    b = hb.embed(hb.annihilation(layout.slot_dim(MODE_B)), MODE_B, layout)
    return [
        LindbladTerm(a, params.gamma_a * (1 + params.nbar_a), "a"),
        LindbladTerm(a.conj().T.tocsr(), params.gamma_a * params.nbar_a, "a_dag"),
        LindbladTerm(b, params.gamma_b * (1 + params.nbar_b), "b"),
        LindbladTerm(b.conj().T.tocsr(), params.gamma_b * params.nbar_b, "b_dag"),
        LindbladTerm(_spin_op(hb.sigma_minus(), layout), params.Gamma, "sigma_minus"),
    ]


def number_observables(layout: SpaceLayout) -> dict[str, sp.csr_matrix]:
    """n_<mode> for every mode in the layout plus n_s = sigma_+ sigma_-."""
    obs = {}
    for name in layout.names:
        if name == SPIN:
            continue
        obs[f"n_{name}"] = hb.embed(hb.number(layout.slot_dim(name)), name, layout)
    obs["n_s"] = _spin_op(hb.sigma_plus() @ hb.sigma_minus(), layout)
    return obs


def excitation_charge(layout: SpaceLayout) -> np.ndarray:
    """Phonon number n_a + n_b per basis state.

    The full Hamiltonian conserves it and every collapse operator shifts it
    by a fixed amount, which is what the sector propagator exploits.
    """
    return layout.quantum_numbers(MODE_A) + layout.quantum_numbers(MODE_B)


# --- physical conversions -------------------------------------------------

def zero_point_fluctuation(mass: float, omega: float) -> float:
    """sqrt(hbar / (2 m omega)) in metres."""
    if not (mass > 0 and omega > 0):
        raise InvalidParameterError(f"mass and omega must be > 0, got {mass}, {omega}")
    return math.sqrt(HBAR / (2.0 * mass * omega))


def coupling_from_gradient(G2: float, x1: float, x2: float) -> float:
    """Angular coupling rate g_s mu_B G2 x1 x2 / hbar."""
    if not (G2 > 0 and x1 > 0 and x2 > 0):
        raise InvalidParameterError(f"G2, x1, x2 must be > 0, got {G2}, {x1}, {x2}")
    return G_S * MU_B * G2 * x1 * x2 / HBAR


def bose_occupation(omega: float, temperature: float) -> float:
    if omega <= 0:
        raise InvalidParameterError(f"omega must be > 0, got {omega}")
    if temperature < 0:
        raise InvalidParameterError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (K_B * temperature))


def derive_system_params(phys: PhysicalParams, Gamma: float, nbar_a: float) -> SystemParams:
    """SystemParams in angular SI units for the device ``phys``.

    Both mechanical decay rates are omega_a / Q, as for the reference
    device; mode b's bath occupation follows from ``phys.temperature``.
    """
    xa = zero_point_fluctuation(phys.mass_a, phys.omega_a_mech)
    xb = zero_point_fluctuation(phys.mass_b, phys.omega_b_mech)
    gamma = phys.omega_a_mech / phys.quality_factor
    omega_z = phys.omega_b_mech - phys.omega_a_mech
    return SystemParams(
        omega_z=omega_z,
        delta=omega_z,
        g_a=coupling_from_gradient(phys.G2, xa, xa),
        g_b=coupling_from_gradient(phys.G2, xb, xb),
        g_ab=coupling_from_gradient(phys.G2, xa, xb),
        gamma_a=gamma,
        gamma_b=gamma,
        Gamma=Gamma,
        nbar_a=nbar_a,
        nbar_b=bose_occupation(phys.omega_b_mech, phys.temperature),
    )


def validate_regime(params: SystemParams) -> list[str]:
    """Warnings for every violated weak-coupling / RWA / timescale condition."""
    p = params
    limit = p.omega_z / REGIME_FACTOR
    warnings = []
    checks = [
        ("g_a*sqrt(nbar_a)", p.g_a * math.sqrt(p.nbar_a)),
        ("g_b*sqrt(nbar_b)", p.g_b * math.sqrt(p.nbar_b)),
        ("g_ab*sqrt(nbar_a*nbar_b)", p.g_ab * math.sqrt(p.nbar_a * p.nbar_b)),
    ]
    for label, value in checks:
        if value >= limit:
            warnings.append(f"weak coupling violated: {label} = {value:.4g} is not << omega_z = {p.omega_z:.4g}")
    if p.g_ab > 0 and math.sqrt(p.nbar_a) >= (p.delta / p.g_ab) / REGIME_FACTOR:
        warnings.append(
            f"RWA violated: sqrt(nbar_a) = {math.sqrt(p.nbar_a):.4g} is not << delta/g_ab = {p.delta / p.g_ab:.4g}")
    fastest = max(p.Gamma, p.gamma_a, p.gamma_b)
    if fastest >= limit:
        warnings.append(
            f"timescale separation violated: max(Gamma, gamma_a, gamma_b) = {fastest:.4g} is not << omega_z")
    return warnings


def renormalized(params: SystemParams) -> SystemParams:
    """Express every rate in units of gamma_b."""
    if params.gamma_b <= 0:
        raise InvalidParameterError("gamma_b must be > 0 to renormalise")
    return params.scaled(1.0 / params.gamma_b)

