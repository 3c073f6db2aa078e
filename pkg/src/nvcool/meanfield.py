"""Mean-field moment equations for n_s and n_b and their stationary solution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nvcool.errors import InvalidParameterError, ModelViolationError
from nvcool.liouville import IntegratorSpec, first_stationary_time
from nvcool.reduced import ReducedParams, ns_prime

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class QuadraticCoeffs:
    A: float
    B: float
    C: float

    @property
    def discriminant(self) -> float:
        return self.B * self.B - 4.0 * self.A * self.C

    def roots(self) -> tuple[float, ...]:
        """Real roots, evaluated without cancellation."""
        A, B, C = self.A, self.B, self.C
        if A == 0:
            return () if B == 0 else (-C / B,)
        disc = self.discriminant
        if disc < 0:
            return ()
        q = -0.5 * (B + math.copysign(math.sqrt(disc), B))
        if q == 0:
            return (0.0, 0.0)
        return (q / A, C / q)


@dataclass(frozen=True)
class MeanFieldState:
    n_s: float
    n_b: float

    def __post_init__(self):
        if not (-1e-9 <= self.n_s <= 1 + 1e-9) or self.n_b < -1e-9:
            raise ModelViolationError(f"mean-field state out of range: n_s={self.n_s}, n_b={self.n_b}")


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    n_s: np.ndarray
    n_b: np.ndarray
    stationary_at: float | None = None

    @property
    def final(self) -> MeanFieldState:
        return MeanFieldState(float(self.n_s[-1]), float(self.n_b[-1]))


@dataclass
class OptimalGamma:
    Gamma: float
    n_b: float
    warnings: list[str] = field(default_factory=list)


def mean_field_rhs(state: MeanFieldState, p: ReducedParams) -> tuple[float, float]:
    """(dn_s/dt, dn_b/dt) with <n_b n_s> factorised as <n_b><n_s>."""
    return _rates(state.n_s, state.n_b, p.cooling_strength, p.nbar_a, p.nbar_b, p.gamma_b, p.Gamma,
                  ns_prime(p))


def _rates(ns, nb, r, nbar_a, nbar_b, gamma_b, Gamma, nsp):
    exchange = 2 * r * ((2 * nbar_a + 1) * nb * ns + nbar_a * ns - (nbar_a + 1) * nb)
    dns = -exchange + 2 * Gamma * (-(2 * nsp + 1) * ns + nsp)
    dnb = exchange + 2 * gamma_b * (nbar_b - nb)
    return dns, dnb


def evolve_mean_field(initial: MeanFieldState, p: ReducedParams, spec: IntegratorSpec,
                      stationarity_tol: float = 1e-3) -> MeanFieldTrajectory:
    """Fixed-step RK4 integration of the mean-field moment equations."""
    args = (p.cooling_strength, p.nbar_a, p.nbar_b, p.gamma_b, p.Gamma, ns_prime(p))

    def f(y):
        return np.array(_rates(y[0], y[1], *args))

    dt, n = spec.dt, spec.n_steps
    y = np.array([initial.n_s, initial.n_b], dtype=float)
    times, out = [0.0], [y.copy()]
    for k in range(1, n + 1):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or y[1] < -1e-9 or not (-1e-9 <= y[0] <= 1 + 1e-9):
            raise ModelViolationError(f"mean-field solution left the physical range at t={k * dt:.6g}: {y}")
        if k % spec.record_stride == 0 or k == n:
            times.append(k * dt)
            out.append(y.copy())
    arr = np.array(out)
    traj = MeanFieldTrajectory(np.array(times), arr[:, 0], arr[:, 1])
    traj.stationary_at = first_stationary_time(traj.times, traj.n_b, 0.1 * spec.t_final, stationarity_tol)
    return traj


def quadratic_coeffs(p: ReducedParams) -> QuadraticCoeffs:
    """Coefficients of A n_b^2 + B n_b + C = 0 for the stationary occupation."""
    r = p.cooling_strength
    nsp = ns_prime(p)
    na, nb, gb, G = p.nbar_a, p.nbar_b, p.gamma_b, p.Gamma
    A = -gb * r * (2 * na + 1)
    B = r * (2 * na * nb * gb + nb * gb - na * gb - G * na - G * nsp - G) - gb * G * (2 * nsp + 1)
    C = r * na * (gb * nb + G * nsp) + gb * nb * G * (2 * nsp + 1)
    return QuadraticCoeffs(A, B, C)


def stationary_nb(p: ReducedParams) -> float:
    """The unique nonnegative root of the stationary quadratic."""
    if p.g_ab == 0:
        # linear root -C/B is nbar_b algebraically; skip the rounding
        return p.nbar_b
    roots = [x for x in quadratic_coeffs(p).roots() if x >= 0]
    if not roots:
        raise ModelViolationError(f"stationary quadratic has no nonnegative root for {p}")
    # with A < 0 < C the roots have opposite signs; C = 0 gives a double 0
    return min(roots)


def stationary_ns(p: ReducedParams, n_b: float) -> float:
    r = p.cooling_strength
    nsp = ns_prime(p)
    num = r * (p.nbar_a + 1) * n_b + p.Gamma * nsp
    den = r * ((2 * p.nbar_a + 1) * n_b + p.nbar_a) + p.Gamma * (2 * nsp + 1)
    return num / den if den > 0 else 0.0


def stationary_state(p: ReducedParams) -> MeanFieldState:
    nb = stationary_nb(p)
    return MeanFieldState(stationary_ns(p, nb), nb)


def asymptotic_nb(nbar_b: float, gamma_b: float, Gamma: float) -> float:
    """Stationary n_b in the limit of an infinitely hot mode-a bath."""
    if gamma_b <= 0:
        raise InvalidParameterError(f"gamma_b must be > 0, got {gamma_b}")
    u = nbar_b - (gamma_b + Gamma) / (2 * gamma_b)
    root = math.sqrt(u * u + 2 * nbar_b)
    # u + root loses digits when u << 0; use the conjugate form there
    if u < 0:
        return nbar_b / (root - u)
    return 0.5 * (u + root)


def cooling_threshold(nbar_b: float, gamma_b: float) -> float:
    """Smallest spin decay rate giving n_b < 1 in the hot-bath limit."""
    if gamma_b <= 0:
        raise InvalidParameterError(f"gamma_b must be > 0, got {gamma_b}")
    return max(0.0, 3.0 * gamma_b * (nbar_b - 1.0))


def optimal_gamma(p: ReducedParams, gamma_range: tuple[float, float], n_grid: int = 61,
                  rel_tol: float = 1e-4) -> OptimalGamma:
    """Spin decay rate minimising the stationary n_b within ``gamma_range``.

    A log-spaced coarse grid locates the minimum (and checks that it is
    unique), then golden-section search in log(Gamma) refines it.
    """
    lo, hi = gamma_range
    if not (0 < lo <= hi and math.isfinite(hi)):
        raise InvalidParameterError(f"gamma_range must be positive and finite, got {gamma_range}")

    def nb_at(G):
        return stationary_nb(p.replace(Gamma=G))

    if lo == hi:
        return OptimalGamma(lo, nb_at(lo))
    grid = np.geomspace(lo, hi, n_grid)
    values = np.array([nb_at(G) for G in grid])
    warnings = []
    scale = max(abs(values).max(), 1e-300)
    if values.max() - values.min() <= 1e-12 * scale:
        return OptimalGamma(lo, float(values[0]), ["flat profile: n_b does not depend on Gamma"])
    interior = [i for i in range(1, n_grid - 1) if values[i] < values[i - 1] and values[i] <= values[i + 1]]
    if len(interior) > 1:
        warnings.append(f"profile is not unimodal: {len(interior)} local minima on the coarse grid")
    i = int(np.argmin(values))
    if i == 0 or i == n_grid - 1:
        warnings.append("minimum lies on the edge of gamma_range")
        return OptimalGamma(float(grid[i]), float(values[i]), warnings)

    a, b = math.log(grid[i - 1]), math.log(grid[i + 1])
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = nb_at(math.exp(c)), nb_at(math.exp(d))
    while b - a > rel_tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = nb_at(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = nb_at(math.exp(d))
    G = math.exp(0.5 * (a + b))
    return OptimalGamma(G, nb_at(G), warnings)
