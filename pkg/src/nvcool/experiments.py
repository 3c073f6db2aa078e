"""Building blocks shared by the CLI commands and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from nvcool import hilbert as hb
from nvcool import meanfield as mf
from nvcool import model as md
from nvcool.errors import InvalidParameterError
from nvcool.liouville import IntegratorSpec, Trajectory, default_stationarity, evolve
from nvcool.reduced import ReducedParams, evolve_reduced, reduced_initial_state


def run_full(params: md.SystemParams, dims: tuple[int, int], spec: IntegratorSpec, *,
             stationarity: tuple[float, float] | None = None, method: str = "auto") -> Trajectory:
    """Full three-body evolution from thermal modes and the spin in |0>."""
    layout = hb.SpaceLayout.full(*dims)
    rho0 = hb.initial_state(layout, params.nbar_a, params.nbar_b)
    stat = ("n_b", *stationarity) if stationarity else default_stationarity(spec)
    return evolve(rho0, md.build_hamiltonian(params, layout), md.build_collapse_terms(params, layout),
                  spec, md.number_observables(layout), charge=md.excitation_charge(layout),
                  method=method, stationarity=stat)


def run_reduced(params: md.SystemParams, dim_b: int, spec: IntegratorSpec, *,
                stationarity: tuple[float, float] | None = None) -> Trajectory:
    stat = ("n_b", *stationarity) if stationarity else default_stationarity(spec)
    return evolve_reduced(reduced_initial_state(dim_b, params.nbar_b), ReducedParams.from_system(params),
                          spec, stationarity=stat)


def run_meanfield(params: md.SystemParams, spec: IntegratorSpec,
                  initial: mf.MeanFieldState | None = None) -> mf.MeanFieldTrajectory:
    initial = initial or mf.MeanFieldState(0.0, params.nbar_b)
    return mf.evolve_mean_field(initial, ReducedParams.from_system(params), spec)


def analytic_point(params: md.SystemParams) -> dict[str, float]:
    p = ReducedParams.from_system(params)
    q = mf.quadratic_coeffs(p)
    nb = mf.stationary_nb(p)
    return {"nb_stationary": nb, "ns_stationary": mf.stationary_ns(p, nb), "A": q.A, "B": q.B, "C": q.C}


def analytic_nb(params: md.SystemParams) -> float:
    return mf.stationary_nb(ReducedParams.from_system(params))


def nb_crossing(params: md.SystemParams, name: str, lo: float, hi: float, level: float = 1.0) -> float:
    """Value of parameter ``name`` in [lo, hi] where the stationary n_b equals ``level``."""
    def f(x):
        return analytic_nb(params.replace(**{name: x})) - level

    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if math.copysign(1, flo) == math.copysign(1, fhi):
        raise InvalidParameterError(f"n_b - {level} does not change sign on [{lo}, {hi}] in {name}")
    return brentq(f, lo, hi, xtol=1e-12 * max(abs(lo), abs(hi), 1.0), rtol=1e-14)


@dataclass
class ComparePoint:
    nbar_a: float
    Gamma: float
    nb_numeric: float
    nb_analytic: float
    stationary_at: float | None
    max_trace_error: float
    max_hermiticity_drift: float
    min_eigenvalue: float

    @property
    def abs_diff(self) -> float:
        return abs(self.nb_numeric - self.nb_analytic)

    @property
    def rel_diff(self) -> float:
        return self.abs_diff / abs(self.nb_analytic) if self.nb_analytic else math.inf


def compare_point(params: md.SystemParams, dims: tuple[int, int], spec: IntegratorSpec,
                  stationarity: tuple[float, float] | None = None) -> ComparePoint:
    traj = run_full(params, dims, spec, stationarity=stationarity)
    return ComparePoint(
        nbar_a=params.nbar_a,
        Gamma=params.Gamma,
        nb_numeric=traj.final("n_b"),
        nb_analytic=analytic_nb(params),
        stationary_at=traj.stationary_at,
        max_trace_error=float(traj.trace_error.max()),
        max_hermiticity_drift=float(traj.hermiticity_drift.max()),
        min_eigenvalue=float(np.linalg.eigvalsh(traj.final_state)[0]),
    )
