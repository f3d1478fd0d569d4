"""Residual identities and the pass/fail property checks on trajectories."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..discretization import Operators
from ..graphs import CouplingFunction, MonotoneGraph, alpha
from .energy import mu_energy
from .trajectory import Trajectory


def mu_energy_residual(traj: Trajectory, ops: Operators, coupling: CouplingFunction) -> np.ndarray:
    """E(t_k) + sum_{j<=k} dt_j mu_j^T K mu_j - E(0), with E the lumped (1/2 + g) mu^2 energy.

    Zero for the continuous problem; for backward Euler it is O(dt) and, when
    g = 0, nonpositive.
    """
    if not len(traj):
        raise ValueError("empty trajectory")
    dts = traj.step_dts()
    energy = np.array([mu_energy(ops, coupling, s.mu, s.rho) for s in traj.states])
    diss = np.cumsum([dt * (s.mu @ (ops.K @ s.mu)) for s, dt in zip(traj.states, dts)])
    return energy + diss - energy[0]


def z_residual(traj: Trajectory, ops: Operators, coupling: CouplingFunction) -> np.ndarray:
    """Per-step residual of the z = mu / alpha(rho) form of the mu-equation,
    | M_L (z_k - z_{k-1}) / dt_k + diag(alpha(rho_k)) K mu_k | in the dual lumped norm.
    Entry 0 (initial state) is 0; backward Euler leaves an O(dt) remainder.
    """
    if not len(traj):
        raise ValueError("empty trajectory")
    out = np.zeros(len(traj))
    dts = traj.step_dts()
    prev = traj.states[0]
    z_prev = prev.mu / alpha(coupling, prev.rho)
    for k in range(1, len(traj)):
        s = traj.states[k]
        a = alpha(coupling, s.rho)
        z = s.mu / a
        r = ops.ML * (z - z_prev) / dts[k] + a * (ops.K @ s.mu)
        out[k] = np.sqrt(np.sum(r * r / ops.ML))
        z_prev = z
    return out


def check_positivity(traj: Trajectory):
    """(min mu over all steps and nodes, pass flag)."""
    mu = traj.field("mu")
    mu_min = float(mu.min())
    scale = float(np.max(np.abs(mu[0]))) if mu.size else 0.0
    return mu_min, mu_min >= -1e-10 * (1.0 + scale)


@dataclass(frozen=True)
class SeparationResult:
    r_lower: float
    r_upper: float
    margin_lower: float
    margin_upper: float
    delta: float

    @property
    def margin(self) -> float:
        return min(self.margin_lower, self.margin_upper)

    @property
    def passed(self) -> bool:
        return self.margin_lower >= self.delta and self.margin_upper >= self.delta


def check_separation(traj: Trajectory, graph: MonotoneGraph, delta: float = 0.01) -> SeparationResult:
    """Extreme values of rho (bulk and boundary) against an open domain (r_-, r_+)."""
    if graph.closed and graph.bounded:
        raise ValueError(f"separation needs an open domain (r_-, r_+); "
                         f"{graph.name} has a closed domain")
    rho = traj.field("rho")
    lo, hi = float(rho.min()), float(rho.max())
    return SeparationResult(lo, hi, lo - graph.domain_lo, graph.domain_hi - hi, delta)


def check_xi_bound(xi_max, factor: float = 2.0) -> bool:
    """xi_max: max_t |xi|_inf per eps level (or a ConvergenceReport)."""
    values = np.asarray(getattr(xi_max, "xi_max", xi_max), dtype=float)
    if values.size < 2:
        warnings.warn("xi bound check with fewer than two eps levels is vacuous")
        return bool(np.all(np.isfinite(values)))
    if not np.all(np.isfinite(values)):
        return False
    lo, hi = values.min(), values.max()
    if hi == 0:
        return True
    return bool(lo > 0 and hi / lo < factor)
