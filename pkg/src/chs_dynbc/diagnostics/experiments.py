"""Experiment drivers: stability under control perturbations, the linear
auxiliary problem, and self-convergence orders."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..discretization import Operators
from ..stepper import (BoundaryControl, Problem, SchemeConfig, linear_dynamic_step,
                       run_simulation)
from .norms import discrete_laplacian_l2, h1_seminorm, h1_seminorm_boundary, l2, l2_boundary, l2_Sigma


@dataclass(frozen=True)
class StabilityReport:
    mu_linf_H: float
    mu_l2_V: float
    rho_h1_H: float
    rho_c0_V: float
    rho_l2_H2: float
    rho_gamma_h1_H: float
    rho_gamma_c0_V: float
    rho_gamma_l2_H2: float
    control_l2: float

    @property
    def lhs(self) -> float:
        return (self.mu_linf_H + self.mu_l2_V + self.rho_h1_H + self.rho_c0_V + self.rho_l2_H2
                + self.rho_gamma_h1_H + self.rho_gamma_c0_V + self.rho_gamma_l2_H2)

    @property
    def ratio(self) -> float:
        """Measured constant lhs / |u1 - u2|_{L2(Sigma)} (nan for identical controls)."""
        return self.lhs / self.control_l2 if self.control_l2 > 0 else math.nan

    def as_row(self) -> dict:
        row = {k: getattr(self, k) for k in self.__dataclass_fields__}
        row.update(lhs=self.lhs, ratio=self.ratio)
        return row


def _boundary_laplacian_l2(ops: Operators, w) -> float:
    return l2_boundary(ops, (ops.KG @ w) / ops.MGL)


def difference_norms(ops: Operators, d_mu, d_rho, dts) -> dict:
    """Discrete versions of the norms on the left of the stability estimate.

    Rows of d_mu / d_rho are differences at the recorded times; dts the
    matching time weights (dts[0] = 0 for the initial state).
    """
    d_rg = d_rho[:, ops.mesh.boundary]
    steps = range(1, len(dts))

    def h1_time(fields, norm):
        return math.sqrt(sum(dts[k] * (norm(fields[k]) ** 2
                                       + (norm(fields[k] - fields[k - 1]) / dts[k]) ** 2)
                             for k in steps))

    return {
        "mu_linf_H": max(l2(ops, v) for v in d_mu),
        "mu_l2_V": math.sqrt(sum(dts[k] * (l2(ops, d_mu[k]) ** 2 + h1_seminorm(ops, d_mu[k]) ** 2)
                                 for k in steps)),
        "rho_h1_H": h1_time(d_rho, lambda v: l2(ops, v)),
        "rho_c0_V": max(math.hypot(l2(ops, v), h1_seminorm(ops, v)) for v in d_rho),
        "rho_l2_H2": math.sqrt(sum(dts[k] * (l2(ops, d_rho[k]) ** 2 + h1_seminorm(ops, d_rho[k]) ** 2
                                             + discrete_laplacian_l2(ops, d_rho[k]) ** 2)
                                   for k in steps)),
        "rho_gamma_h1_H": h1_time(d_rg, lambda w: l2_boundary(ops, w)),
        "rho_gamma_c0_V": max(math.hypot(l2_boundary(ops, w), h1_seminorm_boundary(ops, w))
                              for w in d_rg),
        "rho_gamma_l2_H2": math.sqrt(sum(
            dts[k] * (l2_boundary(ops, d_rg[k]) ** 2 + h1_seminorm_boundary(ops, d_rg[k]) ** 2
                      + _boundary_laplacian_l2(ops, d_rg[k]) ** 2) for k in steps)),
    }


def stability_experiment(cfg: SchemeConfig, problem: Problem, u1: BoundaryControl,
                         u2: BoundaryControl) -> StabilityReport:
    """Run the same problem under two controls and measure solution differences
    against the L2(Sigma) distance of the controls."""
    if not (problem.bulk.smooth and problem.boundary.smooth):
        raise ValueError("stability experiment needs potentials that are C^2 inside their "
                         "domain; obstacle-type potentials are not admitted")
    ops = problem.ops
    a = run_simulation(cfg, problem.with_control(u1))
    b = run_simulation(cfg, problem.with_control(u2))
    ia, ib = a.nominal_indices(), b.nominal_indices()
    times = a.times[ia]
    if len(ia) != len(ib) or not np.array_equal(times, b.times[ib]):
        raise ValueError("the two runs do not share a nominal grid")
    dts = a.step_dts(nominal_only=True)
    d_mu = a.field("mu", nominal_only=True) - b.field("mu", nominal_only=True)
    d_rho = a.field("rho", nominal_only=True) - b.field("rho", nominal_only=True)
    norms = difference_norms(ops, d_mu, d_rho, dts)
    du = u1.samples(times) - u2.samples(times)
    control = l2_Sigma(ops, du[1:], dts[1:])
    return StabilityReport(control_l2=control, **norms)


@dataclass(frozen=True)
class LinearProblemResult:
    solution_norm: float
    data_norm: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.solution_norm / self.data_norm if self.data_norm > 0 else 0.0


def linear_problem_ratio(ops: Operators, a, a_gamma, sigma, sigma_gamma, T: float,
                         dt: float) -> LinearProblemResult:
    """Solve the linear dynamic problem from zero data with time-constant
    coefficients and sources and compare solution and data norms.

    Solution norm: |y_t|_{L2(0,T;Hb)} + max_t |y|_{Vb} in the coupled bulk+surface
    norms; data norm: |sigma|_{L2(Q)} + |sigma_G|_{L2(Sigma)}.  For a, a_G >= 0
    the discrete energy estimate gives ratio <= 1 + sqrt(1 + T).
    """
    if np.any(np.asarray(a) < 0) or np.any(np.asarray(a_gamma) < 0):
        raise ValueError("the energy bound needs nonnegative coefficients")
    n_steps = int(round(T / dt))
    Mb, Kb = ops.coupled_mass, ops.coupled_stiffness
    y = np.zeros(ops.n)
    dt_part = 0.0
    sup_part = 0.0
    for _ in range(n_steps):
        y_new, _ = linear_dynamic_step(ops, a, a_gamma, sigma, sigma_gamma, y, dt)
        v = (y_new - y) / dt
        dt_part += dt * float(v @ (Mb @ v))
        sup_part = max(sup_part, float(y_new @ (Mb @ y_new) + y_new @ (Kb @ y_new)))
        y = y_new
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (ops.n,))
    sigma_gamma = np.broadcast_to(np.asarray(sigma_gamma, dtype=float), (ops.nb,))
    data = (math.sqrt(T * float(sigma @ (ops.M @ sigma)))
            + math.sqrt(T * float(sigma_gamma @ (ops.MG @ sigma_gamma))))
    T_eff = n_steps * dt
    return LinearProblemResult(math.sqrt(dt_part) + math.sqrt(sup_part), data,
                               1.0 + math.sqrt(1.0 + T_eff))


def observed_order(diffs: Sequence[float], factor: float = 2.0) -> list:
    """log(d_i / d_{i+1}) / log(factor) for consecutive self-convergence differences."""
    return [math.log(diffs[i] / diffs[i + 1]) / math.log(factor) for i in range(len(diffs) - 1)]


def temporal_self_convergence(problem: Problem, cfg: SchemeConfig, dts: Sequence[float],
                              field: str = "rho"):
    """Final-time L2 differences between runs at consecutive time steps.

    Returns (differences, observed orders); dts should shrink by a fixed factor.
    """
    finals = [run_simulation(replace(cfg, dt=dt), problem).states[-1] for dt in dts]
    ops = problem.ops
    diffs = [l2(ops, getattr(a, field) - getattr(b, field)) for a, b in zip(finals, finals[1:])]
    return diffs, observed_order(diffs, dts[0] / dts[1])


def spatial_self_convergence(make_problem: Callable[[int], Problem], cfg: SchemeConfig,
                             sizes: Sequence[int], field: str = "rho"):
    """Final-time L2 differences on the coarser of two nested interval meshes.

    ``make_problem(n)`` must build the same problem on an n-element interval;
    sizes double from one entry to the next.
    """
    runs = []
    for n in sizes:
        problem = make_problem(n)
        runs.append((problem.ops, run_simulation(cfg, problem).states[-1]))
    diffs = []
    for (ops_c, coarse), (ops_f, fine) in zip(runs, runs[1:]):
        ratio = (ops_f.n - 1) // (ops_c.n - 1)
        diffs.append(l2(ops_c, getattr(coarse, field) - getattr(fine, field)[::ratio]))
    return diffs, observed_order(diffs, sizes[1] / sizes[0])

