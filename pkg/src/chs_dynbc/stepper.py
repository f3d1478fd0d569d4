"""Time integration of the Yosida-regularized, time-delayed scheme.

Each step first solves the rho-equation with its dynamic boundary condition,
driven by the chemical potential one delay ``tau = T/N`` in the past, and
then the linear mu-equation with the new rho.  The convex parts beta^eps,
beta_Gamma^(eps*eta) are implicit (monotone, Newton with an energy line
search); pi, pi_Gamma and g' are evaluated at the old rho.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .diagnostics.energy import mu_energy, total_free_energy
from .diagnostics.norms import l2_Q
from .diagnostics.trajectory import Trajectory
from .discretization import Operators, trace
from .graphs import (CouplingFunction, PotentialSplit, check_domination, domain_samples,
                     yosida, yosida_parts)

log = logging.getLogger(__name__)


class AssumptionError(ValueError):
    """Input data violate one of the standing assumptions; ``violations``
    holds one message per breach."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NewtonError(RuntimeError):
    pass


class CoefficientError(RuntimeError):
    """1 + 2g + g' * (rho_new - rho_old) lost positivity; retry with a smaller dt."""


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    eps: float = 1e-3
    n_blocks: int = 10
    dt: float = 1e-3
    T: float = 0.1
    newton_tol: float = 1e-10
    newton_max: int = 50
    dt_min: float = 1e-9
    eta: float = 1.0
    c_gamma: float = 0.0
    lumped_mu: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be a positive integer")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0 < self.dt <= self.tau * (1 + 1e-12):
            raise ValueError(f"need 0 < dt <= tau = T/N = {self.tau}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if not self.eta > 0 or self.c_gamma < 0:
            raise ValueError("need eta > 0 and c_gamma >= 0")

    @property
    def tau(self) -> float:
        return self.T / self.n_blocks

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError("T must be an integer multiple of dt")
        return n


@dataclass(frozen=True)
class SimState:
    t: float
    mu: np.ndarray
    rho: np.ndarray
    rho_gamma: np.ndarray
    xi: np.ndarray
    xi_gamma: np.ndarray


class History:
    """Past (t, mu) snapshots for the delay lookup.

    Entries that no later lookup can reach are dropped on append, so the
    buffer only spans about one delay window.
    """

    def __init__(self, tau: float, rtol: float = 1e-9):
        self.tau = tau
        self.rtol = rtol
        self._items: deque = deque()

    def __len__(self):
        return len(self._items)

    @property
    def times(self) -> list:
        return [t for t, _ in self._items]

    def _slack(self, t: float) -> float:
        return self.rtol * max(1.0, abs(t), self.tau)

    def append(self, t: float, mu: np.ndarray) -> None:
        if self._items and not t > self._items[-1][0]:
            raise ValueError("history times must increase strictly")
        self._items.append((t, np.array(mu, copy=True)))
        slack = self._slack(t)
        if t - self.tau > slack:
            # later lookups ask for times >= t - tau
            while len(self._items) >= 2 and self._items[1][0] <= t - self.tau + slack:
                self._items.popleft()

    def lookup(self, t: float) -> np.ndarray:
        """mu at the largest stored time <= t - tau; the initial snapshot for t <= tau."""
        if not self._items:
            raise LookupError("empty history")
        target = t - self.tau
        slack = self._slack(t)
        if target <= slack:
            if self._items[0][0] != 0.0:
                raise LookupError("initial snapshot no longer stored")
            return self._items[0][1]
        if target + slack < self._items[0][0]:
            raise LookupError(f"time {target} precedes the recorded history")
        if target > self._items[-1][0] + slack:
            raise LookupError(f"time {target} is beyond the recorded history")
        best = self._items[0][1]
        for ts, mu in self._items:
            if ts <= target + slack:
                best = mu
            else:
                break
        return best


def delayed_mu(history: History, tau: float, t: float) -> np.ndarray:
    if not math.isclose(tau, history.tau):
        raise ValueError("history was built for a different delay")
    return history.lookup(t)


@dataclass(frozen=True)
class BoundaryControl:
    """Boundary source u_Gamma(t) as a function of time returning a boundary vector."""

    func: Callable[[float], np.ndarray]
    n_boundary: int
    name: str = "custom"
    bound: Optional[float] = None   # declared sup |u|, if known

    def __call__(self, t: float) -> np.ndarray:
        u = np.asarray(self.func(t), dtype=float)
        return np.broadcast_to(u, (self.n_boundary,)).copy()

    def __add__(self, other: "BoundaryControl") -> "BoundaryControl":
        bound = None if self.bound is None or other.bound is None else self.bound + other.bound
        return BoundaryControl(lambda t: self(t) + other(t), self.n_boundary,
                               f"{self.name}+{other.name}", bound)

    def scaled(self, p: float) -> "BoundaryControl":
        bound = None if self.bound is None else abs(p) * self.bound
        return BoundaryControl(lambda t: p * self(t), self.n_boundary, f"{p:g}*{self.name}", bound)

    def samples(self, times) -> np.ndarray:
        return np.array([self(t) for t in times])

    def h1_time_norm(self, ops: Operators, T: float, dt: float) -> float:
        """Discrete H^1(0,T; H_Gamma) norm on the grid k*dt."""
        times = np.linspace(0.0, T, int(round(T / dt)) + 1)
        u = self.samples(times)
        du = np.diff(u, axis=0) / dt
        l2 = sum(dt * (ops.MGL @ (v * v)) for v in u[1:])
        dl2 = sum(dt * (ops.MGL @ (v * v)) for v in du)
        return float(np.sqrt(l2 + dl2))


def zero_control(nb: int) -> BoundaryControl:
    return BoundaryControl(lambda t: np.zeros(nb), nb, "zero", 0.0)


def constant_control(nb: int, value: float) -> BoundaryControl:
    return BoundaryControl(lambda t: np.full(nb, value), nb, "constant", abs(value))


def sinusoid_control(nb: int, amplitude: float, period: float = 0.1,
                     profile: Optional[np.ndarray] = None) -> BoundaryControl:
    """amplitude * sin(2 pi t / period) * profile (profile defaults to ones)."""
    shape = np.ones(nb) if profile is None else np.asarray(profile, dtype=float)
    bound = abs(amplitude) * float(np.max(np.abs(shape)))
    return BoundaryControl(lambda t: amplitude * math.sin(2 * math.pi * t / period) * shape,
                           nb, "sinusoid", bound)


def pulse_control(nb: int, node: int, amplitude: float, t_on: float,
                  t_off: float) -> BoundaryControl:
    """sin^2 pulse in time on a single boundary node."""
    if not t_off > t_on:
        raise ValueError("pulse needs t_off > t_on")

    def u(t):
        out = np.zeros(nb)
        if t_on < t < t_off:
            out[node] = amplitude * math.sin(math.pi * (t - t_on) / (t_off - t_on)) ** 2
        return out

    return BoundaryControl(u, nb, "pulse", abs(amplitude))


@dataclass(frozen=True)
class Problem:
    """Everything a run needs besides the scheme parameters."""

    ops: Operators
    bulk: PotentialSplit
    boundary: PotentialSplit
    coupling: CouplingFunction
    mu0: np.ndarray
    rho0: np.ndarray
    control: BoundaryControl

    def with_control(self, control: BoundaryControl) -> "Problem":
        return replace(self, control=control)


@dataclass
class RhoStepResult:
    rho: np.ndarray
    xi: np.ndarray
    xi_gamma: np.ndarray
    iterations: int


def _dual_norm(F: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(np.sum(F * F / weights)))


def rho_step(ops: Operators, bulk: PotentialSplit, boundary: PotentialSplit,
             coupling: CouplingFunction, state: SimState, mu_delay: np.ndarray,
             u_gamma_now: np.ndarray, dt: float, cfg: SchemeConfig) -> RhoStepResult:
    """One implicit step of the rho-equation with its dynamic boundary condition.

    Solves
        Mb (rho - rho_old)/dt + Kb rho + M_L beta^eps(rho) + T^T M_GL beta_G^{eps eta}(T rho)
          = M (g'(rho_old) mu_delay - pi(rho_old)) + T^T M_G (u_G - pi_G(T rho_old))
    with Mb = M + T^T M_G T and Kb = K + T^T K_G T, by Newton's method on the
    gradient of a strictly convex functional (backtracking on that functional).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    mu_delay = np.asarray(mu_delay, dtype=float)
    if mu_delay.shape != (ops.n,):
        raise ValueError("mu_delay must be a bulk vector")
    eps, eps_g = cfg.eps, cfg.eps * cfg.eta
    rho_old = state.rho
    rg_old = trace(ops, rho_old)
    Mb, Kb, T = ops.coupled_mass, ops.coupled_stiffness, ops.T
    A = (Mb / dt + Kb).tocsr()
    source = coupling.extended_g_prime(rho_old) * mu_delay - bulk.perturbation(rho_old)
    surface = np.asarray(u_gamma_now, dtype=float) - boundary.perturbation(rg_old)
    f = Mb @ rho_old / dt + ops.M @ source + T.T @ (ops.MG @ surface)
    weights = ops.coupled_lumped

    def evaluate(r):
        y, dy, yhat = yosida_parts(bulk.graph, eps, r)
        rg = r[ops.mesh.boundary]
        yg, dyg, yghat = yosida_parts(boundary.graph, eps_g, rg)
        Ar = A @ r
        F = Ar - f + ops.ML * y + T.T @ (ops.MGL * yg)
        E = 0.5 * r @ Ar - f @ r + ops.ML @ yhat + ops.MGL @ yghat
        return F, E, dy, dyg, y, yg

    r = rho_old.copy()
    F, E, dy, dyg, y, yg = evaluate(r)
    res = _dual_norm(F, weights)
    iters = 0
    while res > cfg.newton_tol:
        if iters >= cfg.newton_max:
            raise NewtonError(f"rho_step: no convergence in {cfg.newton_max} iterations "
                              f"(residual {res:.3e})")
        J = A + sp.diags(ops.ML * dy) + T.T @ sp.diags(ops.MGL * dyg) @ T
        d = spla.spsolve(J.tocsc(), -F)
        slope = F @ d
        step = 1.0
        while True:
            trial = r + step * d
            Ft, Et, dyt, dygt, yt, ygt = evaluate(trial)
            rest = _dual_norm(Ft, weights)
            if Et <= E + 1e-4 * step * slope or rest < res or step < 1e-12:
                break
            step *= 0.5
        iters += 1
        moved = step * np.max(np.abs(d))
        r, F, E, dy, dyg, y, yg, res = trial, Ft, Et, dyt, dygt, yt, ygt, rest
        if moved <= 1e-15 * (1.0 + np.max(np.abs(r))):
            break
    return RhoStepResult(r, y, yg, iters)


def mu_step(ops: Operators, coupling: CouplingFunction, rho_new: np.ndarray,
            rho_old: np.ndarray, mu_old: np.ndarray, dt: float,
            cfg: Optional[SchemeConfig] = None) -> np.ndarray:
    """Implicit step of (1 + 2g) mu_t + g' rho_t mu - Laplace mu = 0.

    Lumped mode solves
        [M_L diag(1 + 2g(rho_new) + g'(rho_new)(rho_new - rho_old))/dt + K] mu
            = M_L diag(1 + 2g(rho_new)) mu_old / dt,
    an M-matrix system whenever the diagonal coefficient is positive and K has
    nonpositive off-diagonal entries.
    """
    lumped = True if cfg is None else cfg.lumped_mu
    g = coupling.extended_g(rho_new)
    coeff = 1.0 + 2.0 * g + coupling.extended_g_prime(rho_new) * (rho_new - rho_old)
    if np.min(coeff) <= 0:
        raise CoefficientError(f"mu-equation coefficient {np.min(coeff):.3e} <= 0; reduce dt")
    if lumped:
        A = sp.diags(ops.ML * coeff / dt) + ops.K
        b = ops.ML * (1.0 + 2.0 * g) * mu_old / dt
    else:
        A = ops.M @ sp.diags(coeff / dt) + ops.K
        b = ops.M @ ((1.0 + 2.0 * g) * mu_old) / dt
    mu = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(mu)):
        raise CoefficientError("mu-equation solve broke down")
    return mu


def linear_dynamic_step(ops: Operators, a, a_gamma, sigma, sigma_gamma,
                        y_old: np.ndarray, dt: float):
    """Backward Euler step of the linear problem
        y_t - Laplace y + a y = sigma,  d_n y + (y_G)_t - Laplace_G y_G + a_G y_G = sigma_G
    in the same coupled weak form as ``rho_step`` (reaction terms lumped).
    Returns (y_new, trace of y_new).
    """
    n, nb = ops.n, ops.nb
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    a_gamma = np.broadcast_to(np.asarray(a_gamma, dtype=float), (nb,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    sigma_gamma = np.broadcast_to(np.asarray(sigma_gamma, dtype=float), (nb,))
    Mb, Kb, T = ops.coupled_mass, ops.coupled_stiffness, ops.T
    A = Mb / dt + Kb + sp.diags(ops.ML * a) + T.T @ sp.diags(ops.MGL * a_gamma) @ T
    b = Mb @ y_old / dt + ops.M @ sigma + T.T @ (ops.MG @ sigma_gamma)
    y = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(y)):
        raise np.linalg.LinAlgError("linear dynamic step: singular system")
    return y, trace(ops, y)


def validate_problem(problem: Problem, cfg: SchemeConfig) -> None:
    """Raise AssumptionError listing every breached data assumption."""
    ops, bulk, boundary = problem.ops, problem.bulk, problem.boundary
    mu0, rho0 = np.asarray(problem.mu0), np.asarray(problem.rho0)
    problems = []
    if mu0.shape != (ops.n,) or rho0.shape != (ops.n,):
        problems.append("initial data must be bulk nodal vectors")
    else:
        if np.any(mu0 < 0):
            problems.append("(A1): μ₀ has negative entries; need μ₀ ≥ 0 a.e. in Ω")
        if not np.all(bulk.graph.contains(rho0)):
            problems.append("(A6): rho0 leaves D(beta); beta_hat(rho0) is not integrable")
        elif not np.all(np.isfinite(bulk.graph.minimal_section(rho0))):
            problems.append("(A6): beta°(rho0) is not finite")
        rg0 = trace(ops, rho0)
        if not np.all(boundary.graph.contains(rg0)):
            problems.append("(A6): trace of rho0 leaves D(beta_Gamma)")
        elif not np.all(np.isfinite(boundary.graph.minimal_section(rg0))):
            problems.append("(A6): beta_Gamma°(rho0|Gamma) is not finite")
    u0 = problem.control(0.0)
    if not np.all(np.isfinite(u0)):
        problems.append("(A2): u_Gamma is not finite")
    report = check_domination(bulk.graph, boundary.graph, cfg.eta, cfg.c_gamma,
                              domain_samples(boundary.graph, 201), eps=cfg.eps)
    if not report.passed:
        problems.append("(A7): the bulk graph is not dominated by the boundary graph "
                        f"with eta={cfg.eta}, C_Gamma={cfg.c_gamma}")
    if problems:
        raise AssumptionError(problems)


def initial_state(problem: Problem, cfg: SchemeConfig) -> SimState:
    ops = problem.ops
    rho0 = np.array(problem.rho0, dtype=float)
    rg0 = trace(ops, rho0)
    return SimState(0.0, np.array(problem.mu0, dtype=float), rho0, rg0,
                    np.asarray(yosida(problem.bulk.graph, cfg.eps, rho0)),
                    np.asarray(yosida(problem.boundary.graph, cfg.eps * cfg.eta, rg0)))


def run_simulation(cfg: SchemeConfig, problem: Problem, validate: bool = True) -> Trajectory:
    """March the scheme from 0 to T with delay tau = T/N.

    A step whose Newton solve fails or whose mu-coefficient loses positivity
    is retried with half the step (down to ``cfg.dt_min``); the nominal grid
    resumes after the rejected interval is covered.
    """
    if validate:
        validate_problem(problem, cfg)
    ops, bulk, boundary, coupling = problem.ops, problem.bulk, problem.boundary, problem.coupling
    state = initial_state(problem, cfg)
    history = History(cfg.tau)
    history.append(0.0, state.mu)
    traj = Trajectory()
    mu0_scale = float(np.max(np.abs(state.mu), initial=0.0))
    floor = -10.0 * np.finfo(float).eps * mu0_scale
    dissipation = 0.0

    def record(s, iters, h, nominal):
        traj.append(
            s, energy_total=total_free_energy(ops, s, problem.control(s.t), bulk, boundary,
                                              coupling, cfg.eps, cfg.eta),
            mu_energy=mu_energy(ops, coupling, s.mu, s.rho),
            dissipation_cum=dissipation, newton_iters=iters, dt_used=h, nominal=nominal)

    record(state, 0, 0.0, True)
    for k in range(cfg.n_steps):
        target = (k + 1) * cfg.dt
        h = cfg.dt
        while target - state.t > 1e-12 * cfg.dt:
            h = min(h, target - state.t)
            t_new = target if h >= target - state.t else state.t + h
            try:
                mu_delay = history.lookup(t_new)
                u_now = problem.control(t_new)
                rs = rho_step(ops, bulk, boundary, coupling, state, mu_delay, u_now, h, cfg)
                mu_new = mu_step(ops, coupling, rs.rho, state.rho, state.mu, h, cfg)
            except (NewtonError, CoefficientError) as exc:
                h *= 0.5
                log.info("step at t=%.6g rejected (%s); dt -> %.3g", state.t, exc, h)
                if h < cfg.dt_min:
                    raise SimulationError(f"dt fell below dt_min at t={state.t:.6g}: {exc}") from exc
                continue
            state = SimState(t_new, mu_new, rs.rho, trace(ops, rs.rho), rs.xi, rs.xi_gamma)
            dissipation += h * float(mu_new @ (ops.K @ mu_new))
            history.append(t_new, mu_new)
            record(state, rs.iterations, h, nominal=(t_new == target))
            if np.min(mu_new) < floor:
                traj.flags.append(f"mu < 0 at t={t_new:.6g}: min {np.min(mu_new):.3e}")
    return traj


@dataclass
class ConvergenceReport:
    parameter: str
    values: list
    rho_diffs: list = field(default_factory=list)
    mu_diffs: list = field(default_factory=list)
    xi_max: list = field(default_factory=list)
    trajectories: list = field(default_factory=list, repr=False)

    @property
    def rho_ratios(self) -> list:
        d = self.rho_diffs
        return [d[i] / d[i + 1] if d[i + 1] > 0 else math.inf for i in range(len(d) - 1)]

    @property
    def mu_ratios(self) -> list:
        d = self.mu_diffs
        return [d[i] / d[i + 1] if d[i + 1] > 0 else math.inf for i in range(len(d) - 1)]

    def monotone_rho(self) -> bool:
        return all(a > b for a, b in zip(self.rho_diffs, self.rho_diffs[1:]))


def space_time_difference(ops: Operators, a: Trajectory, b: Trajectory, name: str) -> float:
    """L2(Q) distance of one field between two runs on a common nominal grid."""
    fa, fb = a.field(name, nominal_only=True), b.field(name, nominal_only=True)
    ta = a.times[a.nominal_indices()]
    tb = b.times[b.nominal_indices()]
    if fa.shape != fb.shape or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("runs do not share a nominal time grid")
    return l2_Q(ops, fa - fb, a.step_dts(nominal_only=True))


def refine_eps(problem: Problem, cfg: SchemeConfig, eps_list: Sequence[float]) -> ConvergenceReport:
    """Runs at decreasing eps; consecutive L2(Q) differences and max |xi| per eps."""
    eps_list = list(eps_list)
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    report = ConvergenceReport("eps", eps_list)
    for eps in eps_list:
        traj = run_simulation(replace(cfg, eps=eps), problem)
        report.trajectories.append(traj)
        report.xi_max.append(float(np.max(np.abs(traj.field("xi")))))
    for a, b in zip(report.trajectories, report.trajectories[1:]):
        report.rho_diffs.append(space_time_difference(problem.ops, a, b, "rho"))
        report.mu_diffs.append(space_time_difference(problem.ops, a, b, "mu"))
    return report


def refine_blocks(problem: Problem, cfg: SchemeConfig, n_list: Sequence[int]) -> ConvergenceReport:
    """Runs at increasing numbers of delay blocks N (tau = T/N -> 0)."""
    report = ConvergenceReport("n_blocks", list(n_list))
    for n in n_list:
        traj = run_simulation(replace(cfg, n_blocks=n), problem)
        report.trajectories.append(traj)
        report.xi_max.append(float(np.max(np.abs(traj.field("xi")))))
    for a, b in zip(report.trajectories, report.trajectories[1:]):
        report.rho_diffs.append(space_time_difference(problem.ops, a, b, "rho"))
        report.mu_diffs.append(space_time_difference(problem.ops, a, b, "mu"))
    return report
