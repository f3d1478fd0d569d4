"""Acceptance criteria as executable checks.

Each criterion returns a :class:`CriterionResult`; tolerances and runtime
budgets are pinned in ``TOLERANCES`` and ``BUDGETS``.  ``run_criteria``
executes a selection and is what the ``verify`` command prints.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from . import graphs as G
from .diagnostics.checks import (check_positivity, check_separation, check_xi_bound,
                                 mu_energy_residual)
from .diagnostics.experiments import (linear_problem_ratio, spatial_self_convergence,
                                      stability_experiment, temporal_self_convergence)
from .discretization import assemble, build_disc_mesh, build_interval_mesh
from .problems import reference_config, reference_problem
from .stepper import (Problem, SchemeConfig, constant_control, linear_dynamic_step,
                      refine_blocks, refine_eps, run_simulation, zero_control)

TOLERANCES = {
    "closed_form": 1e-12,
    "newton_form": 1e-9,
    "positivity": -1e-10,
    "energy_ratio": (1.5, 3.0),
    "dense_oracle": 1e-10,
    "separation_margin": 0.01,
    "separation_change": 0.20,
    "xi_factor": 2.0,
    "stability_spread": 0.20,
    "temporal_order": (0.7, 1.3),
    "spatial_order": (1.5, 2.5),
    "surface_eigen": 0.05,
    "disc_area": 0.02,
    "disc_perimeter": 0.01,
}

BUDGETS = {
    "yosida": 5.0, "compatibility": 1.0, "positivity": 10.0, "mu_energy": 30.0,
    "dense_oracle": 1.0, "separation": 60.0, "xi_bound": 90.0, "stability": 90.0,
    "limits": 180.0, "surface": 10.0, "linear_problem": 5.0,
}


@dataclass
class CriterionResult:
    name: str
    ok: bool
    measured: str
    seconds: float = 0.0
    budget: float = math.inf

    @property
    def passed(self) -> bool:
        return self.ok and self.seconds < self.budget

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.name:<15} {self.measured}  "
                f"[{self.seconds:.2f}s / {self.budget:.0f}s]")


# ---------------------------------------------------------------------------
# 1. Yosida suite

def _independent_resolvent(graph_name: str, eps: float, r: np.ndarray) -> np.ndarray:
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        if graph_name == "cubic":
            roots = np.roots([eps, 0.0, 1.0, -ri])
            out[i] = roots[np.argmin(np.abs(roots.imag))].real
        elif graph_name == "logarithmic":
            f = lambda s: s + eps * math.log((1 + s) / (1 - s)) - ri  # noqa: E731
            lo, hi = (np.nextafter(-1.0, 0.0), 0.0) if ri < 0 else (0.0, np.nextafter(1.0, 0.0))
            out[i] = 0.0 if ri == 0 else brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)
        else:
            raise KeyError(graph_name)
    return out


def criterion_yosida() -> CriterionResult:
    rng = np.random.default_rng(20240601)
    canon = {"cubic": G.cubic_graph(), "logarithmic": G.logarithmic_graph(),
             "obstacle": G.obstacle_graph()}
    eps_levels = (1.0, 0.1, 0.01)
    failures = []
    worst_closed = worst_newton = 0.0
    for name, graph in canon.items():
        if graph.bounded:
            inside = rng.uniform(-1.0, 1.0, 1000)
            if not graph.closed:
                inside = np.clip(inside, -1 + 1e-9, 1 - 1e-9)
            wide = rng.uniform(-2.0, 2.0, 1000)
        else:
            inside = rng.uniform(-3.0, 3.0, 1000)
            wide = inside
        wide = np.sort(wide)
        sec = np.abs(graph.minimal_section(inside))
        bhat = graph.antiderivative(inside)
        prev_gap = prev_hat = None
        for eps in eps_levels:
            y = G.yosida(graph, eps, wide)
            dy, dr = np.diff(y), np.diff(wide)
            if np.any(dy < -1e-12 * (1 + np.abs(y[1:]))):
                failures.append(f"{name}/eps={eps}: not monotone")
            if np.any(np.abs(dy) > dr / eps * (1 + 1e-9) + 1e-12):
                failures.append(f"{name}/eps={eps}: Lipschitz bound 1/eps violated")
            yin = np.asarray(G.yosida(graph, eps, inside))
            if np.any(np.abs(yin) > sec * (1 + 1e-12) + 1e-12):
                failures.append(f"{name}/eps={eps}: |beta^eps| > |beta°|")
            hat = np.asarray(G.yosida_antiderivative(graph, eps, inside))
            if np.any(hat < -1e-15) or np.any(hat > bhat * (1 + 1e-12) + 1e-15):
                failures.append(f"{name}/eps={eps}: 0 <= beta_hat^eps <= beta_hat violated")
            gap = np.abs(yin - graph.minimal_section(inside))
            if prev_gap is not None:
                if np.any(gap > prev_gap * (1 + 1e-9) + 1e-12):
                    failures.append(f"{name}/eps={eps}: |beta^eps - beta°| not decreasing")
                if np.any(hat < prev_hat * (1 - 1e-12) - 1e-15):
                    failures.append(f"{name}/eps={eps}: beta_hat^eps not increasing")
            prev_gap, prev_hat = gap, hat
            if name == "obstacle":
                err = np.max(np.abs(G.resolvent(graph, eps, wide) - np.clip(wide, -1, 1)))
                worst_closed = max(worst_closed, err)
            else:
                ref = (inside - _independent_resolvent(name, eps, inside)) / eps
                err = np.max(np.abs(yin - ref) / (1 + np.abs(ref)))
                worst_newton = max(worst_newton, err)
    lin = G.linear_graph(2.0)
    lin_newton = replace(lin, exact_resolvent=None, exact_yosida_slope=None)
    r = rng.uniform(-5, 5, 1000)
    for eps in eps_levels:
        exact = 2.0 * r / (1 + 2.0 * eps)
        for g in (lin, lin_newton):
            worst_closed = max(worst_closed, float(np.max(np.abs(G.yosida(g, eps, r) - exact))))
    if worst_closed > TOLERANCES["closed_form"]:
        failures.append(f"closed-form error {worst_closed:.2e}")
    if worst_newton > TOLERANCES["newton_form"]:
        failures.append(f"Newton-form error {worst_newton:.2e}")
    measured = (f"closed-form err {worst_closed:.1e}, Newton err {worst_newton:.1e}"
                + ("" if not failures else "; " + "; ".join(failures[:3])))
    return CriterionResult("yosida", not failures, measured)


# ---------------------------------------------------------------------------
# 2. compatibility

def criterion_compatibility() -> CriterionResult:
    log, cubic = G.logarithmic_graph(), G.cubic_graph()
    r_log = G.domain_samples(log, 201)
    r_wide = np.linspace(-3, 3, 201)
    a = G.check_domination(log, log, 1.0, 0.0, r_log).passed
    b = G.check_domination(cubic, G.cubic_graph(2.0), 1.0, 0.0, r_wide).passed
    c = G.check_domination(cubic, G.obstacle_graph(), 1.0, 0.0, np.linspace(-1, 1, 21)).passed
    return CriterionResult("compatibility", a and b and not c,
                           f"log/log={a}, cubic/2cubic={b}, cubic/obstacle={c} (expect fail)")


# ---------------------------------------------------------------------------
# 3. positivity

def criterion_positivity() -> CriterionResult:
    problem = reference_problem()
    traj = run_simulation(reference_config(), problem)
    mu_min, _ = check_positivity(traj)
    return CriterionResult("positivity", mu_min >= TOLERANCES["positivity"],
                           f"min mu = {mu_min:.6g}")


# ---------------------------------------------------------------------------
# 4. mu-energy identity

def criterion_mu_energy() -> CriterionResult:
    cfg = reference_config()
    problem = reference_problem()
    peaks = []
    for dt in (cfg.dt, cfg.dt / 2):
        traj = run_simulation(replace(cfg, dt=dt), problem)
        peaks.append(float(np.max(np.abs(mu_energy_residual(traj, problem.ops, problem.coupling)))))
    ratio = peaks[0] / peaks[1]
    lo, hi = TOLERANCES["energy_ratio"]
    heat = reference_problem(coupling="zero")
    traj = run_simulation(cfg, heat)
    res = mu_energy_residual(traj, heat.ops, heat.coupling)
    e0 = float(heat.ops.ML @ (0.5 * heat.mu0 ** 2))
    dissipative = bool(np.all(res <= 1e-12 * (1 + e0)))
    return CriterionResult("mu_energy", lo <= ratio <= hi and dissipative,
                           f"max-residual ratio dt/(dt/2) = {ratio:.4f}, "
                           f"g=0 max residual = {res.max():.2e}")


# ---------------------------------------------------------------------------
# 5. dense oracle

def _dense_oracle(eps: float, dt: float, n_steps: int, n_blocks: int, mu0, rho0, u_func):
    """Full (rho, mu) system on the 2-element mesh of [0, 1], assembled by hand
    and solved with a finite-difference Newton iteration."""
    h = 0.5
    M = np.zeros((3, 3))
    K = np.zeros((3, 3))
    for e in range(2):
        idx = [e, e + 1]
        M[np.ix_(idx, idx)] += h / 6 * np.array([[2, 1], [1, 2]])
        K[np.ix_(idx, idx)] += 1 / h * np.array([[1, -1], [-1, 1]])
    m_lumped = M.sum(axis=1)
    B = np.diag([1.0, 0.0, 1.0])   # point masses at the two endpoints

    def beta_eps(r, level):
        # Cardano root of level*s^3 + s - r = 0, polished by scalar Newton
        q = -r / level
        disc = np.sqrt(q * q / 4 + 1 / (27 * level ** 3))
        s = np.cbrt(-q / 2 + disc) + np.cbrt(-q / 2 - disc)
        for _ in range(3):
            s = s - (level * s ** 3 + s - r) / (3 * level * s ** 2 + 1)
        return (r - s) / level

    def g(r):
        if np.any(np.abs(r) > 1):
            raise ValueError("oracle assumes rho in [-1, 1]")
        return 0.5 * (1 + r)

    gp = 0.5
    tau = dt * n_steps / n_blocks
    mus = [np.array(mu0, dtype=float)]
    rho = np.array(rho0, dtype=float)
    mu = mus[0].copy()
    out = []
    for k in range(1, n_steps + 1):
        t = k * dt
        lag = int(round((t - tau) / dt))
        mu_d = mus[0] if t <= tau + 1e-12 else mus[lag]
        u = np.array([u_func(t)[0], 0.0, u_func(t)[1]])
        rho_o, mu_o = rho.copy(), mu.copy()
        rhs = M @ (gp * mu_d + rho_o) + B @ (u + rho_o)

        def F(x):
            r, m = x[:3], x[3:]
            fr = ((M + B) @ (r - rho_o) / dt + K @ r + m_lumped * beta_eps(r, eps)
                  + np.diag(B) * beta_eps(r, eps) - rhs)
            coef = 1 + 2 * g(r) + gp * (r - rho_o)
            fm = m_lumped * coef * m / dt + K @ m - m_lumped * (1 + 2 * g(r)) * mu_o / dt
            return np.concatenate([fr, fm])

        x = np.concatenate([rho_o, mu_o])
        for _ in range(100):
            fx = F(x)
            if np.max(np.abs(fx)) < 1e-14:
                break
            J = np.empty((6, 6))
            for j in range(6):
                step = 1e-6 * (1 + abs(x[j]))
                e = np.zeros(6)
                e[j] = step
                J[:, j] = (F(x + e) - F(x - e)) / (2 * step)
            dx = np.linalg.solve(J, fx)
            x = x - dx
            if np.max(np.abs(dx)) < 1e-16 * (1 + np.max(np.abs(x))):
                break
        rho, mu = x[:3], x[3:]
        mus.append(mu.copy())
        out.append((rho.copy(), mu.copy()))
    return out


def criterion_dense_oracle() -> CriterionResult:
    ops = assemble(build_interval_mesh(2, 1.0))
    x = ops.mesh.nodes[:, 0]
    mu0 = 1.0 + np.cos(np.pi * x) ** 2
    rho0 = 0.6 * np.cos(np.pi * x)
    control = constant_control(2, 0.5)
    split = G.make_regular_split()
    problem = Problem(ops, split, split, G.make_default_coupling(), mu0, rho0, control)
    cfg = SchemeConfig(eps=0.01, n_blocks=3, dt=0.1, T=0.3, newton_tol=1e-14)
    traj = run_simulation(cfg, problem)
    oracle = _dense_oracle(0.01, 0.1, 3, 3, mu0, rho0, control)
    err = 0.0
    for state, (rho_o, mu_o) in zip(traj.states[1:], oracle):
        err = max(err, float(np.max(np.abs(state.rho - rho_o))),
                  float(np.max(np.abs(state.mu - mu_o))))
    return CriterionResult("dense_oracle", err <= TOLERANCES["dense_oracle"]
                           and len(oracle) == len(traj) - 1, f"max |modular - dense| = {err:.2e}")


# ---------------------------------------------------------------------------
# 6. separation

def criterion_separation() -> CriterionResult:
    cfg = reference_config()
    margins = []
    for n, dt in ((64, cfg.dt), (128, cfg.dt / 2)):
        problem = reference_problem(n=n, potential="logarithmic", c=2.0)
        traj = run_simulation(replace(cfg, dt=dt), problem)
        margins.append(check_separation(traj, problem.bulk.graph).margin)
    change = abs(margins[1] - margins[0]) / margins[0]
    ok = min(margins) >= TOLERANCES["separation_margin"] and change < TOLERANCES["separation_change"]
    return CriterionResult("separation", ok,
                           f"margin {margins[0]:.4f} -> {margins[1]:.4f} (change {change:.2%})")


# ---------------------------------------------------------------------------
# 7. xi bound

def criterion_xi_bound() -> CriterionResult:
    problem = reference_problem(potential="logarithmic", c=2.0)
    report = refine_eps(problem, reference_config(), [0.1, 0.01, 0.001])
    spread = max(report.xi_max) / min(report.xi_max)
    ok = check_xi_bound(report.xi_max, TOLERANCES["xi_factor"])
    return CriterionResult("xi_bound", ok,
                           "max|xi| = " + ", ".join(f"{v:.4f}" for v in report.xi_max)
                           + f" (spread x{spread:.3f})")


# ---------------------------------------------------------------------------
# 8. stability

def criterion_stability() -> CriterionResult:
    cfg = reference_config()
    problem = reference_problem(potential="logarithmic", c=2.0)
    u1 = problem.control
    phi = constant_control(problem.ops.nb, 1.0)
    ratios = [stability_experiment(cfg, problem, u1, u1 + phi.scaled(p)).ratio
              for p in (0.1, 0.05, 0.025)]
    same = stability_experiment(cfg, problem, u1, u1)
    zero = same.lhs == 0.0
    spread = max(ratios) / min(ratios) - 1.0
    c_hat = max(ratios)
    ok = zero and np.all(np.isfinite(ratios)) and spread < TOLERANCES["stability_spread"]
    return CriterionResult("stability", bool(ok),
                           f"ratios {', '.join(f'{r:.5f}' for r in ratios)}; C_measured = {c_hat:.4f}; "
                           f"spread {spread:.2%}; identical controls -> lhs {same.lhs}")


# ---------------------------------------------------------------------------
# 9. limit passages

def criterion_limits() -> CriterionResult:
    cfg = reference_config()
    problem = reference_problem(potential="logarithmic", c=2.0)
    blocks = refine_blocks(problem, cfg, [5, 10, 20])
    eps = refine_eps(problem, cfg, [0.1, 0.05, 0.025])
    _, t_order = temporal_self_convergence(problem, cfg, [cfg.dt, cfg.dt / 2, cfg.dt / 4])
    _, x_order = spatial_self_convergence(
        lambda n: reference_problem(n=n, potential="logarithmic", c=2.0), cfg, [16, 32, 64])
    tlo, thi = TOLERANCES["temporal_order"]
    xlo, xhi = TOLERANCES["spatial_order"]
    ok = (blocks.monotone_rho() and eps.monotone_rho()
          and tlo <= t_order[0] <= thi and xlo <= x_order[0] <= xhi)
    return CriterionResult(
        "limits", ok,
        "N diffs " + ", ".join(f"{d:.3e}" for d in blocks.rho_diffs)
        + "; eps diffs " + ", ".join(f"{d:.3e}" for d in eps.rho_diffs)
        + f"; time order {t_order[0]:.3f}; space order {x_order[0]:.3f}")


# ---------------------------------------------------------------------------
# 10. surface operator

def criterion_surface() -> CriterionResult:
    mesh = build_disc_mesh(4)
    ops = assemble(mesh)
    evals = sla.eigh(ops.KG.toarray(), ops.MG.toarray(), eigvals_only=True)
    first = float(evals[evals > 1e-8][0])
    area = float(ops.ML.sum())
    perim = float(ops.MGL.sum())
    e_err = abs(first - 1.0)
    a_err = abs(area - math.pi) / math.pi
    p_err = abs(perim - 2 * math.pi) / (2 * math.pi)
    ok = (e_err < TOLERANCES["surface_eigen"] and a_err < TOLERANCES["disc_area"]
          and p_err < TOLERANCES["disc_perimeter"])
    return CriterionResult("surface", ok, f"lambda_1 = {first:.5f}, area err {a_err:.2e}, "
                                          f"perimeter err {p_err:.2e}")


# ---------------------------------------------------------------------------
# 11. linear auxiliary problem

def criterion_linear_problem() -> CriterionResult:
    ops = assemble(build_interval_mesh(64, 1.0))
    rng = np.random.default_rng(7)
    T, dt = 0.1, 1e-3
    ratios, bound = [], None
    for _ in range(10):
        res = linear_problem_ratio(ops, rng.uniform(0, 1, ops.n), rng.uniform(0, 1, ops.nb),
                                   rng.normal(size=ops.n), rng.normal(size=ops.nb), T, dt)
        ratios.append(res.ratio)
        bound = res.bound
    y, yg = linear_dynamic_step(ops, rng.uniform(0, 1, ops.n), rng.uniform(0, 1, ops.nb),
                                0.0, 0.0, np.zeros(ops.n), dt)
    zero = not np.any(y) and not np.any(yg)
    ok = zero and max(ratios) <= bound
    return CriterionResult("linear_problem", ok,
                           f"max ratio {max(ratios):.4f} <= bound {bound:.4f}; zero data -> zero: {zero}")


CRITERIA: Dict[str, Callable[[], CriterionResult]] = {
    "yosida": criterion_yosida,
    "compatibility": criterion_compatibility,
    "positivity": criterion_positivity,
    "mu_energy": criterion_mu_energy,
    "dense_oracle": criterion_dense_oracle,
    "separation": criterion_separation,
    "xi_bound": criterion_xi_bound,
    "stability": criterion_stability,
    "limits": criterion_limits,
    "surface": criterion_surface,
    "linear_problem": criterion_linear_problem,
}


def run_criterion(name: str) -> CriterionResult:
    start = time.perf_counter()
    try:
        result = CRITERIA[name]()
    except Exception as exc:  # a crash is a failed criterion, reported by name
        result = CriterionResult(name, False, f"error: {type(exc).__name__}: {exc}")
    result.seconds = time.perf_counter() - start
    result.budget = BUDGETS[name]
    return result


def run_criteria(names: Optional[Iterable[str]] = None, echo: Optional[Callable] = None) -> list:
    names = list(CRITERIA) if names is None else list(names)
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise KeyError(f"unknown criteria: {', '.join(unknown)}")
    results = []
    for name in names:
        res = run_criterion(name)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
