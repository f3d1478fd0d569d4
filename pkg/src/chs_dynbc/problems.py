"""Named initial profiles and the reference problems used by the checks."""
from __future__ import annotations

import numpy as np

from .discretization import Mesh, assemble, build_disc_mesh, build_interval_mesh
from .graphs import make_coupling, make_split
from .stepper import Problem, SchemeConfig, sinusoid_control

PROFILES = ("constant", "bump", "cosine", "step", "random")


def _coordinate(mesh: Mesh):
    """Scalar coordinate in [0, L] used by the profiles (x for the disc, shifted)."""
    x = mesh.nodes[:, 0]
    if mesh.dim == 1:
        return x, float(x.max())
    return x + 1.0, 2.0


def profile(mesh: Mesh, name: str, value: float = 0.0, amplitude: float = 1.0,
            center: float = 0.5, width: float = 0.5, lo: float = -0.5, hi: float = 0.5,
            seed: int = 0) -> np.ndarray:
    """Nodal initial field.

    constant  value
    bump      value + amplitude * cos^2 bump of half-width ``width`` at ``center`` (relative)
    cosine    value + amplitude * cos(pi x / L)
    step      lo + (hi - lo) (1 + tanh((x - center L) / (width L))) / 2
    random    uniform in [lo, hi] from ``seed``
    """
    x, L = _coordinate(mesh)
    if name == "constant":
        return np.full(mesh.n_nodes, float(value))
    if name == "bump":
        s = (x / L - center) / width
        bump = np.where(np.abs(s) < 1.0, np.cos(0.5 * np.pi * s) ** 2, 0.0)
        return value + amplitude * bump
    if name == "cosine":
        return value + amplitude * np.cos(np.pi * x / L)
    if name == "step":
        return lo + (hi - lo) * 0.5 * (1.0 + np.tanh((x / L - center) / width))
    if name == "random":
        return np.random.default_rng(seed).uniform(lo, hi, mesh.n_nodes)
    raise KeyError(f"unknown profile {name!r}")


def reference_config(**overrides) -> SchemeConfig:
    """T = 0.1, dt = 1e-3, N = 10 blocks, eps = 1e-3."""
    base = dict(eps=1e-3, n_blocks=10, dt=1e-3, T=0.1)
    base.update(overrides)
    return SchemeConfig(**base)


def reference_problem(n: int = 64, potential: str = "regular", c=None,
                      coupling: str = "default", amplitude: float = 0.5,
                      rho_amplitude: float = None, mu_base: float = 1.0,
                      period: float = 0.1, disc_levels: int = None) -> Problem:
    """Interval [0, 1] with n elements (or the unit disc at ``disc_levels``).

    mu0 = mu_base + cos-bump, rho0 = A cos(pi x) with A = 0.6 (0.9 for the
    logarithmic potential), u_Gamma = amplitude * sin(2 pi t / period).
    """
    mesh = build_interval_mesh(n, 1.0) if disc_levels is None else build_disc_mesh(disc_levels)
    ops = assemble(mesh)
    split = make_split(potential, c)
    if rho_amplitude is None:
        rho_amplitude = 0.9 if potential == "logarithmic" else 0.6
    mu0 = profile(mesh, "bump", value=mu_base, amplitude=1.0, center=0.5, width=0.5)
    rho0 = profile(mesh, "cosine", amplitude=rho_amplitude)
    control = sinusoid_control(mesh.n_boundary, amplitude, period)
    return Problem(ops, split, split, make_coupling(coupling), mu0, rho0, control)
