from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("step", "t", "energy_total", "mu_energy", "dissipation_cum", "mu_min",
               "mu_max", "rho_min", "rho_max", "xi_max_abs", "newton_iters", "dt_used")


@dataclass
class Trajectory:
    """Recorded states of one run plus per-step scalars.

    Entry 0 is the initial state.  ``nominal[k]`` is True when state k sits on
    the nominal time grid (substeps from dt halving are recorded but not
    nominal).
    """

    states: list = field(default_factory=list)
    energy_total: list = field(default_factory=list)
    mu_energy: list = field(default_factory=list)
    dissipation_cum: list = field(default_factory=list)
    newton_iters: list = field(default_factory=list)
    dt_used: list = field(default_factory=list)
    nominal: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def append(self, state, *, energy_total, mu_energy, dissipation_cum,
               newton_iters, dt_used, nominal=True):
        if self.states and not state.t > self.states[-1].t:
            raise ValueError("trajectory times must increase strictly")
        self.states.append(state)
        self.energy_total.append(energy_total)
        self.mu_energy.append(mu_energy)
        self.dissipation_cum.append(dissipation_cum)
        self.newton_iters.append(newton_iters)
        self.dt_used.append(dt_used)
        self.nominal.append(nominal)

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def field(self, name: str, nominal_only: bool = False) -> np.ndarray:
        """Stack of one state field over the steps, shape (steps, nodes)."""
        idx = self.nominal_indices() if nominal_only else range(len(self.states))
        return np.array([getattr(self.states[i], name) for i in idx])

    def nominal_indices(self) -> list:
        return [i for i, flag in enumerate(self.nominal) if flag]

    def step_dts(self, nominal_only: bool = False) -> np.ndarray:
        """Time weight attached to each recorded state (0 for the initial one)."""
        t = self.times
        if nominal_only:
            t = t[self.nominal_indices()]
        return np.concatenate([[0.0], np.diff(t)])

    def extrema(self, name: str):
        values = self.field(name)
        return values.min(axis=1), values.max(axis=1)

    def rows(self) -> list:
        mu_min, mu_max = self.extrema("mu")
        rho_min, rho_max = self.extrema("rho")
        xi = np.abs(self.field("xi")).max(axis=1)
        return [{
            "step": k, "t": s.t, "energy_total": self.energy_total[k],
            "mu_energy": self.mu_energy[k], "dissipation_cum": self.dissipation_cum[k],
            "mu_min": mu_min[k], "mu_max": mu_max[k], "rho_min": rho_min[k],
            "rho_max": rho_max[k], "xi_max_abs": xi[k],
            "newton_iters": self.newton_iters[k], "dt_used": self.dt_used[k],
        } for k, s in enumerate(self.states)]
