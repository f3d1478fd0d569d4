"""Free energy and the mu-energy of a discrete state."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..discretization import Operators, trace
from ..graphs import CouplingFunction, PotentialSplit, yosida_antiderivative


def _convex_part(split: PotentialSplit, eps: Optional[float], r: np.ndarray) -> np.ndarray:
    if eps is None:
        return np.asarray(split.graph.potential(r))
    return np.asarray(yosida_antiderivative(split.graph, eps, r))


def total_free_energy(ops: Operators, state, u_gamma_now, bulk: PotentialSplit,
                      boundary: PotentialSplit, coupling: CouplingFunction,
                      eps: Optional[float], eta: float = 1.0) -> float:
    """Bulk plus surface free energy with lumped nodal quadrature.

    ``eps=None`` uses the unregularized convex parts (may be +inf outside
    the domain); otherwise the bulk graph is regularized at ``eps`` and the
    boundary graph at ``eps*eta``.
    """
    rho, mu = np.asarray(state.rho), np.asarray(state.mu)
    rg = trace(ops, rho)
    u = np.broadcast_to(np.asarray(u_gamma_now, dtype=float), rg.shape)
    beps = None if eps is None else eps * eta
    bulk_density = (-mu * coupling.extended_g(rho) + _convex_part(bulk, eps, rho)
                    + bulk.perturbation_antiderivative(rho))
    surf_density = (-u * rg + _convex_part(boundary, beps, rg)
                    + boundary.perturbation_antiderivative(rg))
    return float(ops.ML @ bulk_density + 0.5 * rho @ (ops.K @ rho)
                 + ops.MGL @ surf_density + 0.5 * rg @ (ops.KG @ rg))


def mu_energy(ops: Operators, coupling: CouplingFunction, mu, rho) -> float:
    """sum_i m_i (1/2 + g(rho_i)) mu_i^2 with the lumped mass."""
    mu = np.asarray(mu, dtype=float)
    return float(ops.ML @ ((0.5 + coupling.extended_g(np.asarray(rho))) * mu * mu))
