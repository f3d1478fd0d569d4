"""The unit disc, where the boundary carries its own Laplace-Beltrami operator.

First a sanity check of the surface operator (its spectrum on the unit
circle is k^2), then a short run with the logarithmic potential whose final
state is written as CSV and legacy VTK for a viewer such as ParaView.
"""
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from chs_dynbc.discretization import assemble, build_disc_mesh
from chs_dynbc.io import write_snapshot, write_vtk
from chs_dynbc.problems import reference_config, reference_problem
from chs_dynbc.stepper import run_simulation

ops = assemble(build_disc_mesh(4))
evals = sla.eigh(ops.KG.toarray(), ops.MG.toarray(), eigvals_only=True)
print("surface eigenvalues:", np.round(evals[:7], 4), "(expect 0, 1, 1, 4, 4, 9, 9)")
print(f"area {ops.M.sum():.5f} vs pi, perimeter {ops.MG.sum():.5f} vs 2 pi")

problem = reference_problem(potential="logarithmic", c=2.0, disc_levels=3)
traj = run_simulation(reference_config(T=0.05, n_blocks=5), problem)
final = traj.states[-1]
print(f"\n{problem.ops.n} nodes, {len(traj) - 1} steps;"
      f" rho in [{final.rho.min():.4f}, {final.rho.max():.4f}], min mu = {final.mu.min():.4f}")

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out_disc")
fields = {"mu": final.mu, "rho": final.rho, "xi": final.xi}
write_snapshot(out / "final.csv", problem.ops.mesh, fields)
write_vtk(out / "final.vtk", problem.ops.mesh, fields)
print("wrote", out / "final.csv", "and", out / "final.vtk")
