"""Self-convergence in time and space, and the delay and eps limits.

Backward Euler should converge with order 1 in dt; P1 elements with order 2
in the L2 norm of the final state.  Refining the delay tau = T/N and the
Yosida level eps should shrink the pairwise differences monotonically.
"""
from chs_dynbc.diagnostics.experiments import spatial_self_convergence, temporal_self_convergence
from chs_dynbc.problems import reference_config, reference_problem
from chs_dynbc.stepper import refine_blocks, refine_eps

cfg = reference_config()
problem = reference_problem(n=64)

diffs, orders = temporal_self_convergence(problem, cfg, [4e-3, 2e-3, 1e-3, 5e-4])
print("dt refinement:  diffs", ", ".join(f"{d:.3e}" for d in diffs),
      "  orders", ", ".join(f"{o:.3f}" for o in orders))

diffs, orders = spatial_self_convergence(lambda n: reference_problem(n=n), cfg, [16, 32, 64, 128])
print("n refinement:   diffs", ", ".join(f"{d:.3e}" for d in diffs),
      "  orders", ", ".join(f"{o:.3f}" for o in orders))

blocks = refine_blocks(problem, cfg, [5, 10, 20])
print("N refinement:   rho diffs", ", ".join(f"{d:.3e}" for d in blocks.rho_diffs),
      "  monotone:", blocks.monotone_rho())

eps = refine_eps(problem, cfg, [1e-1, 1e-2, 1e-3])
print("eps refinement: rho diffs", ", ".join(f"{d:.3e}" for d in eps.rho_diffs),
      "  monotone:", eps.monotone_rho())
