"""Continuous dependence on the boundary control.

Two runs differ only in u_Gamma: u2 = u1 + p.  The difference of the
solutions, measured in the norms of the stability estimate, is divided by the
L2(Sigma) distance of the controls.  If the estimate holds with some constant
C, this ratio stays put as p shrinks.
"""
from chs_dynbc.diagnostics.experiments import stability_experiment
from chs_dynbc.problems import reference_config, reference_problem
from chs_dynbc.stepper import constant_control

problem = reference_problem(n=64, potential="logarithmic", c=2.0)
cfg = reference_config()
u1 = problem.control
nb = problem.ops.nb

for p in (0.1, 0.05, 0.025):
    report = stability_experiment(cfg, problem, u1, u1 + constant_control(nb, p))
    print(f"p = {p:<6g} |u1-u2| = {report.control_l2:.4e}  lhs = {report.lhs:.4e}"
          f"  ratio = {report.ratio:.5f}")

same = stability_experiment(cfg, problem, u1, u1)
print(f"identical controls: lhs = {same.lhs}")
