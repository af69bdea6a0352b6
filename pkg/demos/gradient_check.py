"""
Checking the gradient
=====================

Compare the adjoint derivative with finite differences and the forward
sensitivity, then probe curvature along a few directions.
"""

import numpy as np

from rdoptctl import (ControlTrajectory, FeField, ModelParams, Problem, TimeGrid,
                      build_interval_mesh, curvature_probe, directional_derivative,
                      sensitivity_derivative)

mesh = build_interval_mesh(40)
u0 = FeField.interpolate(mesh, lambda x: (np.cos(np.pi * x) + 1) / 2)
problem = Problem(mesh, ModelParams(0.5, 0.1), TimeGrid(10.0, 1000), u0)
alpha, eps = 100.0, 1e-4
c = ControlTrajectory.constant(problem.grid, 2.512566e-2)
t = problem.grid.times

###############################################################################
# Smooth nonnegative directions. The adjoint derivative is only first-order
# consistent in dt with the discrete objective, so expect agreement to a few
# digits rather than to round-off.

for m in range(1, 4):
    eta = 1 + np.cos(m * np.pi * t / t[-1])
    eta /= np.sqrt(problem.grid.integrate(eta * eta))
    fd = (problem.objective(ControlTrajectory(c.values + eps * eta), alpha)
          - problem.objective(c, alpha)) / eps
    adj = directional_derivative(problem, c, eta, alpha)
    sens = sensitivity_derivative(problem, c, eta, alpha)
    curv = curvature_probe(problem, c, eta, alpha)
    print(f"mode {m}: FD = {fd:.6f}  adjoint = {adj:.6f}  sensitivity = {sens:.6f}  "
          f"curvature = {curv:.4f}")
