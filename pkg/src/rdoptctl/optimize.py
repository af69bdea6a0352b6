"""Objective, optimality residual and the two adjoint-based control updates.

Time integrals use the composite trapezoid rule on the control's time grid;
stopping tests use the trapezoid-weighted L²(0, T) norm unless
``OptimizeConfig.norm`` says otherwise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (ControlTrajectory, SpaceTimeTrajectory, TimeGrid, _values,
                       solve_adjoint, solve_sensitivity, solve_state)
from .errors import InvalidArgumentError
from .fem import FeField, assembler_for

logger = logging.getLogger(__name__)

METHODS = ("linear_combination", "gradient_descent")
NORMS = ("l2", "linf", "euclidean")


def _check_alpha(alpha):
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidArgumentError(f"alpha must be positive and finite, got {alpha}")


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything that stays fixed while the control changes."""

    mesh: object
    params: object
    grid: TimeGrid
    u0: FeField

    def __post_init__(self):
        if not isinstance(self.u0, FeField):
            object.__setattr__(self, "u0", FeField(self.mesh, self.u0))
        if self.u0.mesh is not self.mesh:
            raise InvalidArgumentError("u0 lives on a different mesh")

    def state(self, control):
        return solve_state(self.mesh, self.params, self.grid, control, self.u0)

    def adjoint(self, control, state):
        return solve_adjoint(self.mesh, self.params, self.grid, control, state)

    def sensitivity(self, control, state, eta):
        return solve_sensitivity(self.mesh, self.params, self.grid, control, state, eta)

    def objective(self, control, alpha):
        return evaluate_objective(self.state(control), control, alpha)


def evaluate_objective(state, control, alpha):
    """``∫₀ᵀ (∫_Ω u dx + alpha C²) dt`` by the trapezoid rule in time."""
    _check_alpha(alpha)
    c = _values(control, state.grid)
    return state.grid.integrate(state.spatial_integrals() + alpha * c * c)


def _uw(state, adjoint):
    if state.mesh is not adjoint.mesh or state.grid != adjoint.grid:
        raise InvalidArgumentError("state and adjoint live on different meshes or grids")
    M = assembler_for(state.mesh).mass()
    return np.einsum("ki,ki->k", state.values, (M @ adjoint.values.T).T)


def control_norm(grid, values, norm="l2"):
    v = np.asarray(values, dtype=float)
    if norm == "l2":
        return grid.l2_norm(v)
    if norm == "linf":
        return float(np.max(np.abs(v)))
    if norm == "euclidean":
        return float(np.linalg.norm(v))
    raise InvalidArgumentError(f"unknown norm {norm!r}; expected one of {NORMS}")


def optimality_residual(state, adjoint, control, alpha, norm="l2"):
    """Per-node residual ``g_k = 2 alpha C_k + ∫ u_k w_k dx`` and its norm."""
    _check_alpha(alpha)
    c = _values(control, state.grid)
    g = 2.0 * alpha * c + _uw(state, adjoint)
    return g, control_norm(state.grid, g, norm)


def intermediate_control(state, adjoint, alpha):
    """``-(1 / 2 alpha) ∫ u w dx`` at every time node, clamped at zero."""
    return np.maximum(0.0, -_uw(state, adjoint) / (2.0 * alpha))


def linear_combination_update(control, c_tilde, beta):
    """``beta C + (1 - beta) C~``."""
    c = control.values if isinstance(control, ControlTrajectory) else np.asarray(control, float)
    return ControlTrajectory(beta * c + (1.0 - beta) * np.asarray(c_tilde, dtype=float))


@dataclass(frozen=True)
class IterRecord:
    J: float
    residual_norm: float
    delta_norm: float


@dataclass(frozen=True, eq=False)
class OptimizeConfig:
    """Settings for :func:`run_linear_combination` / :func:`run_gradient_descent`.

    ``gamma`` defaults to ``0.2 / alpha``. ``c0`` may be a scalar or a
    :class:`ControlTrajectory`.
    """

    alpha: float
    method: str = "linear_combination"
    beta: float = 0.5
    gamma: float | None = None
    tol: float = 1e-8
    max_iter: int = 500
    c0: object = 2.512566e-2
    norm: str = "l2"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.method not in METHODS:
            raise InvalidArgumentError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "linear_combination" and not (0 < self.beta < 1):
            raise InvalidArgumentError("beta must lie in (0, 1)")
        if self.gamma is None:
            object.__setattr__(self, "gamma", 0.2 / self.alpha)
        if self.method == "gradient_descent" and not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidArgumentError("gamma must be positive")
        if not (self.tol > 0):
            raise InvalidArgumentError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be a positive integer")
        if self.norm not in NORMS:
            raise InvalidArgumentError(f"norm must be one of {NORMS}")

    def initial_control(self, grid):
        if isinstance(self.c0, ControlTrajectory):
            _values(self.c0, grid, "c0")
            return self.c0
        if np.ndim(self.c0) == 0:
            return ControlTrajectory.constant(grid, float(self.c0))
        c = ControlTrajectory(self.c0)
        _values(c, grid, "c0")
        return c


@dataclass(eq=False)
class OptimizeReport:
    """Outcome of an optimization run.

    ``per_iter[i]`` describes iterate ``i``: objective and residual norm at
    ``C_i``, and the norm of the update ``C_{i+1} - C_i``. The ``final_*``
    fields are evaluated at ``final_control``.
    """

    method: str
    alpha: float
    per_iter: list = field(default_factory=list)
    final_control: ControlTrajectory | None = None
    converged: bool = False
    final_J: float = math.nan
    final_residual: np.ndarray | None = None
    final_residual_norm: float = math.nan
    final_state: SpaceTimeTrajectory | None = None
    final_adjoint: SpaceTimeTrajectory | None = None

    @property
    def iterations(self):
        return len(self.per_iter)


class _Evaluation:
    """State, adjoint, objective and residual at one control."""

    def __init__(self, problem, control, alpha, norm):
        self.control = control
        self.state = problem.state(control)
        self.adjoint = problem.adjoint(control, self.state)
        self.J = evaluate_objective(self.state, control, alpha)
        self.g, self.residual_norm = optimality_residual(
            self.state, self.adjoint, control, alpha, norm)


def _finish(report, ev):
    report.final_control = ev.control
    report.final_J = ev.J
    report.final_residual = ev.g
    report.final_residual_norm = ev.residual_norm
    report.final_state = ev.state
    report.final_adjoint = ev.adjoint
    return report


def run_linear_combination(problem, config):
    """Fixed-point iteration ``C <- beta C + (1 - beta) C~`` with
    ``C~ = -(1 / 2 alpha) ∫ u w dx``.

    Stops once the update norm drops below ``config.tol``. Exhausting
    ``max_iter`` is reported through ``converged=False``, not raised.
    """
    if config.method != "linear_combination":
        raise InvalidArgumentError("config.method must be 'linear_combination'")
    grid, alpha, beta = problem.grid, config.alpha, config.beta
    report = OptimizeReport(config.method, alpha)
    c = config.initial_control(grid)
    for i in range(config.max_iter):
        ev = _Evaluation(problem, c, alpha, config.norm)
        c_tilde = intermediate_control(ev.state, ev.adjoint, alpha)
        c_new = linear_combination_update(c, c_tilde, beta)
        delta = control_norm(grid, c_new.values - c.values, config.norm)
        report.per_iter.append(IterRecord(ev.J, ev.residual_norm, delta))
        logger.debug("alg1 iter %d: J=%.12g |g|=%.3e |dC|=%.3e", i, ev.J, ev.residual_norm, delta)
        c = c_new
        if delta < config.tol:
            report.converged = True
            break
    if not report.converged:
        logger.warning("linear combination: no convergence after %d iterations", config.max_iter)
    return _finish(report, _Evaluation(problem, c, alpha, config.norm))


def run_gradient_descent(problem, config):
    """Projected gradient steps ``C <- max(0, C - gamma g)``.

    Stops once the residual norm at the current iterate drops below
    ``config.tol``; that iterate is the reported control.
    """
    if config.method != "gradient_descent":
        raise InvalidArgumentError("config.method must be 'gradient_descent'")
    grid, alpha, gamma = problem.grid, config.alpha, config.gamma
    report = OptimizeReport(config.method, alpha)
    c = config.initial_control(grid)
    ev = None
    for i in range(config.max_iter):
        ev = _Evaluation(problem, c, alpha, config.norm)
        if ev.residual_norm < config.tol:
            report.per_iter.append(IterRecord(ev.J, ev.residual_norm, 0.0))
            report.converged = True
            return _finish(report, ev)
        c_new = ControlTrajectory(np.maximum(0.0, c.values - gamma * ev.g))
        delta = control_norm(grid, c_new.values - c.values, config.norm)
        report.per_iter.append(IterRecord(ev.J, ev.residual_norm, delta))
        logger.debug("alg2 iter %d: J=%.12g |g|=%.3e |dC|=%.3e", i, ev.J, ev.residual_norm, delta)
        c = c_new
    logger.warning("gradient descent: no convergence after %d iterations", config.max_iter)
    return _finish(report, _Evaluation(problem, c, alpha, config.norm))


def optimize(problem, config):
    """Run the algorithm named by ``config.method``."""
    if config.method == "linear_combination":
        return run_linear_combination(problem, config)
    return run_gradient_descent(problem, config)


def directional_derivative(problem, control, eta, alpha):
    """``∫₀ᵀ eta (2 alpha C + ∫_Ω u w dx) dt`` using the adjoint."""
    e = _values(eta, problem.grid, "eta")
    state = problem.state(control)
    adjoint = problem.adjoint(control, state)
    g, _ = optimality_residual(state, adjoint, control, alpha)
    return problem.grid.integrate(e * g)


def sensitivity_derivative(problem, control, eta, alpha):
    """``∫₀ᵀ (∫_Ω psi dx + 2 alpha eta C) dt`` using the forward sensitivity.

    This is the exact derivative of the discrete objective, independent of
    the adjoint.
    """
    _check_alpha(alpha)
    e = _values(eta, problem.grid, "eta")
    c = _values(control, problem.grid)
    state = problem.state(control)
    psi = problem.sensitivity(control, state, e)
    return problem.grid.integrate(psi.spatial_integrals() + 2.0 * alpha * e * c)


def curvature_probe(problem, control, eta, alpha):
    """Second directional derivative of the objective along ``eta``:

        ∫₀ᵀ ∫_Ω (2 eta + 2 rho psi) psi w dx dt + ∫₀ᵀ 2 alpha eta² dt

    with ``psi`` the sensitivity along ``eta``.
    """
    _check_alpha(alpha)
    e = _values(eta, problem.grid, "eta")
    state = problem.state(control)
    adjoint = problem.adjoint(control, state)
    psi = problem.sensitivity(control, state, e).values
    w = adjoint.values
    asm = assembler_for(problem.mesh)
    M, P = asm.mass(), asm.product_operator()
    rho = problem.params.rho
    inner = np.empty(problem.grid.n_nodes)
    for k in range(problem.grid.n_nodes):
        psi_w = psi[k] @ (M @ w[k])
        psi2_w = psi[k] @ asm.matvec(P @ w[k], psi[k])
        inner[k] = 2.0 * e[k] * psi_w + 2.0 * rho * psi2_w
    return problem.grid.integrate(inner + 2.0 * alpha * e * e)


def constant_equivalent(control, grid):
    """Constant control with the same time integral as ``control``."""
    c = _values(control, grid)
    return ControlTrajectory.constant(grid, grid.integrate(c) / grid.T)


@dataclass(eq=False)
class Comparison:
    """Optimal control versus its constant-dose equivalent."""

    report: OptimizeReport
    constant: ControlTrajectory
    J_optimal: float
    J_constant: float
    residual_constant: np.ndarray
    residual_norm_constant: float
    state_constant: SpaceTimeTrajectory

    @property
    def dominates(self):
        return self.J_optimal <= self.J_constant


def compare_with_constant(problem, config):
    """Optimize, then re-simulate with the time-averaged constant control."""
    report = optimize(problem, config)
    const = constant_equivalent(report.final_control, problem.grid)
    ev = _Evaluation(problem, const, config.alpha, config.norm)
    return Comparison(report, const, report.final_J, ev.J, ev.g, ev.residual_norm, ev.state)
