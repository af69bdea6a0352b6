"""Forward state, backward adjoint and forward sensitivity solves.

All three use first-order steps with implicit diffusion. The state step is

    [(1 + dt (C[k+1] - rho)) M + dt K + dt rho M(U[k])] U[k+1] = M U[k]

where ``M(v)`` is the mass matrix weighted by ``v`` (entries ∫ v φ_i φ_j),
i.e. the logistic term is linearized about the previous step. The adjoint
runs backward from ``W[N] = 0``:

    [(1 - dt rho + dt C[k]) M + dt K + 2 dt rho M(U[k])] W[k] = M W[k+1] - dt M 1

The sensitivity recursion is the exact derivative of the discrete state step
with respect to the control, so it agrees with finite differences of
:func:`solve_state` up to O(eps).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .fem import DiffusionField, FeField, assembler_for

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k dt`` on ``[0, T]``.

    ``n_steps = 0`` is allowed as a degenerate grid holding only ``t = 0``.
    """

    T: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidArgumentError("T must be positive and finite")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise InvalidArgumentError("n_steps must be a non-negative integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self):
        return self.T / self.n_steps if self.n_steps else 0.0

    @property
    def times(self):
        if self.n_steps == 0:
            return np.zeros(1)
        return self.T * np.arange(self.n_steps + 1) / self.n_steps

    @property
    def n_nodes(self):
        return self.n_steps + 1

    def trapezoid_weights(self):
        """Composite trapezoid weights (including ``dt``) for the time nodes."""
        w = np.full(self.n_nodes, self.dt)
        if self.n_steps:
            w[0] = w[-1] = 0.5 * self.dt
        return w

    def integrate(self, values):
        """Trapezoid rule over time of per-node ``values``."""
        return float(self.trapezoid_weights() @ np.asarray(values, dtype=float))

    def l2_norm(self, values):
        """Trapezoid-weighted discrete L²(0, T) norm."""
        v = np.asarray(values, dtype=float)
        return math.sqrt(self.trapezoid_weights() @ (v * v))

    def nearest_index(self, t):
        if not (0 <= t <= self.T):
            raise InvalidArgumentError(f"time {t} outside [0, {self.T}]")
        return int(np.argmin(np.abs(self.times - t)))


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Proliferation rate ``rho`` and diffusion field of the state equation."""

    rho: float
    diffusion: DiffusionField

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise InvalidArgumentError("rho must be finite and >= 0")
        if not isinstance(self.diffusion, DiffusionField):
            object.__setattr__(self, "diffusion", DiffusionField(self.diffusion))


class ControlTrajectory:
    """Non-negative dosing values, one per time node."""

    def __init__(self, values):
        v = np.array(values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("control values must be finite")
        if np.any(v < 0):
            raise InvalidArgumentError("control values must be >= 0")
        v.flags.writeable = False
        self.values = v

    @classmethod
    def constant(cls, grid, value):
        return cls(np.full(grid.n_nodes, float(value)))

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"ControlTrajectory(n={len(self)}, mean={self.values.mean():.6g})"


def _values(control, grid, name="control"):
    v = control.values if isinstance(control, ControlTrajectory) else np.asarray(control, float)
    if v.shape != (grid.n_nodes,):
        raise InvalidArgumentError(
            f"{name} has {v.size} values, time grid has {grid.n_nodes} nodes")
    return v


class SpaceTimeTrajectory:
    """Nodal fields at every time node, stored as a (n_nodes_t, n_nodes_x) array."""

    def __init__(self, mesh, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_nodes, mesh.n_nodes):
            raise InvalidArgumentError(
                f"trajectory shape {values.shape} != {(grid.n_nodes, mesh.n_nodes)}")
        values.flags.writeable = False
        self.mesh = mesh
        self.grid = grid
        self.values = values

    def __len__(self):
        return self.values.shape[0]

    def field(self, k):
        return FeField(self.mesh, self.values[k])

    @property
    def fields(self):
        return [self.field(k) for k in range(len(self))]

    def spatial_integrals(self):
        """``∫_Ω f(x, t_k) dx`` for every time node."""
        M = assembler_for(self.mesh).mass()
        return self.values @ (M @ np.ones(self.mesh.n_nodes))

    def check_compatible(self, mesh, grid):
        if self.mesh is not mesh:
            raise InvalidArgumentError("trajectory lives on a different mesh")
        if self.grid != grid:
            raise InvalidArgumentError("trajectory uses a different time grid")


class _Stepper:
    """Combines the mesh matrices into per-step systems on a shared pattern."""

    def __init__(self, mesh, params, grid):
        self.asm = assembler_for(mesh)
        self.M = self.asm.mass()
        self.K = self.asm.stiffness(params.diffusion)
        self.P = self.asm.product_operator()
        self.rho = params.rho
        self.dt = grid.dt
        self.ones_mass = self.M @ np.ones(mesh.n_nodes)
        self._m_data = self.M.data
        self._dk_data = self.dt * self.K.data

    def system(self, mass_coef, weight):
        """CSR data of ``mass_coef M + dt K + M(weight)``."""
        return mass_coef * self._m_data + self._dk_data + self.P @ weight

    def solve(self, data, b):
        return self.asm.solve(data, b)

    def mass_matvec(self, x):
        return self.asm.matvec(self._m_data, x)

    def weighted_matvec(self, weight, x):
        return self.asm.matvec(self.P @ weight, x)


def _check_finite(x, step, what):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite {what}", step)


def solve_state(mesh, params, grid, control, u0):
    """Integrate the controlled Fisher equation forward from ``u0``.

    Returns
    -------
    SpaceTimeTrajectory
        ``values[k]`` is the nodal state at ``t_k``.
    """
    c = _values(control, grid)
    u0 = u0.coeffs if isinstance(u0, FeField) else np.asarray(u0, dtype=float)
    if u0.shape != (mesh.n_nodes,):
        raise InvalidArgumentError("u0 length does not match mesh node count")
    if np.any(u0 < 0) or np.any(u0 > 1):
        raise InvalidArgumentError("u0 nodal values must lie in [0, 1]")

    st = _Stepper(mesh, params, grid)
    dt, rho = st.dt, st.rho
    out = np.empty((grid.n_nodes, mesh.n_nodes))
    out[0] = u0
    warned = False
    for k in range(grid.n_steps):
        A = st.system(1.0 + dt * (c[k + 1] - rho), dt * rho * out[k])
        out[k + 1] = st.solve(A, st.mass_matvec(out[k]))
        _check_finite(out[k + 1], k + 1, "state")
        if not warned and (out[k + 1].min() < -BOUND_SLACK or out[k + 1].max() > 1 + BOUND_SLACK):
            logger.warning("state left [0, 1] at step %d (min %.3e, max %.6f)",
                           k + 1, out[k + 1].min(), out[k + 1].max())
            warned = True
    return SpaceTimeTrajectory(mesh, grid, out)


def solve_adjoint(mesh, params, grid, control, state):
    """Integrate the adjoint equation backward from ``w(T) = 0``."""
    c = _values(control, grid)
    state.check_compatible(mesh, grid)
    out = np.zeros((grid.n_nodes, mesh.n_nodes))
    if grid.n_steps == 0:
        return SpaceTimeTrajectory(mesh, grid, out)

    st = _Stepper(mesh, params, grid)
    dt, rho = st.dt, st.rho
    U = state.values
    warned = False
    for k in range(grid.n_steps - 1, -1, -1):
        A = st.system(1.0 - dt * rho + dt * c[k], 2.0 * dt * rho * U[k])
        out[k] = st.solve(A, st.mass_matvec(out[k + 1]) - dt * st.ones_mass)
        _check_finite(out[k], k, "adjoint")
        if not warned and out[k].max() > BOUND_SLACK:
            logger.warning("adjoint became positive at step %d (max %.3e)", k, out[k].max())
            warned = True
    return SpaceTimeTrajectory(mesh, grid, out)


def solve_sensitivity(mesh, params, grid, control, state, eta):
    """Directional derivative of the discrete state along control perturbation ``eta``.

    ``eta`` may be signed. The result starts from zero and satisfies
    ``psi ≈ (u(C + eps eta) - u(C)) / eps`` for small ``eps``.
    """
    c = _values(control, grid)
    e = _values(eta, grid, "eta")
    if not np.all(np.isfinite(e)):
        raise InvalidArgumentError("eta must be finite")
    state.check_compatible(mesh, grid)
    st = _Stepper(mesh, params, grid)
    dt, rho = st.dt, st.rho
    U = state.values
    out = np.zeros((grid.n_nodes, mesh.n_nodes))
    for k in range(grid.n_steps):
        A = st.system(1.0 + dt * (c[k + 1] - rho), dt * rho * U[k])
        rhs = st.mass_matvec(out[k]) - dt * rho * st.weighted_matvec(U[k + 1], out[k])
        rhs -= dt * e[k + 1] * st.mass_matvec(U[k + 1])
        out[k + 1] = st.solve(A, rhs)
        _check_finite(out[k + 1], k + 1, "sensitivity")
    return SpaceTimeTrajectory(mesh, grid, out)
