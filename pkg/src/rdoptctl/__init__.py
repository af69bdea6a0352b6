"""Adjoint-based optimal dosing for the controlled Fisher reaction-diffusion model.

The model is ``u_t = div(D grad u) + rho (1 - u) u - C(t) u`` with no-flux
boundaries, and the objective is ``∫₀ᵀ (∫_Ω u dx + alpha C(t)²) dt``.
"""
from .dynamics import (ControlTrajectory, ModelParams, SpaceTimeTrajectory, TimeGrid,
                       solve_adjoint, solve_sensitivity, solve_state)
from .errors import (DegenerateInputError, DivergenceError, EmptyMeshError,
                     InvalidArgumentError, SolverFailureError, UnsupportedFormatError)
from .export import (ExportSpec, export_burden_timeseries, export_control_csv,
                     export_field_csv, export_field_vtk, export_snapshots, read_control_csv)
from .fem import (DiffusionField, FeField, assemble_mass, assemble_stiffness, l2_inner,
                  solve_spd)
from .ingest import IngestConfig, build_initial_condition, ingestion_summary
from .mesh import (GridImage, Mesh, build_interval_mesh, mesh_size, read_csv_image,
                   read_image, read_pgm, triangulate_grid)
from .optimize import (OptimizeConfig, OptimizeReport, Problem, compare_with_constant,
                       constant_equivalent, curvature_probe, directional_derivative,
                       evaluate_objective, linear_combination_update,
                       optimality_residual, optimize,
                       run_gradient_descent, run_linear_combination, sensitivity_derivative)

__version__ = "0.1.0"

__all__ = [
    "ControlTrajectory",
    "DegenerateInputError",
    "DiffusionField",
    "DivergenceError",
    "EmptyMeshError",
    "ExportSpec",
    "FeField",
    "GridImage",
    "IngestConfig",
    "InvalidArgumentError",
    "Mesh",
    "ModelParams",
    "OptimizeConfig",
    "OptimizeReport",
    "Problem",
    "SolverFailureError",
    "SpaceTimeTrajectory",
    "TimeGrid",
    "UnsupportedFormatError",
    "assemble_mass",
    "assemble_stiffness",
    "build_initial_condition",
    "build_interval_mesh",
    "compare_with_constant",
    "constant_equivalent",
    "curvature_probe",
    "directional_derivative",
    "evaluate_objective",
    "export_burden_timeseries",
    "export_control_csv",
    "export_field_csv",
    "export_field_vtk",
    "export_snapshots",
    "ingestion_summary",
    "l2_inner",
    "linear_combination_update",
    "mesh_size",
    "optimality_residual",
    "optimize",
    "read_control_csv",
    "read_csv_image",
    "read_image",
    "read_pgm",
    "run_gradient_descent",
    "run_linear_combination",
    "sensitivity_derivative",
    "solve_adjoint",
    "solve_sensitivity",
    "solve_spd",
    "solve_state",
    "triangulate_grid",
]
