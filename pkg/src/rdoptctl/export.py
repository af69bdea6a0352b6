"""CSV and legacy-VTK writers for controls, trajectories and fields.

Floats are written with 17 significant digits so they parse back to the
identical double.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import ControlTrajectory, _values
from .errors import InvalidArgumentError, UnsupportedFormatError
from .fem import FeField

FORMATS = ("csv", "vtk")


def fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, columns):
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in zip(*columns)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv_columns(path):
    """Header names and float columns of a CSV written by this module."""
    with open(path) as f:
        header = f.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, [data[:, i] for i in range(data.shape[1])]


def export_control_csv(grid, control, path, report=None):
    """Write ``t,C`` to ``path``; with a report, also ``iterations.csv`` beside it.

    Returns the list of written paths.
    """
    c = _values(control, grid)
    out = [_write_csv(path, ["t", "C"], [grid.times, c])]
    if report is not None:
        recs = report.per_iter
        out.append(_write_csv(
            Path(path).with_name("iterations.csv"),
            ["iter", "J", "residual_norm", "delta_norm"],
            [range(len(recs)), [r.J for r in recs], [r.residual_norm for r in recs],
             [r.delta_norm for r in recs]]))
    return out


def read_control_csv(path):
    """Times and control values from a ``t,C`` file."""
    header, cols = read_csv_columns(path)
    if header[:2] != ["t", "C"]:
        raise InvalidArgumentError(f"{path}: expected header 't,C', got {','.join(header)}")
    return cols[0], ControlTrajectory(cols[1])


def export_field_csv(mesh, field, path, name="u"):
    """Two-column ``x,<name>`` file for 1D fields."""
    if mesh.dim != 1:
        raise UnsupportedFormatError("CSV field export is for 1D meshes; use VTK in 2D")
    c = field.coeffs if isinstance(field, FeField) else np.asarray(field, float)
    return _write_csv(path, ["x", name], [mesh.nodes[:, 0], c])


def export_field_vtk(mesh, field=None, path="field.vtk", name="u", title="rdoptctl field"):
    """Legacy ASCII VTK unstructured grid of a 2D mesh, optionally with a point scalar."""
    if mesh.dim != 2:
        raise UnsupportedFormatError("VTK export needs a 2D mesh; 1D fields go to CSV")
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    m = mesh.n_elements
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    if field is not None:
        c = field.coeffs if isinstance(field, FeField) else np.asarray(field, float)
        if c.shape != (mesh.n_nodes,):
            raise InvalidArgumentError("field length does not match mesh node count")
        lines += [f"POINT_DATA {mesh.n_nodes}", f"SCALARS {name} double 1",
                  "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in c]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def burden_series(state):
    """Spatial integral ``∫ u dx`` per time node and its running trapezoid integral."""
    burden = state.spatial_integrals()
    dt = state.grid.dt
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * dt * (burden[1:] + burden[:-1]))])
    return burden, cumulative


def export_burden_timeseries(state, path):
    burden, cumulative = burden_series(state)
    return _write_csv(path, ["t", "burden", "cumulative"],
                      [state.grid.times, burden, cumulative])


@dataclass
class ExportSpec:
    """Where and what to write. ``snapshot_times`` default to 0, T/4, T/2, T."""

    out_dir: Path = Path("out")
    snapshot_times: list | None = None
    formats: tuple = FORMATS

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise InvalidArgumentError(f"unknown export formats {sorted(bad)}")

    def snapshot_indices(self, grid):
        times = self.snapshot_times
        if times is None:
            times = [0.0, grid.T / 4, grid.T / 2, grid.T]
        return sorted({grid.nearest_index(t) for t in times})


def export_snapshots(trajectory, spec, prefix="u"):
    """Write the trajectory at the snapshot times; CSV in 1D, VTK in 2D."""
    mesh, grid = trajectory.mesh, trajectory.grid
    os.makedirs(spec.out_dir, exist_ok=True)
    written = []
    for k in spec.snapshot_indices(grid):
        stem = f"{prefix}_t{grid.times[k]:g}"
        if mesh.dim == 1 and "csv" in spec.formats:
            written.append(export_field_csv(
                mesh, trajectory.values[k], spec.out_dir / f"{stem}.csv", prefix))
        elif mesh.dim == 2 and "vtk" in spec.formats:
            written.append(export_field_vtk(
                mesh, trajectory.values[k], spec.out_dir / f"{stem}.vtk", prefix))
    return written
