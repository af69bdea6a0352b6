import numpy as np
import pytest
from scipy.integrate import quad

from conftest import blob_image, logistic
from rdoptctl import (ControlTrajectory, ExportSpec, FeField, GridImage, InvalidArgumentError,
                      Mesh, ModelParams, OptimizeConfig, Problem, SpaceTimeTrajectory, TimeGrid,
                      UnsupportedFormatError, build_interval_mesh, export_burden_timeseries,
                      export_control_csv, export_field_csv, export_field_vtk, export_snapshots,
                      optimize, read_control_csv, triangulate_grid)
from rdoptctl.export import read_csv_columns

meshio = pytest.importorskip("meshio")


def test_control_csv_zero(tmp_path):
    grid = TimeGrid(1.0, 2)
    path = tmp_path / "c.csv"
    export_control_csv(grid, ControlTrajectory.constant(grid, 0.0), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,C"
    assert len(lines) == 4
    assert all(line.endswith(",0") for line in lines[1:])


def test_control_csv_round_trip_bitwise(tmp_path):
    grid = TimeGrid(3.7, 97)
    rng = np.random.default_rng(0)
    c = ControlTrajectory(rng.random(98) * 10.0 ** rng.integers(-12, 3, 98))
    path = tmp_path / "c.csv"
    export_control_csv(grid, c, path)
    t, back = read_control_csv(path)
    assert back.values.tobytes() == c.values.tobytes()
    assert t.tobytes() == grid.times.tobytes()


def test_read_control_csv_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("time,dose\n0,1\n")
    with pytest.raises(InvalidArgumentError):
        read_control_csv(p)


def test_iterations_csv_matches_report(tmp_path):
    m = build_interval_mesh(20)
    u0 = FeField.interpolate(m, lambda x: (np.cos(np.pi * x) + 1) / 2)
    p = Problem(m, ModelParams(0.5, 0.1), TimeGrid(5.0, 50), u0)
    rep = optimize(p, OptimizeConfig(alpha=100.0, tol=1e-8))
    assert rep.converged
    written = export_control_csv(p.grid, rep.final_control, tmp_path / "control.csv", rep)
    assert written[1].name == "iterations.csv"
    header, cols = read_csv_columns(written[1])
    assert header == ["iter", "J", "residual_norm", "delta_norm"]
    assert len(cols[0]) == rep.iterations
    assert cols[1].tobytes() == np.array([r.J for r in rep.per_iter]).tobytes()


def test_vtk_single_triangle(tmp_path):
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    path = export_field_vtk(m, FeField(m, [0.0, 0.5, 1.0]), tmp_path / "t.vtk")
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "POINTS 3 double" in text
    assert "CELLS 1 4" in text and "3 0 1 2" in text
    assert text[text.index("CELL_TYPES 1") + 1] == "5"
    assert "SCALARS u double 1" in text
    assert text[-3:] == ["0", "0.5", "1"]


def test_vtk_grid_read_by_meshio(tmp_path):
    m = triangulate_grid(GridImage(np.ones((3, 3))), 0.0)
    u = FeField.interpolate(m, lambda x, y: x + 10 * y)
    path = export_field_vtk(m, u, tmp_path / "g.vtk")
    back = meshio.read(path)
    assert len(back.points) == 9
    tri = back.cells_dict["triangle"]
    assert tri.shape == (8, 3)
    np.testing.assert_array_equal(tri, m.elements)
    np.testing.assert_array_equal(back.points[:, :2], m.nodes)
    assert np.all(back.points[:, 2] == 0)
    np.testing.assert_array_equal(back.point_data["u"].ravel(), u.coeffs)


def test_vtk_blob_connectivity(tmp_path):
    m = triangulate_grid(blob_image(30), 0.1)
    path = export_field_vtk(m, None, tmp_path / "mesh.vtk")
    np.testing.assert_array_equal(meshio.read(path).cells_dict["triangle"], m.elements)


def test_vtk_rejects_1d(tmp_path):
    m = build_interval_mesh(3)
    with pytest.raises(UnsupportedFormatError):
        export_field_vtk(m, np.zeros(4), tmp_path / "x.vtk")
    m2 = triangulate_grid(GridImage(np.ones((2, 2))), 0.0)
    with pytest.raises(InvalidArgumentError):
        export_field_vtk(m2, np.zeros(3), tmp_path / "y.vtk")


def test_field_csv(tmp_path):
    m = build_interval_mesh(4)
    path = export_field_csv(m, FeField.interpolate(m, lambda x: x * x), tmp_path / "u.csv")
    header, cols = read_csv_columns(path)
    assert header == ["x", "u"]
    np.testing.assert_array_equal(cols[1], cols[0] ** 2)
    with pytest.raises(UnsupportedFormatError):
        export_field_csv(triangulate_grid(GridImage(np.ones((2, 2))), 0.0), np.zeros(4),
                         tmp_path / "v.csv")


def test_burden_zero_and_one(tmp_path):
    m = build_interval_mesh(10)
    grid = TimeGrid(2.5, 25)
    for value in (0.0, 1.0):
        s = SpaceTimeTrajectory(m, grid, np.full((26, 11), value))
        _, cols = read_csv_columns(export_burden_timeseries(s, tmp_path / "b.csv"))
        np.testing.assert_allclose(cols[1], value, rtol=1e-14, atol=0)
        assert cols[2][-1] == pytest.approx(value * 2.5, rel=1e-14)


def test_burden_logistic_oracle(tmp_path):
    m = build_interval_mesh(2)
    p = Problem(m, ModelParams(1.0, 0.1), TimeGrid(1.0, 1000), FeField.constant(m, 0.5))
    s = p.state(ControlTrajectory.constant(p.grid, 0.3))
    _, cols = read_csv_columns(export_burden_timeseries(s, tmp_path / "b.csv"))
    ref = quad(lambda t: logistic(t, 0.5, 1.0, 0.3), 0, 1, epsabs=1e-14, epsrel=1e-13)[0]
    assert abs(cols[2][-1] - ref) / ref <= 1e-4


def test_export_spec():
    grid = TimeGrid(42.0, 420)
    assert ExportSpec().snapshot_indices(grid) == [0, 105, 210, 420]
    assert ExportSpec(snapshot_times=[10.04, 10.06]).snapshot_indices(grid) == [100, 101]
    with pytest.raises(InvalidArgumentError):
        ExportSpec(formats=("png",))
    with pytest.raises(InvalidArgumentError):
        ExportSpec(snapshot_times=[50.0]).snapshot_indices(grid)


def test_snapshots_and_determinism(tmp_path):
    m = triangulate_grid(GridImage(np.ones((4, 4))), 0.0)
    grid = TimeGrid(2.0, 8)
    s = SpaceTimeTrajectory(m, grid, np.random.default_rng(1).random((9, 16)))
    files = []
    for sub in ("a", "b"):
        written = export_snapshots(s, ExportSpec(tmp_path / sub, [0.0, 0.5, 2.0]))
        files.append(written)
    assert [f.name for f in files[0]] == ["u_t0.vtk", "u_t0.5.vtk", "u_t2.vtk"]
    for a, b in zip(*files):
        assert a.read_bytes() == b.read_bytes()
    back = meshio.read(files[0][1])
    np.testing.assert_array_equal(back.point_data["u"].ravel(), s.values[2])
