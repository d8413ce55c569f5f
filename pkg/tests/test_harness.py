import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcn_membrane.errors import InsufficientPointsError, InvalidArgumentError, SingularDirectorError
from lcn_membrane.fem import interpolate
from lcn_membrane.harness import (
    PRESETS,
    ConvergenceTable,
    ExperimentSpec,
    cells_for_h,
    convergence_study,
    director_preset,
    export_surface,
    loglog_slope,
    read_vtk,
    run_experiment,
)
from lcn_membrane.harness.cli import main, parse_h_list
from lcn_membrane.harness.experiment import CONVERGENCE_COLUMNS
from lcn_membrane.harness.presets import CENTERED_SQUARE, UNIT_SQUARE, initializer_preset
from lcn_membrane.mesh import structured_square


def small_spec(**kw):
    base = dict(name="small", h=1.0 / 8, tol2=1e-7, tau=0.8)
    base.update(kw)
    return ExperimentSpec.preset("experiment1", **base)


def test_director_presets():
    assert np.allclose(director_preset("smooth", [0.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2))
    assert np.allclose(director_preset("defect", [0.3, 0.0], CENTERED_SQUARE), [1.0, 0.0])
    with pytest.raises(SingularDirectorError):
        director_preset("defect", [[0.0, 0.0]], CENTERED_SQUARE)
    with pytest.raises(InvalidArgumentError):
        director_preset("nope", [0.0, 0.0])


def test_pyramid_director_circulates():
    pts = np.array([[0.5, 0.1], [0.9, 0.5], [0.5, 0.9], [0.1, 0.5]])
    m = director_preset("pyramid", pts, UNIT_SQUARE)
    assert np.allclose(m, [[1, 0], [0, 1], [-1, 0], [0, -1]])
    # tangent to the boundary in every quarter
    assert np.allclose(director_preset("pyramid_right", pts, UNIT_SQUARE), m)


@given(st.floats(-0.49, 0.49), st.floats(-0.49, 0.49))
@settings(max_examples=100, deadline=None)
def test_defect_director_unit(x, y):
    if x * x + y * y < 1e-12:
        return
    m = director_preset("defect", [[x, y]], CENTERED_SQUARE)
    assert np.linalg.norm(m) == pytest.approx(1.0)


def test_cells_for_h():
    assert cells_for_h(1.0 / 32, CENTERED_SQUARE) == 16
    assert cells_for_h(1.0 / 128, UNIT_SQUARE) == 64
    with pytest.raises(InvalidArgumentError):
        cells_for_h(0.3, UNIT_SQUARE)


def test_parse_h_list():
    assert parse_h_list("16,32") == [1 / 16, 1 / 32]
    assert parse_h_list("1/64, 0.0078125") == [1 / 64, 1 / 128]


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_resolve_and_roundtrip(name):
    spec = ExperimentSpec.preset(name)
    back = ExperimentSpec.from_json(spec.to_json())
    assert back == spec
    mesh = spec.with_h(1.0 / 16).build_mesh() if spec.mesh == "structured" else None
    if mesh is not None:
        assert spec.with_h(1.0 / 16).build_material(mesh).n_elements == mesh.n_triangles


def test_spec_validation(tmp_path):
    with pytest.raises(InvalidArgumentError):
        ExperimentSpec.from_dict({"name": "x", "bogus": 1})
    with pytest.raises(InvalidArgumentError):
        ExperimentSpec(tau="soon")
    with pytest.raises(InvalidArgumentError):
        ExperimentSpec(tau=-1.0)
    with pytest.raises(InvalidArgumentError):
        ExperimentSpec(mesh="crease-fitted")
    with pytest.raises(InvalidArgumentError):
        ExperimentSpec(mesh="strip-mask", creases="diagonals")
    with pytest.raises(InvalidArgumentError):
        ExperimentSpec.preset("missing")
    path = tmp_path / "spec.json"
    small_spec().to_json(path)
    assert ExperimentSpec.from_json(str(path)) == small_spec()


def test_strip_mask_material():
    spec = ExperimentSpec.preset("pyramid4", h=1.0 / 16)
    mesh = spec.build_mesh()
    mat = spec.build_material(mesh)
    assert set(np.unique(mat.c_r)) == {0.0, 100.0}
    assert not spec.crease_aware


def test_vtk_two_triangles(tmp_path):
    mesh = structured_square(1)
    y = interpolate(initializer_preset("flat"), mesh)
    path = tmp_path / "s.vtk"
    export_surface(y, mesh, path)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "POINTS 4 double" in text and "CELLS 2 8" in text and "CELL_TYPES 2" in text
    pts, tris, z = read_vtk(path)
    assert pts.shape == (4, 3) and tris.shape == (2, 3)
    assert np.all(z == 0)


def test_vtk_roundtrip(tmp_path, rng):
    mesh = structured_square(5, pattern="crisscross")
    y = rng.normal(size=mesh.n_dofs)
    path = tmp_path / "r.vtk"
    export_surface(y, mesh, path, title="round trip")
    pts, tris, z = read_vtk(path)
    assert np.abs(pts - y.reshape(-1, 3)).max() <= 1e-12
    assert np.array_equal(tris, mesh.triangles)
    assert np.abs(z - y.reshape(-1, 3)[:, 2]).max() <= 1e-12
    with pytest.raises(ValueError):
        export_surface(y[:-3], mesh, path)


def test_loglog_slope():
    h = np.array([1 / 8, 1 / 16, 1 / 32])
    assert loglog_slope(h, 3 * h**2) == pytest.approx(2.0)
    with pytest.raises(InsufficientPointsError):
        loglog_slope([0.1], [0.2])


def test_convergence_study_needs_three_sizes():
    with pytest.raises(InsufficientPointsError):
        convergence_study(small_spec(), [1 / 8])


def test_convergence_table_csv(tmp_path):
    spec = small_spec()
    table = convergence_study(spec, [1 / 4, 1 / 8, 1 / 16], tau=0.8)
    path = tmp_path / "rates.csv"
    text = table.to_csv(path)
    assert text.splitlines()[0] == ",".join(CONVERGENCE_COLUMNS)
    rows = ConvergenceTable.read_csv(path)
    assert [float(r["h"]) for r in rows] == [1 / 4, 1 / 8, 1 / 16]
    assert all(r["status"] == "converged" for r in rows)
    assert table.slope_e > 0.5


def test_run_experiment_outputs(tmp_path):
    res = run_experiment(small_spec(), outdir=tmp_path)
    assert res.converged
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "converged" and summary["N"] == res.report.N
    assert summary["n"] == 4 and summary["e_h"] == res.report.final_e_h
    log = (tmp_path / "log.csv").read_text().splitlines()
    assert len(log) == res.report.N + 2
    pts, _, _ = read_vtk(tmp_path / "surface.vtk")
    assert np.allclose(pts, res.deformation.nodal, atol=1e-15)


def test_cli(tmp_path, capsys):
    assert main(["show", "experiment1"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["name"] == "experiment1"
    spec_path = tmp_path / "spec.json"
    small_spec().to_json(spec_path)
    assert main(["run", str(spec_path), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "log.csv").exists()
    assert main(["run", str(spec_path), "--tau", "40"]) == 1
    assert main(["run", "no-such-spec"]) == 2
    assert main(["--sequential", "sweep", str(spec_path), "--h", "4,8,16"]) == 0
    out = capsys.readouterr().out
    assert "slope e_h" in out
    assert main(["export", str(spec_path), "--vtk", str(tmp_path / "x.vtk")]) == 0
    assert read_vtk(tmp_path / "x.vtk")[0].shape[1] == 3
    assert main(["taumax", str(spec_path), "--tol", "0.5", "--cap", "8"]) == 0
    assert "tau_max" in capsys.readouterr().out
