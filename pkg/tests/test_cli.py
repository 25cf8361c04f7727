import os

import numpy as np
import pytest

from gdm_rd.cli import PRESETS, main, parse_config, run_config, timeseries_csv, vtk_text
from gdm_rd.errors import ConfigError
from gdm_rd.mesh import generate_mesh, read_mesh

SMALL = {"mesh.n": "6", "time.T": "0.4", "time.dt": "0.1", "output.snapshots": "0.2,0.4"}


def test_fig1_preset_parameters():
    cfg = parse_config("fig1")
    assert cfg["model.kappa"] == (0.0,)
    assert cfg["time.T"] == 20.0 and cfg["mesh.L"] == 20.0
    r = cfg.reaction
    assert (r.kind, r.rho, r.alpha) == ("bistable", 1.0, 0.1)
    m = cfg.build_mesh()
    assert m.n_cells == 3584 and m.is_simplicial
    assert cfg.snapshots == (0.2, 5.0, 15.0, 20.0)


@pytest.mark.parametrize("name,kappa", [("fig1", 0), ("fig2", 5), ("fig3", 10), ("fig4", 30)])
def test_tumour_presets_kappa(name, kappa):
    assert parse_config(f"preset = {name}")["model.kappa"] == (float(kappa),)


def test_fig7_fig8_presets():
    for name, kappa in (("fig7", 0.0), ("fig8", 100.0)):
        cfg = parse_config(name)
        cases = cfg.expand()
        assert len(cases) == 4
        assert {c["mesh.kind"][0] for c in cases} == {"triangular", "rectangular", "hexagonal", "kershaw"}
        assert all(c["model.kappa"] == (kappa,) and c["time.T"] == 2.0 for c in cases)


def test_cr_needs_triangles():
    with pytest.raises(ConfigError) as exc:
        parse_config("scheme = cr\nmesh.kind = hexagonal\ntime.T = 1")
    assert exc.value.key == "scheme"


def test_missing_final_time():
    with pytest.raises(ConfigError) as exc:
        parse_config("mesh.kind = rectangular\nscheme = hmm")
    assert exc.value.key == "time.T"


@pytest.mark.parametrize("text,key", [
    ("time.T = 1\nmesh.colour = red", "mesh.colour"),
    ("time.T = 1\nmodel.delta = 0", None),
    ("time.T = abc", "time.T"),
    ("preset = fig99", "preset"),
    ("time.T = 1\nmesh.kind = voronoi", "mesh.kind"),
    ("time.T = 1\noutput.snapshots = 3", "output.snapshots"),
])
def test_invalid_configs(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    if key is not None:
        assert exc.value.key == key


def test_comments_and_overrides():
    cfg = parse_config("preset = fig2  # kappa 5\n\ntime.dt = 0.1\n", {"time.T": "3", "output.snapshots": "3"})
    assert cfg["time.dt"] == 0.1 and cfg["time.T"] == 3.0 and cfg["model.kappa"] == (5.0,)


def test_fig1_snapshot_files(tmp_path):
    cfg = parse_config("fig1", {"mesh.n": "8", "time.T": "20", "time.dt": "1.0"})
    [(case, res, files)] = run_config(cfg, str(tmp_path))
    vtk = sorted(f for f in files if f.endswith(".vtk"))
    assert len(vtk) == 4
    assert {os.path.basename(f) for f in vtk} == {f"fig1_t{t}.vtk" for t in ("0.2", "5", "15", "20")}


def test_fig5_histograms(tmp_path):
    cfg = parse_config("fig5", {"mesh.n": "10"})
    out = run_config(cfg, str(tmp_path))
    assert len(out) == 4
    for case, hist, files in out:
        [path] = files
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        assert rows[:, 2].sum() == case.build_mesh().n_cells


def test_fig8_four_runs(tmp_path):
    cfg = parse_config("fig8", {"mesh.n": "6", "time.dt": "0.5"})
    out = run_config(cfg, str(tmp_path))
    assert len(out) == 4
    assert all(sum(f.endswith(".vtk") for f in files) == 1 for _, _, files in out)


def test_csv_outputs_reproducible(tmp_path):
    cfg = parse_config("fig3", SMALL)
    a = run_config(cfg, str(tmp_path / "a"))[0][2]
    b = run_config(cfg, str(tmp_path / "b"))[0][2]
    csvs = [(x, y) for x, y in zip(a, b) if x.endswith(".csv")]
    assert len(csvs) == 2
    for x, y in csvs:
        assert open(x, "rb").read() == open(y, "rb").read()


def test_timeseries_columns(tmp_path):
    cfg = parse_config("fig1", SMALL)
    [(case, res, _)] = run_config(cfg, str(tmp_path))
    lines = timeseries_csv(res.discretisation, res).splitlines()
    assert lines[0] == "t,mass,l2_norm"
    assert len(lines) == 1 + len(res.times)


def test_vtk_layout():
    m = generate_mesh("hexagonal", 1.0, 3)
    text = vtk_text(m, np.arange(m.n_cells, dtype=float)).splitlines()
    assert text[0] == "# vtk DataFile Version 2.0"
    assert text[3] == "DATASET UNSTRUCTURED_GRID"
    i = text.index(f"CELL_TYPES {m.n_cells}")
    assert set(text[i + 1:i + 1 + m.n_cells]) == {"7"}
    j = text.index("SCALARS density double 1")
    assert len(text[j + 2:]) == m.n_cells
    cells = text[text.index(next(t for t in text if t.startswith("CELLS"))) + 1:i]
    assert [int(c.split()[0]) for c in cells] == [len(lp) for lp in m.cell_loops]


def test_cr_vtk_uses_cell_averages(tmp_path):
    cfg = parse_config("scheme = cr\nmesh.kind = triangular\nmesh.n = 4\ntime.T = 0.1\ntime.dt = 0.1\n"
                       "model.reaction = none\nmodel.initial = constant\nmodel.initial_amplitude = 0.3")
    [(_, res, files)] = run_config(cfg, str(tmp_path))
    vtk = [f for f in files if f.endswith(".vtk")][0]
    lines = open(vtk).read().splitlines()
    vals = np.array(lines[lines.index("LOOKUP_TABLE default") + 1:], dtype=float)
    np.testing.assert_allclose(vals, 0.3, rtol=1e-12)


# main() --------------------------------------------------------------------

def test_main_run_preset(tmp_path, capsys):
    args = ["run", "--preset", "fig2", "--out", str(tmp_path)]
    for k, v in SMALL.items():
        args += ["--set", f"{k}={v}"]
    assert main(args) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 4 and all(os.path.exists(p) for p in printed)


def test_main_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mesh.kind = rectangular\nmesh.n = 4\nmesh.L = 1\ntime.T = 0.2\n"
                    "bc.kind = dirichlet\nbc.g = one\nmodel.reaction = none\n"
                    f"output.dir = {tmp_path / 'out'}\n")
    assert main(["run", "--config", str(path)]) == 0
    assert (tmp_path / "out" / "run_t0.2.vtk").exists()


def test_main_config_error(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("scheme = cr\nmesh.kind = kershaw\ntime.T = 1\n")
    assert main(["run", "--config", str(path)]) == 1
    assert "configuration error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_main_solver_failure(tmp_path, capsys):
    args = ["run", "--preset", "fig1", "--out", str(tmp_path), "--set", "mesh.n=4",
            "--set", "time.T=1", "--set", "time.dt=1", "--set", "output.snapshots=1",
            "--set", "solver.stepper=implicit", "--set", "solver.max_nonlinear_iters=1"]
    assert main(args) == 2
    assert "at step 0" in capsys.readouterr().err


def test_main_mesh(tmp_path, capsys):
    out = tmp_path / "k.mesh"
    assert main(["mesh", "--kind", "kershaw", "--n", "5", "--L", "2", "--out", str(out)]) == 0
    m = read_mesh(str(out))
    assert m.n_cells == 25 and m.cell_measure.sum() == pytest.approx(16.0)
    assert main(["mesh", "--kind", "pentagonal", "--n", "5", "--out", str(out)]) == 1


def test_main_convergence(tmp_path):
    out = tmp_path / "conv.csv"
    assert main(["convergence", "--scheme", "cr", "--levels", "2", "--base-n", "2",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert main(["convergence", "--scheme", "fem", "--levels", "2"]) == 1
    assert main(["convergence", "--scheme", "cr", "--mesh", "hexagonal"]) == 1


def test_every_preset_validates():
    for name in PRESETS:
        parse_config(name)
