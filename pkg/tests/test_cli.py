import json

import numpy as np
import pytest

from dengue_moo import approximate_pareto, csvio, hypervolume_2d, integrate_rk4, knee_point, normalize_objectives
from dengue_moo.cli import EXIT_DEGENERATE, EXIT_OK, EXIT_USAGE, main
from dengue_moo.pareto import filter_front


@pytest.fixture(scope="module")
def small_archive(anchors):
    return approximate_pareto("eps-constraint", 8, anchors=anchors)


def test_trajectory_roundtrip(tmp_path):
    traj = integrate_rk4(np.linspace(0, 1, 337))
    path = csvio.write_trajectory(tmp_path / "t.csv", traj, {"note": "x"})
    times, states = csvio.read_trajectory(path)
    np.testing.assert_array_equal(times, traj.times)
    np.testing.assert_array_equal(states, traj.states)
    assert csvio.read_config_header(path) == {"note": "x"}
    header = [line for line in path.read_text().splitlines() if not line.startswith("#")][0]
    assert header == "t,s_h,e_h,i_h,r_h,a_m,s_m,e_m,i_m"


def test_archive_roundtrip_reproduces_hypervolume(tmp_path, small_archive):
    path = csvio.write_archive(tmp_path / "a.csv", small_archive)
    table = csvio.read_archive(path)
    np.testing.assert_array_equal(table.points, small_archive.points())
    np.testing.assert_array_equal(table.controls, small_archive.controls())
    assert table.status == [e.status for e in small_archive.entries]
    anchors = small_archive.anchors
    hv = hypervolume_2d(normalize_objectives(filter_front(small_archive.points()), anchors.z_ideal, anchors.z_nadir))
    again = hypervolume_2d(normalize_objectives(filter_front(table.points), table.ideal, table.nadir))
    assert abs(hv - again) <= 1e-12
    header = [line for line in path.read_text().splitlines() if not line.startswith("#")][0]
    assert header == "method,beta_param,f1,f2,status"


def test_front_and_matrix_roundtrip(tmp_path, rng):
    pts = rng.random((7, 2))
    np.testing.assert_array_equal(csvio.read_front(csvio.write_front(tmp_path / "f.csv", pts, range(7))), pts)
    m = rng.random((3, 5))
    rows, cols, back = csvio.read_matrix(csvio.write_matrix(tmp_path / "m.csv", [1, 2, 3], np.arange(5) / 4, m))
    np.testing.assert_array_equal(back, m)
    np.testing.assert_array_equal(cols, np.arange(5) / 4)


def test_simulate_writes_full_grid(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--control", "1", "--output", str(out)]) == EXIT_OK
    times, states = csvio.read_trajectory(out)
    assert len(times) == 337
    assert np.max(np.abs(states[:, :4].sum(axis=1) - 1)) <= 1e-9
    assert np.trapezoid(states[:, 2], times) == pytest.approx(0.0042, abs=4e-4)
    assert "f1 = 0.0042" in capsys.readouterr().out


def test_simulate_flag_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta_mh": 0.5, "control": 0.0}))
    out_cfg, out_flag = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", str(cfg), "--output", str(out_cfg)])
    main(["simulate", "--config", str(cfg), "--beta-mh", "0.75", "--output", str(out_flag)])
    assert csvio.read_config_header(out_cfg)["params"]["beta_mh"] == 0.5
    assert csvio.read_config_header(out_flag)["params"]["beta_mh"] == 0.75


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--control", "0.3", "--output", str(a)])
    main(["simulate", "--control", "0.3", "--output", str(a.with_name("b.csv"))])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("content, key", [
    ({"bogus": 1}, "bogus"),
    ({"grid": {"dt": 0.1}}, "dt"),
    ({"solver": {"speed": 3}}, "speed"),
])
def test_bad_config_keys_are_usage_errors(tmp_path, capsys, content, key):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(content))
    assert main(["simulate", "--config", str(cfg)]) == EXIT_USAGE
    assert key in capsys.readouterr().err


def test_missing_config_is_usage_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.json")]) == EXIT_USAGE


def test_knee_command(tmp_path, capsys):
    front = tmp_path / "front.csv"
    front.write_text("f1,f2\n0,1\n0.1,0.1\n1,0\n")
    assert main(["knee", str(front)]) == EXIT_OK
    assert "f1 = 0.1  f2 = 0.1" in capsys.readouterr().out
    collinear = tmp_path / "line.csv"
    collinear.write_text("f1,f2\n0,1\n0.5,0.5\n1,0\n")
    assert main(["knee", str(collinear)]) == EXIT_DEGENERATE


def test_knee_command_writes_control(tmp_path, small_archive):
    path = csvio.write_archive(tmp_path / "a.csv", small_archive, times=np.arange(337) * 0.25)
    out = tmp_path / "knee.csv"
    assert main(["knee", str(path), "--output", str(out)]) == EXIT_OK
    control = csvio.read_control(out)
    assert any(np.array_equal(control, c) for c in small_archive.controls())


def test_pareto_and_hypervolume_commands(tmp_path, capsys):
    assert main(["pareto", "--method", "eps-constraint", "--n-subproblems", "5",
                 "--output-dir", str(tmp_path)]) == EXIT_OK
    first = capsys.readouterr().out
    reported = float(first.splitlines()[1].split()[1])
    assert main(["hypervolume", str(tmp_path / "eps-constraint_archive.csv"),
                 str(tmp_path / "eps-constraint_front.csv")]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()[1:]
    assert all(float(line.split()[1]) == pytest.approx(reported, abs=1e-6) for line in lines)


def test_sweep_outputs(tmp_path, capsys):
    code = main(["sweep", "--n-subproblems", "4", "--beta-hm", "0.375,0.75", "--beta-mh", "0.375",
                 "--workers", "1", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    stem = "normal-constraint_beta_hm_0.75"
    for suffix in ("archive.csv", "archive.controls.csv", "control_surface.csv", "ih_surface.csv",
                   "extreme_c0.csv", "extreme_c1.csv"):
        assert (tmp_path / f"{stem}_{suffix}").exists()
    rows, cols, surface = csvio.read_matrix(tmp_path / f"{stem}_control_surface.csv")
    assert surface.shape == (4, 337) and np.all(np.diff(rows) >= 0)
    assert (tmp_path / "sweep_summary.csv").exists()


def test_sweep_rejects_empty_list(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"sweep": {"beta_hm": []}}))
    assert main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path)]) == EXIT_USAGE


def test_optimize_command(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["optimize", "--method", "eps-constraint", "--eps", "2.5", "--output", str(out)]) == EXIT_OK
    control = csvio.read_control(out)
    assert np.trapezoid(control, dx=0.25) <= 2.5 + 1e-6
    assert main(["optimize", "--method", "chebyshev"]) == EXIT_USAGE


def test_default_front_knee_in_high_curvature_region(pareto_runs):
    archive = pareto_runs("normal-constraint")
    a = archive.anchors
    front = filter_front(archive.points())
    knee = knee_point(normalize_objectives(front, a.z_ideal, a.z_nadir))
    assert 0.0 <= front[knee.index, 1] <= 5.0


def test_sweep_knee_needs_more_control_at_higher_transmission(tmp_path):
    main(["sweep", "--n-subproblems", "12", "--beta-hm", "0.375,0.75", "--beta-mh", "0.375",
          "--workers", "1", "--output-dir", str(tmp_path)])
    _, rows = csvio.read_rows(tmp_path / "sweep_summary.csv")
    by_value = {float(r["value"]): float(r["knee_control_integral"]) for r in rows if r["param"] == "beta_hm"}
    assert by_value[0.75] > by_value[0.375]
    # surface rows run from little to much insecticide; peak control grows along them
    _, _, surface = csvio.read_matrix(tmp_path / "normal-constraint_beta_hm_0.375_control_surface.csv")
    peaks = surface.max(axis=1)
    assert peaks[-1] >= peaks[0]
