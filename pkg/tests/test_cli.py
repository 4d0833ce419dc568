import numpy as np
import pytest

from knr import koopman
from knr.cli import main


def test_identify_writes_loadable_model(tmp_path, capsys):
    out = tmp_path / "vdp_model.txt"
    code = main(["identify", "--system", "vdp", "--trials", "5",
                 "--horizon", "1.0", "--seed", "3", "--out", str(out)])
    assert code == 0
    assert out.read_text().startswith("KNR-MODEL v1\n")
    model = koopman.load_model(out)
    assert model.N == 4 and model.m == 1
    assert "residual" in capsys.readouterr().out


def test_identify_deterministic_output(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        assert main(["identify", "--system", "crane", "--trials", "5",
                     "--horizon", "0.5", "--seed", "9", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_track_nr(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code = main(["track", "--system", "vdp", "--controller", "nr",
                 "--tf", "1.0", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x1,x2,y1,r1,u1"
    assert len(lines) == 101
    assert "mse=" in capsys.readouterr().out


def test_track_knr_with_model(tmp_path):
    model_path = tmp_path / "model.txt"
    assert main(["identify", "--system", "vdp", "--seed", "0",
                 "--out", str(model_path)]) == 0
    out = tmp_path / "knr.csv"
    code = main(["track", "--system", "vdp", "--controller", "knr",
                 "--model", str(model_path), "--tf", "1.0", "--out", str(out)])
    assert code == 0
    assert out.exists()


def test_track_knr_generator_model_flow(tmp_path, capsys):
    # the car pipeline persists a generator fit; tracking through the CLI
    # must apply the per-system knr controller settings (trust ceiling,
    # derivative source) or the standstill start blows up
    model_path = tmp_path / "car.txt"
    assert main(["identify", "--system", "car", "--seed", "0",
                 "--out", str(model_path)]) == 0
    assert "generator" in model_path.read_text().splitlines()[1]
    out = tmp_path / "car.csv"
    code = main(["track", "--system", "car", "--controller", "knr",
                 "--model", str(model_path), "--tf", "5.0", "--out", str(out)])
    assert code == 0
    msg = capsys.readouterr().out
    mse_value = float(msg.split("mse=")[1].split()[0])
    assert mse_value < 1e-2


def test_track_knr_requires_model(tmp_path, capsys):
    code = main(["track", "--system", "vdp", "--controller", "knr",
                 "--tf", "1.0", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_track_model_system_mismatch(tmp_path):
    model_path = tmp_path / "model.txt"
    main(["identify", "--system", "vdp", "--seed", "0", "--out", str(model_path)])
    code = main(["track", "--system", "crane", "--controller", "knr",
                 "--model", str(model_path), "--tf", "1.0",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2


def test_unknown_system_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["track", "--system", "lorenz", "--controller", "nr",
              "--out", str(tmp_path / "x.csv")])
    assert info.value.code == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_code(tmp_path, capsys):
    # a huge gain blows the Van der Pol loop up within a few steps
    code = main(["track", "--system", "vdp", "--controller", "nr",
                 "--alpha", "1e9", "--tf", "2.0",
                 "--out", str(tmp_path / "boom.csv")])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_compare_writes_report_and_trajectories(tmp_path, capsys):
    report = tmp_path / "report.csv"
    traj_dir = tmp_path / "trajs"
    code = main(["compare", "--system", "vdp", "--runs", "2", "--seed", "5",
                 "--report", str(report), "--traj-dir", str(traj_dir)])
    assert code == 0
    lines = report.read_text().splitlines()
    assert lines[0].startswith("system,controller,runs,")
    assert len(lines) == 3
    names = sorted(p.name for p in traj_dir.iterdir())
    assert names == ["vdp_knr_seed5.csv", "vdp_knr_seed6.csv",
                     "vdp_nr_seed5.csv", "vdp_nr_seed6.csv"]
    assert "KNR" in capsys.readouterr().out
