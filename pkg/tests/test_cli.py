import csv
import json

import numpy as np
import pytest

from radaupinn import cli
from radaupinn.errors import TrainingAborted
from radaupinn.network import load_checkpoint

TINY = ["--set", "net.width=6", "--set", "net.depth=1", "--iterations", "5"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_tableau_csv(capsys):
    code, out, _ = run(capsys, "tableau", "--stages", "2")
    assert code == 0
    rows = list(csv.reader(line for line in out.splitlines() if not line.startswith("#")))
    assert rows[0] == ["c", "a_1", "a_2", "b"]
    np.testing.assert_allclose(np.array(rows[1:], dtype=float),
                               [[1 / 3, 5 / 12, -1 / 12, 3 / 4], [1, 3 / 4, 1 / 4, 1 / 4]],
                               atol=1e-15)
    assert "order=3" in out


def test_tableau_json(capsys):
    code, out, _ = run(capsys, "tableau", "--stages", "3", "--format", "json")
    blob = json.loads(out)
    assert code == 0 and blob["order"] == 5
    assert max(blob["residuals"].values()) <= 1e-12


def test_solve_to_stdout(capsys):
    code, out, _ = run(capsys, "solve", "--problem", "hessenberg", "--h", "0.25")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "t,y1,y2,y3,y4,z1,g_residual"
    assert len(lines) == 1 + 5


def test_solve_pendulum_deterministic_bytes(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "solve", "--problem", "pendulum", "--out", str(tmp_path / d))[0] == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["problem"] == "pendulum"
    assert "numpy" in manifest["versions"]


def test_rerun_from_manifest(tmp_path, capsys):
    run(capsys, "solve", "--problem", "pendulum", "--param", "m=2", "--h", "0.1",
        "--out", str(tmp_path / "a"))
    manifest = tmp_path / "a" / "manifest.json"
    assert run(capsys, "solve", "--config", str(manifest), "--out", str(tmp_path / "b"))[0] == 0
    assert ((tmp_path / "a" / "trajectory.csv").read_bytes()
            == (tmp_path / "b" / "trajectory.csv").read_bytes())


def test_invalid_problem_exit_2_lists_names(capsys):
    code, _, err = run(capsys, "solve", "--problem", "lorenz")
    assert code == 2
    assert "hessenberg" in err and "pendulum" in err


def test_bad_h_exit_2(capsys):
    assert run(capsys, "solve", "--h", "0")[0] == 2
    assert run(capsys, "solve", "--h", "0.3")[0] == 2


def test_bad_param_syntax_exit_2(capsys):
    assert run(capsys, "solve", "--param", "m2")[0] == 2


def test_numerical_failure_exit_3(capsys):
    code = run(capsys, "solve", "--set", "newton.tol=1e-30", "--set", "newton.max_iters=1")[0]
    assert code == 3


def test_training_abort_without_trajectory_exit_4(tmp_path, capsys, monkeypatch):
    def aborting(*args, **kwargs):
        raise TrainingAborted("diverged")

    monkeypatch.setattr(cli, "march", aborting)
    assert run(capsys, "train", *TINY, "--out", str(tmp_path))[0] == 4


def test_training_abort_after_first_segment_exit_4(tmp_path, capsys, monkeypatch):
    from radaupinn import pinn

    real = pinn.train_segment_fn

    def second_fails(p, tab, t_n, y_n, h, cfg, index, previous):
        if index == 1:
            raise TrainingAborted("diverged")
        return real(p, tab, t_n, y_n, h, cfg, index, previous)

    monkeypatch.setattr(cli, "march",
                        lambda *a, **k: pinn.march(*a, segment_fn=second_fails, **k))
    code, _, _ = run(capsys, "train", *TINY, "--tend", "0.15", "--out", str(tmp_path))
    assert code == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "diverged" in manifest["aborted"]
    assert len(manifest["segments"]) == 1


def test_train_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "train", *TINY, "--tend", "0.1", "--out", str(tmp_path))
    assert code == 0
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["t", "y1_pred"] and header[-1] == "ae_z1"
    params, layout = load_checkpoint(tmp_path / "checkpoints" / "segment_001.json")
    assert layout.width == 6 and params["U.W"].shape[0] == 6
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [s["seed"] for s in manifest["segments"]] == [0, 1]
    assert manifest["stage_points"] == 2 * 3
    hist = (tmp_path / "history.csv").read_text().splitlines()
    assert hist[0] == "segment,iteration,L_f,L_g,L_s,total,best_total"


def test_train_deterministic_bytes(tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "train", *TINY, "--tend", "0.1", "--seed", "3", "--out", str(tmp_path / d))
    for name in ("trajectory.csv", "history.csv", "segment_mae.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_study_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "study", *TINY, "--orders", "2,3", "--seeds", "0,1",
                     "--tend", "0.1", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert {r["v"] for r in summary["ranking"]} == {2, 3}
    assert "expected_outcome" in summary
    assert (tmp_path / "runs" / "v3_seed1" / "manifest.json").exists()
    assert (tmp_path / "ae_v3_seed0.csv").exists()
    rows = (tmp_path / "study.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2 * 5


def test_output_path_escape_rejected(tmp_path):
    out = cli.Output(str(tmp_path))
    with pytest.raises(Exception):
        out.path("../escape.csv")
