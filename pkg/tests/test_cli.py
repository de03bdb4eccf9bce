import json

import pytest

from musclearm.cli import main


def write_config(tmp_path, seed=7):
    doc = {
        "seed": seed,
        "empirical_postures": 600,
        "babble": {"total_samples": 800, "eval_every": 400},
        "abundance": {"trials": 1, "max_evals_per_trial": 130, "n_eval": 60},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_seed_is_required(tmp_path, capsys):
    code = main(["goalspace", "--out", str(tmp_path)])
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_full_pipeline_subcommands(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["goalspace", "--config", str(cfg), "--out", str(out)]) == 0
    assert "goal_count" in capsys.readouterr().out
    assert main(["learn", "--config", str(cfg), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "convex vs cut" in printed
    assert main(["evaluate", "--config", str(cfg), "--out", str(out), "--use-feedback"]) == 0
    capsys.readouterr()
    assert main(["abundance", "--config", str(cfg), "--out", str(out), "--goal-ids", "0"]) == 0
    assert "goal 0" in capsys.readouterr().out
    assert main(["cma-bench", "--config", str(cfg), "--out", str(out)]) == 0
    assert "sphere" in capsys.readouterr().out


def test_learn_without_goalspace_exits_4(tmp_path, capsys):
    cfg = write_config(tmp_path)
    code = main(["learn", "--config", str(cfg), "--out", str(tmp_path / "empty")])
    assert code == 4


def test_goal_outside_cut_exits_5(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["goalspace", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["learn", "--config", str(cfg), "--out", str(out)]) == 0
    code = main(["abundance", "--config", str(cfg), "--out", str(out), "--goal-ids", "9999"])
    assert code == 5


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "plant": {"joint_count": 5}}))
    code = main(["goalspace", "--config", str(bad), "--out", str(tmp_path)])
    assert code == 2


def test_set_overrides(tmp_path, capsys):
    out = tmp_path / "run"
    code = main([
        "goalspace", "--seed", "3", "--out", str(out),
        "--set", "empirical_postures=500",
        "--set", "grid_spacing=0.04",
    ])
    assert code == 0
    printed = capsys.readouterr().out
    assert "empirical_count: 500" in printed
    code = main(["goalspace", "--seed", "3", "--out", str(out), "--set", "nonsense"])
    assert code == 2


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(tmp_path, seed=1)
    out = tmp_path / "run"
    assert main(["goalspace", "--config", str(cfg), "--seed", "2", "--out", str(out)]) == 0
    assert "seed=2" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["goalspace", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["learn", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("goalspace.json", "model.json", "session.csv", "evals.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
