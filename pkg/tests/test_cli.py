import csv
import json
from pathlib import Path

import pytest

from selfplay import cli, config
from selfplay.errors import ReplayDivergence

CONFIGS = Path(__file__).parent.parent / "configs"


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = cli.main(["train", "--config", str(CONFIGS / "tictactoe_selfplay.toml"), "--out", str(out), "--quiet",
                   "--override", "total_steps=2", "--override", "batch_size=8",
                   "--override", "run.log_trajectories_every=1", "--override", "eval.every=0",
                   "--override", "checkpoint_every=1"])
    assert rc == 0
    return out


def test_train_one_step(tmp_path):
    rc = cli.main(["train", "--config", str(CONFIGS / "kuhn_selfplay.toml"), "--override", "total_steps=1",
                   "--override", "batch_size=8", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    assert len(_rows(tmp_path / "metrics.csv")) == 1
    assert (tmp_path / "checkpoints" / "step_0001.json").exists()
    written = config.load(tmp_path / "config.toml")
    assert written.run.total_steps == 1 and written.run.batch_size == 8
    assert "step 1" in (tmp_path / "run.log").read_text()


def test_train_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("SELFPLAY_RUNS", str(tmp_path))
    assert cli.main(["train", "--override", "total_steps=0", "--quiet"]) == 0
    (run,) = tmp_path.iterdir()
    assert run.name == f"train-{config.resolve(None, ['total_steps=0']).digest()}"


def test_validation_exit_code(tmp_path, capsys):
    rc = cli.main(["train", "--override", "run.total_stepz=1", "--out", str(tmp_path), "--quiet"])
    assert rc == cli.EXIT_INVALID
    assert "run.total_stepz" in capsys.readouterr().err


def test_aborted_exit_code(tmp_path, monkeypatch):
    from selfplay import runtime
    from selfplay.errors import SelfPlayError

    def broken(*a, **k):
        raise SelfPlayError("env down")

    monkeypatch.setattr(runtime, "play_trajectory", broken)
    rc = cli.main(["train", "--override", "total_steps=1", "--override", "batch_size=2", "--out", str(tmp_path),
                   "--quiet"])
    assert rc == cli.EXIT_ABORTED


def test_replay_fresh_run_is_exact(tiny_run, capsys):
    traj = tiny_run / "trajectories" / "step_0002.jsonl"
    ckpt = tiny_run / "checkpoints" / "step_0001.json"
    assert cli.main(["replay", "--trajectories", str(traj), "--checkpoint", str(ckpt)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["divergences"] == 0 and report["trajectories"] == 8
    assert report["max_logprob_deviation"] <= 1e-12


def test_replay_wrong_checkpoint_reports_deviation(tiny_run, tmp_path):
    # the step-2 batch was collected with the step-1 parameters; step 0 is the wrong table
    traj = tiny_run / "trajectories" / "step_0002.jsonl"
    records = [json.loads(x) for x in traj.read_text().splitlines()]
    from selfplay.runtime import load_policy

    rep = cli.replay_records(records, load_policy(tiny_run / "checkpoints" / "step_0000.json"))
    assert rep["divergences"] == 0 and rep["max_logprob_deviation"] > 0


def test_replay_tampered_action(tiny_run, tmp_path):
    traj = tiny_run / "trajectories" / "step_0001.jsonl"
    records = [json.loads(x) for x in traj.read_text().splitlines()]
    rec = records[3]
    turn = rec["turns"][2]
    played = [t["action"] for t in rec["turns"][:2]]
    assert turn["legal"]
    turn["action"] = played[0]  # an occupied cell
    bad = tmp_path / "tampered.jsonl"
    bad.write_text("".join(json.dumps(r) + "\n" for r in records))
    assert cli.main(["replay", "--trajectories", str(bad), "--quiet"]) == cli.EXIT_DIVERGED
    with pytest.raises(ReplayDivergence) as exc:
        cli.replay_records(records)
    assert "trajectory 3 turn 2" in str(exc.value)


def test_inspect_checkpoint(tiny_run, capsys):
    assert cli.main(["inspect-checkpoint", str(tiny_run / "checkpoints" / "step_0002.json"), "--table"]) == 0
    out = capsys.readouterr().out
    head = json.loads(out[: out.index("}\n") + 1])
    assert head["step"] == 2 and head["entries"] > 0
    assert "TicTacToe/p0/.........\t" in out


def test_eval_command(tiny_run, tmp_path):
    out = tmp_path / "ev"
    ckpt = str(tiny_run / "checkpoints" / "step_0002.json")
    rc = cli.main(["eval", "--config", str(CONFIGS / "tictactoe_selfplay.toml"), "--checkpoint", ckpt,
                   "--opponent", "random", "--opponent", "script:minimax", "--opponent", ckpt,
                   "--games", "20", "--out", str(out), "--quiet"])
    assert rc == 0
    reports = json.loads((out / "eval.json").read_text())
    assert reports[0]["agent_b"] == "UniformRandomLegal" and len(reports) == 3
    assert all(r["wins"] + r["draws"] + r["losses"] == 20 for r in reports)
    assert (out / "config.toml").exists()


def test_exploitability_command(tmp_path, capsys):
    assert cli.main(["exploitability", "--checkpoint", "nash"]) == 0
    assert json.loads(capsys.readouterr().out)["exploitability"] == pytest.approx(0, abs=1e-12)
    out = tmp_path / "x.json"
    assert cli.main(["exploitability", "--checkpoint", "uniform", "--out", str(out), "--quiet"]) == 0
    assert json.loads(out.read_text())["exploitability"] == pytest.approx(11 / 24)


def test_ablate_rq4_small(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "RQ4_STEPS", 4)
    rc = cli.main(["ablate", "rq4", "--override", "batch_size=8", "--override", "eval.every=0",
                   "--seeds", "0", "1", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    rows = _rows(tmp_path / "ablate_rq4_seed0.csv")
    assert len(rows) == 4
    assert {"rae_on:grad_norm", "rae_off:grad_norm", "rae_on:entropy", "rae_off:entropy"} <= set(rows[0])
    summary = json.loads((tmp_path / "ablate_rq4_summary.json").read_text())
    assert set(summary["arms"]) == {"rae_on", "rae_off"} and summary["seeds"] == [0, 1]
    assert (tmp_path / "config.toml").exists()
    # arms share step seeds: the batches are identical, only the updates differ
    on = config.load(tmp_path / "seed0" / "rae_on" / "config.toml")
    off = config.load(tmp_path / "seed0" / "rae_off" / "config.toml")
    assert on.run == off.run and on.rae.enabled and not off.rae.enabled
    first_on = _rows(tmp_path / "seed0" / "rae_on" / "metrics.csv")[0]
    first_off = _rows(tmp_path / "seed0" / "rae_off" / "metrics.csv")[0]
    assert first_on["mean_return_p0"] == first_off["mean_return_p0"]


def test_ablate_rq2_arms(tmp_path):
    summary = cli.run_ablation("rq2", (None, ["total_steps=2", "batch_size=4", "eval.every=2", "eval.games=4",
                                              "games.0.rounds_total=1"]), [0], tmp_path)
    assert set(summary["arms"]) == {"selfplay", "random", "scripted", "frozen"}
    header = _rows(tmp_path / "ablate_rq2_seed0.csv")[0].keys()
    assert "scripted:eval_KuhnPoker_vs_random_win_rate" in header


def test_coefficient_of_variation():
    assert cli.coefficient_of_variation([1.0, 1.0, 1.0]) == 0.0
    assert cli.coefficient_of_variation([1.0, 3.0]) == pytest.approx(2**0.5 / 2)
    assert cli.coefficient_of_variation([1.0]) != cli.coefficient_of_variation([1.0])  # nan
