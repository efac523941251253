import json

import pytest
from click.testing import CliRunner

from langground.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    from langground import corpus, world

    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    env = world.make_small_env()
    corpus.save_corpus(corpus.gen_synthetic_corpus(env, 4, seed=0), path)
    return path


def test_plan_go_north_one_step(runner):
    result = runner.invoke(
        main, ["plan", "--command", "go north", "--env", "small",
               "--planner", "amdp"]
    )
    assert result.exit_code == 0, result.output
    assert "goNorth" in result.output
    assert "steps:    1 north" in result.output


def test_plan_unknown_planner_exits_2(runner):
    result = runner.invoke(
        main, ["plan", "--command", "go north", "--planner", "warp"]
    )
    assert result.exit_code == 2


def test_train_unknown_model_exits_2(runner, tiny_corpus):
    result = runner.invoke(
        main, ["train", "--model", "markov", "--corpus", str(tiny_corpus),
               "--out", "m.json"]
    )
    assert result.exit_code == 2


def test_gen_writes_jsonl(runner, tmp_path):
    out = tmp_path / "corpus.jsonl"
    result = runner.invoke(
        main, ["gen", "--env", "small", "--n", "2", "--seed", "3",
               "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines
    record = json.loads(lines[0])
    assert set(record) == {"command", "level", "reward"}


def test_train_then_eval_cv_produces_reports(runner, tmp_path, tiny_corpus):
    model_path = tmp_path / "ibm2.json"
    result = runner.invoke(
        main, ["train", "--model", "ibm2", "--corpus", str(tiny_corpus),
               "--env", "small", "--out", str(model_path)]
    )
    assert result.exit_code == 0, result.output
    assert model_path.exists()

    outdir = tmp_path / "reports"
    result = runner.invoke(
        main, ["eval", "--mode", "cv", "--env", "small",
               "--corpus", str(tiny_corpus), "--models", "ibm2",
               "--outdir", str(outdir)]
    )
    assert result.exit_code == 0, result.output
    assert (outdir / "cv_report.json").exists()
    assert (outdir / "cv_report.csv").exists()
    assert (outdir / "cv_accuracy.png").exists()


def test_plan_with_trained_model(runner, tmp_path, tiny_corpus):
    model_path = tmp_path / "ibm2.json"
    runner.invoke(
        main, ["train", "--model", "ibm2", "--corpus", str(tiny_corpus),
               "--env", "small", "--out", str(model_path)]
    )
    result = runner.invoke(
        main, ["plan", "--command", "go north", "--env", "small",
               "--model", str(model_path)]
    )
    assert result.exit_code == 0, result.output
    assert "satisfied:True" in result.output


def test_eval_rejects_unknown_model_kind(runner):
    result = runner.invoke(
        main, ["eval", "--mode", "cv", "--models", "gpt", "--env", "small"]
    )
    assert result.exit_code != 0


def test_config_file_round_trip(tmp_path):
    from langground.config import load_config

    cfg_path = tmp_path / "config.ini"
    cfg_path.write_text(
        "gamma = 0.95\nepochs = 12  # short run\nworkers = 2\n"
    )
    config = load_config(cfg_path)
    assert config.gamma == 0.95
    assert config.epochs == 12
    assert config.workers == 2


def test_config_rejects_unknown_key(tmp_path):
    from langground.config import load_config

    cfg_path = tmp_path / "config.ini"
    cfg_path.write_text("warp_speed = 9\n")
    with pytest.raises(ValueError):
        load_config(cfg_path)
