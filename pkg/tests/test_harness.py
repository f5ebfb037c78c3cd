import hashlib
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hybrid_rl.harness import (
    ConfigError,
    ExperimentConfig,
    Series,
    TrialError,
    load_config,
    render_svg,
    run_experiment,
    run_trial,
    shipped_configs,
)
from hybrid_rl.harness.cli import main
from hybrid_rl.harness.runner import OUT_ENV_VAR

SVG_NS = "{http://www.w3.org/2000/svg}"
GOLDEN_SVG_SHA256 = "4012ea24d677b1b7afb7c1bf85b52140dea26b334346aeb417b95534359ba6f9"

TINY_FOREST = """
name = "tiny"
trials = 2
base_seed = 3
n_off = 5
n_on = 4
behavior_policies = ["adversarial", "optimal"]
metrics = ["coverage", "visits", "avg_reward", "regret"]

[environment]
name = "forest"

[agent]
name = "ucbvi"
params = { bonus_scale = 0.1, tie_break = "random" }
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_FOREST)
    return path


def read_outputs(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


# --- configuration ------------------------------------------------------------------


def test_unknown_agent_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(TINY_FOREST.replace('name = "ucbvi"', 'name = "ucbvii"'))
    assert main(["validate", str(path)]) == 1
    assert "ucbvii" in capsys.readouterr().err


@pytest.mark.parametrize(
    "edit, needle",
    [
        (('name = "forest"', 'name = "pong"'), "pong"),
        (('"regret"]', '"regret", "sec"]'), "sec"),
        (("n_on = 4", "n_on = 0"), "n_on"),
        (("trials = 2", "trials = 0"), "trials"),
        (('"optimal"]', '"clever"]'), "clever"),
        (("n_off = 5", "n_off = 5\nmystery = 1"), "mystery"),
    ],
)
def test_config_errors_name_the_problem(tmp_path, edit, needle):
    path = tmp_path / "bad.toml"
    path.write_text(TINY_FOREST.replace(*edit))
    with pytest.raises(ConfigError, match=needle):
        load_config(path)


def test_agent_environment_mismatch(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(TINY_FOREST.replace('name = "forest"', 'name = "tetris"').replace('"coverage", "visits", ', ""))
    with pytest.raises(ConfigError, match="ucbvi"):
        load_config(path)


def test_json_config_equivalent(tiny_config, tmp_path):
    cfg = load_config(tiny_config)
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg


def test_config_round_trip(tiny_config):
    cfg = load_config(tiny_config)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.seeds() == [3, 4]


def test_overrides():
    cfg = load_config("forest_repro").with_overrides(trials=2, base_seed=None)
    assert cfg.trials == 2 and cfg.base_seed == 0


def test_shipped_configs_match_reproduction_setup():
    assert {"forest_repro", "tetris_repro", "desk_golf"} <= set(shipped_configs())
    forest = load_config("forest_repro")
    assert (forest.trials, forest.n_off, forest.n_on) == (30, 100, 200)
    assert set(forest.behavior_policies) == {"adversarial", "optimal", "uniform"}
    assert {"coverage", "visits", "avg_reward"} <= set(forest.metrics)
    tetris = load_config("tetris_repro")
    assert (tetris.trials, tetris.n_off, tetris.n_on) == (30, 200, 100)
    assert set(tetris.metrics) == {"eig_coverage", "avg_reward"}
    assert (tetris.svd_rank, tetris.offline_rank) == (60, 5)
    golf = load_config("desk_golf")
    assert golf.agent == "disc_golf" and golf.env_params == {"seed": 7, "S": 2, "A": 2, "H": 2}


def test_list_commands(capsys):
    assert main(["list-envs"]) == 0
    assert capsys.readouterr().out.split() == ["block", "forest", "random", "tetris"]
    assert main(["list-agents"]) == 0
    assert capsys.readouterr().out.split() == ["disc_golf", "lsvi_ucb", "ucbvi"]


# --- running ------------------------------------------------------------------------


def test_smoke_single_trial(tmp_path):
    cfg = load_config("forest_repro").with_overrides(trials=1, n_on=1, n_off=2)
    manifest = run_experiment(cfg, tmp_path)
    out = tmp_path / "forest_repro"
    assert (out / "manifest.json").exists()
    assert len(list(out.glob("*.csv"))) >= 1 and len(list(out.glob("*.svg"))) >= 1
    assert manifest.trials[0]["seed"] == 0


def test_run_then_replay(tiny_config, tmp_path, capsys):
    assert main(["run", str(tiny_config), "--out", str(tmp_path / "a")]) == 0
    manifest_path = tmp_path / "a" / "tiny" / "manifest.json"
    assert main(["replay", str(manifest_path), "--out", str(tmp_path / "b")]) == 0
    assert "replay ok" in capsys.readouterr().out
    first, second = read_outputs(tmp_path / "a" / "tiny"), read_outputs(tmp_path / "b" / "tiny")
    assert first and first == second


def test_replay_detects_tampering(tiny_config, tmp_path, capsys):
    assert main(["run", str(tiny_config), "--out", str(tmp_path), "--format", "csv"]) == 0
    path = tmp_path / "tiny" / "manifest.json"
    manifest = json.loads(path.read_text())
    key = next(iter(manifest["csv_sha256"]))
    manifest["csv_sha256"][key] = "0" * 64
    path.write_text(json.dumps(manifest))
    assert main(["replay", str(path)]) == 2
    assert "mismatch" in capsys.readouterr().err


def test_trials_override_echoed(tiny_config, tmp_path):
    assert main(["run", str(tiny_config), "--out", str(tmp_path), "--trials", "3", "--seed", "10", "--format", "csv"]) == 0
    manifest = json.loads((tmp_path / "tiny" / "manifest.json").read_text())
    assert manifest["config"]["trials"] == 3
    assert [t["seed"] for t in manifest["trials"]] == [10, 11, 12]


def test_parallel_equals_serial(tiny_config, tmp_path):
    assert main(["run", str(tiny_config), "--out", str(tmp_path / "s"), "--format", "csv"]) == 0
    assert main(["run", str(tiny_config), "--out", str(tmp_path / "p"), "--format", "csv", "--parallel", "2"]) == 0
    assert read_outputs(tmp_path / "s" / "tiny") == read_outputs(tmp_path / "p" / "tiny")


def test_arms_share_environment_seeds(tiny_config, tmp_path):
    manifest = run_experiment(load_config(tiny_config), tmp_path, fmt="csv")
    for trial in manifest.trials:
        assert trial["env_seed"]["hybrid"] == trial["env_seed"]["online"]
        assert trial["env_seed"]["hybrid"][0] == trial["seed"]


def test_output_dir_from_environment(tiny_config, tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV_VAR, str(tmp_path))
    manifest = run_experiment(load_config(tiny_config), fmt="csv")
    assert manifest.output_dir == str(tmp_path / "tiny")
    assert (tmp_path / "tiny" / "manifest.json").exists()


def test_csv_layout(tiny_config, tmp_path):
    run_experiment(load_config(tiny_config), tmp_path, fmt="csv")
    out = tmp_path / "tiny"
    lines = (out / "tiny-adversarial_ucbvi-hybrid_regret.csv").read_text().splitlines()
    assert lines[0] == "episode,mean,lo,hi" and len(lines) == 5
    wide = (out / "tiny-adversarial_ucbvi-hybrid_regret.trials.csv").read_text().splitlines()
    assert wide[0] == "episode,seed_3,seed_4"


def test_infinite_ratios_written_as_inf(tiny_config, tmp_path):
    # with 5 offline episodes of the optimal behavior most cells are unsupported
    run_experiment(load_config(tiny_config), tmp_path, fmt="csv")
    text = (tmp_path / "tiny" / "tiny-optimal_ucbvi-online_coverage_full.csv").read_text()
    assert ",inf," in text or text.rstrip().endswith(",inf")
    manifest = json.loads((tmp_path / "tiny" / "manifest.json").read_text())
    assert "inf" in json.dumps(manifest["static"])


def test_curves_have_trial_arrays(tiny_config):
    manifest = run_experiment(load_config(tiny_config), write=False)
    curve = manifest.curves[("adversarial", "hybrid", "visits_online")]
    assert curve.trials.shape == (2, 4) and curve.n_trials == 2
    assert manifest.output_dir is None and manifest.csv_sha256 == {}


def test_trial_error_names_trial_and_seed(tiny_config, tmp_path, monkeypatch, capsys):
    from hybrid_rl.harness import runner

    def broken(*args, **kwargs):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(runner, "_run_agent", broken)
    with pytest.raises(TrialError, match=r"trial 1.*seed 4.*diverged"):
        run_trial(load_config(tiny_config), 1)
    assert main(["run", str(tiny_config), "--out", str(tmp_path)]) == 2
    assert "diverged" in capsys.readouterr().err


def test_desk_golf_confidence_metrics(tmp_path):
    cfg = load_config("desk_golf").with_overrides(trials=2, n_on=5)
    manifest = run_experiment(cfg, write=False)
    survived = manifest.curves[("uniform", "hybrid", "qstar_in_set")]
    assert survived.trials.shape == (2, 5) and set(np.unique(survived.trials)) <= {0.0, 1.0}


# --- SVG ----------------------------------------------------------------------------


def test_svg_single_flat_curve():
    svg = render_svg([Series("flat", np.ones(10))], title="flat", ylabel="y")
    root = ET.fromstring(svg)
    assert root.tag == SVG_NS + "svg"
    assert len(root.findall(f".//{SVG_NS}polyline")) == 1


def test_svg_two_curves_with_bands():
    a = Series("hybrid", np.linspace(0, 1, 20), np.linspace(0, 1, 20) - 0.1, np.linspace(0, 1, 20) + 0.1)
    b = Series("online", np.linspace(1, 0, 20), np.linspace(1, 0, 20) - 0.2, np.linspace(1, 0, 20) + 0.2)
    root = ET.fromstring(render_svg([a, b], title="t", ylabel="y"))
    assert len(root.findall(f".//{SVG_NS}polygon")) == 2
    assert len(root.findall(f".//{SVG_NS}polyline")) == 2
    texts = [t.text for t in root.iter(SVG_NS + "text")]
    assert "hybrid" in texts and "online" in texts


def test_svg_log_scale_with_infinite_values():
    svg = render_svg([Series("c", np.array([np.inf, 10.0, 1.0]))], title="t", ylabel="y", log_y=True)
    ET.fromstring(svg)
    assert "nan" not in svg and "inf" not in svg


def test_svg_empty_input():
    with pytest.raises(ValueError):
        render_svg([], title="t", ylabel="y")


def test_svg_golden_bytes():
    x = np.arange(1, 11, dtype=float)
    series = [Series("sqrt", np.sqrt(x), np.sqrt(x) - 0.5, np.sqrt(x) + 0.5), Series("log", np.log(x))]
    svg = render_svg(series, title="golden", ylabel="value")
    assert svg == render_svg(series, title="golden", ylabel="value")
    assert hashlib.sha256(svg.encode()).hexdigest() == GOLDEN_SVG_SHA256
    assert math.isfinite(float(ET.fromstring(svg).get("width")))
