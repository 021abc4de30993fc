import json

import pytest

from difftrace.cli import (
    ANALYSIS_REGISTRY,
    AttributeCommandConfig,
    MakeDataConfig,
    TrainCommandConfig,
    load_config,
    main,
    solve_analysis,
    solve_command,
)
from difftrace.constants import ArtifactName, checkpoint_filename
from difftrace.errors import ArgumentError, ConfigError
from difftrace.export import read_run, read_score_table

CONFIGS = {
    "data.toml": """
[dataset]
majority_count = 20
minority_count = 4
dim = 4
seed = 11
test_majority = 2
test_minority = 2
""",
    "train.toml": """
data = "data"

[model]
hidden_dims = [8, 8]
time_embed_dim = 4

[schedule]
T = 60
beta_start = 1e-4
beta_end = 0.05

[train]
epochs = 4
batch_size = 6
checkpoint_every = 4
seed = 5
""",
    "attribute.toml": """
run = "run"
methods = ["tracin", "retrac"]
top_k = 3

[tests]
source = "dataset"
dataset = "data"

[attribution]
checkpoints = [4, 8]
n_t = 3
m = 1
""",
    "generated.json": json.dumps(
        {
            "run": "run",
            "tests": {"source": "generated", "count": 2, "sampler": {"inference_steps": 10}},
            "attribution": {"checkpoints": [8], "n_t": 2, "m": 1},
        }
    ),
    "self.toml": """
run = "run"
methods = ["tracin"]

[attribution]
checkpoints = [4, 8]
n_t = 2
m = 1
""",
}

ANALYSES = {
    "correlation": {"run": "run", "probe_stride": 10},
    "uniqueness": {"reports": ["report"], "k_values": [1, 3]},
    "precision": {"reports": ["report"], "dataset": "data", "k_values": [1, 3]},
    "outlier": {"reports": ["self"], "dataset": "data", "k_values": [2, 4]},
    "rank_correlation": {"reports": ["report"]},
}


def run_cli(root, command, config, out):
    argv = ["--log-level", "ERROR", command, "--config", str(root / config), "--out", str(root / out)]
    return main(argv)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset, run, attribution and self-influence reports produced through the CLI."""
    root = tmp_path_factory.mktemp("workspace")
    for name, text in CONFIGS.items():
        (root / name).write_text(text)
    for name, settings in ANALYSES.items():
        (root / f"analyze_{name}.json").write_text(json.dumps({"analysis": name, **settings}))

    steps = [
        ("make-data", "data.toml", "data"),
        ("train", "train.toml", "run"),
        ("attribute", "attribute.toml", "report"),
        ("attribute", "generated.json", "generated"),
        ("self-influence", "self.toml", "self"),
    ]
    for command, config, out in steps:
        assert run_cli(root, command, config, out) == 0, command
    return root


# Pipeline


@pytest.mark.slow
def test_make_data_and_train_outputs(workspace):
    assert (workspace / "data" / ArtifactName.DATASET_INFO).is_file()
    run, manifest = read_run(workspace / "run")

    assert run.steps == [0, 4, 8, 12, 16]
    assert (workspace / "run" / checkpoint_filename(16)).is_file()
    assert manifest.spec.hidden_dims == (8, 8)
    assert "config" in manifest.data


@pytest.mark.slow
def test_attribute_report(workspace):
    report = json.loads((workspace / "report" / "report.json").read_text())

    manifest = json.loads((workspace / "run" / "manifest.json").read_text())

    assert report["tests"]["source"] == "dataset"
    assert report["tests"]["ids"] == [0, 1, 2, 3]
    assert report["tests"]["groups"] == ["majority", "majority", "minority", "minority"]
    assert len(report["tracin"]["rankings"]["0"]) == 3
    assert report["run"]["schedule_hash"] == manifest["schedule_hash"]
    table = read_score_table(workspace / "report", "retrac")
    assert table.per_checkpoint.shape == (4, 24, 2)
    assert table.metadata["n_t"] == 3


@pytest.mark.slow
def test_generated_tests(workspace):
    report = json.loads((workspace / "generated" / "report.json").read_text())

    assert report["tests"]["ids"] == [0, 1]
    assert report["tests"]["groups"] is None
    assert (workspace / "generated" / "scores_tracin.csv").is_file()


@pytest.mark.slow
def test_self_influence_report(workspace):
    report = json.loads((workspace / "self" / "report.json").read_text())

    assert report["tracin"]["metadata"]["replay_test_side"] is False
    assert (workspace / "self" / "self_influence_tracin.csv").is_file()


@pytest.mark.slow
@pytest.mark.parametrize(
    ("analysis", "files"),
    [
        ("correlation", ["correlation.csv", "correlation_points.csv"]),
        ("uniqueness", ["uniqueness_tracin.csv", "uniqueness_retrac.csv"]),
        ("precision", ["precision_tracin_majority.csv", "precision_retrac_minority.csv"]),
        ("outlier", ["outlier_tracin.csv"]),
        ("rank_correlation", ["rank_correlation.csv"]),
    ],
)
def test_analyses(workspace, analysis, files):
    out = f"analysis_{analysis}"

    assert run_cli(workspace, "analyze", f"analyze_{analysis}.json", out) == 0
    for name in files:
        assert (workspace / out / name).is_file()
    report = json.loads((workspace / out / "report.json").read_text())
    assert report["config"]["analysis"] == analysis


@pytest.mark.slow
def test_correlation_header(workspace):
    run_cli(workspace, "analyze", "analyze_correlation.json", "correlation_again")
    header = (workspace / "correlation_again" / "correlation.csv").read_text().splitlines()[0]
    assert header == "rho,p,slope"


# Failures


def test_unknown_config_key(tmp_path, capsys):
    (tmp_path / "data.toml").write_text("[dataset]\nbogus = 1\n")

    assert run_cli(tmp_path, "make-data", "data.toml", "out") == 1

    err = capsys.readouterr().err.strip()
    assert err.startswith("error: config: ")
    assert "bogus" in err
    assert "\n" not in err


def test_unknown_analysis(tmp_path, capsys):
    (tmp_path / "a.json").write_text(json.dumps({"analysis": "nope"}))

    assert run_cli(tmp_path, "analyze", "a.json", "out") == 1
    assert capsys.readouterr().err.startswith("error: argument: Unknown analysis: 'nope'")


def test_self_influence_rejects_non_replay_method(tmp_path, capsys):
    (tmp_path / "s.toml").write_text('run = "run"\nmethods = ["influence_function"]\n')

    assert run_cli(tmp_path, "self-influence", "s.toml", "out") == 1

    err = capsys.readouterr().err.strip()
    assert err.startswith("error: config: ")
    assert "needs a replay method" in err
    assert "Traceback" not in err


def test_missing_run_directory(tmp_path, capsys):
    (tmp_path / "a.toml").write_text('run = "missing"\n')

    assert run_cli(tmp_path, "attribute", "a.toml", "out") == 1
    assert capsys.readouterr().err.startswith("error: integrity: ")


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", "x.toml", "--out", "y"])


def test_registries():
    assert set(ANALYSIS_REGISTRY) >= {"correlation", "manipulation", "timing", "t_max"}
    assert solve_command("train").config_model is TrainCommandConfig
    with pytest.raises(ArgumentError, match="Available"):
        solve_command("nope")
    with pytest.raises(ArgumentError, match="Available"):
        solve_analysis("nope")


# Config loading


def test_toml_and_json_configs_agree(tmp_path):
    (tmp_path / "c.toml").write_text('run = "r"\nmethods = ["retrac"]\n[attribution]\nn_t = 4\n')
    document = {"run": "r", "methods": ["retrac"], "attribution": {"n_t": 4}}
    (tmp_path / "c.json").write_text(json.dumps(document))

    from_toml = load_config(tmp_path / "c.toml", AttributeCommandConfig)

    assert from_toml == load_config(tmp_path / "c.json", AttributeCommandConfig)
    assert from_toml.attribution.n_t == 4


@pytest.mark.parametrize(
    ("name", "text"),
    [
        ("c.yaml", "dataset: {}"),
        ("c.toml", "[dataset\n"),
        ("c.json", "{"),
        ("c.json", '{"dataset": {"dim": "wide"}}'),
    ],
)
def test_bad_configs(tmp_path, name, text):
    (tmp_path / name).write_text(text)
    with pytest.raises(ConfigError):
        load_config(tmp_path / name, MakeDataConfig)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        load_config(tmp_path / "absent.toml", MakeDataConfig)
