import json
from pathlib import Path

import numpy as np
import pytest

from difftrace.analysis import MetricTable
from difftrace.attribution import AttributionMethod, InfluenceScore, ScoreTable
from difftrace.constants import ArtifactName, checkpoint_filename
from difftrace.diffusion import ScheduleConfig
from difftrace.errors import IntegrityError
from difftrace.export import (
    ArtifactKind,
    ArtifactRegistry,
    CsvTable,
    JsonEncoder,
    config_digest,
    decode_checkpoint,
    decode_train_log,
    encode_checkpoint,
    encode_train_log,
    read_manifest,
    read_run,
    read_score_table,
    read_self_influence,
    register_metric_table,
    register_score_table,
    register_self_influence,
    save_all,
    write_run,
)
from difftrace.training import TrainConfig, replay_record

SCHEDULE = ScheduleConfig(T=60, beta_start=1e-4, beta_end=0.05)


@pytest.fixture()
def run_dir(tiny_run, tmp_path):
    write_run(tiny_run, tmp_path / "run", SCHEDULE, TrainConfig(epochs=6))
    return tmp_path / "run"


# Checkpoint files


def test_checkpoint_layout(tiny_run):
    checkpoint = tiny_run.checkpoints[1]

    blob = encode_checkpoint(checkpoint)

    assert blob[:4] == b"DTCK"
    assert blob[4] == 1
    assert blob[5:37] == tiny_run.schedule.digest()
    assert int.from_bytes(blob[37:45], "little") == checkpoint.step
    assert int.from_bytes(blob[45:53], "little") == tiny_run.spec.num_parameters
    assert len(blob) == 53 + 4 * tiny_run.spec.num_parameters


def test_checkpoint_round_trip_is_exact(tiny_run):
    checkpoint = tiny_run.checkpoints[2]

    decoded = decode_checkpoint(encode_checkpoint(checkpoint), tiny_run.spec, loss_ema=0.5)

    assert decoded.step == checkpoint.step
    assert decoded.schedule_hash == checkpoint.schedule_hash
    assert decoded.loss_ema == 0.5
    np.testing.assert_array_equal(decoded.params.values, checkpoint.params.values)


@pytest.mark.parametrize(
    "corrupt",
    [
        lambda b: b"XXXX" + b[4:],
        lambda b: b[:4] + bytes([2]) + b[5:],
        lambda b: b[:40],
        lambda b: b[:-4],
    ],
)
def test_corrupt_checkpoint(tiny_run, corrupt):
    blob = encode_checkpoint(tiny_run.checkpoints[0])
    with pytest.raises(IntegrityError):
        decode_checkpoint(corrupt(blob), tiny_run.spec)


def test_checkpoint_for_other_spec(tiny_run):
    from difftrace.engine import DenoiserSpec

    other = DenoiserSpec(input_dim=4, hidden_dims=(9, 8), time_embed_dim=4)
    with pytest.raises(IntegrityError):
        decode_checkpoint(encode_checkpoint(tiny_run.checkpoints[0]), other)


def test_train_log_text(tiny_run):
    text = encode_train_log(tiny_run.log.records)

    assert text.splitlines()[0] == "step,sample_id,timestep,noise_seed,lr"
    assert decode_train_log(text) == tiny_run.log.records
    with pytest.raises(IntegrityError):
        decode_train_log("a,b\n1,2\n")


# Run directories


def test_run_directory_contents(run_dir, tiny_run):
    names = {p.name for p in run_dir.iterdir()}

    assert ArtifactName.MANIFEST in names
    assert ArtifactName.TRAIN_LOG in names
    assert ArtifactName.DATASET in names
    assert {checkpoint_filename(s) for s in tiny_run.steps} <= names
    manifest = read_manifest(run_dir)
    assert manifest.checkpoint_steps == tiny_run.steps
    assert manifest.schedule_config == SCHEDULE
    assert manifest.config_digest == config_digest(TrainConfig(epochs=6))


def test_read_run_replays_identically(run_dir, tiny_run):
    loaded, _ = read_run(run_dir)

    assert loaded.log.records == tiny_run.log.records
    np.testing.assert_array_equal(loaded.dataset, tiny_run.dataset)
    for record in loaded.log.records[::17]:
        replayed = replay_record(loaded, record).values
        assert replayed.tobytes() == replay_record(tiny_run, record).values.tobytes()


def test_rewriting_a_run_is_byte_identical(run_dir, tiny_run, tmp_path):
    write_run(tiny_run, tmp_path / "again", SCHEDULE, TrainConfig(epochs=6))
    for path in run_dir.iterdir():
        assert (tmp_path / "again" / path.name).read_bytes() == path.read_bytes()


def test_manifest_without_dataset_file(run_dir):
    manifest = run_dir / ArtifactName.MANIFEST
    data = json.loads(manifest.read_text())
    del data["dataset_file"]
    manifest.write_text(json.dumps(data))

    with pytest.raises(IntegrityError, match="misses keys.*dataset_file"):
        read_run(run_dir)


def test_tampered_checkpoint_is_detected(run_dir):
    path = run_dir / checkpoint_filename(6)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))

    with pytest.raises(IntegrityError, match="Digest mismatch"):
        read_run(run_dir)


def test_manifest_errors(run_dir):
    manifest = run_dir / ArtifactName.MANIFEST
    data = json.loads(manifest.read_text())

    data["schedule"]["beta_end"] = 0.04
    manifest.write_text(json.dumps(data))
    with pytest.raises(IntegrityError, match="schedule hash"):
        read_run(run_dir)

    del data["checkpoints"]
    manifest.write_text(json.dumps(data))
    with pytest.raises(IntegrityError, match="misses keys"):
        read_run(run_dir)

    manifest.write_text("{not json")
    with pytest.raises(IntegrityError):
        read_run(run_dir)

    manifest.unlink()
    with pytest.raises(IntegrityError):
        read_run(run_dir)


# Registry and saving


def test_registry_infers_kinds():
    registry = ArtifactRegistry()
    registry.register("meta", {"a": 1})
    registry.register("blob", b"\x00")
    registry.register("table", CsvTable(["x"], [[1]]))
    registry.register("text", "hello\n", ArtifactKind.TEXT)
    registry.register("name", "retrac")

    kinds = {key: artifact.kind for key, artifact in registry.items()}
    assert kinds == {
        "meta": ArtifactKind.JSON,
        "blob": ArtifactKind.BINARY,
        "table": ArtifactKind.CSV,
        "text": ArtifactKind.TEXT,
        "name": ArtifactKind.JSON,
    }
    assert len(registry) == 5
    with pytest.raises(ValueError, match="already registered"):
        registry.register("meta", {})
    with pytest.raises(ValueError, match="already claimed by 'table'"):
        registry.register("other", CsvTable(["y"], []), save_hint="table.csv")
    assert registry.json_document() == {"meta": {"a": 1}, "name": "retrac"}
    assert [name for name, _ in registry.files()] == ["blob.bin", "table.csv", "text.txt"]


def test_save_all_writes_combined_json(tmp_path):
    registry = ArtifactRegistry()
    registry.register("values", np.array([1.5, 2.0]))
    registry.register("method", AttributionMethod.RETRAC)
    registry.register("where", Path("a/b"))
    registry.register("table", CsvTable(["x", "y"], [[1, 0.1]]), save_hint="t.csv")
    registry.register("raw", "text\n", ArtifactKind.TEXT)

    path = save_all(registry, tmp_path, "report")

    assert path == tmp_path / "report.json"
    assert json.loads(path.read_text()) == {"method": "retrac", "values": [1.5, 2.0], "where": "a/b"}
    assert (tmp_path / "t.csv").read_text() == "x,y\n1,0.1\n"
    assert (tmp_path / "raw.txt").read_text() == "text\n"
    assert not list(tmp_path.glob(".*.tmp"))


def test_json_encoder_handles_numpy_scalars():
    data = {"a": np.int64(3), "b": np.float32(0.5), "c": np.bool_(True), "d": (1, 2)}
    text = json.dumps(data, cls=JsonEncoder)
    assert json.loads(text) == {"a": 3, "b": 0.5, "c": True, "d": [1, 2]}


def test_config_digest_is_canonical():
    assert config_digest({"a": 1, "b": 2}) == config_digest({"b": 2, "a": 1})
    assert config_digest(TrainConfig()) == config_digest(TrainConfig())
    assert config_digest(TrainConfig()) != config_digest(TrainConfig(seed=1))


def test_csv_floats_round_trip_exactly():
    value = 0.1 + 0.2
    table = CsvTable.from_text(CsvTable(["v"], [[value]]).to_text())
    assert float(table.rows[0][0]) == value


# Reports


def test_score_table_report_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((2, 4, 2))
    table = ScoreTable(AttributionMethod.RETRAC, [3, 5], [6, 12], values, {"m": 2})
    registry = ArtifactRegistry()
    register_score_table(registry, table, top_k=2)
    save_all(registry, tmp_path, ArtifactName.REPORT)

    loaded = read_score_table(tmp_path, "retrac")

    assert loaded.test_ids == [3, 5]
    assert loaded.checkpoint_steps == [6, 12]
    assert loaded.metadata == {"m": 2}
    np.testing.assert_array_equal(loaded.per_checkpoint, table.per_checkpoint)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["retrac"]["rankings"]["5"] == table.top_k(5, 2).tolist()
    with pytest.raises(IntegrityError, match="Available"):
        read_score_table(tmp_path, "tracin")


def test_score_csv_rows_are_in_rank_order(tmp_path):
    table = ScoreTable(AttributionMethod.TRACIN, [0], [0], np.array([[[1.0], [3.0], [2.0]]]))
    registry = ArtifactRegistry()
    register_score_table(registry, table)
    save_all(registry, tmp_path, ArtifactName.REPORT)

    rows = CsvTable.from_text((tmp_path / "scores_tracin.csv").read_text()).rows

    assert [row[1] for row in rows] == ["1", "2", "0"]
    assert [row[2] for row in rows] == ["1", "2", "3"]


def test_self_influence_report_round_trip(tmp_path):
    scores = [
        InfluenceScore.from_terms(i, i, np.array([v, 1.0])) for i, v in enumerate([0.5, 2.0, -1.0])
    ]
    registry = ArtifactRegistry()
    register_self_influence(registry, "tracin", scores, [6, 12], {"method": "tracin"}, top_k=2)
    save_all(registry, tmp_path, ArtifactName.REPORT)

    np.testing.assert_array_equal(read_self_influence(tmp_path, "tracin"), [1.5, 3.0, 0.0])
    assert json.loads((tmp_path / "report.json").read_text())["tracin"]["rankings"] == [1, 0]
    with pytest.raises(IntegrityError):
        read_self_influence(tmp_path, "retrac")


def test_metric_table_files(tmp_path):
    registry = ArtifactRegistry()
    table = MetricTable("correlation", ("rho", "p", "slope"), [(0.5, 0.01, 2.0)], {"n": 9})
    register_metric_table(registry, table)
    save_all(registry, tmp_path, ArtifactName.REPORT)

    assert (tmp_path / "correlation.csv").read_text() == "rho,p,slope\n0.5,0.01,2.0\n"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["correlation"] == {"columns": ["rho", "p", "slope"], "metadata": {"n": 9}}
