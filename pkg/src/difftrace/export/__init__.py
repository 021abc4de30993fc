from .formats import (
    decode_checkpoint,
    decode_labels,
    decode_samples,
    decode_train_log,
    encode_checkpoint,
    encode_labels,
    encode_samples,
    encode_train_log,
)
from .registry import Artifact, ArtifactKind, ArtifactRegistry
from .reports import (
    read_score_table,
    read_self_influence,
    register_metric_table,
    register_score_table,
    register_self_influence,
    score_file_name,
    score_table_csv,
)
from .run_io import RunManifest, read_manifest, read_run, register_run, write_run
from .save import save_all
from .utils import CsvTable, JsonEncoder, atomic_write, config_digest, json_dumps, sha256_hex

__all__ = [
    "decode_checkpoint",
    "decode_labels",
    "decode_samples",
    "decode_train_log",
    "encode_checkpoint",
    "encode_labels",
    "encode_samples",
    "encode_train_log",
    "Artifact",
    "ArtifactKind",
    "ArtifactRegistry",
    "read_score_table",
    "read_self_influence",
    "register_metric_table",
    "register_score_table",
    "register_self_influence",
    "score_file_name",
    "score_table_csv",
    "RunManifest",
    "read_manifest",
    "read_run",
    "register_run",
    "write_run",
    "save_all",
    "CsvTable",
    "JsonEncoder",
    "atomic_write",
    "config_digest",
    "json_dumps",
    "sha256_hex",
]
