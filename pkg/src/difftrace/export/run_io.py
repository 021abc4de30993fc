"""Training runs on disk: checkpoints, train log, dataset copy and an integrity manifest."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from ..constants import ArtifactName, ExportKey, checkpoint_filename
from ..diffusion.schedule import ScheduleConfig
from ..engine.denoiser import DenoiserSpec
from ..errors import IntegrityError
from ..training.records import TrainingRun, TrainLog
from .formats import decode_checkpoint, decode_samples, decode_train_log
from .formats import encode_checkpoint, encode_samples, encode_train_log
from .registry import ArtifactKind, ArtifactRegistry
from .save import save_all
from .utils import config_digest, sha256_hex

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class RunManifest:
    """Parsed ``manifest.json`` of a run directory."""

    data: dict[str, Any]

    @property
    def spec(self) -> DenoiserSpec:
        return DenoiserSpec.model_validate(self.data["spec"])

    @property
    def schedule_config(self) -> ScheduleConfig:
        return ScheduleConfig.model_validate(self.data["schedule"])

    @property
    def config_digest(self) -> str:
        return self.data["config_digest"]

    @property
    def checkpoint_steps(self) -> list[int]:
        return [entry["step"] for entry in self.data["checkpoints"]]


def register_run(
    registry: ArtifactRegistry,
    run: TrainingRun,
    schedule_cfg: ScheduleConfig,
    extra: dict[str, Any] | None = None,
) -> None:
    """Register every file of ``run`` plus the manifest entries that describe them."""
    dataset_text = encode_samples(run.dataset)
    log_text = encode_train_log(run.log.records)
    registry.register("dataset", dataset_text, ArtifactKind.TEXT, save_hint=ArtifactName.DATASET)
    registry.register("train_log", log_text, ArtifactKind.TEXT, save_hint=ArtifactName.TRAIN_LOG)

    entries = []
    for checkpoint in run.checkpoints:
        blob = encode_checkpoint(checkpoint)
        file_name = checkpoint_filename(checkpoint.step)
        registry.register(
            f"checkpoint_{checkpoint.step}", blob, ArtifactKind.BINARY, save_hint=file_name
        )
        entries.append(
            {
                "step": checkpoint.step,
                "file": file_name,
                "loss_ema": checkpoint.loss_ema,
                "sha256": sha256_hex(blob),
            }
        )

    registry.register("format_version", MANIFEST_VERSION)
    registry.register("spec", run.spec)
    registry.register("schedule", schedule_cfg)
    registry.register("schedule_hash", run.schedule.digest().hex())
    registry.register(
        "dataset_file",
        {
            "file": ArtifactName.DATASET,
            "sha256": sha256_hex(dataset_text.encode()),
            "n": len(run.dataset),
        },
    )
    registry.register(
        "train_log_file",
        {
            "file": ArtifactName.TRAIN_LOG,
            "sha256": sha256_hex(log_text.encode()),
            "records": len(run.log),
        },
    )
    registry.register("checkpoints", entries)
    for key, value in (extra or {}).items():
        registry.register(key, value)


def write_run(
    run: TrainingRun,
    out_dir: Path,
    schedule_cfg: ScheduleConfig,
    config: BaseModel,
    extra: dict[str, Any] | None = None,
) -> Path:
    """Write ``run`` into ``out_dir`` and return the manifest path.

    ``config`` is the configuration that produced the run; its digest goes into the manifest.
    """
    registry = ArtifactRegistry()
    registry.register(ExportKey.CONFIG, config)
    registry.register(ExportKey.CONFIG_DIGEST, config_digest(config))
    register_run(registry, run, schedule_cfg, extra)
    manifest = save_all(registry, out_dir, Path(ArtifactName.MANIFEST).stem)
    logger.info("Wrote run with %d checkpoints to %s", len(run.checkpoints), out_dir)
    return manifest


def _verified_bytes(run_dir: Path, file_name: str, digest: str) -> bytes:
    path = run_dir / file_name
    if not path.is_file():
        raise IntegrityError(f"Manifest lists missing file {file_name}")
    data = path.read_bytes()
    actual = sha256_hex(data)
    if actual != digest:
        raise IntegrityError(f"Digest mismatch for {file_name}: manifest {digest}, file {actual}")
    return data


def read_manifest(run_dir: Path) -> RunManifest:
    path = Path(run_dir) / ArtifactName.MANIFEST
    if not path.is_file():
        raise IntegrityError(f"No manifest at {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise IntegrityError(f"Manifest is not valid JSON: {err}") from err
    required = (
        "format_version",
        "spec",
        "schedule",
        "schedule_hash",
        "checkpoints",
        "dataset_file",
        "train_log_file",
    )
    missing = [key for key in required if key not in data]
    if missing:
        raise IntegrityError(f"Manifest misses keys: {missing}")
    if data["format_version"] != MANIFEST_VERSION:
        raise IntegrityError(f"Unsupported manifest version {data['format_version']}")
    return RunManifest(data)


def read_run(run_dir: Path) -> tuple[TrainingRun, RunManifest]:
    """Load a run, verifying every digest and the schedule hash of every checkpoint.

    Raises:
        IntegrityError: missing files, digest mismatch, or schedule-hash mismatch.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    spec = manifest.spec
    schedule = manifest.schedule_config.build()
    if schedule.digest().hex() != manifest.data["schedule_hash"]:
        raise IntegrityError("Manifest schedule hash does not match its schedule parameters")

    dataset_entry = manifest.data["dataset_file"]
    dataset_bytes = _verified_bytes(run_dir, dataset_entry["file"], dataset_entry["sha256"])
    dataset = decode_samples(dataset_bytes.decode())
    log_entry = manifest.data["train_log_file"]
    log_bytes = _verified_bytes(run_dir, log_entry["file"], log_entry["sha256"])
    records = decode_train_log(log_bytes.decode())

    checkpoints = []
    for entry in manifest.data["checkpoints"]:
        blob = _verified_bytes(run_dir, entry["file"], entry["sha256"])
        checkpoint = decode_checkpoint(blob, spec, loss_ema=float(entry["loss_ema"]))
        if checkpoint.step != entry["step"]:
            raise IntegrityError(
                f"{entry['file']} holds step {checkpoint.step}, manifest says {entry['step']}"
            )
        checkpoints.append(checkpoint)

    hashes = {c.schedule_hash for c in checkpoints}
    if len(hashes) > 1:
        raise IntegrityError("Checkpoints were trained under different noise schedules")
    run = TrainingRun(np.asarray(dataset), spec, schedule, checkpoints, TrainLog(records))
    logger.info("Read run from %s: %d checkpoints, %d records", run_dir, len(checkpoints), len(records))
    return run, manifest
