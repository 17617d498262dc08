"""Persistent experiment registry: one JSON record per line, append-only.

Appends are serialized by an advisory file lock and made atomic by writing
the whole updated file to a temp path and renaming it over the original, so
prior bytes are never modified in place and readers never see a torn write.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import RegistryError
from .evaluation import MetricReport

REGISTRY_ENV_VAR = "ETHERCAST_REGISTRY_DIR"
REGISTRY_FILENAME = "registry.jsonl"

_REQUIRED_FIELDS = ("id", "timestamp", "protocol", "model_kind", "dataset_name")


@dataclass
class ExperimentRecord:
    id: str
    timestamp: str
    protocol: str
    model_kind: str
    dataset_name: str
    seed: int = 0
    metrics: MetricReport | None = None
    artifacts: dict = field(default_factory=dict)
    config_snapshot: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "id": self.id, "timestamp": self.timestamp,
            "protocol": self.protocol, "model_kind": self.model_kind,
            "dataset_name": self.dataset_name, "seed": self.seed,
            "metrics": self.metrics.as_dict() if self.metrics else None,
            "artifacts": self.artifacts,
            "config_snapshot": self.config_snapshot,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ExperimentRecord":
        payload = json.loads(line)
        for key in _REQUIRED_FIELDS:
            if key not in payload:
                raise ValueError(f"record lacks required field {key!r}")
        metrics = payload.get("metrics")
        return cls(
            id=payload["id"], timestamp=payload["timestamp"],
            protocol=payload["protocol"], model_kind=payload["model_kind"],
            dataset_name=payload["dataset_name"],
            seed=payload.get("seed", 0),
            metrics=MetricReport(**metrics) if metrics else None,
            artifacts=payload.get("artifacts", {}),
            config_snapshot=payload.get("config_snapshot", {}),
        )


def record_id(config_snapshot: dict, seed: int, dataset_digest: str) -> str:
    """Content hash pinning a run to its config, seed and exact input bytes."""
    blob = json.dumps(
        {"config": config_snapshot, "seed": seed, "dataset": dataset_digest},
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()


def dataset_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_record(config_snapshot: dict, seed: int, dataset_name: str,
                dataset_dig: str, protocol: str, model_kind: str,
                metrics: MetricReport | None = None,
                artifacts: dict | None = None) -> ExperimentRecord:
    return ExperimentRecord(
        id=record_id(config_snapshot, seed, dataset_dig),
        timestamp=datetime.now(timezone.utc).isoformat(),
        protocol=protocol, model_kind=model_kind, dataset_name=dataset_name,
        seed=seed, metrics=metrics, artifacts=artifacts or {},
        config_snapshot=config_snapshot,
    )


def resolve_registry_path(out_dir=None) -> Path:
    """Registry lives under $ETHERCAST_REGISTRY_DIR when set, else out_dir."""
    root = os.environ.get(REGISTRY_ENV_VAR)
    if root:
        return Path(root) / REGISTRY_FILENAME
    if out_dir is None:
        raise RegistryError(
            f"no registry location: pass an output directory or set "
            f"{REGISTRY_ENV_VAR}"
        )
    return Path(out_dir) / REGISTRY_FILENAME


def _validate_bytes(raw: bytes, path) -> list[str]:
    """Check registry bytes line by line; returns the decoded lines."""
    if not raw:
        return []
    text = raw.decode("utf-8")
    if not text.endswith("\n"):
        last_index = text.count("\n")
        raise RegistryError(
            f"registry {path} is truncated (record {last_index} has no "
            f"newline)", index=last_index,
        )
    lines = text.splitlines()
    for i, line in enumerate(lines):
        try:
            ExperimentRecord.from_json(line)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise RegistryError(
                f"registry {path} is corrupted at record {i}: {exc}", index=i
            ) from exc
    return lines


def registry_read(path) -> list[ExperimentRecord]:
    path = Path(path)
    if not path.exists():
        return []
    lines = _validate_bytes(path.read_bytes(), path)
    return [ExperimentRecord.from_json(line) for line in lines]


def registry_append(record: ExperimentRecord, path) -> list[ExperimentRecord]:
    """Append one record; returns the registry contents after the append.

    The existing file is validated first (corruption surfaces before any
    write), then prior bytes plus the new line are written to a temp file in
    the same directory and renamed into place.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lock_path = path.with_suffix(path.suffix + ".lock")
    with open(lock_path, "w") as lock_fh:
        fcntl.flock(lock_fh, fcntl.LOCK_EX)
        try:
            prior = path.read_bytes() if path.exists() else b""
            _validate_bytes(prior, path)
            updated = prior + (record.to_json() + "\n").encode("utf-8")
            fd, tmp_name = tempfile.mkstemp(dir=path.parent,
                                            prefix=path.name + ".tmp")
            try:
                with os.fdopen(fd, "wb") as tmp:
                    tmp.write(updated)
                    tmp.flush()
                    os.fsync(tmp.fileno())
                os.replace(tmp_name, path)
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise
        finally:
            fcntl.flock(lock_fh, fcntl.LOCK_UN)
    return registry_read(path)
