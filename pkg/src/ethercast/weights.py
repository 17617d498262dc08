"""Weight archives and training checkpoints.

An archive is a flat name -> array mapping stored as an uncompressed ``.npz``
file; names follow the model parameter scheme documented in ``backbone``.  A
checkpoint is an archive plus a JSON manifest (config hash, epoch, validation
loss) written next to it with the same stem.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np
import torch


def model_arrays(model: torch.nn.Module, trainable_only: bool = False) -> dict[str, np.ndarray]:
    """Snapshot parameters as float numpy arrays keyed by their names."""
    out = {}
    for name, p in model.named_parameters():
        if trainable_only and not p.requires_grad:
            continue
        out[name] = p.detach().cpu().numpy().copy()
    return out


def save_archive(arrays: Mapping[str, np.ndarray], path) -> Path:
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{k: np.asarray(v) for k, v in arrays.items()})
    return path


def load_archive(path) -> dict[str, np.ndarray]:
    with np.load(path) as data:
        return {k: data[k] for k in data.files}


def save_checkpoint(model: torch.nn.Module, stem, manifest: dict) -> tuple[Path, Path]:
    """Write ``<stem>.npz`` (all parameters) and ``<stem>.json`` (manifest)."""
    stem = Path(stem)
    archive_path = save_archive(model_arrays(model), stem.with_suffix(".npz"))
    manifest_path = stem.with_suffix(".json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return archive_path, manifest_path


def load_checkpoint(model: torch.nn.Module, stem) -> dict:
    """Restore every parameter from ``<stem>.npz``; returns the manifest."""
    stem = Path(stem)
    arrays = load_archive(stem.with_suffix(".npz"))
    params = dict(model.named_parameters())
    missing = set(params) - set(arrays)
    if missing:
        raise KeyError(
            f"checkpoint {stem} lacks parameters: {', '.join(sorted(missing))}"
        )
    with torch.no_grad():
        for name, p in params.items():
            source = torch.as_tensor(arrays[name])
            if tuple(source.shape) != tuple(p.shape):
                raise ValueError(
                    f"checkpoint shape mismatch for {name}: "
                    f"{tuple(source.shape)} vs {tuple(p.shape)}"
                )
            p.copy_(source.to(p.dtype))
    manifest_path = stem.with_suffix(".json")
    if manifest_path.exists():
        return json.loads(manifest_path.read_text())
    return {}
