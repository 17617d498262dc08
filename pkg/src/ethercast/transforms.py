"""Value-space transforms shared by every model: standardization, per-window
reverse instance normalization (RevIN), and patch tokenization.

All transforms run in float64 on the numpy side and keep torch inputs in
whatever dtype they arrive in; shapes follow the (batch, length) / (batch,
n_patches, patch_len) convention used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ShapeError

REVIN_EPS = 1e-5
STANDARDIZER_EPS = 1e-5


@dataclass(frozen=True)
class Standardizer:
    """Global z-score transform fitted on the training segment only.

    Forward is (x - mean)/(std + eps); eps keeps a constant train segment
    (std 0) from dividing by zero, and inverse undoes forward exactly.
    """

    mean: float
    std: float
    eps: float = STANDARDIZER_EPS

    def transform(self, values):
        denom = self.std + self.eps
        if isinstance(values, torch.Tensor):
            return (values - self.mean) / denom
        return (np.asarray(values, dtype=np.float64) - self.mean) / denom

    def inverse(self, values):
        denom = self.std + self.eps
        if isinstance(values, torch.Tensor):
            return values * denom + self.mean
        return np.asarray(values, dtype=np.float64) * denom + self.mean


def fit_standardizer(train_values, eps: float = STANDARDIZER_EPS) -> Standardizer:
    """Population mean/std (divide by N) over the training values only."""
    v = np.asarray(train_values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ShapeError("cannot fit a standardizer on an empty array")
    return Standardizer(mean=float(v.mean()), std=float(v.std()), eps=eps)


def apply_standardizer(values, stats: Standardizer, direction: str = "forward"):
    if direction == "forward":
        return stats.transform(values)
    if direction == "inverse":
        return stats.inverse(values)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


@dataclass
class RevinStats:
    """Per-window mean / variance captured at normalization time."""

    mean: torch.Tensor  # (batch, 1)
    var: torch.Tensor   # (batch, 1)


def revin_normalize(x: torch.Tensor, eps: float = REVIN_EPS) -> tuple[torch.Tensor, RevinStats]:
    """Normalize each window by its own mean and population variance.

    x: (batch, seq_len).  Returns the normalized windows plus the stats needed
    by revin_denormalize.  Statistics are computed under no_grad-free autograd
    so the model can backprop through them.
    """
    if x.dim() != 2:
        raise ShapeError(f"revin_normalize expects (batch, seq_len), got {tuple(x.shape)}")
    mean = x.mean(dim=1, keepdim=True)
    var = x.var(dim=1, unbiased=False, keepdim=True)
    normed = (x - mean) / torch.sqrt(var + eps)
    return normed, RevinStats(mean=mean, var=var)


def revin_denormalize(y: torch.Tensor, stats: RevinStats, eps: float = REVIN_EPS) -> torch.Tensor:
    """Map model output back to the input's scale using the captured stats.

    y: (batch, pred_len).  Exact inverse of revin_normalize for y that was
    produced from the same window's statistics.
    """
    if y.dim() != 2:
        raise ShapeError(f"revin_denormalize expects (batch, pred_len), got {tuple(y.shape)}")
    if stats.mean.shape[0] != y.shape[0]:
        raise ShapeError(
            f"stats cover batch {stats.mean.shape[0]} but output batch is {y.shape[0]}"
        )
    return y * torch.sqrt(stats.var + eps) + stats.mean


def revin(window, direction: str, state: RevinStats | None = None,
          eps: float = REVIN_EPS):
    """Single-window convenience wrapper around the batch RevIN routines.

    direction "normalize" ignores ``state`` and returns (vector, state);
    "denormalize" requires the state captured at normalization time.
    """
    x = torch.as_tensor(np.asarray(window, dtype=np.float64)).reshape(1, -1)
    if direction == "normalize":
        out, stats = revin_normalize(x, eps)
        return out[0], stats
    if direction == "denormalize":
        if state is None:
            raise ValueError("denormalize requires the state from normalize")
        return revin_denormalize(x, state, eps)[0], state
    raise ValueError(f"direction must be 'normalize' or 'denormalize', got {direction!r}")


def padded_length(seq_len: int, patch_len: int, stride: int) -> int:
    """Length after right replicate-padding, before cutting patches."""
    return max(seq_len + stride, patch_len)


def patch_count(seq_len: int, patch_len: int, stride: int) -> int:
    padded = padded_length(seq_len, patch_len, stride)
    return (padded - patch_len) // stride + 1


def patchify(x: torch.Tensor, patch_len: int, stride: int) -> torch.Tensor:
    """Cut each window into overlapping patches after replicate padding.

    x: (batch, seq_len) → (batch, n_patches, patch_len).  The window is
    right-padded by repeating its final value until the padded length
    max(seq_len + stride, patch_len); patches start at offsets 0, stride,
    2·stride, … and every patch lies fully inside the padded window.
    """
    if x.dim() != 2:
        raise ShapeError(f"patchify expects (batch, seq_len), got {tuple(x.shape)}")
    if patch_len < 1 or stride < 1:
        raise ValueError("patch_len and stride must be positive")
    batch, seq_len = x.shape
    padded = padded_length(seq_len, patch_len, stride)
    pad = padded - seq_len
    if pad > 0:
        tail = x[:, -1:].expand(batch, pad)
        x = torch.cat([x, tail], dim=1)
    n = (padded - patch_len) // stride + 1
    patches = x.unfold(dimension=1, size=patch_len, step=stride)
    if patches.shape[1] != n:
        raise ShapeError(
            f"patch count mismatch: unfold gave {patches.shape[1]}, expected {n}"
        )
    return patches.contiguous()


def patchify_reference(values, patch_len: int, stride: int):
    """Plain-Python patch cutter used to cross-check patchify in tests."""
    values = list(values)
    padded = max(len(values) + stride, patch_len)
    padded_values = values + [values[-1]] * (padded - len(values))
    out = []
    start = 0
    while start + patch_len <= padded:
        out.append(padded_values[start:start + patch_len])
        start += stride
    return out
