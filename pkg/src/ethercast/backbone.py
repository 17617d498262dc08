"""Transformer forecast backbones: GPT-2-style and Llama-style block stacks
behind a shared patch-embedding head, with selective freezing for
norm-and-embedding fine-tuning.

The forecast path is: RevIN-normalize each window, cut it into patches, embed
patches linearly, run the (optionally frozen) block stack causally over patch
tokens, flatten, project to the horizon, and denormalize with the window's own
statistics.

Parameter name scheme (stable; weight archives use the same names):

    input_embed.weight / input_embed.bias          patch_len -> hidden
    pos_table.weight                               (max_positions, hidden), gpt2 only
    rope.inv_freq                                  (head_dim/2,), llama only
    blocks.{i}.attn_norm.weight [/ .bias]          bias present for gpt2 LayerNorm
    blocks.{i}.attn.{q,k,v,o}_proj.weight [/ .bias]
    blocks.{i}.ffn_norm.weight [/ .bias]
    blocks.{i}.ffn.fc_in / fc_out                  gelu variant
    blocks.{i}.ffn.{gate,up,down}_proj.weight      swiglu variant
    final_norm.weight [/ .bias]
    head.weight / head.bias                        n_patches*hidden -> pred_len
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, ShapeError
from .transforms import patch_count, patchify, revin_denormalize, revin_normalize


@dataclass(frozen=True)
class BackboneConfig:
    variant: str = "gpt2"            # gpt2 | llama
    n_layers: int = 12
    hidden: int = 768
    n_heads: int = 12
    n_kv_groups: int | None = None   # None -> n_heads (plain multi-head)
    ffn_dim: int = 3072
    max_positions: int = 1024
    seq_len: int = 7
    patch_len: int = 16
    stride: int = 8
    pred_len: int = 1
    activation: str = "gelu"         # gelu | swiglu
    rope_base: float = 10000.0
    norm_eps: float = 1e-5

    def __post_init__(self):
        if self.variant not in ("gpt2", "llama"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.activation not in ("gelu", "swiglu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.hidden % self.n_heads != 0:
            raise ConfigError(
                f"hidden {self.hidden} not divisible by n_heads {self.n_heads}"
            )
        if self.n_kv_groups is None:
            object.__setattr__(self, "n_kv_groups", self.n_heads)
        if self.n_heads % self.n_kv_groups != 0:
            raise ConfigError(
                f"n_heads {self.n_heads} not divisible by n_kv_groups {self.n_kv_groups}"
            )
        if self.variant == "llama" and self.head_dim % 2 != 0:
            raise ConfigError(
                f"rotary embedding needs an even head_dim, got {self.head_dim}"
            )
        for name in ("seq_len", "patch_len", "stride", "pred_len", "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.rope_base <= 0 or self.norm_eps <= 0:
            raise ConfigError("rope_base and norm_eps must be positive")
        if self.variant == "gpt2" and self.n_patches > self.max_positions:
            raise ConfigError(
                f"{self.n_patches} patches exceed the positional table size "
                f"{self.max_positions}"
            )

    @property
    def head_dim(self) -> int:
        return self.hidden // self.n_heads

    @property
    def n_patches(self) -> int:
        return patch_count(self.seq_len, self.patch_len, self.stride)


# ---------------------------------------------------------------------------
# primitive ops (pure functions over tensors; modules below delegate to them)

def layer_norm(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor,
               eps: float) -> torch.Tensor:
    """(x - mean)/sqrt(var + eps) * weight + bias over the last dim, population var."""
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps) * weight + bias


def rms_norm(x: torch.Tensor, weight: torch.Tensor, eps: float) -> torch.Tensor:
    """x / sqrt(mean(x^2) + eps) * weight over the last dim."""
    ms = x.pow(2).mean(dim=-1, keepdim=True)
    return x / torch.sqrt(ms + eps) * weight


def build_inv_freq(head_dim: int, base: float, dtype=torch.float32) -> torch.Tensor:
    """inv_freq[i] = base^(-2i/head_dim) for i in 0..head_dim/2-1."""
    if head_dim % 2 != 0:
        raise ConfigError(f"head_dim must be even for rotary embedding, got {head_dim}")
    exponents = torch.arange(0, head_dim, 2, dtype=dtype) / head_dim
    return base ** (-exponents)


def rotary_apply(q: torch.Tensor, k: torch.Tensor, positions: torch.Tensor,
                 inv_freq: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Rotate each consecutive pair (x_{2i}, x_{2i+1}) by angle position*inv_freq[i].

    q, k: (..., T, head_dim); positions: (T,) integer positions.
    """
    head_dim = q.shape[-1]
    if head_dim % 2 != 0:
        raise ConfigError(f"head_dim must be even for rotary embedding, got {head_dim}")
    if inv_freq.shape[-1] != head_dim // 2:
        raise ShapeError(
            f"inv_freq has {inv_freq.shape[-1]} entries, expected {head_dim // 2}"
        )
    angles = positions.to(inv_freq.dtype)[:, None] * inv_freq[None, :]  # (T, hd/2)
    cos, sin = torch.cos(angles), torch.sin(angles)

    def rotate(x):
        x1, x2 = x[..., 0::2], x[..., 1::2]
        out1 = x1 * cos - x2 * sin
        out2 = x1 * sin + x2 * cos
        return torch.stack((out1, out2), dim=-1).flatten(-2)

    return rotate(q), rotate(k)


def grouped_query_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
                            causal: bool = True) -> torch.Tensor:
    """Scaled dot-product attention where query heads share grouped k/v heads.

    q: (..., n_heads, T, d); k, v: (..., n_kv_groups, T, d).  Query head h uses
    k/v group floor(h / (n_heads/n_kv_groups)).  Scores are scaled by 1/sqrt(d)
    and causally masked when requested.
    """
    n_heads, n_groups = q.shape[-3], k.shape[-3]
    if n_heads % n_groups != 0:
        raise ConfigError(
            f"n_heads {n_heads} not divisible by n_kv_groups {n_groups}"
        )
    repeat = n_heads // n_groups
    if repeat > 1:
        k = k.repeat_interleave(repeat, dim=-3)
        v = v.repeat_interleave(repeat, dim=-3)
    d = q.shape[-1]
    scores = q @ k.transpose(-2, -1) / math.sqrt(d)
    if causal:
        t = scores.shape[-1]
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool, device=q.device), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
    return torch.softmax(scores, dim=-1) @ v


def ffn_forward(x: torch.Tensor, weights: Mapping[str, torch.Tensor | None],
                activation: str) -> torch.Tensor:
    """Position-wise feed-forward.

    gelu:   out(gelu(in(x)))       keys in_weight/in_bias/out_weight/out_bias
    swiglu: down(silu(gate(x)) * up(x))   keys gate_weight/up_weight/down_weight
    """
    if activation == "gelu":
        h = F.linear(x, weights["in_weight"], weights.get("in_bias"))
        h = F.gelu(h)
        return F.linear(h, weights["out_weight"], weights.get("out_bias"))
    if activation == "swiglu":
        gate = F.linear(x, weights["gate_weight"], weights.get("gate_bias"))
        up = F.linear(x, weights["up_weight"], weights.get("up_bias"))
        return F.linear(F.silu(gate) * up, weights["down_weight"],
                        weights.get("down_bias"))
    raise ConfigError(f"unknown activation {activation!r}")


# ---------------------------------------------------------------------------
# modules

class LayerNorm(nn.Module):
    def __init__(self, dim: int, eps: float):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        self.eps = eps

    def forward(self, x):
        return layer_norm(x, self.weight, self.bias, self.eps)


class RMSNorm(nn.Module):
    def __init__(self, dim: int, eps: float):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim))
        self.eps = eps

    def forward(self, x):
        return rms_norm(x, self.weight, self.eps)


class RotaryTable(nn.Module):
    """Trainable inverse-frequency table for rotary position embedding."""

    def __init__(self, head_dim: int, base: float):
        super().__init__()
        self.inv_freq = nn.Parameter(build_inv_freq(head_dim, base))


class CausalSelfAttention(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        bias = config.variant == "gpt2"
        d, h, g = config.head_dim, config.n_heads, config.n_kv_groups
        self.n_heads, self.n_kv_groups, self.head_dim = h, g, d
        self.q_proj = nn.Linear(config.hidden, h * d, bias=bias)
        self.k_proj = nn.Linear(config.hidden, g * d, bias=bias)
        self.v_proj = nn.Linear(config.hidden, g * d, bias=bias)
        self.o_proj = nn.Linear(h * d, config.hidden, bias=bias)

    def forward(self, x, positions, rope: RotaryTable | None):
        b, t, _ = x.shape
        q = self.q_proj(x).view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(x).view(b, t, self.n_kv_groups, self.head_dim).transpose(1, 2)
        v = self.v_proj(x).view(b, t, self.n_kv_groups, self.head_dim).transpose(1, 2)
        if rope is not None:
            q, k = rotary_apply(q, k, positions, rope.inv_freq)
        out = grouped_query_attention(q, k, v, causal=True)
        out = out.transpose(1, 2).reshape(b, t, self.n_heads * self.head_dim)
        return self.o_proj(out)


class GeluFFN(nn.Module):
    def __init__(self, hidden: int, ffn_dim: int):
        super().__init__()
        self.fc_in = nn.Linear(hidden, ffn_dim)
        self.fc_out = nn.Linear(ffn_dim, hidden)

    def forward(self, x):
        return ffn_forward(x, {
            "in_weight": self.fc_in.weight, "in_bias": self.fc_in.bias,
            "out_weight": self.fc_out.weight, "out_bias": self.fc_out.bias,
        }, "gelu")


class SwigluFFN(nn.Module):
    def __init__(self, hidden: int, ffn_dim: int):
        super().__init__()
        self.gate_proj = nn.Linear(hidden, ffn_dim, bias=False)
        self.up_proj = nn.Linear(hidden, ffn_dim, bias=False)
        self.down_proj = nn.Linear(ffn_dim, hidden, bias=False)

    def forward(self, x):
        return ffn_forward(x, {
            "gate_weight": self.gate_proj.weight,
            "up_weight": self.up_proj.weight,
            "down_weight": self.down_proj.weight,
        }, "swiglu")


class TransformerBlock(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        norm = LayerNorm if config.variant == "gpt2" else RMSNorm
        self.attn_norm = norm(config.hidden, config.norm_eps)
        self.attn = CausalSelfAttention(config)
        self.ffn_norm = norm(config.hidden, config.norm_eps)
        if config.activation == "gelu":
            self.ffn = GeluFFN(config.hidden, config.ffn_dim)
        else:
            self.ffn = SwigluFFN(config.hidden, config.ffn_dim)

    def forward(self, x, positions, rope):
        x = x + self.attn(self.attn_norm(x), positions, rope)
        x = x + self.ffn(self.ffn_norm(x))
        return x


class ForecastModel(nn.Module):
    """Patch-embedding transformer forecaster (see module docstring)."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        self.input_embed = nn.Linear(config.patch_len, config.hidden)
        if config.variant == "gpt2":
            self.pos_table = nn.Embedding(config.max_positions, config.hidden)
            self.rope = None
        else:
            self.pos_table = None
            self.rope = RotaryTable(config.head_dim, config.rope_base)
        self.blocks = nn.ModuleList(
            TransformerBlock(config) for _ in range(config.n_layers)
        )
        if config.variant == "gpt2":
            self.final_norm = LayerNorm(config.hidden, config.norm_eps)
        else:
            self.final_norm = RMSNorm(config.hidden, config.norm_eps)
        self.head = nn.Linear(config.n_patches * config.hidden, config.pred_len)

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        return forward_forecast(self, windows)


def encode_patches(model: ForecastModel, patches: torch.Tensor) -> torch.Tensor:
    """Embed patch tokens and run the block stack; returns (B, n_patches, hidden).

    Split out of forward_forecast so the causal behaviour of the stack can be
    probed directly on constructed patch tensors.
    """
    cfg = model.config
    x = model.input_embed(patches)
    t = patches.shape[1]
    positions = torch.arange(t, device=patches.device)
    if model.pos_table is not None:
        if t > cfg.max_positions:
            raise ShapeError(
                f"{t} patch positions exceed the positional table size "
                f"{cfg.max_positions}"
            )
        x = x + model.pos_table(positions)
    for block in model.blocks:
        x = block(x, positions, model.rope)
    return model.final_norm(x)


def forward_forecast(model: ForecastModel, windows: torch.Tensor) -> torch.Tensor:
    """Full forecast pass over a batch of standardized windows.

    windows: (B, seq_len) -> predictions (B, pred_len), denormalized back to
    each window's own scale by RevIN.
    """
    if windows.dim() != 2 or windows.shape[1] != model.config.seq_len:
        raise ShapeError(
            f"expected windows of shape (B, {model.config.seq_len}), "
            f"got {tuple(windows.shape)}"
        )
    cfg = model.config
    normed, stats = revin_normalize(windows)
    patches = patchify(normed, cfg.patch_len, cfg.stride)
    states = encode_patches(model, patches)
    flat = states.reshape(states.shape[0], cfg.n_patches * cfg.hidden)
    out = model.head(flat)
    return revin_denormalize(out, stats)


def build_backbone(config: BackboneConfig, seed: int,
                   dtype: torch.dtype = torch.float32) -> ForecastModel:
    """Construct a ForecastModel with deterministic initialization.

    Weights draw from N(0, 0.02^2) using a generator seeded by ``seed``;
    biases start at zero, norm weights at one, and the rotary table at its
    closed-form frequencies.
    """
    model = ForecastModel(config).to(dtype)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, param in model.named_parameters():
            if name == "rope.inv_freq":
                param.copy_(build_inv_freq(config.head_dim, config.rope_base,
                                           dtype=dtype))
            elif name.endswith(".bias"):
                param.zero_()
            elif _is_norm_param(name):
                param.fill_(1.0)
            else:
                sample = torch.empty(param.shape, dtype=torch.float32)
                sample.normal_(mean=0.0, std=0.02, generator=gen)
                param.copy_(sample.to(dtype))
    return model


# ---------------------------------------------------------------------------
# freezing and pretrained-weight loading

def _is_norm_param(name: str) -> bool:
    return ".attn_norm." in name or ".ffn_norm." in name or name.startswith("final_norm.")


def _fpt_trainable(name: str) -> bool:
    # norm parameters, position information (learned table or rotary
    # frequencies), and the task-specific input embedding and head
    return (
        _is_norm_param(name)
        or name.startswith(("input_embed.", "head.", "pos_table."))
        or name == "rope.inv_freq"
    )


def _linear_probe_trainable(name: str) -> bool:
    return name.startswith(("input_embed.", "head."))


FREEZE_MODES = ("fpt", "full", "linear_probe")


class ParameterStore:
    """Name-indexed view of a model's parameters and their trainable flags."""

    def __init__(self, model: ForecastModel):
        self.entries: dict[str, torch.Tensor] = dict(model.named_parameters())
        self.trainable_mask: dict[str, bool] = {
            name: p.requires_grad for name, p in self.entries.items()
        }

    def trainable_names(self) -> list[str]:
        return sorted(n for n, t in self.trainable_mask.items() if t)

    def frozen_names(self) -> list[str]:
        return sorted(n for n, t in self.trainable_mask.items() if not t)

    def snapshot(self, names=None) -> dict[str, torch.Tensor]:
        if names is None:
            names = self.entries.keys()
        return {n: self.entries[n].detach().clone() for n in names}

    def count_parameters(self, trainable_only: bool = False) -> int:
        return sum(
            p.numel() for n, p in self.entries.items()
            if not trainable_only or self.trainable_mask[n]
        )


def apply_freeze_policy(model: ForecastModel, mode: str) -> ParameterStore:
    """Set requires_grad per policy and return the resulting ParameterStore.

    fpt: only normalization parameters, position information, the input
    embedding and the head remain trainable; attention and FFN weights are
    frozen.  linear_probe: input embedding and head only.  full: everything.
    """
    if mode not in FREEZE_MODES:
        raise ConfigError(f"unknown freeze mode {mode!r}; pick one of {FREEZE_MODES}")
    predicate = {
        "fpt": _fpt_trainable,
        "full": lambda name: True,
        "linear_probe": _linear_probe_trainable,
    }[mode]
    for name, param in model.named_parameters():
        param.requires_grad_(predicate(name))
    return ParameterStore(model)


@dataclass
class LoadReport:
    loaded: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    unused: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def summary(self) -> str:
        parts = [
            f"loaded {len(self.loaded)}",
            f"missing {len(self.missing)}",
            f"unused {len(self.unused)}",
        ]
        line = "weights: " + ", ".join(parts)
        return "\n".join([line] + [f"  note: {n}" for n in self.notes])


_BLOCK_PREFIX = "blocks."


def load_pretrained_weights(model: ForecastModel,
                            archive: Mapping[str, np.ndarray]) -> LoadReport:
    """Copy matching arrays from a name->array archive into the model.

    Names follow the model's own parameter scheme.  Blocks beyond the model's
    depth are skipped (loading a deep archive into a shallow model keeps the
    first n_layers blocks).  An oversized positional table is row-truncated.
    A name match with an incompatible shape is a hard error.
    """
    report = LoadReport()
    params = dict(model.named_parameters())
    n_layers = model.config.n_layers

    dropped_blocks: set[int] = set()
    for key in archive:
        if key.startswith(_BLOCK_PREFIX):
            try:
                idx = int(key[len(_BLOCK_PREFIX):].split(".", 1)[0])
            except ValueError:
                idx = -1
            if idx >= n_layers:
                dropped_blocks.add(idx)

    with torch.no_grad():
        for key in sorted(archive):
            if key not in params:
                report.unused.append(key)
                continue
            target = params[key]
            source = torch.as_tensor(np.asarray(archive[key]))
            if key == "pos_table.weight" and source.shape[0] > target.shape[0] \
                    and source.shape[1:] == target.shape[1:]:
                target.copy_(source[: target.shape[0]].to(target.dtype))
                report.loaded.append(key)
                report.notes.append(
                    f"pos_table.weight truncated from {source.shape[0]} to "
                    f"{target.shape[0]} positions"
                )
                continue
            if tuple(source.shape) != tuple(target.shape):
                raise ShapeError(
                    f"shape mismatch for {key}: archive {tuple(source.shape)} "
                    f"vs model {tuple(target.shape)}"
                )
            target.copy_(source.to(target.dtype))
            report.loaded.append(key)

    report.missing = sorted(set(params) - set(report.loaded))
    if dropped_blocks:
        archive_depth = max(dropped_blocks) + 1
        report.notes.append(
            f"archive provides {archive_depth} blocks; model keeps the first "
            f"{n_layers}"
        )
    return report
