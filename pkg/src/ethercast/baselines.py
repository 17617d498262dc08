"""Reference forecasters trained under the same pipeline as the transformer
backbones: a small dense ANN, a dropout-regularized MLP, a single-layer LSTM,
and a patch transformer (PatchTST-style).

ANN/MLP/LSTM consume the standardized 7-value window directly; the patch
transformer shares the RevIN + patchify path with the backbone.  Every model
exposes the same interface: ``model(windows) -> (B, pred_len)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .backbone import GeluFFN, LayerNorm, grouped_query_attention
from .errors import ConfigError, ShapeError
from .transforms import patch_count, patchify, revin_denormalize, revin_normalize

BASELINE_KINDS = ("ann", "mlp", "lstm", "patchtst")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "ann"
    seq_len: int = 7
    pred_len: int = 1
    ann_hidden: tuple[int, int] = (32, 16)
    mlp_hidden: tuple[int, int] = (64, 32)
    dropout: float = 0.4
    lstm_units: int = 50
    patch_len: int = 16
    stride: int = 8
    tst_layers: int = 3
    tst_hidden: int = 128
    tst_heads: int = 8
    tst_ffn: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ConfigError(f"unknown baseline kind {self.kind!r}; "
                              f"pick one of {BASELINE_KINDS}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        sizes = (self.seq_len, self.pred_len, self.lstm_units, self.patch_len,
                 self.stride, self.tst_layers, self.tst_hidden, self.tst_heads,
                 self.tst_ffn, *self.ann_hidden, *self.mlp_hidden)
        if any(s < 1 for s in sizes):
            raise ConfigError("all layer sizes must be positive")
        if self.tst_hidden % self.tst_heads != 0:
            raise ConfigError(
                f"tst_hidden {self.tst_hidden} not divisible by tst_heads "
                f"{self.tst_heads}"
            )


def _check_windows(windows: torch.Tensor, seq_len: int):
    if windows.dim() != 2 or windows.shape[1] != seq_len:
        raise ShapeError(
            f"expected windows of shape (B, {seq_len}), got {tuple(windows.shape)}"
        )


class DenseForecaster(nn.Module):
    """Fully connected net over the flat window, optional hidden dropout."""

    def __init__(self, config: BaselineConfig, hidden: tuple[int, int], dropout: float):
        super().__init__()
        self.seq_len = config.seq_len
        h1, h2 = hidden
        layers = [nn.Linear(config.seq_len, h1), nn.ReLU()]
        if dropout > 0:
            layers.append(nn.Dropout(dropout))
        layers += [nn.Linear(h1, h2), nn.ReLU()]
        if dropout > 0:
            layers.append(nn.Dropout(dropout))
        layers.append(nn.Linear(h2, config.pred_len))
        self.net = nn.Sequential(*layers)

    def forward(self, windows):
        _check_windows(windows, self.seq_len)
        return self.net(windows)


class LstmForecaster(nn.Module):
    """Single recurrent layer over the window, dense readout of the last state."""

    def __init__(self, config: BaselineConfig):
        super().__init__()
        self.seq_len = config.seq_len
        self.lstm = nn.LSTM(input_size=1, hidden_size=config.lstm_units,
                            num_layers=1, batch_first=True)
        self.dropout = nn.Dropout(config.dropout)
        self.head = nn.Linear(config.lstm_units, config.pred_len)

    def forward(self, windows):
        _check_windows(windows, self.seq_len)
        _, (h_n, _) = self.lstm(windows.unsqueeze(-1))
        return self.head(self.dropout(h_n[-1]))


class PatchTransformerLayer(nn.Module):
    """Pre-norm encoder layer with bidirectional (non-causal) attention."""

    def __init__(self, hidden: int, n_heads: int, ffn_dim: int, eps: float = 1e-5):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = hidden // n_heads
        self.attn_norm = LayerNorm(hidden, eps)
        self.q_proj = nn.Linear(hidden, hidden)
        self.k_proj = nn.Linear(hidden, hidden)
        self.v_proj = nn.Linear(hidden, hidden)
        self.o_proj = nn.Linear(hidden, hidden)
        self.ffn_norm = LayerNorm(hidden, eps)
        self.ffn = GeluFFN(hidden, ffn_dim)

    def forward(self, x):
        b, t, _ = x.shape
        h = self.attn_norm(x)
        q = self.q_proj(h).view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(h).view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(h).view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        attn = grouped_query_attention(q, k, v, causal=False)
        attn = attn.transpose(1, 2).reshape(b, t, -1)
        x = x + self.o_proj(attn)
        return x + self.ffn(self.ffn_norm(x))


class PatchTransformerForecaster(nn.Module):
    """Channel-independent patch transformer sharing the backbone's RevIN and
    patch geometry."""

    def __init__(self, config: BaselineConfig):
        super().__init__()
        self.seq_len = config.seq_len
        self.patch_len = config.patch_len
        self.stride = config.stride
        self.n_patches = patch_count(config.seq_len, config.patch_len, config.stride)
        self.input_embed = nn.Linear(config.patch_len, config.tst_hidden)
        self.pos_embed = nn.Parameter(
            torch.zeros(self.n_patches, config.tst_hidden)
        )
        self.layers = nn.ModuleList(
            PatchTransformerLayer(config.tst_hidden, config.tst_heads, config.tst_ffn)
            for _ in range(config.tst_layers)
        )
        self.final_norm = LayerNorm(config.tst_hidden, 1e-5)
        self.head = nn.Linear(self.n_patches * config.tst_hidden, config.pred_len)

    def forward(self, windows):
        _check_windows(windows, self.seq_len)
        normed, stats = revin_normalize(windows)
        patches = patchify(normed, self.patch_len, self.stride)
        x = self.input_embed(patches) + self.pos_embed
        for layer in self.layers:
            x = layer(x)
        x = self.final_norm(x)
        out = self.head(x.reshape(x.shape[0], -1))
        return revin_denormalize(out, stats)


def build_baseline(config: BaselineConfig) -> nn.Module:
    """Construct a baseline deterministically from config.seed.

    Initialization draws from a forked RNG stream so building a model never
    perturbs the global generator.
    """
    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        if config.kind == "ann":
            return DenseForecaster(config, config.ann_hidden, dropout=0.0)
        if config.kind == "mlp":
            return DenseForecaster(config, config.mlp_hidden, dropout=config.dropout)
        if config.kind == "lstm":
            return LstmForecaster(config)
        if config.kind == "patchtst":
            return PatchTransformerForecaster(config)
    raise ConfigError(f"unknown baseline kind {config.kind!r}")


def baseline_forward(model: nn.Module, windows: torch.Tensor) -> torch.Tensor:
    """Uniform inference entry point: eval mode (dropout off), no grad."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            return model(windows)
    finally:
        model.train(was_training)
