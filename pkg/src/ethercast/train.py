"""Training loop: Adam with per-epoch cosine annealing, gradient accumulation
under loss scaling, early stopping on validation MSE, and seeded shuffling so
identical (config, seed, data) runs are bitwise reproducible single-threaded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch

from .errors import ConfigError, InsufficientDataError, NumericError
from .ingest import WindowSet

PROTOCOLS = ("short_term", "few_shot")


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 1e-4
    min_lr: float | None = None      # None -> base_lr / 100
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 5
    accum_steps: int = 1
    loss_scale: float = 1.0
    seed: int = 0
    protocol: str = "short_term"
    few_shot_fraction: float = 0.1

    def __post_init__(self):
        if self.min_lr is None:
            object.__setattr__(self, "min_lr", self.base_lr / 100.0)
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if not (0.0 <= self.min_lr <= self.base_lr):
            raise ConfigError(
                f"min_lr must lie in [0, base_lr], got {self.min_lr}"
            )
        for name in ("batch_size", "max_epochs", "patience", "accum_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.loss_scale <= 0:
            raise ConfigError(f"loss_scale must be positive, got {self.loss_scale}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if not (0.0 < self.few_shot_fraction <= 1.0):
            raise ConfigError(
                f"few_shot_fraction must lie in (0, 1], got {self.few_shot_fraction}"
            )


def cosine_lr(epoch: int, config: TrainConfig) -> float:
    """Single-cycle cosine annealing stepped per epoch.

    lr = min_lr + 0.5 (base_lr - min_lr) (1 + cos(pi * epoch / max_epochs)),
    so epoch 0 gives base_lr and epoch max_epochs gives min_lr.
    """
    if not (0 <= epoch <= config.max_epochs):
        raise ValueError(
            f"epoch {epoch} outside schedule range [0, {config.max_epochs}]"
        )
    span = config.base_lr - config.min_lr
    return config.min_lr + 0.5 * span * (1.0 + math.cos(math.pi * epoch / config.max_epochs))


@dataclass
class EarlyStopState:
    best_val_loss: float = math.inf
    epochs_since_improvement: int = 0
    best_checkpoint: Any = None


def early_stop_update(state: EarlyStopState, val_loss: float, patience: int,
                      snapshot: Any = None) -> tuple[EarlyStopState, str]:
    """Advance the early-stopping state with one epoch's validation loss.

    Strict improvement (val_loss < best) resets the counter and stores
    ``snapshot`` as the best checkpoint; otherwise the counter increments, and
    the decision becomes "stop" once it reaches ``patience``.
    """
    if not math.isfinite(val_loss):
        raise NumericError(f"validation loss is not finite: {val_loss}")
    if patience < 1:
        raise ConfigError(f"patience must be >= 1, got {patience}")
    if val_loss < state.best_val_loss:
        state.best_val_loss = val_loss
        state.epochs_since_improvement = 0
        state.best_checkpoint = snapshot
        return state, "continue"
    state.epochs_since_improvement += 1
    if state.epochs_since_improvement >= patience:
        return state, "stop"
    return state, "continue"


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    stopped_early: bool = False
    epochs_run: int = 0
    best_epoch: int = -1
    best_val_loss: float = math.inf

    def append(self, train_loss: float, val_loss: float, lr: float):
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.lr.append(lr)
        self.epochs_run += 1


def _mse(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return torch.mean((pred - target) ** 2)


def fit(model: torch.nn.Module, train_windows: WindowSet, val_windows: WindowSet,
        config: TrainConfig) -> tuple[torch.nn.Module, TrainHistory]:
    """Train ``model`` on standardized windows; returns the best-val snapshot.

    Per epoch: seeded shuffle (stream derived from (seed, epoch)), mini-batches
    of ``batch_size``, loss scaled by ``loss_scale`` during backward, gradients
    divided by loss_scale times the number of accumulated micro-batches before
    each Adam step.  Only parameters with requires_grad are handed to the
    optimizer, so frozen weights stay bit-identical.
    """
    if len(train_windows) == 0:
        raise InsufficientDataError("training window set is empty")
    if len(val_windows) == 0:
        raise InsufficientDataError("validation window set is empty")

    torch.set_num_threads(1)
    torch.manual_seed(config.seed)

    dtype = next(model.parameters()).dtype
    x_train = torch.from_numpy(train_windows.inputs).to(dtype)
    y_train = torch.from_numpy(train_windows.targets).to(dtype)
    x_val = torch.from_numpy(val_windows.inputs).to(dtype)
    y_val = torch.from_numpy(val_windows.targets).to(dtype)

    trainable = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    if not trainable:
        raise ConfigError("model has no trainable parameters")
    optimizer = torch.optim.Adam((p for _, p in trainable), lr=config.base_lr,
                                 betas=(0.9, 0.999), eps=1e-8)

    state = EarlyStopState()
    history = TrainHistory()
    n = len(x_train)

    for epoch in range(config.max_epochs):
        lr = cosine_lr(epoch, config)
        for group in optimizer.param_groups:
            group["lr"] = lr

        rng = np.random.default_rng([config.seed, epoch])
        perm = rng.permutation(n)
        batches = [perm[i:i + config.batch_size]
                   for i in range(0, n, config.batch_size)]

        model.train()
        optimizer.zero_grad()
        loss_sum = 0.0
        pending = 0
        for b, idx in enumerate(batches):
            pred = model(x_train[idx])
            loss = _mse(pred, y_train[idx])
            if not torch.isfinite(loss):
                raise NumericError(
                    f"training loss became non-finite at epoch {epoch}, batch {b}"
                )
            loss_sum += loss.item() * len(idx)
            (loss * config.loss_scale).backward()
            pending += 1
            if pending == config.accum_steps or b == len(batches) - 1:
                denom = config.loss_scale * pending
                with torch.no_grad():
                    for _, p in trainable:
                        if p.grad is not None:
                            p.grad.div_(denom)
                optimizer.step()
                optimizer.zero_grad()
                pending = 0

        model.eval()
        with torch.no_grad():
            val_loss_t = _mse(model(x_val), y_val)
        if not torch.isfinite(val_loss_t):
            raise NumericError(f"validation loss became non-finite at epoch {epoch}")
        val_loss = float(val_loss_t.item())
        history.append(loss_sum / n, val_loss, lr)

        improved = val_loss < state.best_val_loss
        snapshot = (
            {name: p.detach().clone() for name, p in trainable} if improved else None
        )
        state, decision = early_stop_update(state, val_loss, config.patience, snapshot)
        if improved:
            history.best_epoch = epoch
        if decision == "stop":
            history.stopped_early = True
            break

    if state.best_checkpoint is not None:
        with torch.no_grad():
            for name, p in trainable:
                p.copy_(state.best_checkpoint[name])
    history.best_val_loss = state.best_val_loss
    return model, history
