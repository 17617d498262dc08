"""Experiment configuration: flat key=value files with one section per
concern ([data], [model], [train]).  Every key is typed and enumerated below;
unknown sections or keys are hard errors so typos never pass silently.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .backbone import BackboneConfig
from .baselines import BASELINE_KINDS, BaselineConfig
from .errors import ConfigError
from .ingest import SplitSpec
from .train import TrainConfig

BACKBONE_KINDS = ("gpt2", "llama")
MODEL_KINDS = BACKBONE_KINDS + BASELINE_KINDS


def _int_pair(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated ints, got {text!r}")
    return int(parts[0]), int(parts[1])


def _opt_str(text: str) -> str | None:
    return text.strip() or None


# section -> key -> (converter, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "data": {
        "csv": (_opt_str, None),
        "channel": (str, "open"),
        "gap_policy": (str, "forward_fill"),
        "train_ratio": (float, 0.7),
        "val_ratio": (float, 0.1),
        "test_ratio": (float, 0.2),
        "seq_len": (int, 7),
        "pred_len": (int, 1),
    },
    "model": {
        "kind": (str, "gpt2"),
        "freeze": (str, "fpt"),
        "pretrained": (_opt_str, None),
        "n_layers": (int, 12),
        "hidden": (int, 768),
        "n_heads": (int, 12),
        "n_kv_groups": (int, None),
        "ffn_dim": (int, 3072),
        "max_positions": (int, 1024),
        "patch_len": (int, 16),
        "stride": (int, 8),
        "activation": (_opt_str, None),
        "rope_base": (float, 10000.0),
        "norm_eps": (float, 1e-5),
        "dropout": (float, 0.4),
        "lstm_units": (int, 50),
        "ann_hidden": (_int_pair, (32, 16)),
        "mlp_hidden": (_int_pair, (64, 32)),
        "tst_layers": (int, 3),
        "tst_hidden": (int, 128),
        "tst_heads": (int, 8),
        "tst_ffn": (int, 256),
    },
    "train": {
        "base_lr": (float, 1e-4),
        "min_lr": (float, None),
        "batch_size": (int, 32),
        "max_epochs": (int, 20),
        "patience": (int, 5),
        "accum_steps": (int, 1),
        "loss_scale": (float, 1.0),
        "seed": (int, 0),
        "protocol": (str, "short_term"),
        "few_shot_fraction": (float, 0.1),
    },
}


@dataclass
class ExperimentConfig:
    dataset_path: str | None = None
    channel: str = "open"
    gap_policy: str = "forward_fill"
    split: SplitSpec = field(default_factory=SplitSpec)
    seq_len: int = 7
    pred_len: int = 1
    model_kind: str = "gpt2"
    freeze_mode: str = "fpt"
    pretrained_path: str | None = None
    model_params: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)

    def backbone_config(self) -> BackboneConfig:
        if self.model_kind not in BACKBONE_KINDS:
            raise ConfigError(f"{self.model_kind!r} is not a transformer backbone")
        p = self.model_params
        activation = p.get("activation")
        if activation is None:
            activation = "gelu" if self.model_kind == "gpt2" else "swiglu"
        return BackboneConfig(
            variant=self.model_kind,
            n_layers=p["n_layers"], hidden=p["hidden"], n_heads=p["n_heads"],
            n_kv_groups=p.get("n_kv_groups"), ffn_dim=p["ffn_dim"],
            max_positions=p["max_positions"], seq_len=self.seq_len,
            patch_len=p["patch_len"], stride=p["stride"],
            pred_len=self.pred_len, activation=activation,
            rope_base=p["rope_base"], norm_eps=p["norm_eps"],
        )

    def baseline_config(self) -> BaselineConfig:
        if self.model_kind not in BASELINE_KINDS:
            raise ConfigError(f"{self.model_kind!r} is not a baseline kind")
        p = self.model_params
        return BaselineConfig(
            kind=self.model_kind, seq_len=self.seq_len, pred_len=self.pred_len,
            ann_hidden=tuple(p["ann_hidden"]), mlp_hidden=tuple(p["mlp_hidden"]),
            dropout=p["dropout"], lstm_units=p["lstm_units"],
            patch_len=p["patch_len"], stride=p["stride"],
            tst_layers=p["tst_layers"], tst_hidden=p["tst_hidden"],
            tst_heads=p["tst_heads"], tst_ffn=p["tst_ffn"],
            seed=self.train.seed,
        )

    def snapshot(self) -> dict:
        """JSON-able view used for hashing and registry records."""
        return {
            "data": {
                "csv": self.dataset_path, "channel": self.channel,
                "gap_policy": self.gap_policy,
                "train_ratio": self.split.train_ratio,
                "val_ratio": self.split.val_ratio,
                "test_ratio": self.split.test_ratio,
                "seq_len": self.seq_len, "pred_len": self.pred_len,
            },
            "model": {"kind": self.model_kind, "freeze": self.freeze_mode,
                      "pretrained": self.pretrained_path,
                      **{k: list(v) if isinstance(v, tuple) else v
                         for k, v in sorted(self.model_params.items())}},
            "train": {
                "base_lr": self.train.base_lr, "min_lr": self.train.min_lr,
                "batch_size": self.train.batch_size,
                "max_epochs": self.train.max_epochs,
                "patience": self.train.patience,
                "accum_steps": self.train.accum_steps,
                "loss_scale": self.train.loss_scale, "seed": self.train.seed,
                "protocol": self.train.protocol,
                "few_shot_fraction": self.train.few_shot_fraction,
            },
        }


def config_digest(config: ExperimentConfig) -> str:
    blob = json.dumps(config.snapshot(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _parse_sections(path) -> dict[str, dict]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    text = Path(path).read_text()
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    values = {s: {k: default for k, (_, default) in d.items()}
              for s, d in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(
                f"unknown config section [{section}]; "
                f"expected one of {sorted(SCHEMA)}"
            )
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(
                    f"unknown config key {key!r} in section [{section}]"
                )
            converter = SCHEMA[section][key][0]
            try:
                values[section][key] = converter(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(
                    f"bad value for {key!r} in section [{section}]: {exc}"
                ) from exc
    return values


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file and apply CLI overrides (seed, dataset, model,
    protocol, pretrained)."""
    values = _parse_sections(path)
    overrides = overrides or {}
    if overrides.get("dataset") is not None:
        values["data"]["csv"] = str(overrides["dataset"])
    if overrides.get("model") is not None:
        values["model"]["kind"] = overrides["model"]
    if overrides.get("seed") is not None:
        values["train"]["seed"] = int(overrides["seed"])
    if overrides.get("protocol") is not None:
        values["train"]["protocol"] = overrides["protocol"]
    if overrides.get("pretrained") is not None:
        values["model"]["pretrained"] = str(overrides["pretrained"])

    data, model, train = values["data"], values["model"], values["train"]
    if model["kind"] not in MODEL_KINDS:
        raise ConfigError(
            f"unknown model kind {model['kind']!r}; expected one of {MODEL_KINDS}"
        )
    split = SplitSpec(data["train_ratio"], data["val_ratio"], data["test_ratio"])
    train_config = TrainConfig(
        base_lr=train["base_lr"], min_lr=train["min_lr"],
        batch_size=train["batch_size"], max_epochs=train["max_epochs"],
        patience=train["patience"], accum_steps=train["accum_steps"],
        loss_scale=train["loss_scale"], seed=train["seed"],
        protocol=train["protocol"],
        few_shot_fraction=train["few_shot_fraction"],
    )
    model_params = {k: v for k, v in model.items()
                    if k not in ("kind", "freeze", "pretrained")}
    return ExperimentConfig(
        dataset_path=data["csv"], channel=data["channel"],
        gap_policy=data["gap_policy"], split=split,
        seq_len=data["seq_len"], pred_len=data["pred_len"],
        model_kind=model["kind"], freeze_mode=model["freeze"],
        pretrained_path=model["pretrained"], model_params=model_params,
        train=train_config,
    )
