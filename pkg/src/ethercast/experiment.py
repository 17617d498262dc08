"""End-to-end experiment drivers: dataset preparation, the train/evaluate
pipeline for one configuration, and checkpoint re-evaluation.

Pipeline order: parse CSV -> regularize daily gaps -> chronological split ->
(few-shot truncation of the training segment only) -> fit the standardizer on
the (possibly truncated) training values -> standardize each segment -> build
stride-1 windows -> train -> evaluate on the test windows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch.nn as nn

from .backbone import (LoadReport, ParameterStore, apply_freeze_policy,
                       build_backbone)
from .baselines import build_baseline
from .config import BACKBONE_KINDS, ExperimentConfig, config_digest
from .errors import ConfigError
from .evaluation import MetricReport, PredictionTable, evaluate_model
from .ingest import (PriceSeries, SplitResult, WindowSet, chronological_split,
                     few_shot_truncate, make_windows, parse_price_csv,
                     regularize_daily, write_price_csv)
from .registry import (dataset_digest, make_record, registry_append,
                       resolve_registry_path)
from .train import TrainHistory, fit
from .transforms import Standardizer, fit_standardizer
from .weights import load_archive, load_checkpoint, save_checkpoint
from .backbone import load_pretrained_weights


@dataclass
class PreparedData:
    series: PriceSeries
    split: SplitResult
    train_segment: PriceSeries          # after any few-shot truncation
    standardizer: Standardizer
    train_windows: WindowSet
    val_windows: WindowSet
    test_windows: WindowSet
    test_target_dates: list


@dataclass
class RunResult:
    record: object
    history: TrainHistory
    metrics: MetricReport
    predictions: PredictionTable
    artifacts: dict = field(default_factory=dict)
    load_report: LoadReport | None = None


def load_series(path, gap_policy: str = "forward_fill") -> PriceSeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    return regularize_daily(parse_price_csv(path), policy=gap_policy)


def prepare_data(config: ExperimentConfig) -> PreparedData:
    if config.dataset_path is None:
        raise ConfigError("no dataset configured: set [data] csv or pass --dataset")
    series = load_series(config.dataset_path, config.gap_policy)
    need = config.seq_len + config.pred_len
    split = chronological_split(series, config.split, min_segment=need)

    train_segment = split.train
    if config.train.protocol == "few_shot":
        train_segment = few_shot_truncate(
            train_segment, config.train.few_shot_fraction,
            config.seq_len, config.pred_len,
        )

    standardizer = fit_standardizer(train_segment.values(config.channel))

    def windows(segment: PriceSeries) -> WindowSet:
        values = standardizer.transform(segment.values(config.channel))
        return make_windows(values, config.seq_len, config.pred_len)

    test_dates = split.test.dates()
    test_windows = windows(split.test)
    target_dates = [test_dates[k + config.seq_len]
                    for k in range(len(test_windows))]
    return PreparedData(
        series=series, split=split, train_segment=train_segment,
        standardizer=standardizer,
        train_windows=windows(train_segment),
        val_windows=windows(split.val),
        test_windows=test_windows,
        test_target_dates=target_dates,
    )


def build_model(config: ExperimentConfig):
    """Build the configured model; returns (model, store, load_report).

    Backbones get optional pretrained weights and the freeze policy; baselines
    train fully and report store=None.
    """
    if config.model_kind in BACKBONE_KINDS:
        model = build_backbone(config.backbone_config(), seed=config.train.seed)
        load_report = None
        if config.pretrained_path:
            load_report = load_pretrained_weights(
                model, load_archive(config.pretrained_path)
            )
        store = apply_freeze_policy(model, config.freeze_mode)
        return model, store, load_report
    model = build_baseline(config.baseline_config())
    return model, None, None


def prepare_dataset(dataset_path, out_dir, gap_policy: str = "forward_fill",
                    split=None) -> dict:
    """`prepare` command body: canonical CSV plus a split manifest."""
    from .ingest import SplitSpec

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = load_series(dataset_path, gap_policy)
    split = split or SplitSpec()
    result = chronological_split(series, split)

    canonical = out_dir / "canonical.csv"
    write_price_csv(series, canonical)
    manifest = {
        "source": str(dataset_path),
        "records": len(series),
        "first_date": series[0].date.isoformat(),
        "last_date": series[-1].date.isoformat(),
        "filled_days": sum(1 for r in series if r.filled),
        "split": {
            "train": len(result.train), "val": len(result.val),
            "test": len(result.test),
        },
        "warnings": result.warnings,
    }
    manifest_path = out_dir / "splits.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return {"canonical": str(canonical), "manifest": str(manifest_path),
            **manifest}


def run_experiment(config: ExperimentConfig, out_dir,
                   render_figures: bool = True) -> RunResult:
    """Train and evaluate one configuration; persist artifacts and a registry
    record under ``out_dir`` (registry location may be overridden by env)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    data = prepare_data(config)
    model, _store, load_report = build_model(config)
    model, history = fit(model, data.train_windows, data.val_windows, config.train)
    metrics, predictions = evaluate_model(
        model, data.test_windows, data.standardizer, data.test_target_dates
    )

    digest = config_digest(config)
    stem = out_dir / "checkpoint"
    save_checkpoint(model, stem, {
        "config_digest": digest,
        "model_kind": config.model_kind,
        "protocol": config.train.protocol,
        "epochs_run": history.epochs_run,
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_val_loss,
        "test_mse": metrics.mse,
    })
    predictions_path = out_dir / "predictions.csv"
    predictions.write_csv(predictions_path)

    artifacts = {
        "checkpoint": str(stem.with_suffix(".npz")),
        "predictions": str(predictions_path),
    }
    if render_figures:
        from . import figures

        artifacts["forecast_png"] = str(
            figures.plot_forecast(predictions, out_dir / "forecast.png")
        )
        artifacts["history_png"] = str(
            figures.plot_history(history, out_dir / "history.png")
        )

    record = make_record(
        config_snapshot=config.snapshot(), seed=config.train.seed,
        dataset_name=Path(config.dataset_path).stem,
        dataset_dig=dataset_digest(config.dataset_path),
        protocol=config.train.protocol, model_kind=config.model_kind,
        metrics=metrics, artifacts=artifacts,
    )
    registry_append(record, resolve_registry_path(out_dir))
    return RunResult(record=record, history=history, metrics=metrics,
                     predictions=predictions, artifacts=artifacts,
                     load_report=load_report)


def evaluate_checkpoint(config: ExperimentConfig, checkpoint_stem,
                        out_dir, render_figures: bool = True):
    """Re-evaluate a saved checkpoint on the configured test split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = prepare_data(config)
    model, _store, _report = build_model(config)
    manifest = load_checkpoint(model, checkpoint_stem)
    metrics, predictions = evaluate_model(
        model, data.test_windows, data.standardizer, data.test_target_dates
    )
    predictions_path = out_dir / "predictions.csv"
    predictions.write_csv(predictions_path)
    artifacts = {"predictions": str(predictions_path)}
    if render_figures:
        from . import figures

        artifacts["forecast_png"] = str(
            figures.plot_forecast(predictions, out_dir / "forecast.png")
        )
    return metrics, predictions, manifest, artifacts
