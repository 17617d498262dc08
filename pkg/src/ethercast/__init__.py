"""Ethereum daily-price forecasting with frozen pretrained transformer
backbones (GPT-2-style and Llama-style) and classical baselines.

The library covers the full pipeline: OHLCV CSV ingestion, gap
regularization, chronological splits, sliding windows, standardization and
per-window RevIN, patch tokenization, backbone construction with selective
freezing, training with cosine annealing and early stopping, evaluation, and
an experiment registry behind the ``ethercast`` CLI.
"""

from .backbone import (BackboneConfig, ForecastModel, apply_freeze_policy,
                       build_backbone, forward_forecast,
                       load_pretrained_weights)
from .baselines import BaselineConfig, build_baseline
from .config import ExperimentConfig, load_config
from .errors import EthercastError
from .evaluation import MetricReport, compute_metrics, evaluate_model, \
    make_comparison_table
from .ingest import (PriceRecord, PriceSeries, SplitSpec, WindowSet,
                     chronological_split, few_shot_truncate, make_windows,
                     parse_price_csv, regularize_daily)
from .train import TrainConfig, cosine_lr, fit
from .transforms import (Standardizer, fit_standardizer, patchify,
                         revin_denormalize, revin_normalize)

__version__ = "0.1.0"

__all__ = [
    "BackboneConfig", "BaselineConfig", "EthercastError", "ExperimentConfig",
    "ForecastModel", "MetricReport", "PriceRecord", "PriceSeries", "SplitSpec",
    "Standardizer", "TrainConfig", "WindowSet", "apply_freeze_policy",
    "build_backbone", "build_baseline", "chronological_split",
    "compute_metrics", "cosine_lr", "evaluate_model", "few_shot_truncate",
    "fit", "fit_standardizer", "forward_forecast", "load_config",
    "load_pretrained_weights", "make_comparison_table", "make_windows",
    "parse_price_csv", "patchify", "regularize_daily", "revin_denormalize",
    "revin_normalize",
]
