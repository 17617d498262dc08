"""Evaluation: MAE/MSE/RMSE on the standardized scale, per-window prediction
tables carrying both standardized and dollar values, and comparison tables
ranking models within one protocol.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import EmptyInputError, ShapeError
from .ingest import WindowSet
from .transforms import Standardizer


@dataclass(frozen=True)
class MetricReport:
    mse: float
    mae: float
    rmse: float
    n: int
    scale_label: str = "standardized"

    def as_dict(self) -> dict:
        return {"mse": self.mse, "mae": self.mae, "rmse": self.rmse,
                "n": self.n, "scale_label": self.scale_label}


def compute_metrics(actual, predicted, scale_label: str = "standardized") -> MetricReport:
    """MAE = mean|y-yhat|, MSE = mean(y-yhat)^2, RMSE = sqrt(MSE), in float64."""
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise EmptyInputError("cannot compute metrics over zero values")
    if a.shape != p.shape:
        raise ShapeError(
            f"actual has {a.size} values but predicted has {p.size}"
        )
    err = a - p
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err * err))
    return MetricReport(mse=mse, mae=mae, rmse=math.sqrt(mse), n=a.size,
                        scale_label=scale_label)


@dataclass
class PredictionTable:
    """One row per test window: target date, actual and predicted values on
    the standardized scale and inverse-standardized back to dollars.

    For horizons longer than one day the row carries the first horizon step;
    metrics are always computed over every step.
    """

    rows: list[dict] = field(default_factory=list)

    COLUMNS = ("date", "actual_std", "pred_std", "actual_usd", "pred_usd")

    def __len__(self):
        return len(self.rows)

    def write_csv(self, target) -> None:
        close = False
        if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
            target = open(target, "w", newline="")
            close = True
        try:
            writer = csv.writer(target)
            writer.writerow(self.COLUMNS)
            for row in self.rows:
                writer.writerow([row[c] for c in self.COLUMNS])
        finally:
            if close:
                target.close()


def evaluate_model(model: torch.nn.Module, test_windows: WindowSet,
                   standardizer: Standardizer,
                   target_dates=None) -> tuple[MetricReport, PredictionTable]:
    """Run the model over every test window and score it.

    ``test_windows`` are on the standardized scale; metrics stay on that scale
    while the prediction table also carries dollar values via the inverse
    standardizer.  ``target_dates`` (optional) aligns one date per window.
    """
    if len(test_windows) == 0:
        raise EmptyInputError("test window set is empty")
    dtype = next(model.parameters()).dtype
    x = torch.from_numpy(test_windows.inputs).to(dtype)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            pred = model(x)
    finally:
        model.train(was_training)
    pred = pred.detach().cpu().numpy().astype(np.float64)
    actual = test_windows.targets
    if pred.shape != actual.shape:
        raise ShapeError(
            f"model produced horizon {pred.shape[1:]} but windows carry "
            f"{actual.shape[1:]}"
        )

    report = compute_metrics(actual, pred)
    table = PredictionTable()
    actual_usd = standardizer.inverse(actual)
    pred_usd = standardizer.inverse(pred)
    for i in range(len(actual)):
        date = target_dates[i] if target_dates is not None else i
        table.rows.append({
            "date": date.isoformat() if hasattr(date, "isoformat") else date,
            "actual_std": float(actual[i, 0]),
            "pred_std": float(pred[i, 0]),
            "actual_usd": float(actual_usd[i, 0]),
            "pred_usd": float(pred_usd[i, 0]),
        })
    return report, table


@dataclass
class ComparisonTable:
    protocol: str
    rows: list[dict]          # model, dataset, mse, mae, rmse, runs
    text: str

    def __str__(self):
        return self.text


def _metric_value(record, name: str) -> float:
    # registry records round-trip metrics as plain dicts; fresh evaluation
    # results carry MetricReport objects
    metrics = record.metrics
    if isinstance(metrics, dict):
        return float(metrics[name])
    return float(getattr(metrics, name))


def make_comparison_table(records) -> ComparisonTable:
    """Aggregate experiment records into a ranked model-comparison table.

    Records must share one protocol.  Rows group by (model, dataset); when a
    group holds several runs (e.g. seeds) the metrics are averaged.  Rows sort
    ascending by MSE and the best value in each metric column is starred.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no experiment records to compare")
    protocols = {r.protocol for r in records}
    if len(protocols) != 1:
        raise ValueError(
            f"cannot compare records across protocols: {sorted(protocols)}"
        )
    protocol = protocols.pop()

    groups: dict[tuple[str, str], list] = {}
    for r in records:
        groups.setdefault((r.model_kind, r.dataset_name), []).append(r)

    rows = []
    for (model_kind, dataset_name), group in groups.items():
        rows.append({
            "model": model_kind,
            "dataset": dataset_name,
            "mse": sum(_metric_value(g, "mse") for g in group) / len(group),
            "mae": sum(_metric_value(g, "mae") for g in group) / len(group),
            "rmse": sum(_metric_value(g, "rmse") for g in group) / len(group),
            "runs": len(group),
        })
    rows.sort(key=lambda r: r["mse"])

    best = {m: min(r[m] for r in rows) for m in ("mse", "mae", "rmse")}
    header = f"{'Model':<12} {'MSE':>10} {'MAE':>10} {'RMSE':>10}  {'Dataset':<16} {'Runs':>4}"
    lines = [f"{protocol} forecasting comparison (standardized scale)", header,
             "-" * len(header)]
    for r in rows:
        cells = []
        for m in ("mse", "mae", "rmse"):
            star = "*" if r[m] == best[m] else " "
            cells.append(f"{r[m]:>9.4f}{star}")
        lines.append(
            f"{r['model']:<12} {cells[0]} {cells[1]} {cells[2]}  "
            f"{r['dataset']:<16} {r['runs']:>4}"
        )
    return ComparisonTable(protocol=protocol, rows=rows, text="\n".join(lines))
