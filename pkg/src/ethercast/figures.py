"""Figure rendering for reports: forecast overlays, training curves, price
history, and model-comparison bars.  Every function writes a PNG next to the
delimited output and returns the path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

from datetime import date  # noqa: E402

plt.rcParams.update({
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _finish(fig, ax, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _coerce_dates(raw):
    try:
        return [date.fromisoformat(str(d)) for d in raw], True
    except ValueError:
        return list(range(len(raw))), False


def plot_forecast(prediction_table, path, title="Actual vs predicted open price"):
    """Overlay actual and predicted dollar values over the test dates."""
    rows = prediction_table.rows
    xs, dated = _coerce_dates([r["date"] for r in rows])
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(xs, [r["actual_usd"] for r in rows], label="actual", lw=1.2)
    ax.plot(xs, [r["pred_usd"] for r in rows], label="predicted", lw=1.2,
            alpha=0.85)
    ax.set_title(title)
    ax.set_ylabel("USD")
    ax.set_xlabel("date" if dated else "test window")
    if dated:
        ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m"))
        fig.autofmt_xdate()
    ax.legend()
    return _finish(fig, ax, path)


def plot_history(history, path, title="Training curves"):
    """Train/validation loss per epoch with the learning-rate schedule."""
    epochs = list(range(1, history.epochs_run + 1))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(epochs, history.train_loss, label="train MSE", marker="o", ms=3)
    ax.plot(epochs, history.val_loss, label="val MSE", marker="s", ms=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE (standardized)")
    ax.set_yscale("log")
    ax.set_title(title + ("  [early stop]" if history.stopped_early else ""))
    ax2 = ax.twinx()
    ax2.plot(epochs, history.lr, color="gray", ls="--", alpha=0.6, label="lr")
    ax2.set_ylabel("learning rate")
    ax2.grid(False)
    lines, labels = ax.get_legend_handles_labels()
    l2, lab2 = ax2.get_legend_handles_labels()
    ax.legend(lines + l2, labels + lab2, loc="upper right")
    return _finish(fig, ax, path)


def plot_series(series, path, channel="open", title="Daily price history"):
    """Full history of one channel (the Figure-1-style overview plot)."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(series.dates(), series.values(channel), lw=0.9)
    ax.set_title(title)
    ax.set_ylabel(f"{channel} (USD)")
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m"))
    fig.autofmt_xdate()
    return _finish(fig, ax, path)


def plot_comparison(comparison, path):
    """Bar chart of per-model MSE from a comparison table."""
    rows = comparison.rows
    labels = [f"{r['model']}\n{r['dataset']}" for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows)), 4))
    bars = ax.bar(labels, [r["mse"] for r in rows], color="steelblue")
    bars[0].set_color("darkorange")  # rows are MSE-sorted; first is best
    ax.set_ylabel("MSE (standardized)")
    ax.set_title(f"{comparison.protocol} forecasting comparison")
    for bar, r in zip(bars, rows):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(),
                f"{r['mse']:.4f}", ha="center", va="bottom", fontsize=8)
    return _finish(fig, ax, path)
