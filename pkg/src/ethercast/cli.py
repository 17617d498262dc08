"""Command-line interface.

Commands: prepare, train, fewshot, evaluate, compare, export-plot-data.
Exit codes: 0 success, 1 configuration/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import load_config
from .errors import EthercastError
from .evaluation import make_comparison_table
from .experiment import (evaluate_checkpoint, load_series, prepare_dataset,
                         run_experiment)
from .ingest import SplitSpec
from .registry import registry_read, resolve_registry_path

COMMANDS = ("prepare", "train", "fewshot", "evaluate", "compare",
            "export-plot-data")

USAGE = (
    "usage: ethercast <command> [--config PATH] [--seed INT] [--dataset PATH]\n"
    "                 [--model KIND] [--protocol NAME] [--out DIR]\n"
    f"commands: {', '.join(COMMANDS)}"
)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ethercast",
        description="Daily price forecasting with frozen transformer "
                    "backbones and classical baselines.",
    )
    p.add_argument("command", help=f"one of: {', '.join(COMMANDS)}")
    p.add_argument("--config", help="experiment config file (key=value sections)")
    p.add_argument("--seed", type=int, help="override [train] seed")
    p.add_argument("--dataset", help="override [data] csv path")
    p.add_argument("--model",
                   help="override [model] kind "
                        "(gpt2|llama|ann|mlp|lstm|patchtst)")
    p.add_argument("--protocol", help="override protocol (short_term|few_shot)")
    p.add_argument("--out", default="runs/latest", help="artifact directory")
    p.add_argument("--checkpoint",
                   help="checkpoint stem for evaluate/export-plot-data "
                        "(default <out>/checkpoint)")
    p.add_argument("--pretrained", help="override [model] pretrained archive")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering")
    return p


def _overrides(args) -> dict:
    return {"seed": args.seed, "dataset": args.dataset, "model": args.model,
            "protocol": args.protocol, "pretrained": args.pretrained}


def _require_config(args):
    if not args.config:
        raise EthercastError(f"{args.command} needs --config")
    return load_config(args.config, _overrides(args))


def _cmd_prepare(args) -> tuple[int, dict]:
    dataset = args.dataset
    split = SplitSpec()
    if args.config:
        cfg = load_config(args.config, _overrides(args))
        dataset = cfg.dataset_path
        split = cfg.split
    if not dataset:
        raise EthercastError("prepare needs --dataset or a config with [data] csv")
    info = prepare_dataset(dataset, args.out, split=split)
    if not args.no_figures:
        from . import figures

        series = load_series(dataset)
        info["history_png"] = str(
            figures.plot_series(series, Path(args.out) / "price_history.png")
        )
    print(f"prepared {info['records']} daily records "
          f"({info['first_date']} .. {info['last_date']}, "
          f"{info['filled_days']} gap-filled)")
    print(f"split sizes: {info['split']}")
    for w in info["warnings"]:
        print(f"warning: {w}")
    print(f"wrote {info['canonical']}")
    print(f"wrote {info['manifest']}")
    return 0, info


def _cmd_train(args, protocol: str | None = None) -> tuple[int, dict]:
    if protocol is not None:
        args.protocol = protocol
    cfg = _require_config(args)
    result = run_experiment(cfg, args.out, render_figures=not args.no_figures)
    if result.load_report is not None:
        print(result.load_report.summary())
    h = result.history
    print(f"trained {cfg.model_kind} [{cfg.train.protocol}] "
          f"for {h.epochs_run} epoch(s)"
          + (" (early stop)" if h.stopped_early else ""))
    m = result.metrics
    print(f"test MSE {m.mse:.6f}  MAE {m.mae:.6f}  RMSE {m.rmse:.6f} "
          f"({m.scale_label} scale, {m.n} windows)")
    print(f"registry record {result.record.id[:16]}")
    for name, path in result.artifacts.items():
        print(f"wrote {path}")
    return 0, result.artifacts


def _cmd_evaluate(args) -> tuple[int, dict]:
    cfg = _require_config(args)
    stem = args.checkpoint or str(Path(args.out) / "checkpoint")
    metrics, predictions, manifest, artifacts = evaluate_checkpoint(
        cfg, stem, args.out, render_figures=not args.no_figures
    )
    print(f"evaluated {cfg.model_kind} checkpoint {stem}")
    print(f"test MSE {metrics.mse:.6f}  MAE {metrics.mae:.6f}  "
          f"RMSE {metrics.rmse:.6f} ({metrics.scale_label} scale, "
          f"{metrics.n} windows)")
    for name, path in artifacts.items():
        print(f"wrote {path}")
    return 0, artifacts


def _cmd_compare(args) -> tuple[int, dict]:
    registry_path = resolve_registry_path(args.out)
    records = registry_read(registry_path)
    if args.protocol:
        records = [r for r in records if r.protocol == args.protocol]
    if args.model:
        records = [r for r in records if r.model_kind == args.model]
    records = [r for r in records if r.metrics is not None]
    if not records:
        raise EthercastError(
            f"no completed records in {registry_path}"
            + (f" for protocol {args.protocol}" if args.protocol else "")
        )
    table = make_comparison_table(records)
    print(table.text)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text_path = out / "comparison.txt"
    text_path.write_text(table.text + "\n")
    rows_path = out / "comparison.csv"
    with open(rows_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["model", "dataset", "mse", "mae", "rmse", "runs"]
        )
        writer.writeheader()
        writer.writerows(table.rows)
    artifacts = {"text": str(text_path), "rows": str(rows_path)}
    if not args.no_figures:
        from . import figures

        artifacts["png"] = str(
            figures.plot_comparison(table, out / "comparison.png")
        )
    for name, path in artifacts.items():
        print(f"wrote {path}")
    return 0, artifacts


def _cmd_export_plot_data(args) -> tuple[int, dict]:
    cfg = _require_config(args)
    stem = args.checkpoint or str(Path(args.out) / "checkpoint")
    metrics, predictions, _manifest, _arts = evaluate_checkpoint(
        cfg, stem, args.out, render_figures=False
    )
    out = Path(args.out)
    data_path = out / "plot_data.csv"
    with open(data_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "actual_usd", "pred_usd"])
        for row in predictions.rows:
            writer.writerow([row["date"], row["actual_usd"], row["pred_usd"]])
    artifacts = {"plot_data": str(data_path)}
    if not args.no_figures:
        from . import figures

        artifacts["png"] = str(
            figures.plot_forecast(predictions, out / "forecast.png")
        )
    print(f"exported {len(predictions)} rows "
          f"(test MSE {metrics.mse:.6f} on the {metrics.scale_label} scale)")
    for name, path in artifacts.items():
        print(f"wrote {path}")
    return 0, artifacts


def run_command(command: str, args) -> tuple[int, dict]:
    """Dispatch one command; returns (exit status, artifact paths)."""
    handlers = {
        "prepare": _cmd_prepare,
        "train": _cmd_train,
        "fewshot": lambda a: _cmd_train(a, protocol="few_shot"),
        "evaluate": _cmd_evaluate,
        "compare": _cmd_compare,
        "export-plot-data": _cmd_export_plot_data,
    }
    if command not in handlers:
        print(f"unknown command {command!r}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 2, {}
    try:
        return handlers[command](args)
    except (EthercastError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, {}


def entrypoint(argv=None) -> int:
    args = make_parser().parse_args(argv)
    status, _artifacts = run_command(args.command, args)
    return status


def main():  # pragma: no cover - thin wrapper
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
