"""Shared fixtures: synthetic daily OHLCV files and toy model configs."""

import math
from datetime import date, timedelta

import numpy as np
import pytest

from ethercast.backbone import BackboneConfig


def synthetic_rows(n_days=300, seed=0, start=date(2021, 1, 1),
                   start_price=1000.0, skip_days=()):
    """Deterministic sine+trend+noise daily records as plain tuples.

    Returns a list of (date, open, high, low, close, volume, change_pct)
    with change as a percent number.  ``skip_days`` drops the given day
    offsets to simulate exchange gaps.
    """
    rng = np.random.default_rng(seed)
    rows = []
    price = start_price
    d = start
    for i in range(n_days):
        o = price
        drift = 0.0008 + 0.01 * math.sin(i / 9.0) * 0.5
        c = o * (1.0 + drift + 0.004 * rng.standard_normal())
        h = max(o, c) * (1.0 + 0.005 * abs(rng.standard_normal()))
        low = min(o, c) * (1.0 - 0.005 * abs(rng.standard_normal()))
        vol = float(1e6 * (1.0 + 0.3 * abs(rng.standard_normal())))
        if i not in skip_days:
            rows.append((d, o, h, low, c, vol, (c / o - 1.0) * 100.0))
        price = c
        d += timedelta(days=1)
    return rows


def write_csv(path, rows, fmt="iso"):
    """Serialize synthetic rows; fmt 'kaggle' uses Mon DD, YYYY dates,
    thousands separators, descending order, %-suffixed change."""
    lines = ["date,open,high,low,close,volume,change"]
    ordered = rows if fmt == "iso" else list(reversed(rows))
    for d, o, h, low, c, vol, chg in ordered:
        if fmt == "iso":
            lines.append(
                f"{d.isoformat()},{o:.4f},{h:.4f},{low:.4f},{c:.4f},"
                f"{vol:.0f},{chg:.4f}%"
            )
        else:
            datestr = d.strftime('"%b %d, %Y"')
            lines.append(
                f'{datestr},"{o:,.2f}","{h:,.2f}","{low:,.2f}","{c:,.2f}",'
                f'{vol / 1e6:.2f}M,{chg:.2f}%'
            )
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def synth_csv(tmp_path):
    return write_csv(tmp_path / "synth.csv", synthetic_rows(300, seed=7))


@pytest.fixture
def small_csv(tmp_path):
    return write_csv(tmp_path / "small.csv", synthetic_rows(120, seed=3))


def toy_gpt2_config(**overrides):
    base = dict(variant="gpt2", n_layers=2, hidden=32, n_heads=4, ffn_dim=64,
                max_positions=8, seq_len=7, patch_len=16, stride=8, pred_len=1,
                activation="gelu")
    base.update(overrides)
    return BackboneConfig(**base)


def toy_llama_config(**overrides):
    base = dict(variant="llama", n_layers=2, hidden=32, n_heads=4,
                n_kv_groups=2, ffn_dim=64, max_positions=8, seq_len=7,
                patch_len=16, stride=8, pred_len=1, activation="swiglu")
    base.update(overrides)
    return BackboneConfig(**base)


def write_toy_config(path, csv_path, kind="gpt2", protocol="short_term",
                     seed=0, max_epochs=3, extra_model="", extra_train=""):
    """Write a runnable toy INI config pointing at ``csv_path``."""
    if kind == "gpt2":
        model = ("kind = gpt2\nfreeze = fpt\nn_layers = 2\nhidden = 32\n"
                 "n_heads = 4\nffn_dim = 64\nmax_positions = 8\n"
                 "patch_len = 16\nstride = 8\n")
    elif kind == "llama":
        model = ("kind = llama\nfreeze = fpt\nn_layers = 2\nhidden = 32\n"
                 "n_heads = 4\nn_kv_groups = 2\nffn_dim = 64\n"
                 "max_positions = 8\npatch_len = 16\nstride = 8\n")
    else:
        model = f"kind = {kind}\n"
    path.write_text(
        "[data]\n"
        f"csv = {csv_path}\n"
        "[model]\n"
        f"{model}{extra_model}"
        "[train]\n"
        "base_lr = 1e-3\n"
        "batch_size = 32\n"
        f"max_epochs = {max_epochs}\n"
        "patience = 5\n"
        f"seed = {seed}\n"
        f"protocol = {protocol}\n"
        f"{extra_train}"
    )
    return path
