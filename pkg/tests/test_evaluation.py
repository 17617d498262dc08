"""Metrics, prediction tables, and the model comparison report."""

import dataclasses
import datetime

import numpy as np
import pytest
import torch
import torch.nn as nn

from ethercast.errors import EmptyInputError, ShapeError
from ethercast.evaluation import (ComparisonTable, MetricReport,
                                  PredictionTable, compute_metrics,
                                  evaluate_model, make_comparison_table)
from ethercast.ingest import WindowSet, make_windows
from ethercast.transforms import Standardizer

from _oracles import metrics_oracle


def window_set(inputs, targets):
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    return WindowSet(inputs=inputs, targets=targets,
                     origin_indices=np.arange(len(inputs)),
                     seq_len=inputs.shape[1], pred_len=targets.shape[1])


class LastValueModel(nn.Module):
    """Repeats the final observed value across the horizon."""

    def __init__(self, pred_len=1):
        super().__init__()
        self.pred_len = pred_len
        self.unused = nn.Parameter(torch.zeros(1))

    def forward(self, windows):
        return windows[:, -1:].expand(windows.shape[0], self.pred_len)


class ZeroModel(nn.Module):
    def __init__(self, pred_len=1):
        super().__init__()
        self.pred_len = pred_len
        self.unused = nn.Parameter(torch.zeros(1))

    def forward(self, windows):
        return torch.zeros(windows.shape[0], self.pred_len,
                           dtype=windows.dtype)


class TestComputeMetrics:
    def test_hand_example(self):
        report = compute_metrics(np.array([1.0, 2.0, 3.0]),
                                 np.array([1.5, 2.0, 2.0]))
        assert report.mae == pytest.approx(0.5)
        assert report.mse == pytest.approx((0.25 + 0.0 + 1.0) / 3)
        assert report.rmse == pytest.approx(np.sqrt((0.25 + 1.0) / 3))
        assert report.n == 3

    def test_perfect_prediction(self):
        report = compute_metrics(np.ones(10), np.ones(10))
        assert report.mse == 0.0 and report.mae == 0.0 and report.rmse == 0.0

    def test_against_oracle_random(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 50))
            actual = rng.standard_normal(n)
            pred = rng.standard_normal(n)
            report = compute_metrics(actual, pred)
            oracle = metrics_oracle(actual.tolist(), pred.tolist())
            assert abs(report.mae - oracle["mae"]) < 1e-12
            assert abs(report.mse - oracle["mse"]) < 1e-12
            assert abs(report.rmse - oracle["rmse"]) < 1e-12

    def test_rmse_squares_to_mse(self):
        rng = np.random.default_rng(3)
        pred = rng.standard_normal(1000)
        actual = rng.standard_normal(1000)
        report = compute_metrics(actual, pred)
        assert abs(report.rmse ** 2 - report.mse) < 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        pred = rng.standard_normal(64)
        actual = rng.standard_normal(64)
        perm = rng.permutation(64)
        a = compute_metrics(actual, pred)
        b = compute_metrics(actual[perm], pred[perm])
        assert a.mse == pytest.approx(b.mse, abs=1e-12)
        assert a.mae == pytest.approx(b.mae, abs=1e-12)

    def test_mae_no_larger_than_rmse(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            pred = rng.standard_normal(32)
            actual = rng.standard_normal(32)
            report = compute_metrics(actual, pred)
            assert report.mae <= report.rmse + 1e-12

    def test_flattens_2d(self):
        pred = np.array([[1.0, 2.0], [3.0, 4.0]])
        actual = np.zeros((2, 2))
        report = compute_metrics(actual, pred)
        assert report.n == 4
        assert report.mse == pytest.approx((1 + 4 + 9 + 16) / 4)

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            compute_metrics(np.array([]), np.array([]))
        with pytest.raises(ShapeError):
            compute_metrics(np.ones(3), np.ones(4))

    def test_report_dict(self):
        report = compute_metrics(np.zeros(4), np.ones(4))
        d = report.as_dict()
        assert d["mse"] == 1.0
        assert d["scale_label"] == "standardized"


class TestEvaluateModel:
    def make_data(self, n=60, seq=7, pred=1):
        values = np.sin(np.arange(n) / 5.0)
        ws = make_windows(values, seq, pred)
        return window_set(ws.inputs, ws.targets)

    def test_last_value_on_constant_series_is_exact(self):
        ws = window_set(np.full((12, 7), 2.5), np.full((12, 1), 2.5))
        std = Standardizer(mean=10.0, std=4.0)
        report, _ = evaluate_model(LastValueModel(), ws, std)
        assert report.mse == 0.0
        assert report.mae == 0.0

    def test_zero_predictor_mse_is_target_power(self):
        ws = self.make_data()
        std = Standardizer(mean=0.0, std=1.0)
        report, _ = evaluate_model(ZeroModel(), ws, std)
        expected = float(np.mean(np.asarray(ws.targets) ** 2))
        assert report.mse == pytest.approx(expected, abs=1e-12)

    def test_table_rows_and_usd_columns(self):
        ws = self.make_data(n=20)
        std = Standardizer(mean=1000.0, std=250.0)
        dates = [datetime.date(2023, 1, 1) + datetime.timedelta(days=k)
                 for k in range(len(ws.inputs))]
        _, table = evaluate_model(LastValueModel(), ws, std,
                                  target_dates=dates)
        assert list(table.COLUMNS) == ["date", "actual_std", "pred_std",
                                       "actual_usd", "pred_usd"]
        assert len(table) == len(ws.inputs)
        row = table.rows[0]
        assert row["date"] == "2023-01-01"
        assert row["actual_usd"] == pytest.approx(
            row["actual_std"] * (250.0 + std.eps) + 1000.0)

    def test_horizon_mismatch(self):
        ws = self.make_data(pred=3)
        std = Standardizer(mean=0.0, std=1.0)
        with pytest.raises(ShapeError):
            evaluate_model(LastValueModel(pred_len=2), ws, std)

    def test_empty_windows(self):
        empty = WindowSet(inputs=np.zeros((0, 7)), targets=np.zeros((0, 1)),
                          origin_indices=np.arange(0), seq_len=7, pred_len=1)
        with pytest.raises(EmptyInputError):
            evaluate_model(LastValueModel(), empty, Standardizer(0.0, 1.0))

    def test_restores_training_mode(self):
        ws = self.make_data(n=20)
        model = LastValueModel()
        model.train()
        evaluate_model(model, ws, Standardizer(mean=0.0, std=1.0))
        assert model.training


@dataclasses.dataclass
class FakeRecord:
    protocol: str
    model_kind: str
    dataset_name: str
    metrics: dict


def record(kind, mse, mae=0.05, protocol="short_term", dataset="eth"):
    # dict metrics, matching what registry records look like after read-back
    return FakeRecord(protocol=protocol, model_kind=kind, dataset_name=dataset,
                      metrics={"mse": mse, "mae": mae,
                               "rmse": float(np.sqrt(mse))})


class TestComparisonTable:
    def test_sorted_by_mse_with_star(self):
        table = make_comparison_table([
            record("fpt_gpt2", 0.0029, mae=0.050),
            record("fpt_llama3", 0.0027, mae=0.048),
            record("lstm", 0.0035, mae=0.060),
        ])
        assert [row["model"] for row in table.rows] == [
            "fpt_llama3", "fpt_gpt2", "lstm"]
        lines = table.text.splitlines()
        assert lines[1].split() == ["Model", "MSE", "MAE", "RMSE",
                                    "Dataset", "Runs"]
        # row 0 holds every best metric here; the others hold none
        assert lines[3].count("*") == 3
        assert "*" not in lines[4] and "*" not in lines[5]

    def test_metric_report_objects_accepted(self):
        rec = FakeRecord(protocol="short_term", model_kind="ann",
                         dataset_name="eth",
                         metrics=MetricReport(mse=0.01, mae=0.08,
                                              rmse=0.1, n=50))
        table = make_comparison_table([rec])
        assert table.rows[0]["mse"] == pytest.approx(0.01)

    def test_seed_averaging(self):
        table = make_comparison_table([
            record("lstm", 0.004),
            record("lstm", 0.006),
            record("ann", 0.008),
        ])
        lstm = next(r for r in table.rows if r["model"] == "lstm")
        assert lstm["mse"] == pytest.approx(0.005)
        assert lstm["runs"] == 2
        ann = next(r for r in table.rows if r["model"] == "ann")
        assert ann["runs"] == 1

    def test_single_record(self):
        table = make_comparison_table([record("mlp", 0.01)])
        assert len(table.rows) == 1
        assert "*" in table.text

    def test_mixed_protocols_rejected(self):
        with pytest.raises(ValueError):
            make_comparison_table([
                record("lstm", 0.004),
                record("lstm", 0.004, protocol="few_shot"),
            ])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            make_comparison_table([])

    def test_protocol_carried(self):
        table = make_comparison_table([record("lstm", 0.004,
                                              protocol="few_shot")])
        assert isinstance(table, ComparisonTable)
        assert table.protocol == "few_shot"
        assert str(table) == table.text


class TestPredictionTableCsv:
    def test_write_csv(self, tmp_path):
        rows = [{"date": "2023-01-01", "actual_std": 0.1, "pred_std": 0.2,
                 "actual_usd": 1025.0, "pred_usd": 1050.0}]
        table = PredictionTable(rows=rows)
        path = tmp_path / "pred.csv"
        table.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "date,actual_std,pred_std,actual_usd,pred_usd"
        assert lines[1].startswith("2023-01-01,0.1,0.2,")
