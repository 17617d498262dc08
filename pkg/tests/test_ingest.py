"""CSV parsing, regularization, splits, windows, and few-shot truncation."""

import io
from datetime import date

import numpy as np
import pytest

from ethercast.errors import (ContinuityError, CsvParseError,
                              DuplicateDateError, EmptyInputError,
                              InsufficientDataError, SchemaError,
                              SplitSpecError)
from ethercast.ingest import (PriceRecord, PriceSeries, SplitSpec,
                              chronological_split, few_shot_truncate,
                              infer_schema, make_windows, parse_price_csv,
                              regularize_daily, write_price_csv)

from _oracles import enumerate_windows
from conftest import synthetic_rows, write_csv


KAGGLE_SAMPLE = (
    'Date,Price,Open,High,Low,Vol.,Change %\n'
    '"Mar 02, 2023","1,665.10","1,664.50","1,680.00","1,650.00",245.30K,0.04%\n'
    '"Mar 01, 2023","1,664.50","1,600.25","1,670.75","1,590.10",1.20M,6.50%\n'
)


def record(d, o=100.0, h=None, low=None, c=None, vol=10.0, chg=0.0, filled=False):
    c = o if c is None else c
    h = max(o, c) if h is None else h
    low = min(o, c) if low is None else low
    return PriceRecord(d, o, h, low, c, vol, chg, filled)


class TestParsing:
    def test_kaggle_style_row(self):
        series = parse_price_csv(KAGGLE_SAMPLE)
        first = series[0]
        assert first.date == date(2023, 3, 1)
        assert first.open == pytest.approx(1600.25)
        assert first.close == pytest.approx(1664.50)
        assert first.change_pct == pytest.approx(0.065)

    def test_sorted_ascending_from_descending_input(self):
        series = parse_price_csv(KAGGLE_SAMPLE)
        dates = series.dates()
        assert dates == sorted(dates)

    def test_volume_magnitude_suffixes(self):
        series = parse_price_csv(KAGGLE_SAMPLE)
        assert series[0].volume == pytest.approx(1.20e6)
        assert series[1].volume == pytest.approx(245.30e3)

    def test_dash_volume_reads_zero(self):
        text = ('date,open,high,low,close,volume\n'
                '2023-01-01,10,11,9,10.5,-\n')
        series = parse_price_csv(text)
        assert series[0].volume == 0.0

    def test_iso_dates(self, synth_csv):
        series = parse_price_csv(synth_csv)
        assert len(series) == 300
        assert series.is_contiguous_daily()

    def test_schema_missing_open_column(self):
        with pytest.raises(SchemaError, match="open"):
            parse_price_csv(KAGGLE_SAMPLE,
                            schema={"date": "Date", "high": "High",
                                    "low": "Low", "close": "Price"})

    def test_infer_schema_missing_role(self):
        with pytest.raises(SchemaError, match="open"):
            infer_schema(["Date", "High", "Low", "Price"])

    def test_unparseable_cell_names_row(self):
        text = ('date,open,high,low,close\n'
                '2023-01-01,10,11,9,10.5\n'
                '2023-01-02,oops,11,9,10.5\n')
        with pytest.raises(CsvParseError, match="row 2"):
            parse_price_csv(text)
        try:
            parse_price_csv(text)
        except CsvParseError as exc:
            assert exc.row == 2

    def test_header_only_is_empty_input(self):
        with pytest.raises(EmptyInputError):
            parse_price_csv("date,open,high,low,close\n")

    def test_record_invariants(self):
        with pytest.raises(ValueError, match="high"):
            PriceRecord(date(2023, 1, 1), 10.0, 9.0, 8.0, 9.5, 0.0, 0.0)
        with pytest.raises(ValueError, match="low"):
            PriceRecord(date(2023, 1, 1), 10.0, 11.0, 9.9, 9.5, 0.0, 0.0)
        with pytest.raises(ValueError, match="open"):
            PriceRecord(date(2023, 1, 1), 0.0, 1.0, 0.0, 0.5, 0.0, 0.0)
        with pytest.raises(ValueError, match="volume"):
            PriceRecord(date(2023, 1, 1), 10.0, 11.0, 9.0, 10.0, -1.0, 0.0)

    def test_round_trip_identity(self, tmp_path):
        path = write_csv(tmp_path / "rt.csv", synthetic_rows(40, seed=1))
        series = parse_price_csv(path)
        buf = io.StringIO()
        write_price_csv(series, buf)
        again = parse_price_csv(buf.getvalue())
        assert again == series

    def test_kaggle_format_round_trip(self, tmp_path):
        path = write_csv(tmp_path / "kg.csv", synthetic_rows(30, seed=2),
                         fmt="kaggle")
        series = parse_price_csv(path)
        buf = io.StringIO()
        write_price_csv(series, buf)
        assert parse_price_csv(buf.getvalue()) == series


class TestRegularize:
    def test_contiguous_unchanged(self):
        days = [record(date(2023, 1, d)) for d in range(1, 6)]
        series = PriceSeries(days)
        out = regularize_daily(series)
        assert out == series
        assert not any(r.filled for r in out)

    def test_forward_fill_gap(self):
        d1 = record(date(2023, 1, 1), o=100.0, c=105.0, vol=7.0, chg=0.05)
        d3 = record(date(2023, 1, 3), o=106.0)
        out = regularize_daily(PriceSeries([d1, d3]))
        assert len(out) == 3
        mid = out[1]
        assert mid.date == date(2023, 1, 2)
        assert mid.filled
        assert mid.open == d1.open and mid.close == d1.close
        assert mid.volume == 0.0 and mid.change_pct == 0.0

    def test_strict_lists_missing_dates(self):
        d1 = record(date(2023, 1, 1))
        d5 = record(date(2023, 1, 5))
        with pytest.raises(ContinuityError) as info:
            regularize_daily(PriceSeries([d1, d5]), policy="strict")
        assert info.value.missing_dates == [date(2023, 1, 2), date(2023, 1, 3),
                                            date(2023, 1, 4)]

    def test_duplicate_date_in_csv(self):
        rows = ('date,open,high,low,close\n'
                '2023-01-01,10,11,9,10.5\n'
                '2023-01-01,10,11,9,10.5\n')
        with pytest.raises(DuplicateDateError):
            parse_price_csv(rows)

    def test_duplicate_date_in_records(self):
        d1 = record(date(2023, 1, 1))
        with pytest.raises(DuplicateDateError):
            regularize_daily([d1, d1])

    def test_idempotent(self, tmp_path):
        path = write_csv(tmp_path / "g.csv",
                         synthetic_rows(60, seed=5, skip_days=(10, 11, 30)))
        once = regularize_daily(parse_price_csv(path))
        twice = regularize_daily(once)
        assert twice == once
        assert sum(r.filled for r in once) == 3


class TestSplit:
    def make_series(self, n):
        return PriceSeries([record(d) for d, *_ in synthetic_rows(n)])

    def test_100_gives_70_10_20(self):
        result = chronological_split(self.make_series(100), SplitSpec())
        assert (len(result.train), len(result.val), len(result.test)) == (70, 10, 20)

    def test_10_gives_7_1_2(self):
        result = chronological_split(self.make_series(10), SplitSpec())
        assert (len(result.train), len(result.val), len(result.test)) == (7, 1, 2)

    def test_partition_property(self):
        series = self.make_series(83)
        result = chronological_split(series, SplitSpec())
        merged = (result.train.records + result.val.records
                  + result.test.records)
        assert merged == series.records

    def test_chronological_order(self):
        result = chronological_split(self.make_series(50), SplitSpec())
        assert result.train[-1].date < result.val[0].date < result.test[0].date

    def test_bad_ratios(self):
        with pytest.raises(SplitSpecError):
            SplitSpec(0.5, 0.1, 0.1)

    def test_too_few_records(self):
        with pytest.raises(InsufficientDataError):
            chronological_split(self.make_series(9), SplitSpec())

    def test_short_segment_warning(self):
        result = chronological_split(self.make_series(20), SplitSpec(),
                                     min_segment=8)
        assert any("val" in w for w in result.warnings)


class TestWindows:
    def test_10_7_1_gives_3(self):
        values = np.arange(10, dtype=float)
        ws = make_windows(values, 7, 1)
        assert len(ws) == 3
        assert ws.inputs[0].tolist() == list(range(7))
        assert ws.targets[0].tolist() == [7.0]
        assert list(ws.origin_indices) == [0, 1, 2]

    def test_boundary_single_window(self):
        assert len(make_windows(np.arange(8.0), 7, 1)) == 1

    def test_too_short(self):
        with pytest.raises(InsufficientDataError, match="8"):
            make_windows(np.arange(7.0), 7, 1)

    def test_count_matches_enumeration_grid(self):
        rng = np.random.default_rng(11)
        for n in (8, 9, 15, 31, 64):
            values = rng.standard_normal(n)
            for seq in (1, 3, 7):
                for pred in (1, 2):
                    if n < seq + pred:
                        continue
                    ws = make_windows(values, seq, pred)
                    expected = enumerate_windows(values, seq, pred)
                    assert len(ws) == len(expected) == n - seq - pred + 1
                    for k, (inp, tgt) in enumerate(expected):
                        assert ws.inputs[k].tolist() == inp
                        assert ws.targets[k].tolist() == tgt

    def test_channel_defaults_to_open(self):
        series = PriceSeries([record(d, o=float(i + 1))
                              for i, (d, *_) in enumerate(synthetic_rows(12))])
        ws = make_windows(series, 7, 1)
        assert ws.inputs[0].tolist() == [1, 2, 3, 4, 5, 6, 7]


class TestFewShot:
    def make_series(self, n):
        return PriceSeries([record(d) for d, *_ in synthetic_rows(n)])

    def test_first_tenth(self):
        train = self.make_series(1000)
        out = few_shot_truncate(train, 0.1)
        assert len(out) == 100
        assert out.records == train.records[:100]

    def test_ceil_rounding(self):
        assert len(few_shot_truncate(self.make_series(95), 0.1)) == 10

    def test_identity_fraction(self):
        train = self.make_series(50)
        assert few_shot_truncate(train, 1.0) == train

    def test_too_short_after_truncation(self):
        with pytest.raises(InsufficientDataError):
            few_shot_truncate(self.make_series(50), 0.1, seq_len=7, pred_len=1)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            few_shot_truncate(self.make_series(50), 0.0)
