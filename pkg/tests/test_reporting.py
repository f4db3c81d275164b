import csv

import numpy as np
import pytest

from cdcov import BenchRecord, InvalidInputError
from cdcov.reporting import (
    TableSpec,
    emit_plot_data,
    records_from_csv,
    records_to_csv,
    render_table,
)


def rec(method="cd", p=250, ktr=10, s=0.5, **overrides):
    kwargs = dict(
        method=method,
        setting=1,
        n=100,
        p=p,
        ktr=ktr,
        s=s,
        replicates=20,
        op_err_mean=0.25,
        op_err_se=0.04,
        fro_err_mean=0.56,
        fro_err_se=0.04,
        k_hat_mode=240 if method == "cd" else None,
        k_opt=240 if method == "cd" else None,
    )
    kwargs.update(overrides)
    return BenchRecord(**kwargs)


def table1_shaped_records():
    records = []
    rng = np.random.default_rng(0)
    for ktr in (10, 50):
        for p in (250, 500, 1000):
            for method in ("cd", "at", "poet"):
                records.append(
                    rec(
                        method=method,
                        p=p,
                        ktr=ktr,
                        op_err_mean=float(rng.uniform(0.2, 1.0)),
                        fro_err_mean=float(rng.uniform(0.5, 4.0)),
                    )
                )
    return records


class TestRecordsCsv:
    def test_round_trip_is_exact(self, tmp_path):
        records = table1_shaped_records() + [rec(method="sample", k_hat_mode=None, k_opt=None)]
        path = tmp_path / "records.csv"
        records_to_csv(records, path)
        assert records_from_csv(path) == records

    def test_full_precision_survives(self, tmp_path):
        r = rec(op_err_mean=1.0 / 3.0, fro_err_mean=np.pi)
        path = tmp_path / "records.csv"
        records_to_csv([r], path)
        back = records_from_csv(path)[0]
        assert back.op_err_mean == 1.0 / 3.0
        assert back.fro_err_mean == np.pi

    def test_unexpected_columns_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InvalidInputError):
            records_from_csv(path)


class TestRenderTable:
    def test_single_record_renders_one_cell(self):
        text = render_table([rec()])
        assert "[operator-norm]" in text
        assert "0.25 (0.04)" in text

    def test_three_panel_layout_with_six_columns(self):
        text = render_table(table1_shaped_records())
        lines = text.splitlines()
        assert lines[0].split() == ["ktr", "10", "10", "10", "50", "50", "50"]
        assert lines[1].split() == ["p", "250", "500", "1000", "250", "500", "1000"]
        assert sum(line.startswith("[") for line in lines) == 3
        assert "[k-selection]" in text and "[frobenius-norm]" in text

    def test_missing_cells_render_em_dash(self):
        records = [rec(p=250), rec(p=500, method="at", k_hat_mode=None, k_opt=None)]
        text = render_table(records)
        assert "—" in text

    def test_empty_records_rejected(self):
        with pytest.raises(InvalidInputError):
            TableSpec.from_records([])


class TestPlotData:
    def test_long_format_shape(self, tmp_path):
        records = []
        for s in np.linspace(0.1, 0.7, 7):
            for method in ("cd", "at", "poet"):
                records.append(rec(method=method, s=float(s), k_hat_mode=None, k_opt=None))
        path = tmp_path / "plot.csv"
        emit_plot_data(records, path)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["s", "method", "norm", "mean", "se"]
        assert len(rows) - 1 == 7 * 3 * 2

    def test_empty_records_give_header_only(self, tmp_path):
        path = tmp_path / "plot.csv"
        emit_plot_data([], path)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows == [["s", "method", "norm", "mean", "se"]]

    def test_values_match_records(self, tmp_path):
        records = [rec(), rec(method="at", op_err_mean=0.7, k_hat_mode=None, k_opt=None)]
        path = tmp_path / "plot.csv"
        emit_plot_data(records, path)
        with open(path) as f:
            rows = {(r["method"], r["norm"]): float(r["mean"]) for r in csv.DictReader(f)}
        assert rows[("cd", "op")] == records[0].op_err_mean
        assert rows[("at", "op")] == records[1].op_err_mean
        assert rows[("cd", "fro")] == records[0].fro_err_mean
