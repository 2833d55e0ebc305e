"""Tests for results CSV, summaries, paired comparisons and boxplot export."""

import math

import numpy as np
import pytest

from errors import DomainError
from schemas import MetricsRecord
from services.export_service import (
    CSV_HEADER,
    box_label,
    box_stats,
    compare_filters,
    emit_boxplots,
    format_number,
    generate_boxplot_svg,
    generate_csv,
    generate_summary_csv,
    generate_table_csv,
    parse_csv,
    summarize,
)


def make_record(replicate: int, value: float, looks: float = 4.0, filter_name: str = "kl", **overrides) -> MetricsRecord:
    fields = {
        "nel": value,
        "line_pres": value,
        "edge_grad": value,
        "edge_var": value,
        "q_index": value / 10.0,
        "beta_rho": value / 10.0,
    }
    fields.update(overrides)
    return MetricsRecord(replicate=replicate, looks=looks, filter_name=filter_name, **fields)


@pytest.fixture
def two_filter_records():
    rng = np.random.default_rng(5)
    records = []
    for replicate in range(12):
        base = rng.uniform(2.0, 6.0)
        records.append(make_record(replicate, base + 1.0 + rng.normal(0, 0.1), filter_name="kl"))
        records.append(make_record(replicate, base, filter_name="lee"))
    return records


class TestResultsCsv:

    def test_header(self):
        assert generate_csv([]).splitlines() == [",".join(CSV_HEADER)]

    def test_nine_significant_digits(self):
        line = generate_csv([make_record(0, 1.0 / 3.0)]).splitlines()[1]
        assert line.startswith("0,4,kl,0.333333333,")

    def test_special_values(self):
        assert format_number(math.inf) == "inf"
        assert format_number(math.nan) == "nan"
        assert format_number(123456789012.0) == "1.23456789e+11"

    def test_parse_back(self):
        records = [
            make_record(0, 2.5),
            make_record(1, 1.0, nel=math.inf, flags=["nel_degenerate"]),
        ]
        parsed = parse_csv(generate_csv(records))
        assert parsed[0] == records[0]
        assert parsed[1].nel == math.inf
        assert parsed[1].flags == ["nel_degenerate"]

    def test_wrong_header(self):
        with pytest.raises(DomainError):
            parse_csv("replicate,looks\n0,1\n")

    def test_short_row(self):
        with pytest.raises(DomainError, match="line 2"):
            parse_csv(",".join(CSV_HEADER) + "\n0,4,kl\n")


class TestSummaries:

    def test_mean_and_sd(self):
        rows = summarize([make_record(r, v) for r, v in enumerate([1.0, 2.0, 3.0])])
        nel = next(row for row in rows if row.metric_name == "nel")
        assert nel.mean == pytest.approx(2.0)
        assert nel.sd == pytest.approx(1.0)
        assert (nel.min, nel.q1, nel.median, nel.q3, nel.max) == (1.0, 1.5, 2.0, 2.5, 3.0)
        assert len(rows) == 6

    def test_single_value(self):
        row = summarize([make_record(0, 5.0)])[0]
        assert row.sd == 0.0
        assert row.degenerate

    def test_order_independent(self, two_filter_records):
        assert summarize(two_filter_records) == summarize(list(reversed(two_filter_records)))

    def test_nonfinite_and_failed_excluded(self):
        records = [
            make_record(0, 2.0),
            make_record(1, 4.0),
            make_record(2, 1.0, nel=math.inf, flags=["nel_degenerate"]),
            make_record(3, math.nan, q_index=math.nan, beta_rho=math.nan, flags=["failed: boom"]),
        ]
        nel = next(row for row in summarize(records) if row.metric_name == "nel")
        assert nel.count == 2
        assert nel.excluded == 2
        assert nel.mean == pytest.approx(3.0)

    def test_empty_group_omitted(self, caplog):
        records = [make_record(0, 2.0, q_index=math.nan), make_record(1, 3.0, q_index=math.nan)]
        rows = summarize(records)
        assert "q_index" not in {row.metric_name for row in rows}
        assert "no finite q_index values" in caplog.text

    def test_group_order(self, two_filter_records):
        records = two_filter_records + [make_record(0, 1.0, looks=1.0)]
        keys = [(row.looks, row.filter_name) for row in summarize(records)]
        assert keys == sorted(keys)

    def test_summary_csv(self, two_filter_records):
        lines = generate_summary_csv(summarize(two_filter_records)).splitlines()
        assert lines[0] == "looks,filter,metric,count,mean,sd,median,q1,q3,min,max,excluded,degenerate"
        assert len(lines) == 1 + 2 * 6

    def test_table_layout(self, two_filter_records):
        lines = generate_table_csv(summarize(two_filter_records)).splitlines()
        assert lines[0] == "looks,filter,NEL,Line,EdgeGrad,EdgeVar,Q_mean,Q_sd,beta_mean,beta_sd"
        assert [line.split(",")[:2] for line in lines[1:]] == [["4", "kl"], ["4", "lee"]]


class TestComparisons:

    def test_one_sided(self, two_filter_records):
        row = compare_filters(two_filter_records, "nel", 4.0, "kl", "lee", alternative="greater")
        assert row.n == 12
        assert row.mean_difference == pytest.approx(1.0, abs=0.1)
        assert row.p_value < 0.01

    def test_reverse_direction(self, two_filter_records):
        row = compare_filters(two_filter_records, "nel", 4.0, "lee", "kl", alternative="greater")
        assert row.p_value > 0.99

    def test_needs_pairs(self):
        with pytest.raises(DomainError):
            compare_filters([make_record(0, 1.0), make_record(0, 2.0, filter_name="lee")], "nel", 4.0, "kl", "lee")

    def test_unknown_metric(self, two_filter_records):
        with pytest.raises(DomainError):
            compare_filters(two_filter_records, "ssim", 4.0, "kl", "lee")


class TestBoxplots:

    def test_box_stats(self):
        stats = box_stats(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 100.0]), "x")
        assert stats["whishi"] == 5.0
        assert stats["whislo"] == 1.0
        assert stats["fliers"].tolist() == [100.0]

    def test_single_value_box(self):
        stats = box_stats(np.array([3.0]), "x")
        assert stats["q1"] == stats["q3"] == stats["whislo"] == stats["whishi"] == 3.0

    def test_labels(self):
        assert box_label("kl", 4.0) == "KL 4-l"
        assert box_label("lee", 1.0) == "L 1-l"
        assert box_label("kl@0.01", 1.0) == "KL@0.01 1-l"

    def test_deterministic_svg(self, two_filter_records):
        first = generate_boxplot_svg(two_filter_records)
        second = generate_boxplot_svg(list(reversed(two_filter_records)))
        assert first == second
        assert b"<svg" in first
        assert b"KL 4-l" in first

    def test_no_records(self):
        with pytest.raises(DomainError):
            generate_boxplot_svg([])

    def test_emit_writes_file(self, tmp_path, two_filter_records):
        path = tmp_path / "boxplots.svg"
        content = emit_boxplots(two_filter_records, path)
        assert path.read_bytes() == content == generate_boxplot_svg(two_filter_records)
