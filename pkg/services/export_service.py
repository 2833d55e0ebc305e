"""
Export service for Monte Carlo results: records CSV, summary tables,
paired filter comparisons and boxplot SVG.
"""

import csv
import io
import logging
import math
from collections import defaultdict
from itertools import combinations
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.figure import Figure
from scipy import stats

from errors import DomainError
from schemas import METRIC_NAMES, ComparisonRow, MetricsRecord, SummaryRow
from services.speckle_filters import FILTER_METHODS

logger = logging.getLogger(__name__)

CSV_HEADER = ["replicate", "looks", "filter", "nel", "line_pres", "edge_grad", "edge_var", "q_index", "beta_rho", "flags"]

METRIC_TITLES = {
    "nel": "Equivalent Number of Looks",
    "line_pres": "Line Preservation",
    "edge_grad": "Edge Gradient",
    "edge_var": "Edge Variance",
    "q_index": "Values of Q",
    "beta_rho": "Values of β_ρ",
}

TABLE_HEADER = ["looks", "filter", "NEL", "Line", "EdgeGrad", "EdgeVar", "Q_mean", "Q_sd", "beta_mean", "beta_sd"]

# Muted palette, one color per filter method
COLORS = {
    "text": "#1a1a1a",
    "text_secondary": "#5c5c5c",
    "border": "#e8e5e0",
    "kl": "#5a7a64",
    "lee": "#a65d5d",
    "mean": "#7d6b99",
}


def format_number(value: float) -> str:
    """Nine significant digits; inf and nan spelled as such."""
    return f"{value:.9g}"


def generate_csv(records: Iterable[MetricsRecord]) -> str:
    """
    Generate the per-replicate results CSV.
    """
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for record in records:
        writer.writerow([
            record.replicate,
            format_number(record.looks),
            record.filter_name,
            *(format_number(getattr(record, name)) for name in METRIC_NAMES),
            ";".join(record.flags),
        ])
    return output.getvalue()


def parse_csv(text: str) -> list[MetricsRecord]:
    """
    Parse a results CSV written by generate_csv.

    Raises:
        DomainError: on a wrong header or an unparsable row
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise DomainError(f"results CSV header must be {','.join(CSV_HEADER)}")
    records = []
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise DomainError(f"line {line_number}: expected {len(CSV_HEADER)} fields, found {len(row)}")
        try:
            records.append(MetricsRecord(
                replicate=int(row[0]),
                looks=float(row[1]),
                filter_name=row[2],
                **{name: float(value) for name, value in zip(METRIC_NAMES, row[3:9])},
                flags=[flag for flag in row[9].split(";") if flag],
            ))
        except ValueError as e:
            raise DomainError(f"line {line_number}: {e}") from None
    return records


def _groups(records: Iterable[MetricsRecord]) -> dict[tuple[float, str], list[MetricsRecord]]:
    groups = defaultdict(list)
    for record in records:
        groups[(record.looks, record.filter_name)].append(record)
    return dict(sorted(groups.items()))


def _finite(records: list[MetricsRecord], metric: str) -> tuple[np.ndarray, int]:
    values = np.array([getattr(r, metric) for r in records if not r.failed], dtype=np.float64)
    finite = np.sort(values[np.isfinite(values)])
    return finite, len(records) - finite.size


def summarize(records: Iterable[MetricsRecord]) -> list[SummaryRow]:
    """
    Mean, standard deviation (n - 1) and five-number summary per (looks, filter, metric).

    Non-finite values and failed records are excluded and counted. A group left
    empty is omitted with a warning; a single value gets sd 0 and the
    degenerate flag. Values are sorted first, so the output does not depend on
    record order.
    """
    rows = []
    for (looks, filter_name), group in _groups(records).items():
        for metric in METRIC_NAMES:
            values, excluded = _finite(group, metric)
            if values.size == 0:
                logger.warning("no finite %s values for %s at L=%g; group omitted", metric, filter_name, looks)
                continue
            q1, median, q3 = np.percentile(values, [25, 50, 75])
            rows.append(SummaryRow(
                looks=looks,
                filter_name=filter_name,
                metric_name=metric,
                count=values.size,
                mean=float(np.mean(values)),
                sd=float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
                median=float(median),
                q1=float(q1),
                q3=float(q3),
                min=float(values[0]),
                max=float(values[-1]),
                excluded=excluded,
                degenerate=values.size == 1,
            ))
    return rows


def generate_summary_csv(rows: Iterable[SummaryRow]) -> str:
    """Long-form summary CSV, one line per (looks, filter, metric)."""
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    fields = ["looks", "filter", "metric", "count", "mean", "sd", "median", "q1", "q3", "min", "max", "excluded", "degenerate"]
    writer.writerow(fields)
    for row in rows:
        writer.writerow([
            format_number(row.looks), row.filter_name, row.metric_name, row.count,
            *(format_number(v) for v in (row.mean, row.sd, row.median, row.q1, row.q3, row.min, row.max)),
            row.excluded, int(row.degenerate),
        ])
    return output.getvalue()


def generate_table_csv(rows: Iterable[SummaryRow]) -> str:
    """One line per (looks, filter): mean of the four SAR measures, mean and sd of Q and β_ρ."""
    cells = defaultdict(dict)
    for row in rows:
        cells[(row.looks, row.filter_name)][row.metric_name] = row

    def mean(entry, metric):
        return format_number(entry[metric].mean) if metric in entry else "nan"

    def sd(entry, metric):
        return format_number(entry[metric].sd) if metric in entry else "nan"

    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for (looks, filter_name), entry in sorted(cells.items()):
        writer.writerow([
            format_number(looks), filter_name,
            mean(entry, "nel"), mean(entry, "line_pres"), mean(entry, "edge_grad"), mean(entry, "edge_var"),
            mean(entry, "q_index"), sd(entry, "q_index"), mean(entry, "beta_rho"), sd(entry, "beta_rho"),
        ])
    return output.getvalue()


def compare_filters(
    records: Iterable[MetricsRecord],
    metric: str,
    looks: float,
    first: str,
    second: str,
    alternative: str = "two-sided",
) -> ComparisonRow:
    """
    Paired t-test of metric between two filters over shared replicates.

    alternative "greater" tests mean(first - second) > 0.

    Raises:
        DomainError: on an unknown metric or fewer than two paired replicates
    """
    if metric not in METRIC_NAMES:
        raise DomainError(f"unknown metric {metric!r}")
    by_filter = defaultdict(dict)
    for record in records:
        value = getattr(record, metric)
        if record.looks == looks and not record.failed and math.isfinite(value):
            by_filter[record.filter_name][record.replicate] = value

    shared = sorted(set(by_filter[first]) & set(by_filter[second]))
    if len(shared) < 2:
        raise DomainError(f"{first} vs {second} at L={looks:g}: need at least 2 paired replicates, found {len(shared)}")
    a = np.array([by_filter[first][r] for r in shared])
    b = np.array([by_filter[second][r] for r in shared])
    result = stats.ttest_rel(a, b, alternative=alternative)
    return ComparisonRow(
        looks=looks,
        metric_name=metric,
        first=first,
        second=second,
        alternative=alternative,
        n=len(shared),
        mean_difference=float(np.mean(a - b)),
        statistic=float(result.statistic),
        p_value=float(result.pvalue),
    )


def all_comparisons(records: list[MetricsRecord]) -> list[ComparisonRow]:
    """Two-sided paired comparisons for every filter pair, looks level and metric."""
    rows = []
    groups = _groups(records)
    for looks in sorted({looks for looks, _ in groups}):
        names = sorted(name for l, name in groups if l == looks)
        for first, second in combinations(names, 2):
            for metric in METRIC_NAMES:
                try:
                    rows.append(compare_filters(records, metric, looks, first, second))
                except DomainError as e:
                    logger.warning("skipping comparison: %s", e)
    return rows


def generate_comparisons_csv(rows: Iterable[ComparisonRow]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(["looks", "metric", "first", "second", "alternative", "n", "mean_difference", "statistic", "p_value"])
    for row in rows:
        writer.writerow([
            format_number(row.looks), row.metric_name, row.first, row.second, row.alternative, row.n,
            format_number(row.mean_difference), format_number(row.statistic), format_number(row.p_value),
        ])
    return output.getvalue()


def box_stats(values: np.ndarray, label: str) -> dict:
    """Quartile box, whiskers at the furthest data within 1.5 IQR, outliers beyond."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
    return {
        "label": label,
        "med": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "whislo": float(inside.min()),
        "whishi": float(inside.max()),
        "fliers": values[(values < inside.min()) | (values > inside.max())],
    }


def box_label(filter_name: str, looks: float) -> str:
    """Axis code such as 'KL 4-l' or 'L 1-l'."""
    method, _, level = filter_name.partition("@")
    code = FILTER_METHODS.get(method, {}).get("code", method)
    if level:
        code = f"{code}@{level}"
    return f"{code} {looks:g}-l"


def generate_boxplot_svg(records: Iterable[MetricsRecord], salt: str = "speckle") -> bytes:
    """
    One panel per metric, one box per (filter, looks).

    The SVG carries no date and uses a fixed id salt, so identical records give
    identical bytes.
    """
    groups = _groups(records)
    if not groups:
        raise DomainError("no records to plot")

    figure = Figure(figsize=(12, 7))
    axes = figure.subplots(2, 3)
    for ax, metric in zip(axes.ravel(), METRIC_NAMES):
        boxes, colors = [], []
        for (looks, filter_name), group in groups.items():
            values, _ = _finite(group, metric)
            if values.size:
                boxes.append(box_stats(values, box_label(filter_name, looks)))
                colors.append(COLORS.get(filter_name.partition("@")[0], COLORS["text_secondary"]))
        ax.set_title(METRIC_TITLES[metric], color=COLORS["text"], fontsize=10)
        if not boxes:
            continue
        artists = ax.bxp(boxes, patch_artist=True, showfliers=True)
        for patch, color in zip(artists["boxes"], colors):
            patch.set_facecolor(color)
            patch.set_alpha(0.6)
        ax.grid(axis="y", color=COLORS["border"])
        ax.tick_params(axis="x", labelrotation=45, labelsize=8)
    figure.tight_layout()

    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": salt, "svg.fonttype": "none"}):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def emit_boxplots(records: Iterable[MetricsRecord], path: Path) -> bytes:
    """Write the boxplot SVG to path and return its bytes."""
    content = generate_boxplot_svg(records)
    Path(path).write_bytes(content)
    logger.info("wrote boxplots to %s", path)
    return content
