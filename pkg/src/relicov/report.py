"""Benchmark-report emission (text, JSON, CSV) and the trace plot."""

from __future__ import annotations

import csv
import io
import json

from relicov.bench import BenchRow, BenchTable
from relicov.exceptions import DataValidationError
from relicov.mcmc import McmcChain

__all__ = [
    "render_text",
    "table_to_json",
    "table_to_csv",
    "emit_report",
    "parse_csv_report",
    "parse_json_report",
    "emit_bench_plot",
    "emit_trace_plot",
]

_TEXT_HEADER = ("Method", "Average Error (%)", "Standard deviation")
_CSV_FIELDS = ("method", "avg_error_pct", "std_dev", "replications", "failures")


def render_text(table: BenchTable) -> str:
    """Aligned three-column table, one decimal place."""
    rows = [
        (row.method, f"{row.avg_error_pct:.1f}", f"{row.std_dev:.1f}")
        for row in table.rows
    ]
    widths = [
        max(len(_TEXT_HEADER[i]), *(len(r[i]) for r in rows)) if rows else len(_TEXT_HEADER[i])
        for i in range(3)
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(_TEXT_HEADER)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(3)))
    return "\n".join(lines) + "\n"


def table_to_json(table: BenchTable) -> str:
    payload = {"rows": [row.__dict__ for row in table.rows]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def table_to_csv(table: BenchTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_CSV_FIELDS)
    for row in table.rows:
        writer.writerow(
            [
                row.method,
                repr(row.avg_error_pct),
                repr(row.std_dev),
                row.replications,
                row.failures,
            ]
        )
    return buf.getvalue()


def emit_report(table: BenchTable, fmt: str, path) -> str:
    """Write the table in the given format; returns the rendered text."""
    if fmt == "text":
        rendered = render_text(table)
    elif fmt == "json":
        rendered = table_to_json(table)
    elif fmt == "csv":
        rendered = table_to_csv(table)
    else:
        raise DataValidationError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(rendered)
    except OSError as exc:
        raise DataValidationError(f"cannot write report to {path}: {exc}") from None
    return rendered


def parse_csv_report(path) -> BenchTable:
    """Inverse of the CSV emitter; floats round-trip exactly via repr."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for record in reader:
            rows.append(
                BenchRow(
                    method=record["method"],
                    avg_error_pct=float(record["avg_error_pct"]),
                    std_dev=float(record["std_dev"]),
                    replications=int(record["replications"]),
                    failures=int(record["failures"]),
                )
            )
    return BenchTable(rows=tuple(rows))


def parse_json_report(path) -> BenchTable:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return BenchTable(rows=tuple(BenchRow(**row) for row in payload["rows"]))


def emit_bench_plot(table: BenchTable, path) -> None:
    """Bar summary of the benchmark: mean error with one-sd whiskers."""
    if not table.rows:
        raise DataValidationError("cannot plot an empty table")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    methods = [row.method for row in table.rows]
    means = [row.avg_error_pct for row in table.rows]
    sds = [row.std_dev for row in table.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(methods, means, yerr=sds, capsize=4, color="#4878a8")
    ax.set_ylabel("Average Error (%)")
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=100)
    except OSError as exc:
        raise DataValidationError(f"cannot write plot to {path}: {exc}") from None
    finally:
        plt.close(fig)


def emit_trace_plot(chain: McmcChain, path) -> None:
    """Line plot of the chain states against the iteration index."""
    if len(chain) == 0:
        raise DataValidationError("cannot plot an empty chain")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(chain.samples, linewidth=0.8)
    ax.set_xlabel("Iteration")
    ax.set_ylabel(r"$\theta$")
    ax.set_title(r"$\theta$ samples")
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=100)
    except OSError as exc:
        raise DataValidationError(f"cannot write plot to {path}: {exc}") from None
    finally:
        plt.close(fig)
