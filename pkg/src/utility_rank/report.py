"""Report rendering: aligned text table, CSV, JSON, and bar-chart figure.

Values are fractions in [0, 1] internally and are rendered x100 with two
decimals, one row per method, best value per column marked with '*' when
several methods are compared.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from .errors import ValidationError
from .metrics import MetricReport

REPORT_COLUMNS = ("P@2", "R@2", "F1@2", "R@5", "NDCG@1", "NDCG@5", "EM")


def _columns_for(reports: Mapping[str, MetricReport]) -> list[str]:
    """Canonical column subset shared by every report; mismatches are errors."""
    if not reports:
        raise ValidationError("no reports to render")
    keysets = {name: set(report.macro.keys()) for name, report in reports.items()}
    reference = next(iter(keysets.values()))
    for name, keys in keysets.items():
        if keys != reference:
            raise ValidationError(
                f"mismatched metric columns: {name!r} has {sorted(keys)} "
                f"vs {sorted(reference)}"
            )
    columns = [c for c in REPORT_COLUMNS if c in reference]
    if not columns:
        raise ValidationError(f"no reportable columns among {sorted(reference)}")
    return columns


def _cell(value: float) -> str:
    return f"{value * 100:.2f}"


def render_report(reports: Mapping[str, MetricReport]) -> str:
    """Aligned text table, one row per method."""
    columns = _columns_for(reports)
    best = {
        c: max(report.macro[c] for report in reports.values()) for c in columns
    }
    mark = len(reports) > 1
    header = ["Method", *columns]
    rows = [header]
    for name, report in reports.items():
        row = [name]
        for c in columns:
            cell = _cell(report.macro[c])
            if mark and report.macro[c] == best[c]:
                cell += "*"
            row.append(cell)
        rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append(
            "  ".join(
                cell.ljust(widths[j]) if j == 0 else cell.rjust(widths[j])
                for j, cell in enumerate(row)
            ).rstrip()
        )
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    footer = [
        f"# {name}: evaluated={report.evaluated} excluded={len(report.excluded)}"
        for name, report in reports.items()
        if report.excluded
    ]
    return "\n".join(lines + footer) + "\n"


def render_csv(reports: Mapping[str, MetricReport]) -> str:
    columns = _columns_for(reports)
    lines = [",".join(["method", *columns])]
    for name, report in reports.items():
        lines.append(",".join([name, *(_cell(report.macro[c]) for c in columns)]))
    return "\n".join(lines) + "\n"


def report_payload(reports: Mapping[str, MetricReport]) -> dict:
    """JSON-friendly structure with raw fractional values."""
    columns = _columns_for(reports)
    return {
        "columns": columns,
        "methods": {
            name: {
                "macro": dict(report.macro),
                "per_question": {q: dict(v) for q, v in report.per_question.items()},
                "evaluated": report.evaluated,
                "excluded": list(report.excluded),
            }
            for name, report in reports.items()
        },
    }


def reports_from_payload(payload: dict) -> dict[str, MetricReport]:
    try:
        return {
            name: MetricReport(
                per_question={q: dict(v) for q, v in entry["per_question"].items()},
                macro=dict(entry["macro"]),
                evaluated=int(entry["evaluated"]),
                excluded=tuple(entry["excluded"]),
            )
            for name, entry in payload["methods"].items()
        }
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad report payload: {exc}") from exc


def render_figure(reports: Mapping[str, MetricReport], path: str | Path) -> None:
    """Grouped bar chart of the table, one bar color per method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    columns = _columns_for(reports)
    methods = list(reports)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.4 * len(columns)), 4.0))
    width = 0.8 / len(methods)
    for i, name in enumerate(methods):
        values = [reports[name].macro[c] * 100 for c in columns]
        positions = [j + (i - (len(methods) - 1) / 2) * width for j in range(len(columns))]
        ax.bar(positions, values, width=width, label=name)
    ax.set_xticks(range(len(columns)))
    ax.set_xticklabels(columns)
    ax.set_ylabel("score (%)")
    ax.set_ylim(0, 105)
    ax.legend(loc="lower right", fontsize="small")
    ax.set_title("Passage reranking metrics")
    fig.tight_layout()
    # Suppress the Software metadata chunk so repeated runs stay byte-identical.
    fig.savefig(str(path), metadata={"Software": None})
    plt.close(fig)


def write_report_files(
    reports: Mapping[str, MetricReport],
    out_dir: str | Path,
    basename: str = "report",
    figure: bool = True,
) -> dict[str, Path]:
    """Write report.{json,txt,csv} and optionally report.png; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / f"{basename}.json",
        "txt": out_dir / f"{basename}.txt",
        "csv": out_dir / f"{basename}.csv",
    }
    paths["json"].write_text(
        json.dumps(report_payload(reports), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    paths["txt"].write_text(render_report(reports), encoding="utf-8")
    paths["csv"].write_text(render_csv(reports), encoding="utf-8")
    if figure:
        paths["png"] = out_dir / f"{basename}.png"
        render_figure(reports, paths["png"])
    return paths


def load_report(path: str | Path) -> dict[str, MetricReport]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"report file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed report JSON: {exc}") from exc
    return reports_from_payload(payload)
