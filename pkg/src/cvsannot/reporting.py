"""Rendering for agreement reports: terminal table, CSV, JSON, and a heatmap."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .agreement import AgreementReport


def _cell(report: AgreementReport, a: str, b: str) -> float | None:
    if a == b:
        return 1.0
    pair = report.pair(a, b)
    return pair.kappa


def render_table(report: AgreementReport) -> str:
    raters = report.raters
    if not raters:
        return "no assessments in scope\n"
    width = max(8, max(len(r) for r in raters) + 1)
    lines = [f"criterion {report.criterion}   scope {report.scope}"]
    header = " " * width + "".join(f"{r:>{width}}" for r in raters)
    lines.append(header)
    for a in raters:
        row = f"{a:>{width}}"
        for b in raters:
            v = _cell(report, a, b)
            row += f"{v:>{width}.3f}" if v is not None else f"{'--':>{width}}"
        lines.append(row)
    if report.mean_kappa is not None:
        lines.append(f"mean kappa over defined pairs: {report.mean_kappa:.3f}")
    else:
        lines.append("mean kappa over defined pairs: undefined")
    return "\n".join(lines) + "\n"


def render_csv(report: AgreementReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["rater_a", "rater_b", "criterion", "kappa", "n_shared", "status"])
    for p in report.pairs:
        writer.writerow(
            [
                p.rater_a,
                p.rater_b,
                report.criterion,
                "" if p.kappa is None else f"{p.kappa:.6f}",
                p.n_shared,
                p.status,
            ]
        )
    return buf.getvalue()


def save_heatmap(report: AgreementReport, path: str | Path) -> Path:
    raters = report.raters
    n = len(raters)
    grid = np.full((n, n), np.nan)
    for i, a in enumerate(raters):
        for j, b in enumerate(raters):
            v = _cell(report, a, b)
            if v is not None:
                grid[i, j] = v
    fig, ax = plt.subplots(figsize=(max(3, 0.8 * n + 2), max(3, 0.8 * n + 2)))
    im = ax.imshow(grid, vmin=-1.0, vmax=1.0, cmap="RdYlGn")
    ax.set_xticks(range(n), labels=raters, rotation=45, ha="right")
    ax.set_yticks(range(n), labels=raters)
    for i in range(n):
        for j in range(n):
            text = "--" if np.isnan(grid[i, j]) else f"{grid[i, j]:.2f}"
            ax.text(j, i, text, ha="center", va="center", fontsize=8)
    ax.set_title(f"kappa ({report.criterion}), {report.scope}")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report_files(report: AgreementReport, out_dir: str | Path) -> dict[str, Path]:
    """CSV + JSON + heatmap PNG for one report, named by criterion."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"kappa_{report.criterion}"
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(render_csv(report))
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(report.to_doc(), indent=2, sort_keys=True) + "\n")
    png_path = save_heatmap(report, out / f"{stem}.png")
    return {"csv": csv_path, "json": json_path, "png": png_path}
