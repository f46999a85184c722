"""Writing experiment reports: one TSV table per experiment plus a JSON summary."""

from __future__ import annotations

import json
from pathlib import Path

from horolab.experiments import ExperimentReport


def write_reports(reports: list[ExperimentReport], out_dir, meta: dict, plots: bool = True) -> list[Path]:
    """Write tables, optional SVG plots and ``summary.json``; returns the written paths.

    Rewriting into the same directory replaces the files, so emitting the
    same reports twice leaves identical tables behind.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rep in reports:
        path = out / f"{rep.id}.tsv"
        path.write_text(rep.table_text())
        written.append(path)
        if plots and rep.plot:
            from horolab.plotting import plot_report

            svg = out / f"{rep.id}.svg"
            plot_report(rep, svg)
            written.append(svg)
    summary = dict(meta)
    summary["passed"] = all(r.passed for r in reports)
    summary["experiments"] = [r.summary_dict() for r in reports]
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
