"""CSV and markdown rendering of an :class:`ExperimentReport`."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .grid import METRICS, ExperimentReport

EMBEDDING_LABELS = {"random": "Rand", "w2v-cb": "w2vcb", "w2v-sg": "w2vsg", "ft-cb": "ftcb", "ft-sg": "ftsg",
                    "glove": "Glove"}
ARCHITECTURE_LABELS = {"cnn": "CNN", "gru": "GRU", "bilstm": "BILSTM", "cnn-bilstm": "CNN+BILSTM"}
COLUMN_ORDER = ("cnn", "gru", "bilstm", "cnn-bilstm")


def _num(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.10f}"


def render_csv(report: ExperimentReport) -> str:
    n_runs = report.metadata["n_runs"]
    header = ["task", "embedding", "architecture", "metric", "mean", "std", "n_runs"]
    header += [f"run_{i}" for i in range(n_runs)]
    lines = [",".join(header)]
    for key in sorted(report.cells, key=_cell_order(report)):
        cell = report.cells[key]
        for metric in METRICS:
            values = cell.values(metric) if not cell.failed else np.zeros(0)
            raw = [_num(v) for v in values] + [""] * (n_runs - len(values))
            mean = cell.mean(metric) if not cell.failed else float("nan")
            std = cell.std(metric) if not cell.failed else float("nan")
            row = [str(cell.task), cell.embedding, cell.architecture, metric, _num(mean), _num(std),
                   str(len(values))] + raw
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _cell_order(report: ExperimentReport):
    embeddings = list(report.metadata["embeddings"])
    architectures = list(report.metadata["architectures"])
    return lambda key: (key[0], embeddings.index(key[1]), architectures.index(key[2]))


def percent(x: float) -> str:
    """Two-decimal percentage, e.g. 0.872237 -> '87.22'."""
    return f"{100.0 * x:.2f}"


def _architectures(report: ExperimentReport) -> list[str]:
    present = set(report.metadata["architectures"])
    return [a for a in COLUMN_ORDER if a in present]


def task_table(report: ExperimentReport, task: int) -> list[str]:
    archs = _architectures(report)
    head = ["Embedding"] + [f"{ARCHITECTURE_LABELS[a]} {m}" for a in archs for m in METRICS]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for emb in report.metadata["embeddings"]:
        cells = [report.cell(task, emb, a) for a in archs]
        fms = [c.mean("FM") if not c.failed else -math.inf for c in cells]
        best = int(np.argmax(fms)) if any(f > -math.inf for f in fms) else -1
        row = [EMBEDDING_LABELS[emb]]
        for j, cell in enumerate(cells):
            if cell.failed:
                row += ["fail"] * 3
                continue
            p, r, f = (percent(cell.mean(m)) for m in METRICS)
            row += [p, r, f"**{f}**" if j == best else f]
        lines.append("| " + " | ".join(row) + " |")
    return lines


def comparison_table(report: ExperimentReport) -> list[str]:
    """Random initialization versus the mean of the pre-trained embeddings, per task and architecture."""
    archs = _architectures(report)
    pretrained = [e for e in report.metadata["embeddings"] if e != "random"]
    head = ["Task"] + [f"{ARCHITECTURE_LABELS[a]} {k}" for a in archs for k in ("Rand FM", "pre-trained FM", "delta")]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for task in report.metadata["tasks"]:
        row = [f"{task}-class"]
        for arch in archs:
            rand = report.cell(task, "random", arch) if "random" in report.metadata["embeddings"] else None
            scores = [report.cell(task, e, arch).mean("FM") for e in pretrained if not report.cell(task, e, arch).failed]
            if rand is None or rand.failed or not scores:
                row += ["n/a"] * 3
                continue
            r, p = rand.mean("FM"), float(np.mean(scores))
            row += [percent(r), percent(p), f"{100 * (p - r):+.2f}"]
        lines.append("| " + " | ".join(row) + " |")
    return lines


def render_markdown(report: ExperimentReport, config_lines: list[str] | None = None) -> str:
    out = ["# Benchmark report", ""]
    meta = report.metadata
    out.append(f"Runs per cell: {meta['n_runs']}; base seed {meta['base_seed']}; split: {meta['split']}; "
               f"FM: {meta['f_measure']}. Values are mean percentages over runs.")
    out.append("")
    for task in meta["tasks"]:
        out.append(f"## {task}-class results")
        out.append("")
        out += task_table(report, task)
        baseline = report.baselines.get(task)
        if baseline:
            out.append("")
            out.append(f"Majority-class baseline FM: {percent(float(np.mean(baseline)))}")
        out.append("")
    out.append("## Pre-trained versus random initialization")
    out.append("")
    out += comparison_table(report)
    out.append("")
    if report.failures:
        out.append("## Failed cells")
        out.append("")
        for cell in report.failures:
            out.append(f"- {cell.task}-class / {cell.embedding} / {cell.architecture}: {cell.error}")
        out.append("")
    if config_lines:
        out.append("## Resolved configuration")
        out.append("")
        out.append("```")
        out += config_lines
        out.append("```")
        out.append("")
    return "\n".join(out)


def emit_report(report: ExperimentReport, path: str | Path, fmt: str = "csv",
                config_lines: list[str] | None = None) -> Path:
    if fmt == "csv":
        text = render_csv(report)
    elif fmt == "markdown":
        text = render_markdown(report, config_lines)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path
