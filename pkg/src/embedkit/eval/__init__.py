"""Splitting, metrics, the benchmark grid and its reports."""

from .grid import EMBEDDINGS, METRICS, TASKS, CellResult, ExperimentReport, GridConfig, cell_seed, model_options, run_grid
from .metrics import confusion_matrix, fleiss_kappa, macro_prf, majority_baseline_macro_f, per_class_prf
from .report import emit_report, percent, render_csv, render_markdown
from .split import Split, largest_remainder, split_dataset

__all__ = [
    "EMBEDDINGS", "METRICS", "TASKS", "CellResult", "ExperimentReport", "GridConfig", "Split", "cell_seed", "model_options",
    "confusion_matrix", "emit_report", "fleiss_kappa", "largest_remainder", "macro_prf",
    "majority_baseline_macro_f", "per_class_prf", "percent", "render_csv", "render_markdown", "run_grid",
    "split_dataset",
]
