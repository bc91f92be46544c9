"""The task x embedding x architecture benchmark grid."""

from __future__ import annotations

import logging
import traceback
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..corpus import LabeledExample, Vocabulary, encode_texts, normalize, task_label_ids, tokenize
from ..embed.matrix import EmbeddingMatrix, load_embeddings
from ..models import (
    ARCHITECTURES,
    ClassifierConfig,
    EncodedDataset,
    build_model,
    embedding_rows,
    predict_proba,
    random_embedding,
    train_classifier,
)
from .metrics import confusion_matrix, macro_prf, majority_baseline_macro_f
from .split import split_dataset

log = logging.getLogger(__name__)

TASKS = (2, 3, 6)
EMBEDDINGS = ("random", "w2v-cb", "w2v-sg", "ft-cb", "ft-sg", "glove")
METRICS = ("P", "R", "FM")


@dataclass
class GridConfig:
    tasks: tuple = TASKS
    embeddings: tuple = EMBEDDINGS
    architectures: tuple = ARCHITECTURES
    n_runs: int = 15
    base_seed: int = 0
    ratios: tuple = (0.6, 0.1, 0.3)
    fixed_split: bool = False
    f_of_means: bool = False
    workers: int = 1
    # random-baseline dim when no pre-trained matrix fixes it
    dim: int = 300
    max_len: int = 64
    emb_trainable: bool = True
    max_epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-4
    min_lr: float = 1e-6
    plateau_patience: int = 1
    early_stop_patience: int = 3
    filters: int = 250
    kernel: int = 2
    rnn_hidden: int = 100
    hybrid_hidden: int = 250
    dropout: float = 0.5

    def __post_init__(self) -> None:
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")
        for task in self.tasks:
            if task not in TASKS:
                raise ValueError(f"unknown task {task}")
        for name in self.embeddings:
            if name not in EMBEDDINGS:
                raise ValueError(f"unknown embedding {name!r}")
        for arch in self.architectures:
            if arch not in ARCHITECTURES:
                raise ValueError(f"unknown architecture {arch!r}")


@dataclass
class CellResult:
    task: int
    embedding: str
    architecture: str
    runs: list = field(default_factory=list)  # (P, R, FM) per run
    selected_epochs: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def values(self, metric: str) -> np.ndarray:
        return np.array([r[METRICS.index(metric)] for r in self.runs], dtype=np.float64)

    def mean(self, metric: str) -> float:
        return float(np.mean(self.values(metric))) if self.runs else float("nan")

    def std(self, metric: str) -> float:
        return float(np.std(self.values(metric))) if self.runs else float("nan")


@dataclass
class ExperimentReport:
    cells: dict  # (task, embedding, architecture) -> CellResult
    baselines: dict  # task -> list of per-run majority-class macro-F on the test split
    metadata: dict

    def cell(self, task: int, embedding: str, architecture: str) -> CellResult:
        return self.cells[(task, embedding, architecture)]

    @property
    def failures(self) -> list[CellResult]:
        return [c for c in self.cells.values() if c.failed]


def cell_seed(base_seed: int, task: int, embedding: str, architecture: str, run: int) -> int:
    key = [base_seed, task, EMBEDDINGS.index(embedding), ARCHITECTURES.index(architecture), run]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def model_options(config: GridConfig, architecture: str) -> dict:
    opts = {"max_len": config.max_len, "dropout": config.dropout, "trainable": config.emb_trainable}
    if architecture in ("cnn", "cnn-bilstm"):
        opts.update(filters=config.filters, kernel=config.kernel)
    if architecture in ("bilstm", "gru"):
        opts["hidden"] = config.rnn_hidden
    if architecture == "cnn-bilstm":
        opts["hidden"] = config.hybrid_hidden
    return opts


@dataclass
class _Job:
    task: int
    embedding: str
    architecture: str
    run: int
    seed: int
    weights: np.ndarray
    train: EncodedDataset
    val: EncodedDataset
    test: EncodedDataset
    config: GridConfig


def _run_job(job: _Job) -> tuple[tuple, int]:
    cfg = job.config
    graph = build_model(job.architecture, job.weights.shape[0], job.weights.shape[1], job.task, job.weights,
                        seed=job.seed, **model_options(cfg, job.architecture))
    clf = ClassifierConfig(architecture=job.architecture, n_classes=job.task, emb_trainable=cfg.emb_trainable,
                           max_len=cfg.max_len, lr=cfg.lr, min_lr=cfg.min_lr, batch_size=cfg.batch_size,
                           max_epochs=cfg.max_epochs, plateau_patience=cfg.plateau_patience,
                           early_stop_patience=cfg.early_stop_patience, seed=job.seed)
    graph, history = train_classifier(graph, job.train, job.val, clf)
    pred = np.argmax(predict_proba(graph, job.test.ids, job.test.lengths), axis=1)
    prf = macro_prf(confusion_matrix(job.test.labels, pred, job.task), f_of_means=cfg.f_of_means)
    return prf, history.selected_epoch


def _safe_run(job: _Job):
    try:
        return _run_job(job), None
    except Exception as exc:  # recorded per cell; the grid keeps going
        log.debug("cell failed:\n%s", traceback.format_exc())
        return None, f"{type(exc).__name__}: {exc}"


def _resolve_embedding(source) -> EmbeddingMatrix | None:
    if source is None or isinstance(source, EmbeddingMatrix):
        return source
    return load_embeddings(Path(source))


def run_grid(examples: Sequence[LabeledExample], embeddings: Mapping[str, object],
             config: GridConfig | None = None) -> ExperimentReport:
    """Train and score every (task, embedding, architecture) cell ``n_runs`` times.

    ``embeddings`` maps names to an :class:`EmbeddingMatrix`, a file path, or
    None for the random baseline. A source that fails to load, like any
    training error, marks only the affected cells as failed.
    """
    config = config or GridConfig()
    if not examples:
        raise ValueError("dataset is empty")
    tokens = [tokenize(normalize(ex.text)) for ex in examples]
    texts = [" ".join(t) for t in tokens]
    six = task_label_ids(examples, 6)

    cells = {(t, e, a): CellResult(t, e, a) for t in config.tasks for e in config.embeddings
             for a in config.architectures}
    matrices: dict[str, EmbeddingMatrix | None] = {}
    for name in config.embeddings:
        source = embeddings.get(name) if name != "random" else None
        if name != "random" and source is None:
            error = f"no source given for embedding {name!r}"
        else:
            try:
                matrices[name] = _resolve_embedding(source)
                continue
            except (OSError, ValueError) as exc:
                error = f"{type(exc).__name__}: {exc}"
        log.warning("embedding %s unavailable: %s", name, error)
        for key, cell in cells.items():
            if key[1] == name:
                cell.error = error

    labels = {task: task_label_ids(examples, task) for task in config.tasks}
    baselines = {task: [] for task in config.tasks}
    jobs: list[_Job] = []
    for run in range(config.n_runs):
        split = split_dataset(six, config.ratios, config.base_seed + (0 if config.fixed_split else run))
        vocab = Vocabulary.from_counts(_count(tokens, split.train), min_count=1)
        ids, lengths = encode_texts(texts, vocab, config.max_len)
        for task in config.tasks:
            baselines[task].append(majority_baseline_macro_f(labels[task][split.test], task))
        for name, matrix in matrices.items():
            rng = np.random.default_rng([config.base_seed, run, EMBEDDINGS.index(name)])
            weights = (random_embedding(len(vocab), config.dim, rng) if matrix is None
                       else embedding_rows(vocab, matrix, rng))
            for task in config.tasks:
                data = EncodedDataset(ids, lengths, labels[task])
                parts = [data.subset(idx) for idx in (split.train, split.validation, split.test)]
                for arch in config.architectures:
                    seed = cell_seed(config.base_seed, task, name, arch, run)
                    jobs.append(_Job(task, name, arch, run, seed, weights, *parts, config))

    log.info("running %d training jobs", len(jobs))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_safe_run, jobs))
    else:
        outcomes = [_safe_run(job) for job in jobs]

    for job, (result, error) in zip(jobs, outcomes):
        log.debug("task %d %s %s run %d: %s", job.task, job.embedding, job.architecture, job.run,
                  error or f"FM {result[0][2]:.4f}")
        cell = cells[(job.task, job.embedding, job.architecture)]
        if cell.failed:
            continue
        if error is not None:
            cell.error = f"run {job.run}: {error}"
            cell.runs.clear()
            continue
        prf, epoch = result
        cell.runs.append(prf)
        cell.selected_epochs.append(epoch)
        cell.seeds.append(job.seed)

    meta = {k: v for k, v in asdict(config).items() if k != "workers"}
    meta["split"] = "fixed" if config.fixed_split else "fresh per run"
    meta["f_measure"] = "F of macro P and R" if config.f_of_means else "mean of per-class F1"
    meta["n_examples"] = len(examples)
    return ExperimentReport(cells, baselines, meta)


def _count(tokens: list[list[str]], index: np.ndarray) -> Counter:
    counter: Counter = Counter()
    for i in index:
        counter.update(tokens[i])
    return counter
