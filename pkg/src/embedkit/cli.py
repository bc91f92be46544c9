"""Command-line entry point: preprocess, train-embed, train, benchmark, classify.

Settings come from flat ``key=value`` config files (``--config``) and
``--set key=value`` overrides. Exit codes: 0 success, 1 I/O or runtime
failure, 2 usage or config error, 3 benchmark finished with failed cells.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import TASK_LABELS, Vocabulary, encode, encode_texts, normalize, read_dataset, task_label_ids, tokenize
from .embed import ALGORITHMS, OBJECTIVES, EmbConfig, load_embeddings, save_embeddings, train_embeddings
from .eval import EMBEDDINGS, GridConfig, model_options, confusion_matrix, emit_report, macro_prf, run_grid, split_dataset
from .models import (
    ARCHITECTURES,
    ClassifierConfig,
    EncodedDataset,
    build_model,
    embedding_rows,
    predict,
    predict_proba,
    random_embedding,
    train_classifier,
    write_metadata,
)
from .nncore import LayerGraph

log = logging.getLogger("embedkit")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- flat config -----------------------------------------------------------------------


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(cast):
    return lambda text: None if text.strip().lower() in ("", "none", "auto") else cast(text)


def _choices(options):
    def parse(text):
        text = text.strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _list(cast, options=None):
    def parse(text):
        items = [cast(t.strip()) for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("expected a comma-separated list")
        if options is not None:
            for item in items:
                if item not in options:
                    raise ValueError(f"{item!r} is not one of {', '.join(map(str, options))}")
        return tuple(items)
    return parse


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return "auto" if value is None else str(value)


# key -> (parser, default)
SETTINGS: dict[str, tuple] = {
    "corpus.normalize": (_bool, True),
    "corpus.max_len": (int, 64),
    "embed.algorithm": (_choices(ALGORITHMS), "w2v-sg"),
    "embed.dim": (int, 300),
    "embed.window": (int, 5),
    "embed.min_count": (int, 5),
    "embed.epochs": (_optional(int), None),
    "embed.negatives": (int, 5),
    "embed.learning_rate": (_optional(float), None),
    "embed.objective": (_choices(OBJECTIVES), "negative-sampling"),
    "embed.subsample_t": (float, 1e-4),
    "embed.sample_power": (float, 0.75),
    "embed.ngram_min": (int, 3),
    "embed.ngram_max": (int, 6),
    "embed.bucket_count": (int, 2_000_000),
    "embed.x_max": (float, 100.0),
    "embed.alpha": (float, 0.75),
    "embed.distance_weighting": (_bool, True),
    "embed.workers": (int, 1),
    "embed.seed": (int, 1),
    "model.architecture": (_choices(ARCHITECTURES), "cnn"),
    "model.task": (_choices(("2", "3", "6")), "2"),
    "model.dim": (int, 300),
    "model.emb_trainable": (_bool, True),
    "model.lr": (float, 1e-4),
    "model.min_lr": (float, 1e-6),
    "model.batch_size": (int, 32),
    "model.max_epochs": (int, 20),
    "model.plateau_patience": (int, 1),
    "model.early_stop_patience": (int, 3),
    "model.filters": (int, 250),
    "model.kernel": (int, 2),
    "model.rnn_hidden": (int, 100),
    "model.hybrid_hidden": (int, 250),
    "model.dropout": (float, 0.5),
    "model.seed": (int, 0),
    "eval.tasks": (_list(int, (2, 3, 6)), (2, 3, 6)),
    "eval.embeddings": (_list(str, EMBEDDINGS), EMBEDDINGS),
    "eval.architectures": (_list(str, ARCHITECTURES), ARCHITECTURES),
    "eval.n_runs": (int, 15),
    "eval.base_seed": (int, 0),
    "eval.fixed_split": (_bool, False),
    "eval.f_of_means": (_bool, False),
    "eval.workers": (int, 1),
}


@dataclasses.dataclass
class RunConfig:
    """Resolved settings: defaults, then config file, then ``--set``, then global flags."""

    values: dict

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({key: default for key, (_, default) in SETTINGS.items()})

    def set(self, key: str, text: str, origin: str = "") -> None:
        if key not in SETTINGS:
            raise ConfigError(f"{origin}unknown config key {key!r}")
        try:
            self.values[key] = SETTINGS[key][0](text)
        except ValueError as exc:
            raise ConfigError(f"{origin}bad value for {key}: {exc}") from None

    def load(self, path: str | Path) -> None:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        for lineno, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            self.set(key.strip(), value.strip(), f"{path}:{lineno}: ")

    def __getitem__(self, key: str):
        return self.values[key]

    def lines(self) -> list[str]:
        return [f"{key}={_format(self.values[key])}" for key in sorted(self.values)]

    def section(self, prefix: str) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def emb_config(self) -> EmbConfig:
        return EmbConfig(**self.section("embed"))

    def grid_config(self) -> GridConfig:
        m, e = self.section("model"), self.section("eval")
        return GridConfig(
            tasks=e["tasks"], embeddings=e["embeddings"], architectures=e["architectures"], n_runs=e["n_runs"],
            base_seed=e["base_seed"], fixed_split=e["fixed_split"], f_of_means=e["f_of_means"],
            workers=e["workers"], dim=m["dim"], max_len=self["corpus.max_len"], emb_trainable=m["emb_trainable"],
            max_epochs=m["max_epochs"], batch_size=m["batch_size"], lr=m["lr"], min_lr=m["min_lr"],
            plateau_patience=m["plateau_patience"], early_stop_patience=m["early_stop_patience"],
            filters=m["filters"], kernel=m["kernel"], rnn_hidden=m["rnn_hidden"], hybrid_hidden=m["hybrid_hidden"],
            dropout=m["dropout"],
        )


def resolve_config(args) -> RunConfig:
    config = RunConfig.defaults()
    if args.config:
        config.load(args.config)
    for item in (args.overrides or []) + (getattr(args, "sub_overrides", None) or []):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        config.set(key.strip(), value.strip(), "--set: ")
    if args.seed is not None:
        for key in ("embed.seed", "model.seed", "eval.base_seed"):
            config.values[key] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        config.values["embed.workers"] = args.workers
        config.values["eval.workers"] = args.workers
    if getattr(args, "algorithm", None):
        config.set("embed.algorithm", args.algorithm, "--algorithm: ")
    return config


# -- commands --------------------------------------------------------------------------


def cmd_preprocess(args, config: RunConfig) -> int:
    try:
        with open(args.input, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        log.error("cannot read %s: %s", args.input, exc)
        return EXIT_FAILURE
    out = [n for n in (normalize(line) for line in lines) if n]
    try:
        Path(args.output).write_text("".join(f"{line}\n" for line in out), encoding="utf-8")
    except OSError as exc:
        log.error("cannot write %s: %s", args.output, exc)
        return EXIT_FAILURE
    tokens = sum(len(line.split()) for line in out)
    print(f"lines_in={len(lines)} lines_out={len(out)} tokens={tokens}")
    return EXIT_OK


def cmd_train_embed(args, config: RunConfig) -> int:
    try:
        emb_config = config.emb_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(" ".join(f"{k}={_format(v)}" for k, v in
                   (("algorithm", emb_config.algorithm), ("dim", emb_config.dim), ("window", emb_config.window),
                    ("min_count", emb_config.min_count), ("epochs", emb_config.epochs),
                    ("seed", emb_config.seed))))
    stage = "training"
    try:
        model = train_embeddings(args.corpus, emb_config, normalize_text=config["corpus.normalize"])
        stage = "writing"
        save_embeddings(model, args.output)
        write_metadata(f"{args.output}.meta", {"config": dict(l.split("=", 1) for l in config.lines()),
                                                "vocab_size": len(model.vocab) - 2})
    except (OSError, ValueError, FloatingPointError) as exc:
        log.error("%s failed: %s", stage, exc)
        return EXIT_FAILURE
    if emb_config.algorithm == "glove":
        final = f"objective={model.metadata['epoch_objective'][-1]:.6f}"
    else:
        final = f"mean_loss={model.metadata['epoch_loss'][-1]:.6f}"
    print(f"vocab_size={len(model.vocab) - 2} epochs={emb_config.epochs} {final}")
    return EXIT_OK


def _load_dataset(path):
    try:
        return read_dataset(path)
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        log.error("cannot read dataset %s: %s", path, exc)
        return None


def cmd_train(args, config: RunConfig) -> int:
    examples = _load_dataset(args.dataset)
    if examples is None:
        return EXIT_FAILURE
    task = int(config["model.task"])
    arch = config["model.architecture"]
    seed = config["model.seed"]
    max_len = config["corpus.max_len"]
    grid = config.grid_config()
    try:
        split = split_dataset(task_label_ids(examples, 6), seed=seed)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_FAILURE
    texts = [normalize(ex.text) for ex in examples]
    vocab = Vocabulary.from_counts(Counter(t for i in split.train for t in tokenize(texts[i])), min_count=1)
    ids, lengths = encode_texts(texts, vocab, max_len)
    data = EncodedDataset(ids, lengths, task_label_ids(examples, task))
    rng = np.random.default_rng(seed)
    try:
        if args.embedding == "random":
            weights = random_embedding(len(vocab), config["model.dim"], rng)
        else:
            weights = embedding_rows(vocab, load_embeddings(args.embedding), rng)
        graph = build_model(arch, len(vocab), weights.shape[1], task, weights, seed=seed, **model_options(grid, arch))
        clf = ClassifierConfig(arch, task, config["model.emb_trainable"], max_len, config["model.lr"],
                               config["model.min_lr"], config["model.batch_size"], config["model.max_epochs"],
                               config["model.plateau_patience"], config["model.early_stop_patience"], seed)
        graph, history = train_classifier(graph, data.subset(split.train), data.subset(split.validation), clf)
        test = data.subset(split.test)
        pred = np.argmax(predict_proba(graph, test.ids, test.lengths), axis=1)
        p, r, f = macro_prf(confusion_matrix(test.labels, pred, task))
        graph.metadata.update(vocab=vocab.tokens, labels=list(TASK_LABELS[task]), task=task,
                              embedding=str(args.embedding))
        graph.save(args.output)
        record = {"architecture": arch, "task": task, "seed": seed, "embedding": str(args.embedding),
                  "selected_epoch": history.selected_epoch, "test": {"P": p, "R": r, "FM": f},
                  "config": dict(line.split("=", 1) for line in config.lines())}
        write_metadata(f"{args.output}.meta", record)
    except (OSError, ValueError, FloatingPointError) as exc:
        log.error("training failed: %s", exc)
        return EXIT_FAILURE
    print(f"architecture={arch} task={task} selected_epoch={history.selected_epoch} "
          f"test_P={p:.4f} test_R={r:.4f} test_FM={f:.4f}")
    return EXIT_OK


def cmd_benchmark(args, config: RunConfig) -> int:
    examples = _load_dataset(args.dataset)
    if examples is None:
        return EXIT_FAILURE
    grid = config.grid_config()
    emb_dir = Path(args.embeddings_dir)
    sources = {name: emb_dir / f"{name}.txt" for name in EMBEDDINGS if name != "random"}
    out_dir = Path(args.out_dir)
    try:
        (out_dir / "cells").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create %s: %s", out_dir, exc)
        return EXIT_FAILURE
    try:
        report = run_grid(examples, sources, grid)
    except ValueError as exc:
        log.error("benchmark failed: %s", exc)
        return EXIT_FAILURE
    lines = config.lines()
    try:
        emit_report(report, out_dir / "report.csv", "csv")
        emit_report(report, out_dir / "report.md", "markdown", config_lines=lines)
        (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        for (task, emb, arch), cell in report.cells.items():
            record = {
                "task": task, "embedding": emb, "architecture": arch,
                "embedding_source": "random uniform [-0.05, 0.05]" if emb == "random" else str(sources[emb]),
                "status": "failed" if cell.failed else "ok", "error": cell.error or "",
                "seeds": ",".join(map(str, cell.seeds)),
                "selected_epochs": ",".join(map(str, cell.selected_epochs)),
                "config": dict(line.split("=", 1) for line in lines),
            }
            for metric in ("P", "R", "FM"):
                record[f"runs.{metric}"] = ",".join(f"{v:.10f}" for v in cell.values(metric))
            write_metadata(out_dir / "cells" / f"{task}-{emb}-{arch}.txt", record)
    except OSError as exc:
        log.error("cannot write report: %s", exc)
        return EXIT_FAILURE
    failed = len(report.failures)
    print(f"cells={len(report.cells)} failed={failed} report={out_dir / 'report.csv'}")
    return EXIT_PARTIAL if failed else EXIT_OK


EXPECTED_LAYERS = {
    "cnn": ["embedding", "conv1d", "activation", "dropout", "maxpool", "dense"],
    "bilstm": ["embedding", "recurrent", "dropout", "dense"],
    "gru": ["embedding", "recurrent", "dropout", "dense"],
    "cnn-bilstm": ["embedding", "conv1d", "activation", "dropout", "maxpool", "recurrent", "dense"],
}


def load_classifier(path) -> tuple[LayerGraph, Vocabulary, list[str]]:
    """Load a checkpoint written by ``train`` and check it against its declared architecture."""
    graph = LayerGraph.load(path)
    meta = graph.metadata
    arch = meta.get("architecture")
    kinds = [layer.kind for layer in graph.layers]
    if arch not in EXPECTED_LAYERS or kinds != EXPECTED_LAYERS[arch]:
        raise ValueError(f"checkpoint layers {kinds} do not match architecture {arch!r}")
    if "vocab" not in meta or "labels" not in meta:
        raise ValueError("checkpoint has no vocabulary or label names")
    vocab = Vocabulary.from_tokens(meta["vocab"])
    if graph.layers[0].params["weight"].shape[0] != len(vocab):
        raise ValueError("checkpoint vocabulary does not match its embedding layer")
    labels = list(meta["labels"])
    width = 2 if graph.head == "sigmoid" else graph.layers[-1].params["weight"].shape[0]
    if width != len(labels):
        raise ValueError(f"checkpoint head has {width} classes but {len(labels)} label names")
    return graph, vocab, labels


def cmd_classify(args, config: RunConfig) -> int:
    try:
        graph, vocab, labels = load_classifier(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        log.error("cannot use checkpoint %s: %s", args.checkpoint, exc)
        return EXIT_FAILURE
    encoded = encode(tokenize(normalize(args.text)), vocab, graph.metadata["max_len"])
    dist, label = predict(graph, encoded)
    print(f"label={labels[label]}")
    for name, p in zip(labels, dist):
        print(f"{name}\t{p:.4f}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------------


def _add_global_flags(parser: argparse.ArgumentParser, default, set_dest: str = "overrides") -> None:
    parser.add_argument("--config", default=default, help="flat key=value config file")
    parser.add_argument("--set", dest=set_dest, action="append", default=default, metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, default=default, help="seed for embeddings, models and splits")
    parser.add_argument("--workers", type=int, default=default,
                        help="worker count for embedding training and the grid")


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the subcommand
    # copies use SUPPRESS so they do not reset values given up front
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, argparse.SUPPRESS, "sub_overrides")

    parser = argparse.ArgumentParser(prog="embedkit", description=__doc__.splitlines()[0])
    _add_global_flags(parser, None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="normalize a corpus line by line")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-embed", parents=[common], help="train one embedding model")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--algorithm", help=f"one of {', '.join(ALGORITHMS)} (same as embed.algorithm)")
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("train", parents=[common], help="train one classifier checkpoint")
    p.add_argument("dataset")
    p.add_argument("embedding", help="embedding file, or 'random'")
    p.add_argument("output")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", parents=[common], help="run the task x embedding x architecture grid")
    p.add_argument("dataset")
    p.add_argument("embeddings_dir", help="directory holding <name>.txt for each pre-trained embedding")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("classify", parents=[common], help="label one text with a trained checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("text")
    p.set_defaults(func=cmd_classify)
    return parser


LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging() -> None:
    level_name = os.environ.get("EMBEDKIT_LOG", "info").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level_name, logging.INFO), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    if level_name not in LOG_LEVELS:
        log.warning("EMBEDKIT_LOG=%s is not one of quiet, info, debug; using info", level_name)


def main(argv=None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        return args.func(args, config)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"embedkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
