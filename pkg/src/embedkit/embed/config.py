from __future__ import annotations

from dataclasses import dataclass

ALGORITHMS = ("glove", "w2v-cb", "w2v-sg", "ft-cb", "ft-sg")
OBJECTIVES = ("negative-sampling", "hierarchical-softmax")

_DEFAULT_LR = {"glove": 0.05, "w2v-cb": 0.05, "ft-cb": 0.05, "w2v-sg": 0.025, "ft-sg": 0.025}


@dataclass
class EmbConfig:
    """Settings for one embedding model.

    ``learning_rate`` and ``epochs`` default per algorithm when left as None:
    0.025 for skip-gram variants, 0.05 for CBOW variants and GloVe; 15 epochs
    for GloVe, 5 otherwise.
    """

    algorithm: str = "w2v-sg"
    dim: int = 300
    window: int = 5
    min_count: int = 5
    epochs: int | None = None
    negatives: int = 5
    learning_rate: float | None = None
    objective: str = "negative-sampling"
    subsample_t: float = 1e-4
    sample_power: float = 0.75
    ngram_min: int = 3
    ngram_max: int = 6
    bucket_count: int = 2_000_000
    x_max: float = 100.0
    alpha: float = 0.75
    distance_weighting: bool = True
    workers: int = 1
    seed: int = 1

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.epochs is None:
            self.epochs = 15 if self.algorithm == "glove" else 5
        if self.learning_rate is None:
            self.learning_rate = _DEFAULT_LR[self.algorithm]
        for name in ("dim", "window", "min_count", "epochs", "bucket_count", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.negatives < 0:
            raise ValueError(f"negatives must be >= 0, got {self.negatives}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.subsample_t < 0:
            raise ValueError(f"subsample_t must be >= 0, got {self.subsample_t}")
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise ValueError(f"need 1 <= ngram_min <= ngram_max, got {self.ngram_min}, {self.ngram_max}")

    @property
    def is_fasttext(self) -> bool:
        return self.algorithm.startswith("ft-")

    @property
    def is_cbow(self) -> bool:
        return self.algorithm.endswith("-cb")
