"""Deterministic synthetic corpora and labelled toy datasets.

Everything here is generated from a seed, so the bundled files under
``embedkit/data`` can be regenerated byte for byte with
``python -m embedkit.synthetic <dir>``.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .corpus import SIX_CLASSES, LabeledExample, write_dataset

ARABIC_LETTERS = "ابتثجحخدذرزسشصضطظعغفقكلمنهوي"
LATIN_LETTERS = "bcdfghjklmnpqrstvwxz"

# class counts of the 600-example toy set follow the published 6-class skew
TOY_CLASS_COUNTS = {
    "clean": 391,
    "offensive": 49,
    "religious-hate": 36,
    "gender-hate": 40,
    "nationality-hate": 41,
    "ethnicity-hate": 43,
}


def pseudo_words(rng: np.random.Generator, n: int, letters: str, length=(3, 6), taken: set | None = None) -> list[str]:
    """``n`` distinct random words, avoiding anything in ``taken``."""
    taken = set() if taken is None else taken
    words: list[str] = []
    while len(words) < n:
        size = int(rng.integers(length[0], length[1] + 1))
        word = "".join(rng.choice(list(letters), size=size))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


# -- embedding corpora -----------------------------------------------------------------


def two_topic_corpus(n_sentences: int = 2000, topic_size: int = 50, length=(6, 12),
                     seed: int = 0) -> tuple[list[list[str]], list[list[str]]]:
    """Sentences drawn entirely from one of two disjoint topic vocabularies.

    Returns ``(sentences, topics)``.
    """
    rng = np.random.default_rng(seed)
    taken: set = set()
    topics = [pseudo_words(rng, topic_size, LATIN_LETTERS, (4, 7), taken) for _ in range(2)]
    sentences = []
    for _ in range(n_sentences):
        topic = topics[int(rng.integers(2))]
        size = int(rng.integers(length[0], length[1] + 1))
        sentences.append([topic[i] for i in rng.integers(0, topic_size, size)])
    return sentences, topics


MORPH_SUFFIXES = ("", "un", "at", "een", "iya")
HELD_OUT_SUFFIX = "ha"


def morphology_corpus(n_sentences: int = 3000, n_stems: int = 60, n_topics: int = 6, length=(6, 10),
                      seed: int = 0) -> tuple[list[list[str]], list[str]]:
    """Inflected stems grouped into topics; no word carries the held-out suffix.

    Returns ``(sentences, stems)``; ``stem + HELD_OUT_SUFFIX`` is an unseen
    variant of every stem.
    """
    rng = np.random.default_rng(seed)
    stems = pseudo_words(rng, n_stems, LATIN_LETTERS, (5, 6))
    groups = [stems[i::n_topics] for i in range(n_topics)]
    sentences = []
    for _ in range(n_sentences):
        group = groups[int(rng.integers(n_topics))]
        size = int(rng.integers(length[0], length[1] + 1))
        words = []
        for _ in range(size):
            stem = group[int(rng.integers(len(group)))]
            words.append(stem + MORPH_SUFFIXES[int(rng.integers(len(MORPH_SUFFIXES)))])
        sentences.append(words)
    return sentences, stems


# -- labelled tweets -------------------------------------------------------------------


class ToyLexicon:
    """Word lists behind the toy tweets.

    Clean tweets use filler words only. Every offensive or hate tweet carries
    an abusive marker; hate tweets add a hate marker plus a target word
    specific to their subclass, so the label hierarchy is reflected in the text.
    """

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        taken: set = set()
        self.filler = pseudo_words(rng, 120, ARABIC_LETTERS, (3, 6), taken)
        self.abusive = pseudo_words(rng, 6, ARABIC_LETTERS, (3, 5), taken)
        self.hate = pseudo_words(rng, 5, ARABIC_LETTERS, (3, 5), taken)
        self.targets = {label: pseudo_words(rng, 5, ARABIC_LETTERS, (3, 5), taken) for label in SIX_CLASSES[2:]}

    def sentence(self, rng: np.random.Generator, label: str, length=(5, 12)) -> list[str]:
        size = int(rng.integers(length[0], length[1] + 1))
        words = [self.filler[i] for i in rng.integers(0, len(self.filler), size)]
        cues: list[str] = []
        if label != "clean":
            cues.append(self.abusive[int(rng.integers(len(self.abusive)))])
        if label not in ("clean", "offensive"):
            cues.append(self.hate[int(rng.integers(len(self.hate)))])
            target = self.targets[label]
            cues += [target[i] for i in rng.integers(0, len(target), 2)]
        for cue in cues:
            words.insert(int(rng.integers(0, len(words) + 1)), cue)
        return words


def _decorate(rng: np.random.Generator, words: list[str]) -> str:
    """Add tweet noise the normalizer removes or rewrites."""
    words = list(words)
    roll = rng.random(4)
    if roll[0] < 0.2:
        words.insert(0, f"@user{int(rng.integers(1000))}")
    if roll[1] < 0.15:
        words.append("http://t.co/x" + str(int(rng.integers(10_000))))
    if roll[2] < 0.15:
        words.append("#" + "_".join(words[:2]))
    if roll[3] < 0.1:
        words.append("!!!")
    return " ".join(words)


def toy_dataset(counts: dict[str, int] | None = None, seed: int = 0, lexicon_seed: int = 0,
                length=(5, 12)) -> list[LabeledExample]:
    counts = TOY_CLASS_COUNTS if counts is None else counts
    lexicon = ToyLexicon(lexicon_seed)
    rng = np.random.default_rng(seed)
    labels = [label for label in SIX_CLASSES for _ in range(counts.get(label, 0))]
    order = rng.permutation(len(labels))
    return [LabeledExample(_decorate(rng, lexicon.sentence(rng, labels[i], length)), labels[i]) for i in order]


def overfit_dataset(seed: int = 1) -> list[LabeledExample]:
    """50 examples spread over all six classes."""
    counts = {"clean": 15, "offensive": 7, "religious-hate": 7, "gender-hate": 7, "nationality-hate": 7,
              "ethnicity-hate": 7}
    return toy_dataset(counts, seed=seed)


def toy_embedding_corpus(n_sentences: int = 3000, seed: int = 2, lexicon_seed: int = 0) -> list[str]:
    """Unlabelled tweets from the toy generator, one raw line each."""
    lexicon = ToyLexicon(lexicon_seed)
    rng = np.random.default_rng(seed)
    probs = np.array(list(TOY_CLASS_COUNTS.values()), dtype=float)
    probs /= probs.sum()
    labels = rng.choice(SIX_CLASSES, size=n_sentences, p=probs)
    return [_decorate(rng, lexicon.sentence(rng, str(label))) for label in labels]


def write_bundled(directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_dataset(toy_dataset(), directory / "toy_dataset.tsv")
    write_dataset(overfit_dataset(), directory / "toy_overfit.tsv")
    (directory / "toy_corpus.txt").write_text("\n".join(toy_embedding_corpus()) + "\n", encoding="utf-8")


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="Regenerate the bundled toy data files.")
    parser.add_argument("directory", nargs="?", default=str(Path(__file__).parent / "data"))
    write_bundled(parser.parse_args(argv).directory)


if __name__ == "__main__":
    main()
