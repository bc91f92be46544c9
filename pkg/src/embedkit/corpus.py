"""Text normalization, tokenization, vocabulary and label handling.

The normalizer targets Arabic tweets but works on any UTF-8 text. It is a
total function and idempotent, so corpora can be re-normalized safely.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1

NUMBER_TOKEN = "99"
MENTION_TOKEN = "UserMention"
EMOJI_TOKEN = "Emojis"

SIX_CLASSES = (
    "clean",
    "offensive",
    "religious-hate",
    "gender-hate",
    "nationality-hate",
    "ethnicity-hate",
)
THREE_CLASSES = ("clean", "offensive", "hate")
TWO_CLASSES = ("clean", "offensive-hate")
TASK_LABELS = {2: TWO_CLASSES, 3: THREE_CLASSES, 6: SIX_CLASSES}

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#(\w+)")
_DIGITS_RE = re.compile(r"\d+")
_REPEAT_RE = re.compile(r"(\S)\1{2,}")

# tashkeel (fathatan..sukun) and tatweel
_ARABIC_MARKS = {chr(c) for c in range(0x064B, 0x0653)} | {"ـ"}
# joiners and variation selectors glue emoji sequences together
_EMOJI_GLUE = {"‍", "︎", "️", "⃣"}


def _is_symbol(ch: str) -> bool:
    cat = unicodedata.category(ch)
    if cat.startswith("S"):
        return True
    cp = ord(ch)
    # pictographs that some Unicode versions leave unassigned or as Cn
    return 0x1F000 <= cp <= 0x1FAFF


def _strip_chars(text: str) -> str:
    out: list[str] = []
    in_symbol_run = False
    for ch in text:
        if ch in _ARABIC_MARKS:
            continue
        if _is_symbol(ch):
            if not in_symbol_run:
                out.append(f" {EMOJI_TOKEN} ")
                in_symbol_run = True
            continue
        if ch in _EMOJI_GLUE:
            continue
        in_symbol_run = False
        cat = unicodedata.category(ch)
        if cat.startswith("P") or cat.startswith("Z"):
            out.append(" ")
        elif cat in ("Cc", "Cf", "Co", "Cs", "Cn"):
            out.append(" " if ch.isspace() else "")
        else:
            out.append(ch)
    return "".join(out)


def normalize(raw: str) -> str:
    """Normalize one tweet or sentence.

    URLs are dropped, mentions become ``UserMention``, hashtags lose the
    ``#`` and split on underscores, digit runs become ``99``, symbol and
    emoji runs become ``Emojis``, punctuation and Arabic diacritics are
    removed, and letters repeated more than twice are cut to two.
    """
    text = _URL_RE.sub(" ", raw)
    text = _MENTION_RE.sub(f" {MENTION_TOKEN} ", text)
    text = _HASHTAG_RE.sub(lambda m: " " + m.group(1).replace("_", " ") + " ", text)
    text = _DIGITS_RE.sub(NUMBER_TOKEN, text)
    text = _strip_chars(text)
    text = _REPEAT_RE.sub(r"\1\1", text)
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    return text.split()


@dataclass
class Vocabulary:
    """Token/id map with frequency counts.

    Ids 0 and 1 are always ``<pad>`` and ``<unk>`` with count 0; the remaining
    entries are sorted by descending count, ties broken lexicographically.
    """

    tokens: list[str]
    counts: list[int]
    min_count: int = 1
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.counts):
            raise ValueError("tokens and counts differ in length")
        if self.tokens[:2] != [PAD, UNK]:
            raise ValueError("vocabulary must start with <pad>, <unk>")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def from_counts(cls, counter: Counter, min_count: int = 1) -> "Vocabulary":
        kept = sorted(
            ((tok, c) for tok, c in counter.items() if c >= min_count and tok not in (PAD, UNK)),
            key=lambda item: (-item[1], item[0]),
        )
        tokens = [PAD, UNK] + [t for t, _ in kept]
        counts = [0, 0] + [c for _, c in kept]
        return cls(tokens, counts, min_count)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        """Rebuild a vocabulary from an ordered token list (counts unknown)."""
        words = [t for t in tokens if t not in (PAD, UNK)]
        return cls([PAD, UNK] + words, [0, 0] + [1] * len(words), 1)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids if i != PAD_ID]

    @property
    def count_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64)


def build_vocab(token_stream: Iterable[str], min_count: int = 5) -> Vocabulary:
    if min_count < 1:
        raise ValueError(f"min_count must be positive, got {min_count}")
    return Vocabulary.from_counts(Counter(token_stream), min_count)


@dataclass
class EncodedSequence:
    ids: np.ndarray
    true_length: int


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int = 64) -> EncodedSequence:
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    kept = tokens[:max_len]
    for pos, tok in enumerate(kept):
        ids[pos] = vocab.id_of(tok)
    return EncodedSequence(ids, len(kept))


def encode_texts(texts: Iterable[str], vocab: Vocabulary, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Encode already-normalized texts into an id matrix and a length vector."""
    seqs = [encode(tokenize(t), vocab, max_len) for t in texts]
    if not seqs:
        return np.zeros((0, max_len), dtype=np.int64), np.zeros(0, dtype=np.int64)
    ids = np.stack([s.ids for s in seqs])
    lengths = np.array([s.true_length for s in seqs], dtype=np.int64)
    return ids, lengths


def derive_task_labels(six_class: str) -> tuple[str, str]:
    """Map a six-class label to its (two-class, three-class) parents."""
    if six_class not in SIX_CLASSES:
        raise ValueError(f"unknown label: {six_class!r}")
    if six_class == "clean":
        return "clean", "clean"
    if six_class == "offensive":
        return "offensive-hate", "offensive"
    return "offensive-hate", "hate"


@dataclass(frozen=True)
class LabeledExample:
    text: str
    six_class: str

    def __post_init__(self) -> None:
        if self.six_class not in SIX_CLASSES:
            raise ValueError(f"unknown label: {self.six_class!r}")

    @property
    def two_class(self) -> str:
        return derive_task_labels(self.six_class)[0]

    @property
    def three_class(self) -> str:
        return derive_task_labels(self.six_class)[1]

    def label(self, task: int) -> str:
        if task == 6:
            return self.six_class
        if task == 3:
            return self.three_class
        if task == 2:
            return self.two_class
        raise ValueError(f"unknown task {task}; expected 2, 3 or 6")


def task_label_ids(examples: Sequence[LabeledExample], task: int) -> np.ndarray:
    names = TASK_LABELS[task]
    return np.array([names.index(ex.label(task)) for ex in examples], dtype=np.int64)


def read_dataset(path: str | Path) -> list[LabeledExample]:
    """Read a ``text<TAB>label`` file with a ``text\\tlabel`` header."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "text\tlabel":
            raise ValueError(f"{path}:1: expected header 'text\\tlabel', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            text, sep, label = line.rpartition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: missing tab separator")
            try:
                examples.append(LabeledExample(text, label))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return examples


def write_dataset(examples: Iterable[LabeledExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("text\tlabel\n")
        for ex in examples:
            fh.write(f"{ex.text}\t{ex.six_class}\n")


def iter_sentences(path: str | Path, normalized: bool = True) -> Iterator[list[str]]:
    """Yield tokenized sentences from a one-sentence-per-line corpus file."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            text = normalize(line) if normalized else line.strip()
            tokens = tokenize(text)
            if tokens:
                yield tokens
