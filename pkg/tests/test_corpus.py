from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedkit.corpus import (
    PAD_ID,
    SIX_CLASSES,
    UNK_ID,
    LabeledExample,
    build_vocab,
    derive_task_labels,
    encode,
    normalize,
    read_dataset,
    tokenize,
    write_dataset,
)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("عام 2019", "عام 99"),
        ("", ""),
        ("#حرية_المرأة", "حرية المرأة"),
        ("ههههههه", "هه"),
        ("@sami انظر http://t.co/ab", "UserMention انظر"),
        ("كَتَبَ", "كتب"),
        ("جميـــــل", "جميل"),
        ("رائع 😀😀😀 جدا", "رائع Emojis جدا"),
        ("قال: «لا»!", "قال لا"),
        ("  a \t b \n", "a b"),
        ("٢٠٢٠ 3.5", "99 99 99"),
    ],
)
def test_normalize_examples(raw, expected):
    assert normalize(raw) == expected


tweetish = st.lists(
    st.sampled_from(list("abcde ههمرأة#@_.!?😀🙏 0123456789ٌَُـ") + ["http://x.co/a ", "www.y.com "]),
    max_size=60,
).map("".join)


@given(tweetish)
@settings(max_examples=300)
def test_normalize_is_idempotent(raw):
    once = normalize(raw)
    assert normalize(once) == once


@given(st.text(max_size=40))
def test_normalize_total_on_arbitrary_text(raw):
    out = normalize(raw)
    assert out == out.strip()
    assert "  " not in out


def test_tokenize():
    assert tokenize("a b  c") == ["a", "b", "c"]
    assert tokenize("") == []
    assert tokenize("UserMention انظر") == ["UserMention", "انظر"]


def test_build_vocab_examples():
    vocab = build_vocab(["x"] * 4 + ["y"] * 5, min_count=5)
    assert "x" not in vocab and "y" in vocab

    empty = build_vocab([], min_count=5)
    assert len(empty) == 2
    assert empty.tokens[PAD_ID] == "<pad>" and empty.tokens[UNK_ID] == "<unk>"

    v = build_vocab("a a a b".split(), min_count=1)
    assert v.index["a"] == 2 and v.index["b"] == 3
    assert v.counts[2:] == [3, 1]


def test_build_vocab_ties_lexicographic():
    v = build_vocab("b a c a b c".split(), min_count=1)
    assert v.tokens[2:] == ["a", "b", "c"]


@given(st.lists(st.sampled_from([f"w{i}" for i in range(30)]), max_size=10_000), st.integers(1, 8))
@settings(max_examples=40, deadline=None)
def test_build_vocab_matches_brute_force(stream, min_count):
    vocab = build_vocab(stream, min_count)
    brute = {}
    for tok in stream:
        brute[tok] = brute.get(tok, 0) + 1
    brute = {t: c for t, c in brute.items() if c >= min_count}
    got = dict(zip(vocab.tokens[2:], vocab.counts[2:]))
    assert got == brute
    assert vocab.counts[:2] == [0, 0]
    assert sorted(vocab.index.values()) == list(range(len(vocab)))
    assert all(vocab.tokens[i] == t for t, i in vocab.index.items())


def test_encode_examples():
    vocab = build_vocab("a a b".split(), 1)
    seq = encode(["a", "zzz"], vocab, 4)
    assert list(seq.ids) == [2, UNK_ID, 0, 0] and seq.true_length == 2

    seq = encode([], vocab, 4)
    assert list(seq.ids) == [0, 0, 0, 0] and seq.true_length == 0

    toks = ["a", "b"] * 5
    seq = encode(toks, vocab, 8)
    assert list(seq.ids) == [2, 3] * 4 and seq.true_length == 8

    with pytest.raises(ValueError):
        encode(["a"], vocab, 0)


@given(st.lists(st.sampled_from(list("abcdefg")), max_size=12), st.integers(1, 12))
def test_encode_decode_round_trip(tokens, max_len):
    vocab = build_vocab(list("abcdefg"), 1)
    seq = encode(tokens, vocab, max_len)
    assert len(seq.ids) == max_len
    assert np.all(seq.ids[seq.true_length:] == PAD_ID)
    if len(tokens) <= max_len:
        assert vocab.decode(seq.ids) == tokens


def test_derive_task_labels_examples():
    assert derive_task_labels("religious-hate") == ("offensive-hate", "hate")
    assert derive_task_labels("clean") == ("clean", "clean")
    assert derive_task_labels("offensive") == ("offensive-hate", "offensive")
    with pytest.raises(ValueError, match="'spam'"):
        derive_task_labels("spam")


@pytest.mark.parametrize("six", SIX_CLASSES)
def test_label_hierarchy_exhaustive(six):
    two, three = derive_task_labels(six)
    assert (six == "clean") == (three == "clean") == (two == "clean")
    if six == "offensive":
        assert three == "offensive"
    if six.endswith("-hate"):
        assert three == "hate"
    if three in ("offensive", "hate"):
        assert two == "offensive-hate"


def test_dataset_round_trip(tmp_path):
    examples = [LabeledExample("نص اول", "clean"), LabeledExample("a b", "gender-hate")]
    path = tmp_path / "d.tsv"
    write_dataset(examples, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "text\tlabel"
    assert read_dataset(path) == examples


def test_dataset_rejects_bad_label(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("text\tlabel\nhello\thate\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":2:"):
        read_dataset(path)


def test_counter_merge_is_associative():
    shards = [["a", "b"], ["b", "c", "c"], ["a"]]
    merged = Counter()
    for shard in shards:
        merged.update(shard)
    assert build_vocab([t for s in shards for t in s], 1).tokens == build_vocab(merged.elements(), 1).tokens
