"""Tokenizer and vocabulary contracts."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from claripick.text import UNK_INDEX, UNK_TOKEN, Vocabulary, build_vocabulary, encode_tokens, tokenize


def test_tokenize_examples():
    assert tokenize("Move the Tissue box!") == ["move", "the", "tissue", "box"]
    assert tokenize("") == []
    assert tokenize("red,  red") == ["red", "red"]


def test_tokenize_strips_punctuation_only_at_edges():
    assert tokenize("(the) 'blue' cup.") == ["the", "blue", "cup"]
    assert tokenize("it's left-most") == ["it's", "left-most"]


@given(st.text(max_size=60))
def test_tokenize_idempotent_on_rejoined_output(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


def test_build_vocabulary_count_threshold():
    vocab = build_vocabulary(["red cup", "red box"])
    assert set(vocab.index) == {UNK_TOKEN, "red"}
    assert "cup" not in vocab
    assert "box" not in vocab


def test_build_vocabulary_degenerate_corpus():
    vocab = build_vocabulary(["one two three"])
    assert set(vocab.index) == {UNK_TOKEN}
    assert len(vocab) == 1


def test_build_vocabulary_counts_occurrences_not_documents():
    vocab = build_vocabulary(["a a"])
    assert "a" in vocab


def test_build_vocabulary_deterministic_sorted_indices():
    vocab = build_vocabulary(["zebra apple zebra apple", "mango mango"])
    assert vocab.index == {UNK_TOKEN: 0, "apple": 1, "mango": 2, "zebra": 3}


def test_encode_tokens_examples():
    vocab = Vocabulary({UNK_TOKEN: 0, "red": 1})
    assert encode_tokens(["red", "ball"], vocab) == [1, 0]
    assert encode_tokens([], vocab) == []
    assert encode_tokens(["x", "y", "z"], vocab) == [0, 0, 0]


def test_vocabulary_invariants():
    with pytest.raises(ValueError):
        Vocabulary({"red": 0})
    with pytest.raises(ValueError):
        Vocabulary({UNK_TOKEN: 0, "a": 1, "b": 1})


@given(st.lists(st.sampled_from(["red", "blue", "cup", "box", "move"]), max_size=12))
def test_no_singleton_token_ever_in_vocab(tokens):
    corpus = [" ".join(tokens)]
    vocab = build_vocabulary(corpus)
    assert UNK_TOKEN in vocab
    counts = {t: tokens.count(t) for t in tokens}
    for token, c in counts.items():
        assert (token in vocab) == (c >= 2)


def test_unknown_maps_to_index_zero():
    vocab = build_vocabulary(["pick pick the the"])
    assert vocab.encode(["pick", "never-seen"]) == [vocab.index["pick"], UNK_INDEX]
