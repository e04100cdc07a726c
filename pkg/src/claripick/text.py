"""Tokenization and vocabulary construction.

Vocabulary keeps only tokens occurring at least twice in the training
corpus (token occurrences, not document frequency); index 0 is reserved
for the out-of-vocabulary token.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

UNK_TOKEN = "<unk>"
UNK_INDEX = 0

_STRIP_CHARS = ".,;:!?\"'()[]{}<>`~*"


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace-split, strip surrounding punctuation, drop empties."""
    tokens = []
    for chunk in text.lower().split():
        chunk = chunk.strip(_STRIP_CHARS)
        if chunk:
            tokens.append(chunk)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    index: dict[str, int]

    def __post_init__(self):
        if self.index.get(UNK_TOKEN) != UNK_INDEX:
            raise ValueError("vocabulary must map the OOV token to index 0")
        if len(set(self.index.values())) != len(self.index):
            raise ValueError("vocabulary indices must be unique")

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, tokens) -> list[int]:
        return [self.index.get(t, UNK_INDEX) for t in tokens]


def build_vocabulary(training_instructions) -> Vocabulary:
    """Vocabulary of tokens seen more than once, indices in sorted token order."""
    counts = Counter()
    for text in training_instructions:
        counts.update(tokenize(text))
    kept = sorted(t for t, c in counts.items() if c >= 2)
    index = {UNK_TOKEN: UNK_INDEX}
    for i, token in enumerate(kept, start=1):
        index[token] = i
    return Vocabulary(index)


def encode_tokens(tokens, vocab: Vocabulary) -> list[int]:
    return vocab.encode(tokens)
