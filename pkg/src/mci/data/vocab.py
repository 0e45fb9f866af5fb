"""Caption tokenizer and vocabulary.

Tokenization is lowercase, whitespace-split, with trailing punctuation
detached into standalone tokens. Vocabulary ids are contiguous with the
four specials first (PAD=0) and the remaining tokens in sorted order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

_TRAILING_PUNCT = set(".,!?;:")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, detach trailing punctuation."""
    tokens: list[str] = []
    for piece in text.lower().split():
        trailing: list[str] = []
        while piece and piece[-1] in _TRAILING_PUNCT:
            trailing.append(piece[-1])
            piece = piece[:-1]
        if piece:
            tokens.append(piece)
        tokens.extend(reversed(trailing))
    return tokens


@dataclass
class Vocabulary:
    token_to_id: dict[str, int] = field(default_factory=dict)
    id_to_token: dict[int, str] = field(default_factory=dict)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def bos_id(self) -> int:
        return self.token_to_id[BOS]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode_tokens(self, tokens: Iterable[str]) -> list[int]:
        """Token sequence -> id sequence wrapped in BOS/EOS."""
        unk = self.unk_id
        ids = [self.token_to_id.get(t, unk) for t in tokens]
        return [self.bos_id] + ids + [self.eos_id]

    def encode(self, text: str) -> list[int]:
        return self.encode_tokens(tokenize(text))

    def decode(self, ids: Iterable[int]) -> list[str]:
        """Id sequence -> tokens, dropping specials."""
        special_ids = {self.token_to_id[s] for s in SPECIALS}
        return [self.id_to_token[i] for i in ids if i not in special_ids]

    def to_dict(self) -> dict:
        return {"tokens": [self.id_to_token[i] for i in range(len(self.id_to_token))]}

    @classmethod
    def from_dict(cls, payload: dict) -> "Vocabulary":
        tokens = payload["tokens"]
        return cls(
            token_to_id={t: i for i, t in enumerate(tokens)},
            id_to_token=dict(enumerate(tokens)),
        )


def build_vocabulary(captions: Iterable[str], min_freq: int = 1) -> Vocabulary:
    """Build a vocabulary from raw caption strings.

    Tokens occurring fewer than ``min_freq`` times are dropped (they will
    encode to UNK). Ids: specials 0..3, then surviving tokens sorted.
    """
    counts: Counter[str] = Counter()
    n_captions = 0
    for raw in captions:
        n_captions += 1
        counts.update(tokenize(raw))
    if n_captions == 0:
        raise ValueError("cannot build a vocabulary from zero captions")
    kept = sorted(t for t, c in counts.items() if c >= min_freq)
    tokens = list(SPECIALS) + kept
    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(tokens)},
        id_to_token=dict(enumerate(tokens)),
    )
