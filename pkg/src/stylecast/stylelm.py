"""Offline style labeling with a pair of smoothed trigram language models."""

from __future__ import annotations

import dataclasses
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .corpus import FtPair, StyledExample
from .train import label_from_ced

BOS, EOS, UNK = "<s>", "</s>", "<unk>"


class TrigramLm:
    """Add-k smoothed trigram model over a fixed vocabulary."""

    def __init__(self, sentences: Iterable[Sequence[str]], vocab: Sequence[str], k: float = 0.1):
        if k <= 0:
            raise ValueError("add-k constant must be positive")
        self.k = k
        self.vocab = frozenset(vocab) | {EOS, UNK}
        self.tri: Counter = Counter()
        self.bi: Counter = Counter()
        for sent in sentences:
            toks = self._pad(sent)
            for i in range(2, len(toks)):
                self.tri[(toks[i - 2], toks[i - 1], toks[i])] += 1
                self.bi[(toks[i - 2], toks[i - 1])] += 1

    def _pad(self, sent):
        return [BOS, BOS] + [t if t in self.vocab else UNK for t in sent] + [EOS]

    def token_logprobs(self, sent: Sequence[str]) -> np.ndarray:
        toks = self._pad(sent)
        size = len(self.vocab)
        out = np.empty(len(toks) - 2)
        for i in range(2, len(toks)):
            num = self.tri[(toks[i - 2], toks[i - 1], toks[i])] + self.k
            den = self.bi[(toks[i - 2], toks[i - 1])] + self.k * size
            out[i - 2] = math.log(num / den)
        return out

    def perplexity(self, sentences: Iterable[Sequence[str]]) -> float:
        total = n = 0.0
        for sent in sentences:
            lp = self.token_logprobs(sent)
            total -= lp.sum()
            n += lp.size
        return math.exp(total / n)


@dataclass
class StyleLm:
    informal: TrigramLm
    formal: TrigramLm

    @classmethod
    def train(cls, pairs: Sequence[FtPair], k: float = 0.1) -> "StyleLm":
        vocab = sorted({t for p in pairs for t in p.informal} | {t for p in pairs for t in p.formal})
        return cls(
            TrigramLm([p.informal for p in pairs], vocab, k),
            TrigramLm([p.formal for p in pairs], vocab, k),
        )

    def token_ced(self, sentence: Sequence[str]) -> np.ndarray:
        """Per-token cross-entropy under the informal LM minus under the formal LM."""
        return self.formal.token_logprobs(sentence) - self.informal.token_logprobs(sentence)


def ds_offline_label(style_lm: StyleLm, mt_set: Sequence[StyledExample]):
    """Three-way labels for MT targets with one corpus-wide threshold.

    Returns ``(labeled examples, tau, records)``.
    """
    tau, records = label_from_ced([style_lm.token_ced(ex.target) for ex in mt_set])
    labeled = [dataclasses.replace(ex, style=r.label) for ex, r in zip(mt_set, records)]
    return labeled, tau, records
