"""Lexical/positional difference between paired outputs, and corpus BLEU."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

SUFFIXES = ("ing", "es", "ed", "ly", "s")


def _check_nonempty(s1, s2):
    if len(s1) == 0 or len(s2) == 0:
        raise ValueError("both token sequences must be non-empty")


def led(s1: Sequence[str], s2: Sequence[str]) -> float:
    """Mean fraction of each side's tokens missing from the other (multiset difference)."""
    _check_nonempty(s1, s2)
    c1, c2 = Counter(s1), Counter(s2)
    only1 = sum((c1 - c2).values())
    only2 = sum((c2 - c1).values())
    return 0.5 * (only1 / len(s1) + only2 / len(s2))


def stem(token: str) -> str:
    """Strips the suffixes s/es/ed/ing/ly repeatedly, keeping at least two characters."""
    word = token.lower()
    changed = True
    while changed:
        changed = False
        for suf in SUFFIXES:
            if word.endswith(suf) and len(word) - len(suf) >= 2:
                word = word[: -len(suf)]
                changed = True
                break
    return word


@dataclass
class Alignment:
    pairs: List[Tuple[int, int]]
    len1: int = 0
    len2: int = 0
    distortions: List[int] = field(default_factory=list)
    segments: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.pairs)


def _segment(d: Sequence[int]) -> List[Tuple[int, int]]:
    segments = []
    start = total = 0
    for i, v in enumerate(d):
        total += v
        if total == 0:
            segments.append((start, i + 1))
            start = i + 1
    return segments


def align(s1: Sequence[str], s2: Sequence[str]) -> Alignment:
    """One-to-one word alignment by exact, lowercase, then stem matching.

    Each tier visits ``s1`` left to right and takes the still-free ``s2``
    position nearest to it (ties to the left).
    """
    _check_nonempty(s1, s2)
    match = {}
    used2 = set()
    for key in (lambda t: t, str.lower, stem):
        for i, tok in enumerate(s1):
            if i in match:
                continue
            k = key(tok)
            best = None
            for j, other in enumerate(s2):
                if j in used2 or key(other) != k:
                    continue
                if best is None or abs(j - i) < abs(best - i):
                    best = j
            if best is not None:
                match[i] = best
                used2.add(best)
    pairs = sorted(match.items())
    rank2 = {j: r for r, j in enumerate(sorted(used2))}
    distortions = [rank2[j] - r for r, (_, j) in enumerate(pairs)]
    return Alignment(pairs, len(s1), len(s2), distortions, _segment(distortions))


def pod_from_distortions(d: Sequence[int]) -> float:
    if len(d) == 0:
        return 0.0
    return sum(max(abs(v) for v in d[a:b]) for a, b in _segment(d)) / len(d)


def pod(alignment: Alignment) -> float:
    """Sum of per-segment maximum absolute distortion over aligned-word count (0 if none)."""
    return pod_from_distortions(alignment.distortions)


@dataclass
class LePoDReport:
    led: List[float]
    pod: List[float]
    unaligned: List[int]

    @property
    def led_percent(self) -> float:
        return 100.0 * sum(self.led) / len(self.led) if self.led else 0.0

    @property
    def pod_percent(self) -> float:
        return 100.0 * sum(self.pod) / len(self.pod) if self.pod else 0.0

    def tsv(self) -> str:
        lines = ["line\tLeD\tPoD\tflag"]
        flagged = set(self.unaligned)
        for i, (a, b) in enumerate(zip(self.led, self.pod), start=1):
            lines.append(f"{i}\t{a:.6f}\t{b:.6f}\t{'no-alignment' if i - 1 in flagged else ''}")
        lines.append(f"corpus\t{self.led_percent:.2f}\t{self.pod_percent:.2f}\t")
        return "\n".join(lines) + "\n"


def lepod(first: Sequence[Sequence[str]], second: Sequence[Sequence[str]]) -> LePoDReport:
    if len(first) != len(second):
        raise ValueError(f"line counts differ: {len(first)} vs {len(second)}")
    leds, pods, flagged = [], [], []
    for i, (a, b) in enumerate(zip(first, second)):
        leds.append(led(a, b))
        al = align(a, b)
        if al.n == 0:
            flagged.append(i)
        pods.append(pod(al))
    return LePoDReport(leds, pods, flagged)


# ---------------------------------------------------------------- BLEU


@dataclass
class BleuResult:
    score: float
    precisions: List[float]
    bp: float
    hyp_len: int
    ref_len: int

    def __str__(self):
        precs = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return f"BLEU = {self.score:.2f} {precs} (BP={self.bp:.3f}, hyp_len={self.hyp_len}, ref_len={self.ref_len})"


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates: Sequence[Sequence[str]], references: Sequence, max_n: int = 4,
         smooth: bool = False) -> BleuResult:
    """Corpus BLEU in [0, 100] with clipped counts and a brevity penalty.

    ``references[i]`` is either one token sequence or a list of them. With
    ``smooth`` set, 1 is added to matches and totals for n >= 2.
    """
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates but {len(references)} references")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for cand, refs in zip(candidates, references):
        refs = _as_ref_list(refs)
        cand = list(cand)
        hyp_len += len(cand)
        ref_len += min((abs(len(r) - len(cand)), len(r)) for r in refs)[1]
        for n in range(1, max_n + 1):
            counts = _ngrams(cand, n)
            limit: Counter = Counter()
            for r in refs:
                limit |= _ngrams(list(r), n)
            matches[n - 1] += sum(min(c, limit[g]) for g, c in counts.items())
            totals[n - 1] += max(len(cand) - n + 1, 0)
    precisions = []
    for n in range(max_n):
        m, t = matches[n], totals[n]
        if smooth and n > 0:
            m, t = m + 1, t + 1
        precisions.append(m / t if t else 0.0)
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    if min(precisions) <= 0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuResult(score, precisions, bp, hyp_len, ref_len)


def _as_ref_list(refs) -> List[Sequence[str]]:
    if not refs:
        raise ValueError("every segment needs at least one reference")
    if isinstance(refs[0], str):
        return [refs]
    return list(refs)
