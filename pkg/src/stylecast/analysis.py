"""Rule-based detectors for common informal -> formal rewrites.

Each detector sees one (informal, formal) pair. ``analyze`` counts, per
pattern, how many non-identical pairs trigger it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Sequence, Tuple, Union

from .corpus import tokenize
from .metrics import stem

Text = Union[str, Sequence[str]]
PATTERNS = ("contraction", "filler", "quotation", "possessive", "yesno")
COLUMN_NAMES = ("identical", "contr.", "filler", "quot.", "poss.", "y/n", "Δlength")


@dataclass(frozen=True)
class Lexicon:
    version: int
    contractions: Dict[str, Tuple[Tuple[str, ...], ...]]
    fillers: frozenset
    filler_followers: frozenset
    auxiliaries: frozenset
    wh_words: frozenset
    quote_marks: frozenset
    possessive_suffix: str


@lru_cache(maxsize=None)
def load_lexicon() -> Lexicon:
    raw = json.loads(resources.files("stylecast.data").joinpath("lexicon.json").read_text("utf-8"))
    return Lexicon(
        version=int(raw["version"]),
        contractions={short: tuple(tuple(e.split()) for e in exps) for short, exps in raw["contractions"]},
        fillers=frozenset(raw["fillers"]),
        filler_followers=frozenset(raw["filler_followers"]),
        auxiliaries=frozenset(raw["auxiliaries"]),
        wh_words=frozenset(raw["wh_words"]),
        quote_marks=frozenset(raw["quote_marks"]),
        possessive_suffix=raw["possessive_suffix"],
    )


def _tokens(text: Text) -> List[str]:
    return tokenize(text) if isinstance(text, str) else [t.lower() for t in text]


def _contains(tokens: Sequence[str], seq: Sequence[str]) -> bool:
    n = len(seq)
    return any(tuple(tokens[i : i + n]) == tuple(seq) for i in range(len(tokens) - n + 1))


def _skip_fillers(tokens: List[str], lex: Lexicon) -> List[str]:
    i = 0
    while i < len(tokens) and tokens[i] in lex.fillers:
        i += 1
        while i < len(tokens) and tokens[i] in lex.filler_followers:
            i += 1
    return tokens[i:]


def detect_contraction(informal: Text, formal: Text) -> bool:
    lex = load_lexicon()
    inf, frm = _tokens(informal), _tokens(formal)
    for tok in set(inf):
        expansions = lex.contractions.get(tok)
        if not expansions or inf.count(tok) <= frm.count(tok):
            continue
        if any(_contains(frm, e) for e in expansions):
            return True
    return False


def detect_filler(informal: Text, formal: Text) -> bool:
    lex = load_lexicon()
    inf, frm = _tokens(informal), _tokens(formal)
    return bool(inf) and inf[0] in lex.fillers and (not frm or frm[0] != inf[0])


def detect_quotation(informal: Text, formal: Text) -> bool:
    marks = load_lexicon().quote_marks
    inf, frm = _tokens(informal), _tokens(formal)
    return sum(t in marks for t in frm) - sum(t in marks for t in inf) >= 2


def detect_possessive(informal: Text, formal: Text) -> bool:
    lex = load_lexicon()
    inf, frm = _tokens(informal), _tokens(formal)
    suffix = lex.possessive_suffix
    for i, tok in enumerate(inf[:-1]):
        if not tok.endswith(suffix) or tok in lex.contractions or len(tok) <= len(suffix):
            continue
        owner, noun = stem(tok[: -len(suffix)]), stem(inf[i + 1])
        for j in range(len(frm) - 2):
            if frm[j + 1] == "of" and stem(frm[j]) == noun and stem(frm[j + 2]) == owner:
                return True
    return False


def detect_yesno(informal: Text, formal: Text) -> bool:
    lex = load_lexicon()
    inf = _skip_fillers(_tokens(informal), lex)
    frm = _skip_fillers(_tokens(formal), lex)
    if len(inf) < 2 or len(frm) < 2 or inf[-1] != "?" or frm[-1] != "?":
        return False
    if inf[0] in lex.auxiliaries or inf[0] in lex.wh_words:
        return False
    return frm[0] in lex.auxiliaries


DETECTORS = {
    "contraction": detect_contraction,
    "filler": detect_filler,
    "quotation": detect_quotation,
    "possessive": detect_possessive,
    "yesno": detect_yesno,
}


def _chars(text: Text) -> int:
    return len(text.strip() if isinstance(text, str) else " ".join(text))


def delta_length(informal: Text, formal: Text) -> float:
    """Character count of the formal side minus the informal side."""
    return float(_chars(formal) - _chars(informal))


@dataclass(frozen=True)
class PairFlags:
    identical: bool
    contraction: bool = False
    filler: bool = False
    quotation: bool = False
    possessive: bool = False
    yesno: bool = False

    def fired(self) -> Tuple[str, ...]:
        return tuple(p for p in PATTERNS if getattr(self, p))


def analyze_pair(informal: Text, formal: Text) -> PairFlags:
    if _tokens(informal) == _tokens(formal):
        return PairFlags(identical=True)
    return PairFlags(identical=False, **{name: fn(informal, formal) for name, fn in DETECTORS.items()})


@dataclass
class DiffReport:
    total: int
    identical: int
    contraction: int
    filler: int
    quotation: int
    possessive: int
    yesno: int
    delta_length: float

    @property
    def identical_percent(self) -> float:
        return 100.0 * self.identical / self.total if self.total else 0.0

    def values(self) -> List[str]:
        return [f"{self.identical_percent:.1f}%"] + [str(getattr(self, p)) for p in PATTERNS] + [
            f"{self.delta_length:.2f}"]

    def table(self) -> str:
        vals = self.values()
        widths = [max(len(c), len(v)) for c, v in zip(COLUMN_NAMES, vals)]
        head = " | ".join(c.rjust(w) for c, w in zip(COLUMN_NAMES, widths))
        row = " | ".join(v.rjust(w) for v, w in zip(vals, widths))
        return f"pairs: {self.total}\n{head}\n{row}\n"

    def tsv(self) -> str:
        names = [f.name for f in fields(self)] + ["identical_percent"]
        vals = [str(getattr(self, n)) for n in names[:-1]] + [f"{self.identical_percent:.4f}"]
        return "\t".join(names) + "\n" + "\t".join(vals) + "\n"


def analyze(informal_outputs: Sequence[Text], formal_outputs: Sequence[Text]) -> DiffReport:
    if len(informal_outputs) != len(formal_outputs):
        raise ValueError(f"line counts differ: {len(informal_outputs)} vs {len(formal_outputs)}")
    counts = dict.fromkeys(PATTERNS, 0)
    identical = 0
    deltas = []
    for inf, frm in zip(informal_outputs, formal_outputs):
        flags = analyze_pair(inf, frm)
        if flags.identical:
            identical += 1
            continue
        deltas.append(delta_length(inf, frm))
        for p in flags.fired():
            counts[p] += 1
    mean_delta = sum(deltas) / len(deltas) if deltas else 0.0
    return DiffReport(len(informal_outputs), identical, delta_length=mean_delta, **counts)
