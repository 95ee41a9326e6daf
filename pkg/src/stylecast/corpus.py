"""Tokenization, vocabularies, corpus files and the synthetic corpus generator.

The generator renders each underlying sentence three ways: a pseudo-foreign
source, a formal English realization and an informal one. The informal side
differs from the formal side only through the documented rewrite rules in
``RULES``, so every generated pair carries its ground-truth style and the
exact set of rules that changed it.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .checkpoint import atomic_write_text
from .schemes import STYLE_TAGS, TAG_TO_STYLE, ControlScheme, Style

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK, STYLE_TAGS[Style.INFORMAL], STYLE_TAGS[Style.FORMAL], STYLE_TAGS[Style.UNKNOWN])
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
TAG_IDS = {Style.INFORMAL: 4, Style.FORMAL: 5, Style.UNKNOWN: 6}


class Task(enum.Enum):
    MT = "mt"
    FT = "ft"


# ---------------------------------------------------------------- tokenization

_TOKEN_RE = re.compile(r"``|''|[^\W_]+(?:'[^\W_]+)*|'[^\W_]+|[^\w\s]|_")


def tokenize(line: str) -> List[str]:
    """Lowercase and split punctuation off; apostrophe contractions stay whole."""
    return _TOKEN_RE.findall(line.lower())


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


class Vocab:
    """Token/id bijection with fixed reserved ids.

    ids 0-6 are ``<pad> <s> </s> <unk> <2Informal> <2Formal> <2Unknown>``.
    """

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: List[str] = list(RESERVED)
        self.stoi: Dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            if tok not in self.stoi:
                self.stoi[tok] = len(self.itos)
                self.itos.append(tok)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.itos[i] for i in ids]

    def save(self, path: str):
        atomic_write_text(path, "\n".join(self.itos) + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"{path}: reserved tokens missing or reordered")
        return cls(tokens[len(RESERVED) :])


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocab:
    counts = Counter(tok for sent in corpus for tok in sent)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab(kept)


# ---------------------------------------------------------------- examples


@dataclass(frozen=True)
class StyledExample:
    source: Tuple[str, ...]
    target: Tuple[str, ...]
    style: Optional[Style] = None
    task: Task = Task.MT
    # hidden ground truth for synthetic MT pairs; never read by training
    truth: Optional[Style] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.source or not self.target:
            raise ValueError("example sequences must be non-empty")
        if self.task is Task.FT and self.style is None:
            raise ValueError("formality-transfer examples need a target style")


@dataclass(frozen=True)
class FtPair:
    informal: Tuple[str, ...]
    formal: Tuple[str, ...]
    rules: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ControlledExample:
    """Example after style control: token sequences plus side-channel style."""

    source: Tuple[str, ...]
    target: Tuple[str, ...]
    style: Style
    blocked: bool = False
    target_tagged: bool = False
    source_tagged: bool = False


def build_bidirectional_ft(pairs: Sequence[FtPair]) -> List[StyledExample]:
    out = []
    for pair in pairs:
        if isinstance(pair, StyledExample):
            raise TypeError("build_bidirectional_ft expects FtPair items, not expanded examples")
        if pair.informal == pair.formal:
            raise ValueError(f"formality pair has identical sides: {detokenize(pair.formal)!r}")
        out.append(StyledExample(pair.informal, pair.formal, Style.FORMAL, Task.FT))
        out.append(StyledExample(pair.formal, pair.informal, Style.INFORMAL, Task.FT))
    return out


def filter_by_length(examples, cutoff: int = 50):
    if cutoff < 1:
        raise ValueError("length cutoff must be >= 1")
    return [ex for ex in examples if len(ex.source) <= cutoff and len(ex.target) <= cutoff]


def apply_control(example: StyledExample, scheme: ControlScheme, allow_untagged: bool = False) -> ControlledExample:
    """Attach the style according to ``scheme``.

    Tag schemes prepend the style tag token; side-channel schemes leave the
    sequences alone and carry the style separately. With ``allow_untagged``
    an unlabeled example gets no tag at all (side channels see Unknown).
    """
    style = example.style
    untagged = style is None
    if scheme.uses_style and untagged and not allow_untagged:
        raise ValueError(f"scheme {scheme.value} needs a style label for every example")
    style = Style.UNKNOWN if untagged else style
    src, tgt = tuple(example.source), tuple(example.target)
    if scheme.tags_source and not untagged:
        src = (style.tag,) + src
    if scheme.tags_target and not untagged:
        tgt = (style.tag,) + tgt
    return ControlledExample(
        src,
        tgt,
        style,
        blocked=scheme is ControlScheme.TAG_SRC_BLOCK,
        target_tagged=scheme.tags_target and not untagged,
        source_tagged=scheme.tags_source and not untagged,
    )


def strip_control(example: ControlledExample) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    src, tgt = example.source, example.target
    if example.source_tagged and src and src[0] in TAG_TO_STYLE:
        src = src[1:]
    if example.target_tagged and tgt and tgt[0] in TAG_TO_STYLE:
        tgt = tgt[1:]
    return src, tgt


# ---------------------------------------------------------------- corpus files


def write_tsv(path: str, examples: Iterable[StyledExample]):
    lines = []
    for ex in examples:
        fields = [detokenize(ex.source), detokenize(ex.target)]
        if ex.style is not None:
            fields.append(ex.style.tag)
        lines.append("\t".join(fields))
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_tsv(path: str, task: Task = Task.MT) -> List[StyledExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
            style = None
            if len(fields) == 3 and fields[2].strip():
                if fields[2].strip() not in TAG_TO_STYLE:
                    raise ValueError(f"{path}:{lineno}: unknown style tag {fields[2]!r}")
                style = TAG_TO_STYLE[fields[2].strip()]
            out.append(StyledExample(tuple(tokenize(fields[0])), tuple(tokenize(fields[1])), style, task))
    return out


def write_ft_pairs(path: str, pairs: Iterable[FtPair]):
    """Pairs as ``informal TAB formal`` lines."""
    atomic_write_text(path, "".join(f"{detokenize(p.informal)}\t{detokenize(p.formal)}\n" for p in pairs))


def read_ft_pairs(path: str) -> List[FtPair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 2:
                raise ValueError(f"{path}:{lineno}: expected informal TAB formal")
            out.append(FtPair(tuple(tokenize(fields[0])), tuple(tokenize(fields[1]))))
    return out


def read_lines(path: str) -> List[Tuple[str, ...]]:
    with open(path, encoding="utf-8") as fh:
        return [tuple(tokenize(line)) for line in fh.read().splitlines()]


def write_lines(path: str, sentences: Iterable[Sequence[str]]):
    atomic_write_text(path, "".join(detokenize(s) + "\n" for s in sentences))


# ---------------------------------------------------------------- generator inventory

NAMES = ["lee", "fay", "maria", "john", "sarah", "david", "emma", "paul",
         "nina", "tom", "lucy", "mark", "anna", "peter", "kate", "oscar"]
PLACES = ["store", "park", "office", "station", "library", "museum", "market", "beach",
          "school", "hospital", "airport", "restaurant", "bank", "gym", "cinema", "hotel"]
FOODS = ["cookies", "bread", "soup", "pizza", "coffee", "tea", "apples", "cake", "rice", "cheese"]
ACTIVITIES = ["shopping", "swimming", "dancing", "reading", "cooking",
              "running", "painting", "singing", "hiking", "skiing"]
VERBS = ["call", "visit", "meet", "see", "join", "thank", "invite", "find", "tell", "phone"]
THING_VERBS = ["see", "find", "purchase", "sell", "paint", "clean", "fix", "use"]
RELATIVES = ["father", "mother", "grandmother", "grandfather", "brother", "sister", "uncle", "aunt"]
ADJECTIVES = ["big", "small", "new", "old", "nice", "quiet", "busy", "cheap", "famous", "beautiful"]
NOUNS = ["car", "house", "book", "phone", "computer", "bike", "garden", "idea", "plan", "job"]
POSS_NOUNS = ["innovation", "idea", "house", "car", "book", "plan", "garden", "dog", "job", "story"]
TIMES = ["today", "tomorrow", "tonight", "later", "soon", "next week"]
PAST_TIMES = ["yesterday", "last week", "last night", "last year"]
ADVERBS = ["already", "usually", "often", "always", "sometimes"]
EVENTS = ["meeting", "party", "concert", "wedding", "game", "lecture"]
JOBS = ["technician", "teacher", "doctor", "lawyer", "nurse", "pilot"]
GROUPS = ["nation", "city", "team", "family", "school", "company"]

SLOTS = {
    "NAME": NAMES, "PLACE": PLACES, "FOOD": FOODS, "ACTIVITY": ACTIVITIES, "VERB": VERBS,
    "TVERB": THING_VERBS, "REL": RELATIVES, "ADJ": ADJECTIVES, "NOUN": NOUNS, "TIME": TIMES,
    "PAST": PAST_TIMES, "ADV": ADVERBS, "EVENT": EVENTS, "JOB": JOBS, "GROUP": GROUPS,
}

# Formal word -> informal substitute.
LEXICAL_PAIRS = {
    "father": "dad", "mother": "mom", "grandmother": "grandma", "grandfather": "grandpa",
    "children": "kids", "perhaps": "maybe", "certain": "some", "excellent": "awesome",
    "television": "tv", "purchase": "buy", "received": "got", "yes": "yeah",
    "friend": "buddy", "money": "cash",
}

# (expansion, contraction, allowed next tokens or None, forbidden next tokens)
_VERB_SET = frozenset(VERBS + THING_VERBS + ["go", "be", "let", "like", "leave", "stay"])
_NO_OBJECT = frozenset({"a", "an", "the", "to", "any", "my", "your", "some", "no"})
CONTRACTIONS = [
    (("going", "to"), "gonna", _VERB_SET, None),
    (("want", "to"), "wanna", _VERB_SET, None),
    (("have", "to"), "gotta", _VERB_SET, None),
    (("i", "am"), "i'm", None, None),
    (("you", "are"), "you're", None, None),
    (("we", "are"), "we're", None, None),
    (("they", "are"), "they're", None, None),
    (("he", "is"), "he's", None, None),
    (("she", "is"), "she's", None, None),
    (("it", "is"), "it's", None, None),
    (("that", "is"), "that's", None, None),
    (("there", "is"), "there's", None, None),
    (("what", "is"), "what's", None, None),
    (("i", "have"), "i've", None, _NO_OBJECT),
    (("we", "have"), "we've", None, _NO_OBJECT),
    (("you", "have"), "you've", None, _NO_OBJECT),
    (("do", "not"), "don't", None, None),
    (("does", "not"), "doesn't", None, None),
    (("did", "not"), "didn't", None, None),
    (("is", "not"), "isn't", None, None),
    (("are", "not"), "aren't", None, None),
    (("can", "not"), "can't", None, None),
    (("will", "not"), "won't", None, None),
    (("i", "will"), "i'll", None, None),
    (("we", "will"), "we'll", None, None),
    (("you", "will"), "you'll", None, None),
    (("i", "would"), "i'd", None, None),
    (("he", "would"), "he'd", None, None),
    (("let", "us"), "let's", None, None),
]

FILLERS = [("well", ","), ("so",), ("and",), ("but",), ("so", ",")]

# Markup: "Q|" quotation, "Y|" yes/no question, "W|" wh-question;
# "^ ... ^" droppable sentence-initial span; {POSS} possessive construction.
TEMPLATES = [
    "i am going to the {PLACE} {TIME}",
    "i am going to {VERB} my {REL} {TIME}",
    "^ i am ^ sorry it is my fault",
    "^ i am ^ sorry that i did not {VERB} you",
    "^ the ^ {FOOD} where i work are excellent",
    "^ the ^ {ADJ} {NOUN} is in the {PLACE}",
    "^ the ^ {NOUN} of my {REL} is {ADJ}",
    "i think he would like the {NOUN} , but we will see",
    "i {ADV} told you about the {NOUN}",
    "i {ADV} visit the {PLACE} with my {REL}",
    "they are {ADV} late for the {EVENT}",
    "we have {ADV} finished the {NOUN}",
    "i have {ADV} seen that {ADJ} {NOUN}",
    "we are {ADV} happy to {VERB} you",
    "my {REL} {ADV} cooks {FOOD} on sunday",
    "Q|the {NOUN} is not {ADJ}",
    "Q|we will {VERB} you {TIME}",
    "Q|i do not know the {ADJ} {NOUN}",
    "Q|my {REL} is at the {PLACE}",
    "Q|the {EVENT} was excellent",
    "{POSS} is very {ADJ}",
    "i like {POSS}",
    "i told {NAME} about {POSS}",
    "that is {POSS}",
    "Y|do you like {ACTIVITY} ?",
    "Y|are you going to the {PLACE} {TIME} ?",
    "Y|did you {VERB} your {REL} ?",
    "Y|is your {REL} at the {PLACE} ?",
    "Y|have you seen the {ADJ} {NOUN} ?",
    "Y|can you {VERB} my {REL} {TIME} ?",
    "Y|will you {VERB} {NAME} at the {PLACE} ?",
    "Y|does your {REL} like {FOOD} ?",
    "W|what is the name of the {ADJ} {PLACE} ?",
    "W|where did you {TVERB} the {NOUN} ?",
    "you have to {VERB} your {REL} {TIME}",
    "i want to {TVERB} the {ADJ} {NOUN}",
    "perhaps we can meet at the {PLACE} {TIME}",
    "my {REL} is a {JOB}",
    "it is very important for our {GROUP}",
    "she is not at the {PLACE} {TIME}",
    "he does not like {FOOD}",
    "i can not find my {NOUN}",
    "you will love the {ADJ} {PLACE}",
    "let us {VERB} {NAME} {TIME}",
    "it is an excellent idea , but it does not fit here",
    "{NAME} will {VERB} you {TIME}",
    "my {REL} and i went to the {PLACE} {PAST}",
    "i would like to purchase a {ADJ} {NOUN}",
    "the children are watching television {TIME}",
    "i received the {NOUN} from my {REL} {PAST}",
    "there is a {ADJ} {PLACE} near here",
    "i do not have any money for the {EVENT}",
    "you are my best friend",
    "yes , i will {VERB} {NAME} {TIME}",
    "certain people like the {ADJ} {PLACE}",
    "the {EVENT} at the {PLACE} was {ADJ}",
]

RULES = ("drop", "possessive", "adverb", "lexical", "contraction", "yesno", "quotation", "punctuation", "filler")
DEFAULT_RULE_PROBS = {
    "drop": 0.6, "possessive": 0.8, "adverb": 0.7, "lexical": 0.8, "contraction": 0.8,
    "yesno": 0.8, "quotation": 0.8, "punctuation": 0.8, "filler": 0.4,
}


# ---------------------------------------------------------------- pseudo-foreign source

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "tr", "sk"]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ou"]


def _pseudo_word(word: str, salt: int) -> str:
    digest = hashlib.sha256(f"{word}#{salt}".encode()).digest()
    sylls = 2 + digest[0] % 2
    parts = [_ONSETS[digest[1 + 2 * k] % len(_ONSETS)] + _NUCLEI[digest[2 + 2 * k] % len(_NUCLEI)] for k in range(sylls)]
    return "".join(parts) + "x"


def _english_words() -> List[str]:
    words = set()
    for template in TEMPLATES:
        body = template.split("|", 1)[-1]
        for tok in body.split():
            if not (tok.startswith("{") or tok == "^"):
                words.add(tok)
    for values in SLOTS.values():
        for value in values:
            words.update(value.split())
    words.update(POSS_NOUNS)
    words.update(["the", "of", "said", "?", ","])
    words.update(LEXICAL_PAIRS.values())
    words.update(w for f in FILLERS for w in f)
    return sorted(words)


def _build_lexicon() -> Dict[str, str]:
    mapping: Dict[str, str] = {}
    used = set()
    english = _english_words()
    english_set = set(english)
    for word in english:
        if word in NAMES or not word[0].isalpha():
            mapping[word] = word
            continue
        salt = 0
        while True:
            cand = _pseudo_word(word, salt)
            if cand not in used and cand not in english_set:
                break
            salt += 1
        used.add(cand)
        mapping[word] = cand
    return mapping


SOURCE_LEXICON = _build_lexicon()


def render_source(tokens: Sequence[str]) -> Tuple[str, ...]:
    """Word-for-word pseudo-foreign rendering with noun-adjective order."""
    toks = list(tokens)
    adjs = set(ADJECTIVES)
    i = 0
    while i < len(toks) - 1:
        if toks[i] in adjs and toks[i + 1] not in adjs and toks[i + 1].isalpha():
            toks[i], toks[i + 1] = toks[i + 1], toks[i]
            i += 2
        else:
            i += 1
    return tuple(SOURCE_LEXICON[t] for t in toks)


# ---------------------------------------------------------------- generator


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_mt: int = 2000
    n_ft: int = 1000
    n_eval: int = 500
    rule_probs: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RULE_PROBS))
    # fraction of templates that formality-transfer pairs are drawn from
    ft_share: float = 1.0
    # informal originals show their source-visible rules in the source
    register_cues: bool = False

    def __post_init__(self):
        if self.n_mt <= 0 or self.n_ft <= 0 or self.n_eval < 0:
            raise ValueError("synthetic corpus counts must be positive")
        if not 0.0 < self.ft_share <= 1.0:
            raise ValueError("ft_share must be in (0, 1]")
        for rule, p in self.rule_probs.items():
            if rule not in RULES:
                raise ValueError(f"unknown rule {rule!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for rule {rule!r} outside [0, 1]")

    def prob(self, rule: str) -> float:
        return self.rule_probs.get(rule, 0.0)

    def manifest(self) -> str:
        lines = [f"seed={self.seed}", f"n_mt={self.n_mt}", f"n_ft={self.n_ft}", f"n_eval={self.n_eval}",
                 f"ft_share={self.ft_share}", f"register_cues={int(self.register_cues)}"]
        lines += [f"prob.{rule}={self.prob(rule)}" for rule in RULES]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "SynthSpec":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        probs = {k[5:]: float(v) for k, v in kv.items() if k.startswith("prob.")}
        return cls(int(kv["seed"]), int(kv["n_mt"]), int(kv["n_ft"]), int(kv.get("n_eval", 0)), probs,
                   float(kv.get("ft_share", 1.0)), bool(int(kv.get("register_cues", 0))))

    def source_for(self, sentence: "SynthSentence", truth: Style) -> Tuple[str, ...]:
        if self.register_cues and truth is Style.INFORMAL:
            return sentence.informal_source
        return sentence.source

    def ft_templates(self) -> List[str]:
        """Evenly spread subset of TEMPLATES used for formality-transfer pairs."""
        return [t for i, t in enumerate(TEMPLATES) if math.floor((i + 1) * self.ft_share) > math.floor(i * self.ft_share)]


@dataclass
class Underlying:
    """A filled template before any style is applied."""

    tokens: List[str]
    kind: str = "plain"  # plain | quote | yesno | wh
    speaker: Optional[str] = None
    drop: int = 0
    adverb: Optional[int] = None
    possessives: List[int] = field(default_factory=list)


@dataclass(frozen=True)
class SynthSentence:
    source: Tuple[str, ...]
    informal: Tuple[str, ...]
    formal: Tuple[str, ...]
    rules: Tuple[str, ...]
    # source of an informal original: carries the rules a translation can mirror
    informal_source: Tuple[str, ...] = ()


@dataclass(frozen=True)
class LabeledExample:
    source: Tuple[str, ...]
    target: Tuple[str, ...]
    style: Style
    informal: Tuple[str, ...]
    formal: Tuple[str, ...]
    rules: Tuple[str, ...]


def sample_underlying(rng: np.random.Generator, template: Optional[str] = None) -> Underlying:
    if template is None:
        template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
    kind = "plain"
    if "|" in template:
        prefix, template = template.split("|", 1)
        kind = {"Q": "quote", "Y": "yesno", "W": "wh"}[prefix]
    tokens: List[str] = []
    drop_start = drop = None
    adverb = None
    possessives = []
    for piece in template.split():
        if piece == "^":
            if drop_start is None:
                drop_start = len(tokens)
            else:
                drop = len(tokens) - drop_start
            continue
        if piece == "{POSS}":
            possessives.append(len(tokens))
            noun = POSS_NOUNS[int(rng.integers(len(POSS_NOUNS)))]
            name = NAMES[int(rng.integers(len(NAMES)))]
            tokens += ["the", noun, "of", name]
            continue
        if piece.startswith("{"):
            slot = piece[1:-1]
            if slot == "ADV":
                adverb = len(tokens)
            values = SLOTS[slot]
            tokens += values[int(rng.integers(len(values)))].split()
            continue
        tokens.append(piece)
    speaker = NAMES[int(rng.integers(len(NAMES)))] if kind == "quote" else None
    return Underlying(tokens, kind, speaker, drop or 0, adverb, possessives)


def _contract(tokens: List[str]) -> List[str]:
    out = []
    i = 0
    while i < len(tokens):
        for expansion, short, allowed, forbidden in CONTRACTIONS:
            n = len(expansion)
            if tuple(tokens[i : i + n]) != expansion:
                continue
            nxt = tokens[i + n] if i + n < len(tokens) else None
            if allowed is not None and nxt not in allowed:
                continue
            if forbidden is not None and (nxt is None or nxt in forbidden):
                continue
            out.append(short)
            i += n
            break
        else:
            out.append(tokens[i])
            i += 1
    return out


def _assemble(u: Underlying, tokens: List[str], quoted: bool, period: bool, filler=()) -> Tuple[str, ...]:
    if u.kind == "quote":
        body = ['"'] + tokens + [",", '"'] if quoted else tokens + [","]
        out = body + ["said", u.speaker]
    else:
        out = list(tokens)
    if u.kind not in ("yesno", "wh") and period:
        out.append(".")
    return tuple(filler) + tuple(out)


def realize(u: Underlying, rng: np.random.Generator, spec: SynthSpec) -> SynthSentence:
    """Formal and informal realizations of ``u``; rules fire independently."""
    formal = _assemble(u, u.tokens, quoted=True, period=True)

    def fires(rule):
        return rng.random() < spec.prob(rule)

    applied = []
    toks = list(u.tokens)
    adverb = u.adverb
    possessives = list(u.possessives)
    draws = {rule: fires(rule) for rule in RULES}
    filler = FILLERS[int(rng.integers(len(FILLERS)))]

    if u.drop and draws["drop"]:
        toks = toks[u.drop :]
        adverb = None if adverb is None else adverb - u.drop
        possessives = [p - u.drop for p in possessives]
        applied.append("drop")
    if possessives and draws["possessive"]:
        for start in sorted(possessives, reverse=True):
            noun, name = toks[start + 1], toks[start + 3]
            toks[start : start + 4] = [f"{name}'s", noun]
            if adverb is not None and adverb > start:
                adverb -= 2
        applied.append("possessive")
    if adverb is not None and draws["adverb"] and adverb != len(toks) - 1:
        # informal puts the adverb last: "i told you already"
        word = toks.pop(adverb)
        end = len(toks) - 1 if u.kind in ("yesno", "wh") else len(toks)
        toks.insert(end, word)
        applied.append("adverb")
    if draws["lexical"]:
        swapped = [LEXICAL_PAIRS.get(t, t) for t in toks]
        if swapped != toks:
            toks = swapped
            applied.append("lexical")
    if draws["contraction"]:
        shortened = _contract(toks)
        if shortened != toks:
            toks = shortened
            applied.append("contraction")
    if u.kind == "yesno" and draws["yesno"]:
        toks = toks[1:]
        applied.append("yesno")
    quoted = True
    if u.kind == "quote" and draws["quotation"]:
        quoted = False
        applied.append("quotation")
    period = True
    if u.kind not in ("yesno", "wh") and draws["punctuation"]:
        period = False
        applied.append("punctuation")
    prefix = ()
    if draws["filler"]:
        prefix = filler
        applied.append("filler")
    informal = _assemble(u, toks, quoted, period, prefix)
    return SynthSentence(source_of(u), informal, formal, tuple(applied), source_of(u, applied, prefix))


# rules whose effect is visible in an informal source sentence
SOURCE_VISIBLE_RULES = ("lexical", "yesno", "filler")


def source_of(u: Underlying, applied: Sequence[str] = (), filler: Sequence[str] = ()) -> Tuple[str, ...]:
    content = list(u.tokens)
    if "lexical" in applied:
        content = [LEXICAL_PAIRS.get(t, t) for t in content]
    if "yesno" in applied:
        content = content[1:]
    if u.kind == "quote":
        content += [",", "said", u.speaker]
    if "filler" in applied:
        content = list(filler) + content
    return render_source(content)


def generate_sentence(rng: np.random.Generator, spec: SynthSpec, templates: Optional[Sequence[str]] = None) -> SynthSentence:
    template = None if templates is None else templates[int(rng.integers(len(templates)))]
    return realize(sample_underlying(rng, template), rng, spec)


def generate_synthetic(spec: SynthSpec):
    """Returns ``(mt_set, ft_set, labeled_eval_set)``.

    MT pairs carry no style label (their hidden realization style is kept
    in ``truth``); FT items are ``FtPair`` rewrites with the rules applied.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    mt_set = []
    for _ in range(spec.n_mt):
        s = generate_sentence(rng, spec)
        truth = Style(int(rng.integers(2)))
        target = s.formal if truth is Style.FORMAL else s.informal
        mt_set.append(StyledExample(spec.source_for(s, truth), target, None, Task.MT, truth=truth))
    ft_set = []
    ft_templates = spec.ft_templates() if spec.ft_share < 1.0 else None
    for _ in range(spec.n_ft):
        s = generate_sentence(rng, spec, ft_templates)
        ft_set.append(FtPair(s.informal, s.formal, s.rules))
    eval_set = []
    for _ in range(spec.n_eval):
        s = generate_sentence(rng, spec)
        truth = Style(int(rng.integers(2)))
        target = s.formal if truth is Style.FORMAL else s.informal
        eval_set.append(LabeledExample(spec.source_for(s, truth), target, truth, s.informal, s.formal, s.rules))
    return mt_set, ft_set, eval_set


def distinct_ft_pairs(pairs: Iterable[FtPair]) -> List[FtPair]:
    """Drops pairs whose informal and formal sides coincide."""
    return [p for p in pairs if p.informal != p.formal]


def write_corpus(out_dir: str, spec: SynthSpec, mt_set, ft_set, eval_set, dev_mt=(), dev_ft=()):
    """Writes the generated corpus; returns the written file names."""
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "mt.tsv": lambda p: write_tsv(p, mt_set),
        "ft.tsv": lambda p: write_ft_pairs(p, ft_set),
        "eval.tsv": lambda p: write_tsv(p, [StyledExample(e.source, e.target, e.style, Task.MT) for e in eval_set]),
        "eval.src": lambda p: write_lines(p, [e.source for e in eval_set]),
        "mt.truth.tsv": lambda p: write_tsv(p, [dataclasses.replace(ex, style=ex.truth) for ex in mt_set]),
        "dev_mt.tsv": lambda p: write_tsv(p, dev_mt),
        "dev_ft.tsv": lambda p: write_ft_pairs(p, dev_ft),
        "spec.txt": lambda p: atomic_write_text(p, spec.manifest()),
    }
    for name, write in files.items():
        write(os.path.join(out_dir, name))
    return sorted(files)
