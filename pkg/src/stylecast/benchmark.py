"""Four-direction formality transfer / preservation benchmark across control schemes."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .checkpoint import atomic_write_text
from .corpus import (FtPair, SynthSpec, build_bidirectional_ft, build_vocab, detokenize, distinct_ft_pairs,
                     read_ft_pairs, realize, sample_underlying, tokenize, write_ft_pairs)
from .metrics import bleu
from .model import ModelConfig, Seq2Seq
from .schemes import ControlScheme, Style
from .train import TrainConfig, train_joint

DIRECTIONS = ("I->F", "F->I", "I->I", "F->F")


@dataclass
class FourWayItem:
    """One held-out sentence: the formal rewrite and several informal ones."""

    formal: Tuple[str, ...]
    informals: List[Tuple[str, ...]]


@dataclass
class FourWayData:
    train: List[FtPair]
    dev: List[FtPair]
    test: List[FourWayItem]


def generate_four_way(spec: SynthSpec, n_train: int = 2000, n_dev: int = 200, n_test: int = 300,
                      n_refs: int = 4) -> FourWayData:
    """Distinct FT pairs for training/dev and a multi-reference test split."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    templates = spec.ft_templates() if spec.ft_share < 1.0 else None

    def pairs(n):
        out = []
        while len(out) < n:
            u = sample_underlying(rng, _pick(rng, templates))
            s = realize(u, rng, spec)
            if s.informal != s.formal:
                out.append(FtPair(s.informal, s.formal, s.rules))
        return out

    train, dev = pairs(n_train), pairs(n_dev)
    test = []
    while len(test) < n_test:
        u = sample_underlying(rng, _pick(rng, templates))
        variants = [realize(u, rng, spec) for _ in range(n_refs)]
        formal = variants[0].formal
        informals = [v.informal for v in variants if v.informal != formal]
        if informals:
            test.append(FourWayItem(formal, informals))
    return FourWayData(train, dev, test)


def write_four_way(out_dir: str, data: FourWayData) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    write_ft_pairs(os.path.join(out_dir, "train.tsv"), data.train)
    write_ft_pairs(os.path.join(out_dir, "dev.tsv"), data.dev)
    lines = ["\t".join([detokenize(item.formal)] + [detokenize(s) for s in item.informals]) + "\n"
             for item in data.test]
    atomic_write_text(os.path.join(out_dir, "test.tsv"), "".join(lines))
    return ["dev.tsv", "test.tsv", "train.tsv"]


def read_four_way(data_dir: str) -> FourWayData:
    """Reads ``train.tsv``/``dev.tsv`` (informal TAB formal) and ``test.tsv``
    (formal TAB informal references...)."""
    test = []
    with open(os.path.join(data_dir, "test.tsv"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = [tuple(tokenize(f)) for f in line.rstrip("\n").split("\t")]
            if len(fields) < 2 or not all(fields):
                raise ValueError(f"test.tsv:{lineno}: expected formal TAB informal [TAB informal...]")
            test.append(FourWayItem(fields[0], fields[1:]))
    return FourWayData(
        read_ft_pairs(os.path.join(data_dir, "train.tsv")),
        read_ft_pairs(os.path.join(data_dir, "dev.tsv")),
        test,
    )


def _pick(rng, templates):
    return None if templates is None else templates[int(rng.integers(len(templates)))]


def evaluate_four_way(model: Seq2Seq, test: Sequence[FourWayItem]) -> Dict[str, float]:
    """BLEU per direction; preservation outputs are compared with their input."""
    informal_in = [item.informals[0] for item in test]
    formal_in = [item.formal for item in test]

    def run(sources, style):
        return [r.tokens for r in model.translate(sources, style)]

    return {
        "I->F": bleu(run(informal_in, Style.FORMAL), [[item.formal] for item in test]).score,
        "F->I": bleu(run(formal_in, Style.INFORMAL), [item.informals for item in test]).score,
        "I->I": bleu(run(informal_in, Style.INFORMAL), [[s] for s in informal_in]).score,
        "F->F": bleu(run(formal_in, Style.FORMAL), [[s] for s in formal_in]).score,
    }


@dataclass
class BenchmarkReport:
    schemes: List[str]
    seeds: List[int]
    scores: Dict[str, List[Dict[str, float]]] = field(default_factory=dict)

    def mean(self, scheme: str, direction: str) -> float:
        vals = [run[direction] for run in self.scores[scheme]]
        return sum(vals) / len(vals)

    def std(self, scheme: str, direction: str) -> float:
        vals = [run[direction] for run in self.scores[scheme]]
        m = sum(vals) / len(vals)
        return math.sqrt(sum((v - m) ** 2 for v in vals) / len(vals))

    def table(self) -> str:
        width = max(len(s) for s in self.schemes + ["scheme"])
        head = "scheme".ljust(width) + "".join(f"  {d:>15}" for d in DIRECTIONS)
        lines = [head]
        for scheme in self.schemes:
            cells = "".join(f"  {self.mean(scheme, d):7.2f} ± {self.std(scheme, d):5.2f}" for d in DIRECTIONS)
            lines.append(scheme.ljust(width) + cells)
        return "\n".join(lines) + "\n"

    def tsv(self) -> str:
        lines = ["scheme\tseed\t" + "\t".join(DIRECTIONS)]
        for scheme in self.schemes:
            for seed, run in zip(self.seeds, self.scores[scheme]):
                lines.append(f"{scheme}\t{seed}\t" + "\t".join(f"{run[d]:.4f}" for d in DIRECTIONS))
        return "\n".join(lines) + "\n"


def train_scheme(data: FourWayData, scheme: ControlScheme, seed: int, train_config: TrainConfig,
                 model_kwargs=None) -> Seq2Seq:
    vocab = build_vocab([p.informal for p in data.train] + [p.formal for p in data.train])
    config = ModelConfig(len(vocab), scheme=scheme, **(model_kwargs or {}))
    model = Seq2Seq(config, vocab, seed=seed)
    train_joint(model, [], build_bidirectional_ft(distinct_ft_pairs(data.train)),
                dataclasses.replace(train_config, seed=seed),
                dev_set=build_bidirectional_ft(distinct_ft_pairs(data.dev)))
    return model


def run_benchmark(data: FourWayData, schemes: Sequence[ControlScheme], seeds: Sequence[int],
                  train_config: TrainConfig, model_kwargs=None) -> BenchmarkReport:
    """Trains every scheme on the same data and order for each seed."""
    report = BenchmarkReport([s.value for s in schemes], list(seeds))
    for scheme in schemes:
        report.scores[scheme.value] = [
            evaluate_four_way(train_scheme(data, scheme, seed, train_config, model_kwargs), data.test)
            for seed in seeds
        ]
    return report
