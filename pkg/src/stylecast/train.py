"""Multi-task training and the two synthetic-supervision fine-tuning schemes.

``train_joint`` optimizes translation and formality transfer together.
``finetune_osi`` relabels each translation batch with a style inferred from
the current model's cross-entropy difference; ``finetune_oti`` adds
translation targets rewritten by the model's own transfer path.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .checkpoint import atomic_write_text
from .corpus import StyledExample, Task
from .model import Seq2Seq
from .schemes import ControlScheme, Style

log = logging.getLogger(__name__)

LOG_HEADER = ["updates", "checkpoint", "lr", "train_loss", "dev_ppl", "label_I", "label_F", "label_U"]


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-3
    finetune_lr: float = 1e-4
    decay: float = 0.7
    patience: int = 4
    stop_patience: int = 10
    checkpoint_interval: int = 200
    alpha: float = 0.05
    mix_ratio: float = 1.0
    seed: int = 0
    max_epochs: int = 20
    max_updates: int = 0
    clip_norm: float = nn.CLIP_NORM
    probe_size: int = 64

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay factor must be in (0, 1)")
        if self.patience <= 0 or self.stop_patience <= 0:
            raise ValueError("patience values must be positive")
        if self.batch_size <= 0 or self.checkpoint_interval <= 0 or self.mix_ratio <= 0:
            raise ValueError("batch size, checkpoint interval and mix ratio must be positive")

    @classmethod
    def from_mapping(cls, values: Dict[str, str]) -> "TrainConfig":
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in values and values[f.name] is not None:
                kwargs[f.name] = type(f.default)(values[f.name])
        return cls(**kwargs)


@dataclass
class LogRow:
    updates: int
    checkpoint: int
    lr: float
    train_loss: float
    dev_ppl: float
    labels: Tuple[int, int, int] = (0, 0, 0)

    def tsv(self) -> str:
        return "\t".join(
            [str(self.updates), str(self.checkpoint), f"{self.lr:.8g}", f"{self.train_loss:.6f}",
             f"{self.dev_ppl:.6f}"] + [str(n) for n in self.labels]
        )


@dataclass
class TrainResult:
    model: Seq2Seq
    log: List[LogRow] = field(default_factory=list)
    best_checkpoint: int = 0
    snapshots: Dict[int, Dict[str, np.ndarray]] = field(default_factory=dict)
    notes: Dict[str, float] = field(default_factory=dict)

    def log_tsv(self) -> str:
        return "\t".join(LOG_HEADER) + "\n" + "".join(row.tsv() + "\n" for row in self.log)

    def write_log(self, path: str):
        atomic_write_text(path, self.log_tsv())


class LrSchedule:
    """Decays the rate after ``patience`` checkpoints without a dev improvement
    and signals a stop after ``stop_patience`` of them."""

    def __init__(self, lr: float, decay: float, patience: int, stop_patience: int):
        self.lr = lr
        self.decay = decay
        self.patience = patience
        self.stop_patience = stop_patience
        self.best = math.inf
        self.since_best = 0
        self.since_decay = 0

    def update(self, dev_ppl: float) -> bool:
        if dev_ppl < self.best:
            self.best = dev_ppl
            self.since_best = 0
            self.since_decay = 0
            return True
        self.since_best += 1
        self.since_decay += 1
        if self.since_decay >= self.patience:
            self.lr *= self.decay
            self.since_decay = 0
        return False

    @property
    def should_stop(self) -> bool:
        return self.since_best >= self.stop_patience


# ---------------------------------------------------------------- helpers


def _chunks(items, size):
    return [items[i : i + size] for i in range(0, len(items), size)]


def batch_schedule(n_mt: int, n_ft: int, config: TrainConfig, rng: np.random.Generator):
    """One epoch of (task, index list) batches, MT and FT interleaved by ``mix_ratio``.

    The larger side is visited once; the smaller side cycles with a fresh
    shuffle so the ratio holds across the whole epoch.
    """
    def shuffled_batches(n):
        return _chunks(list(rng.permutation(n)), config.batch_size) if n else []

    mt_batches = shuffled_batches(n_mt)
    ft_batches = shuffled_batches(n_ft)
    if not mt_batches:
        return [("ft", b) for b in ft_batches]
    if not ft_batches:
        return [("mt", b) for b in mt_batches]
    ratio = config.mix_ratio
    n_mt_total = max(len(mt_batches), int(math.ceil(len(ft_batches) * ratio)))
    n_ft_total = max(len(ft_batches), int(math.ceil(len(mt_batches) / ratio)))
    mt_iter = _cycle(mt_batches, n_mt, config.batch_size, rng)
    ft_iter = _cycle(ft_batches, n_ft, config.batch_size, rng)
    out = []
    credit = 0.0
    used_mt = used_ft = 0
    while used_mt < n_mt_total or used_ft < n_ft_total:
        if used_mt < n_mt_total and (credit < ratio or used_ft >= n_ft_total):
            out.append(("mt", next(mt_iter)))
            used_mt += 1
            credit += 1.0
        else:
            out.append(("ft", next(ft_iter)))
            used_ft += 1
            credit -= ratio
    return out


def _cycle(first, n, size, rng):
    yield from first
    while True:
        yield from _chunks(list(rng.permutation(n)), size)


def corpus_perplexity(model: Seq2Seq, examples: Sequence[StyledExample], batch_size: int = 64) -> float:
    total = ntok = 0.0
    for chunk in _chunks(list(examples), batch_size):
        batch = model.batch(chunk)
        losses, _ = model.forward(batch, None)
        total += float(losses.sum())
        ntok += float(batch.tgt_mask.sum())
    return math.exp(total / ntok)


def mean_token_loss(model: Seq2Seq, examples: Sequence[StyledExample], batch_size: int = 64) -> float:
    return math.log(corpus_perplexity(model, examples, batch_size))


# ---------------------------------------------------------------- OSI labeling


@dataclass
class CedRecord:
    token_ced: np.ndarray
    sentence_ced: float
    label: Style


def label_from_ced(token_ceds: Sequence[np.ndarray]) -> Tuple[float, List[CedRecord]]:
    """Three-way labels from token-level CEDs with a shared threshold.

    The threshold is the mean absolute token CED over every token in the
    batch; a sentence is Formal if its mean CED exceeds it, Informal if
    below its negation, Unknown otherwise.
    """
    arrays = [np.asarray(c, dtype=np.float64) for c in token_ceds]
    flat = np.concatenate(arrays) if arrays else np.zeros(0)
    tau = float(np.abs(flat).mean()) if flat.size else 0.0
    records = []
    for ced in arrays:
        s = float(ced.mean())
        if s > tau:
            label = Style.FORMAL
        elif s < -tau:
            label = Style.INFORMAL
        else:
            label = Style.UNKNOWN
        records.append(CedRecord(ced, s, label))
    return tau, records


def osi_label_batch(model: Seq2Seq, examples: Sequence[StyledExample]) -> Tuple[float, List[CedRecord]]:
    """Labels translation pairs by comparing informal- and formal-conditioned scores."""
    if not examples:
        raise ValueError("cannot label an empty batch")
    informal = model.teacher_forced_nll(model.batch([dataclasses.replace(ex, style=Style.INFORMAL) for ex in examples]))
    formal = model.teacher_forced_nll(model.batch([dataclasses.replace(ex, style=Style.FORMAL) for ex in examples]))
    return label_from_ced([hi - hf for hi, hf in zip(informal, formal)])


def label_counts(labels: Sequence[Style]) -> Tuple[int, int, int]:
    return (
        sum(1 for s in labels if s is Style.INFORMAL),
        sum(1 for s in labels if s is Style.FORMAL),
        sum(1 for s in labels if s is Style.UNKNOWN),
    )


# ---------------------------------------------------------------- OTI targets


def oti_make_target(model: Seq2Seq, targets: Sequence[Sequence[str]], styles: Sequence[Style],
                    max_len: Optional[int] = None) -> List[Tuple[str, ...]]:
    """Greedy formality transfer of each target sentence to the requested style."""
    if not targets:
        return []
    exs = [StyledExample(tuple(t), ("<unk>",), s, Task.FT) for t, s in zip(targets, styles)]
    results = model.decode_greedy(model.batch(exs), max_len)
    return [tuple(r.tokens) for r in results]


def draw_styles(rng: np.random.Generator, n: int) -> List[Style]:
    return [Style(int(v)) for v in rng.integers(0, 2, size=n)]


# ---------------------------------------------------------------- training loop

MtStep = Callable[[Seq2Seq, List[StyledExample], np.random.Generator], Tuple[float, Tuple[int, int, int]]]


def _run(model: Seq2Seq, mt_set, ft_set, config: TrainConfig, lr: float, mt_step: MtStep,
         mt_eval: Callable[[Seq2Seq, List[StyledExample]], List[StyledExample]],
         dev_set: Optional[Sequence[StyledExample]] = None, keep_snapshots: bool = False,
         log_path: Optional[str] = None) -> TrainResult:
    mt_set = list(mt_set)
    ft_set = list(ft_set)
    if not mt_set and not ft_set:
        raise ValueError("no training data")
    rng = nn.make_rng(config.seed)
    dev_set = list(dev_set) if dev_set else mt_set[: config.probe_size] + ft_set[: config.probe_size]
    dev_mt = [ex for ex in dev_set if ex.task is Task.MT]
    dev_ft = [ex for ex in dev_set if ex.task is Task.FT]
    probe_mt = mt_set[: config.probe_size]
    probe_ft = ft_set[: config.probe_size]

    def evaluate(examples_mt, examples_ft):
        return mean_token_loss(model, mt_eval(model, examples_mt) + examples_ft)

    schedule = LrSchedule(lr, config.decay, config.patience, config.stop_patience)
    result = TrainResult(model)
    best = model.params.snapshot()
    updates = 0
    checkpoint = 0
    labels = np.zeros(3, dtype=np.int64)
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(LOG_HEADER) + "\n")

    def do_checkpoint():
        nonlocal best, checkpoint, labels
        checkpoint += 1
        dev_ppl = math.exp(evaluate(dev_mt, dev_ft))
        train_loss = evaluate(probe_mt, probe_ft)
        row = LogRow(updates, checkpoint, schedule.lr, train_loss, dev_ppl, tuple(int(n) for n in labels))
        result.log.append(row)
        if log_path:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(row.tsv() + "\n")
        labels = np.zeros(3, dtype=np.int64)
        if keep_snapshots:
            result.snapshots[checkpoint] = model.params.snapshot()
        if schedule.update(dev_ppl):
            best = model.params.snapshot()
            result.best_checkpoint = checkpoint
        log.info("checkpoint %d: updates=%d lr=%.2e train=%.4f dev_ppl=%.4f", checkpoint, updates,
                 row.lr, train_loss, dev_ppl)

    stop = False
    for _epoch in range(config.max_epochs):
        for task, idx in batch_schedule(len(mt_set), len(ft_set), config, rng):
            model.params.zero_grad()
            if task == "mt":
                _, counts = mt_step(model, [mt_set[i] for i in idx], rng)
                labels += counts
            else:
                model.batch_loss(model.batch([ft_set[i] for i in idx]), rng)
            model.params.clip_grads(config.clip_norm)
            model.params.adam_step(schedule.lr)
            updates += 1
            if updates % config.checkpoint_interval == 0:
                do_checkpoint()
                if schedule.should_stop:
                    stop = True
                    break
            if config.max_updates and updates >= config.max_updates:
                stop = True
                break
        if stop:
            break
    if updates % config.checkpoint_interval != 0:
        do_checkpoint()
    model.params.load(best)
    result.notes["updates"] = updates
    return result


def train_joint(model: Seq2Seq, mt_set, ft_set, config: TrainConfig, dev_set=None,
                lr: Optional[float] = None, keep_snapshots: bool = False,
                log_path: Optional[str] = None) -> TrainResult:
    """Joint translation + formality-transfer training.

    Translation pairs without a style label train untagged.
    """
    def mt_step(m, batch_examples, rng):
        return m.batch_loss(m.batch(batch_examples), rng), (0, 0, 0)

    return _run(model, mt_set, ft_set, config, config.lr if lr is None else lr, mt_step,
                lambda m, exs: exs, dev_set, keep_snapshots, log_path)


def _require_style_input(model: Seq2Seq):
    if model.scheme is ControlScheme.NONE:
        raise ValueError("fine-tuning with synthetic supervision needs a scheme with style input")


def osi_relabel(model: Seq2Seq, examples: Sequence[StyledExample], batch_size: int = 32) -> List[StyledExample]:
    out = []
    for chunk in _chunks(list(examples), batch_size):
        _, records = osi_label_batch(model, chunk)
        out += [dataclasses.replace(ex, style=r.label) for ex, r in zip(chunk, records)]
    return out


def finetune_osi(model: Seq2Seq, mt_set, ft_set, config: TrainConfig, dev_set=None,
                 keep_snapshots: bool = False, log_path: Optional[str] = None) -> TrainResult:
    """Optimizes L_FT + L_OSI: every MT batch is labeled by the current model first."""
    _require_style_input(model)
    model.params.reset_optimizer()

    def mt_step(m, batch_examples, rng):
        _, records = osi_label_batch(m, batch_examples)
        labeled = [dataclasses.replace(ex, style=r.label) for ex, r in zip(batch_examples, records)]
        loss = m.batch_loss(m.batch(labeled), rng)
        return loss, label_counts([r.label for r in records])

    return _run(model, list(mt_set), ft_set, config, config.finetune_lr, mt_step,
                lambda m, exs: osi_relabel(m, exs, config.batch_size) if exs else [], dev_set, keep_snapshots, log_path)


def finetune_oti(model: Seq2Seq, mt_set, ft_set, config: TrainConfig, dev_set=None,
                 keep_snapshots: bool = False, log_path: Optional[str] = None) -> TrainResult:
    """Optimizes L_MT + L_FT + alpha * L_OTI with targets rewritten on the fly."""
    _require_style_input(model)
    model.params.reset_optimizer()
    stats = {"synthetic": 0, "identical": 0, "skipped": 0}

    def mt_step(m, batch_examples, rng):
        loss = m.batch_loss(m.batch(batch_examples), rng)
        if config.alpha == 0.0:
            return loss, (0, 0, 0)
        styles = draw_styles(rng, len(batch_examples))
        targets = oti_make_target(m, [ex.target for ex in batch_examples], styles)
        synthetic = []
        for ex, style, y2 in zip(batch_examples, styles, targets):
            if not y2:
                stats["skipped"] += 1
                continue
            stats["synthetic"] += 1
            stats["identical"] += int(y2 == tuple(ex.target))
            synthetic.append(StyledExample(ex.source, y2, style, Task.MT))
        if synthetic:
            loss += config.alpha * m.batch_loss(m.batch(synthetic), rng, weight=config.alpha)
        return loss, label_counts(styles)

    result = _run(model, mt_set, ft_set, config, config.finetune_lr, mt_step,
                  lambda m, exs: exs, dev_set, keep_snapshots, log_path)
    result.notes.update(stats)
    if stats["synthetic"]:
        result.notes["identical_fraction"] = stats["identical"] / stats["synthetic"]
    return result


def oti_composite_loss(model: Seq2Seq, mt_examples, ft_examples, synthetic_examples, alpha: float) -> float:
    """L_MT + L_FT + alpha * L_OTI on fixed batches (no dropout); gradients accumulate."""
    loss = model.batch_loss(model.batch(mt_examples))
    loss += model.batch_loss(model.batch(ft_examples))
    loss += alpha * model.batch_loss(model.batch(synthetic_examples), weight=alpha)
    return loss
