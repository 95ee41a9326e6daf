"""Command-line pipeline: data generation, training, fine-tuning, labeling,
translation, scoring, analysis and the control-scheme benchmark.

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

from . import __version__
from .analysis import analyze
from .benchmark import generate_four_way, read_four_way, run_benchmark, write_four_way
from .checkpoint import CheckpointError, atomic_write_text
from .corpus import (DEFAULT_RULE_PROBS, RULES, StyledExample, SynthSpec, Task, build_bidirectional_ft,
                     build_vocab, detokenize, distinct_ft_pairs, generate_synthetic, read_ft_pairs, read_lines,
                     read_tsv, write_corpus, write_lines, write_tsv)
from .metrics import bleu, lepod
from .model import ModelConfig, Seq2Seq
from .schemes import ControlScheme, Style
from .stylelm import StyleLm, ds_offline_label
from .train import TrainConfig, finetune_osi, finetune_oti, label_counts, osi_label_batch, train_joint

log = logging.getLogger("stylecast")

MANIFEST = "manifest.json"
TRANSLATE_STYLES = ("formal", "informal")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- manifests


def _digest(path: str) -> Optional[str]:
    if not os.path.isfile(path):
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    config: Dict[str, object]
    seed: Optional[int]
    inputs: Dict[str, str]
    outputs: List[str]
    lineage: List[Dict[str, str]]
    duration_sec: float = 0.0
    version: str = __version__

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["input_sha256"] = {k: _digest(v) for k, v in self.inputs.items()}
        return json.dumps(d, indent=2, sort_keys=True, default=str) + "\n"


def _lineage_of(checkpoint: str) -> List[Dict[str, str]]:
    """Ancestry of a checkpoint, read from the manifest next to it."""
    path = os.path.join(os.path.dirname(os.path.abspath(checkpoint)), MANIFEST)
    parent: Dict[str, object] = {}
    if os.path.isfile(path):
        with open(path, encoding="utf-8") as fh:
            parent = json.load(fh)
    chain: List[Dict[str, str]] = list(parent.get("lineage", []))
    sub = str(parent.get("subcommand", "unknown"))
    chain.append({"subcommand": sub, "checkpoint": os.path.abspath(checkpoint), "sha256": _digest(checkpoint) or ""})
    return chain


# ---------------------------------------------------------------- config handling


def read_config_file(path: str) -> Dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(subparser: argparse.ArgumentParser, values: Dict[str, str]):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        value = action.type(raw) if action.type else raw
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r}: invalid choice {raw!r}")
        defaults[key] = value
    subparser.set_defaults(**defaults)


def _threads() -> int:
    raw = os.environ.get("STYLECAST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"STYLECAST_THREADS must be an integer, got {raw!r}")


def _parallel_map(fn, items: Sequence, chunk: int = 256) -> list:
    """Order-preserving map over chunks, using up to STYLECAST_THREADS workers."""
    chunks = [items[i : i + chunk] for i in range(0, len(items), chunk)]
    workers = _threads()
    if workers == 1 or len(chunks) <= 1:
        results = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, chunks))
    return [x for part in results for x in part]


# ---------------------------------------------------------------- parser


def _scheme(text: str) -> ControlScheme:
    try:
        return ControlScheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_common(p: argparse.ArgumentParser, out_required: bool = True):
    p.add_argument("--config", metavar="PATH", help="key=value file; explicit flags take precedence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR", required=out_required, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_train_flags(p: argparse.ArgumentParser):
    defaults = TrainConfig()
    for f in dataclasses.fields(TrainConfig):
        if f.name == "seed":
            continue
        p.add_argument("--" + f.name.replace("_", "-"), type=type(getattr(defaults, f.name)),
                       default=getattr(defaults, f.name))


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--scheme", type=_scheme, default=ControlScheme.TAG_SRC_TGT,
                   help="one of: " + ", ".join(s.value for s in ControlScheme))
    p.add_argument("--embed-size", type=int, default=64)
    p.add_argument("--hidden-size", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--max-decode-len", type=int, default=40)
    p.add_argument("--min-count", type=int, default=1)


def build_parser():
    parser = _Parser(prog="stylecast", description="Formality-sensitive translation toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = subs["gen-data"] = sub.add_parser("gen-data", help="generate the synthetic corpus")
    _add_common(p)
    p.add_argument("--n-mt", type=int, default=2000)
    p.add_argument("--n-ft", type=int, default=1000)
    p.add_argument("--n-eval", type=int, default=500)
    p.add_argument("--n-dev", type=int, default=200)
    p.add_argument("--ft-share", type=float, default=1.0)
    p.add_argument("--register-cues", action="store_true")
    p.add_argument("--rule-prob", action="append", default=[], metavar="RULE=P")
    p.add_argument("--fourway-train", type=int, default=2000)
    p.add_argument("--fourway-dev", type=int, default=200)
    p.add_argument("--fourway-test", type=int, default=300)

    p = subs["train"] = sub.add_parser("train", help="joint MT + FT training")
    _add_common(p)
    p.add_argument("--data", metavar="DIR", required=True)
    p.add_argument("--mt", metavar="TSV", help="translation pairs (default DATA/mt.tsv)")
    p.add_argument("--ft", metavar="TSV", help="formality pairs (default DATA/ft.tsv)")
    p.add_argument("--no-ft", action="store_true", help="train on translation pairs only")
    _add_model_flags(p)
    _add_train_flags(p)

    p = subs["finetune"] = sub.add_parser("finetune", help="OSI or OTI fine-tuning")
    p.add_argument("method", choices=("osi", "oti"))
    _add_common(p)
    p.add_argument("--model", metavar="CKPT", required=True)
    p.add_argument("--data", metavar="DIR", required=True)
    _add_train_flags(p)

    p = subs["label"] = sub.add_parser("label", help="style-label translation pairs")
    p.add_argument("method", choices=("online", "offline"))
    _add_common(p)
    p.add_argument("--data", metavar="DIR", help="corpus directory (ft.tsv for offline LMs, default input)")
    p.add_argument("--input", metavar="TSV", help="pairs to label (default DATA/mt.tsv)")
    p.add_argument("--ft", metavar="TSV", help="formality pairs for the offline LMs (default DATA/ft.tsv)")
    p.add_argument("--model", metavar="CKPT", help="checkpoint for online labeling")
    p.add_argument("--truth", metavar="TSV", help="pairs with gold tags, for reporting accuracy")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--add-k", type=float, default=0.1)

    p = subs["translate"] = sub.add_parser("translate", help="greedy translation at a requested style")
    _add_common(p)
    p.add_argument("--model", metavar="CKPT", required=True)
    p.add_argument("--input", metavar="FILE", required=True)
    p.add_argument("--style", choices=TRANSLATE_STYLES)
    p.add_argument("--max-len", type=int)
    p.add_argument("--batch-size", type=int, default=64)

    p = subs["score"] = sub.add_parser("score", help="LePoD between two outputs, or BLEU")
    p.add_argument("metric", choices=("lepod", "bleu"))
    _add_common(p)
    p.add_argument("files", nargs="*", metavar="FILE", help="lepod: two line-aligned files")
    p.add_argument("--hyp", metavar="FILE")
    p.add_argument("--ref", metavar="FILE", action="append", default=[])
    p.add_argument("--smooth", action="store_true")

    p = subs["analyze"] = sub.add_parser("analyze", help="heuristic informal/formal difference report")
    _add_common(p)
    p.add_argument("--informal", metavar="FILE", required=True)
    p.add_argument("--formal", metavar="FILE", required=True)

    p = subs["benchmark-control"] = sub.add_parser("benchmark-control", help="four-way control-scheme benchmark")
    _add_common(p)
    p.add_argument("--data", metavar="DIR", help="four-way splits (train/dev/test.tsv); generated if absent")
    p.add_argument("--schemes", default="none,tag-src,tag-src-block,tag-src-tgt")
    p.add_argument("--seeds", type=int, default=3, help="number of seeds, starting at --seed")
    p.add_argument("--embed-size", type=int, default=64)
    p.add_argument("--hidden-size", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.2)
    _add_train_flags(p)
    return parser, subs


def parse_args(argv: Sequence[str]):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage().strip() + "\nstylecast: error: a subcommand is required")
    if args.config:
        if not os.path.isfile(args.config):
            raise UsageError(f"config file not found: {args.config}")
        _apply_config(subs[args.command], read_config_file(args.config))
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------- helpers


def _train_config(args) -> TrainConfig:
    values = {f.name: getattr(args, f.name) for f in dataclasses.fields(TrainConfig) if hasattr(args, f.name)}
    values["seed"] = args.seed
    return TrainConfig(**values)


def _config_snapshot(args) -> Dict[str, object]:
    snap = {}
    for key, value in sorted(vars(args).items()):
        if key in ("verbose",):
            continue
        snap[key] = value.value if isinstance(value, ControlScheme) else value
    return snap


def _finish(args, out: str, outputs: List[str], inputs: Dict[str, str], start: float,
            lineage: Optional[List[Dict[str, str]]] = None):
    manifest = RunManifest(
        subcommand=args.command + (f" {getattr(args, 'method', '')}" if hasattr(args, "method") else "")
        + (f" {args.metric}" if hasattr(args, "metric") else ""),
        config=_config_snapshot(args),
        seed=args.seed,
        inputs=inputs,
        outputs=sorted(outputs),
        lineage=lineage or [],
        duration_sec=round(time.time() - start, 3),
    )
    atomic_write_text(os.path.join(out, MANIFEST), manifest.to_json())


def _dev_set(data: str) -> List[StyledExample]:
    dev: List[StyledExample] = []
    mt_path, ft_path = os.path.join(data, "dev_mt.tsv"), os.path.join(data, "dev_ft.tsv")
    if os.path.isfile(mt_path):
        dev += read_tsv(mt_path)
    if os.path.isfile(ft_path):
        dev += build_bidirectional_ft(distinct_ft_pairs(read_ft_pairs(ft_path)))
    return dev


# ---------------------------------------------------------------- commands


def cmd_gen_data(args) -> int:
    start = time.time()
    probs = dict(DEFAULT_RULE_PROBS)
    for item in args.rule_prob:
        rule, _, value = item.partition("=")
        if rule not in RULES or not value:
            raise UsageError(f"--rule-prob expects RULE=P with RULE in {', '.join(RULES)}")
        probs[rule] = float(value)
    spec = SynthSpec(args.seed, args.n_mt, args.n_ft, args.n_eval, probs, args.ft_share, args.register_cues)
    mt_set, ft_set, eval_set = generate_synthetic(spec)
    dev_spec = dataclasses.replace(spec, seed=spec.seed + 1_000_003, n_mt=max(args.n_dev, 1),
                                   n_ft=max(args.n_dev, 1), n_eval=0)
    dev_mt, dev_ft, _ = generate_synthetic(dev_spec)
    dev_mt = [dataclasses.replace(ex, truth=None) for ex in dev_mt]
    outputs = write_corpus(args.out, spec, mt_set, ft_set, eval_set, dev_mt, distinct_ft_pairs(dev_ft))
    four = generate_four_way(dataclasses.replace(spec, seed=spec.seed + 2_000_003),
                             args.fourway_train, args.fourway_dev, args.fourway_test)
    outputs += [f"fourway/{name}" for name in write_four_way(os.path.join(args.out, "fourway"), four)]
    _finish(args, args.out, outputs, {}, start)
    print(f"wrote {len(mt_set)} MT pairs, {len(ft_set)} FT pairs, {len(eval_set)} eval pairs to {args.out}")
    return 0


def cmd_train(args) -> int:
    start = time.time()
    mt_path = args.mt or os.path.join(args.data, "mt.tsv")
    ft_path = args.ft or os.path.join(args.data, "ft.tsv")
    mt_set = read_tsv(mt_path)
    ft_pairs = [] if args.no_ft else distinct_ft_pairs(read_ft_pairs(ft_path))
    ft_set = build_bidirectional_ft(ft_pairs)
    vocab = build_vocab([ex.source for ex in mt_set] + [ex.target for ex in mt_set]
                        + [p.informal for p in ft_pairs] + [p.formal for p in ft_pairs], args.min_count)
    config = ModelConfig(len(vocab), embed_size=args.embed_size, hidden_size=args.hidden_size,
                         dropout=args.dropout, scheme=args.scheme, max_decode_len=args.max_decode_len)
    model = Seq2Seq(config, vocab, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    dev = _dev_set(args.data)
    if args.no_ft:
        dev = [ex for ex in dev if ex.task is Task.MT]
    result = train_joint(model, mt_set, ft_set, _train_config(args), dev_set=dev or None,
                         log_path=os.path.join(args.out, "train_log.tsv"))
    model.save(os.path.join(args.out, "model.ckpt"))
    inputs = {"mt": mt_path} if args.no_ft else {"mt": mt_path, "ft": ft_path}
    _finish(args, args.out, ["model.ckpt", "train_log.tsv"], inputs, start)
    print(f"best checkpoint {result.best_checkpoint}; model written to {args.out}/model.ckpt")
    return 0


def cmd_finetune(args) -> int:
    start = time.time()
    model = Seq2Seq.load(args.model)
    if not model.scheme.uses_style:
        raise ValueError(f"checkpoint {args.model} uses scheme 'none', which has no style input to fine-tune")
    mt_set = read_tsv(os.path.join(args.data, "mt.tsv"))
    ft_set = build_bidirectional_ft(distinct_ft_pairs(read_ft_pairs(os.path.join(args.data, "ft.tsv"))))
    os.makedirs(args.out, exist_ok=True)
    run = finetune_osi if args.method == "osi" else finetune_oti
    result = run(model, mt_set, ft_set, _train_config(args), dev_set=_dev_set(args.data) or None,
                 log_path=os.path.join(args.out, "train_log.tsv"))
    model.save(os.path.join(args.out, "model.ckpt"))
    outputs = ["model.ckpt", "train_log.tsv"]
    if args.method == "oti":
        stats = "".join(f"{k}\t{v}\n" for k, v in sorted(result.notes.items()))
        atomic_write_text(os.path.join(args.out, "oti_stats.tsv"), "key\tvalue\n" + stats)
        outputs.append("oti_stats.tsv")
    _finish(args, args.out, outputs, {"model": args.model, "data": args.data}, start, _lineage_of(args.model))
    print(f"fine-tuned ({args.method}) model written to {args.out}/model.ckpt")
    return 0


def cmd_label(args) -> int:
    start = time.time()
    if args.input is None and args.data is None:
        raise UsageError("label needs --input or --data")
    in_path = args.input or os.path.join(args.data, "mt.tsv")
    examples = [dataclasses.replace(ex, style=None) for ex in read_tsv(in_path)]
    if not examples:
        raise ValueError(f"{in_path} contains no pairs")
    inputs = {"input": in_path}
    lineage = None
    ced_rows = []
    if args.method == "online":
        if args.model is None:
            raise UsageError("label online needs --model")
        model = Seq2Seq.load(args.model)
        if not model.scheme.uses_style:
            raise ValueError("online labeling needs a model with style input")
        inputs["model"] = args.model
        lineage = _lineage_of(args.model)
        labels = []
        for b, begin in enumerate(range(0, len(examples), args.batch_size)):
            chunk = examples[begin : begin + args.batch_size]
            tau, records = osi_label_batch(model, chunk)
            labels += [r.label for r in records]
            ced_rows += [(r.sentence_ced, r.label, tau, b) for r in records]
    else:
        if args.ft is None and args.data is None:
            raise UsageError("label offline needs --ft or --data")
        ft_path = args.ft or os.path.join(args.data, "ft.tsv")
        inputs["ft"] = ft_path
        lm = StyleLm.train(read_ft_pairs(ft_path), k=args.add_k)
        token_ceds = _parallel_map(lambda part: [lm.token_ced(ex.target) for ex in part], examples)
        from .train import label_from_ced

        tau, records = label_from_ced(token_ceds)
        labels = [r.label for r in records]
        ced_rows = [(r.sentence_ced, r.label, tau, 0) for r in records]
    os.makedirs(args.out, exist_ok=True)
    write_tsv(os.path.join(args.out, "labels.tsv"),
              [dataclasses.replace(ex, style=lab) for ex, lab in zip(examples, labels)])
    rows = ["line\tced\tlabel\ttau\tbatch"] + [
        f"{i}\t{c:.6f}\t{lab.tag}\t{tau:.6f}\t{b}" for i, (c, lab, tau, b) in enumerate(ced_rows, 1)]
    atomic_write_text(os.path.join(args.out, "ced.tsv"), "\n".join(rows) + "\n")
    n_i, n_f, n_u = label_counts(labels)
    summary = [f"pairs\t{len(labels)}", f"informal\t{n_i}", f"formal\t{n_f}", f"unknown\t{n_u}"]
    if args.truth:
        truth = read_tsv(args.truth)
        if len(truth) != len(labels):
            raise ValueError("--truth must have one line per input pair")
        inputs["truth"] = args.truth
        known = [(lab, t.style) for lab, t in zip(labels, truth) if lab is not Style.UNKNOWN]
        acc = sum(a == b for a, b in known) / len(known) if known else float("nan")
        summary.append(f"accuracy_non_unknown\t{acc:.4f}")
    atomic_write_text(os.path.join(args.out, "summary.tsv"), "\n".join(summary) + "\n")
    _finish(args, args.out, ["ced.tsv", "labels.tsv", "summary.tsv"], inputs, start, lineage)
    print("\n".join(summary))
    return 0


def cmd_translate(args) -> int:
    start = time.time()
    if args.style is None:
        raise UsageError("translate needs --style; valid styles: " + ", ".join(TRANSLATE_STYLES))
    model = Seq2Seq.load(args.model)
    sources = read_lines(args.input)
    if any(not s for s in sources):
        raise ValueError(f"{args.input} contains empty lines")
    style = Style.parse(args.style) if model.scheme.uses_style else None
    results = model.translate(sources, style, args.max_len, args.batch_size)
    os.makedirs(args.out, exist_ok=True)
    name = f"{args.style}.txt"
    write_lines(os.path.join(args.out, name), [r.tokens for r in results])
    outputs = [name] + [f"{s}.txt" for s in TRANSLATE_STYLES
                        if s != args.style and os.path.isfile(os.path.join(args.out, f"{s}.txt"))]
    _finish(args, args.out, outputs, {"model": args.model, "input": args.input}, start, _lineage_of(args.model))
    print(f"translated {len(results)} lines to {os.path.join(args.out, name)}")
    return 0


def cmd_score(args) -> int:
    start = time.time()
    os.makedirs(args.out, exist_ok=True)
    if args.metric == "lepod":
        if len(args.files) != 2:
            raise UsageError("score lepod needs exactly two files")
        first, second = (read_lines(f) for f in args.files)
        if len(first) != len(second):
            raise ValueError(f"line counts differ: {len(first)} vs {len(second)}")
        pairs = list(zip([s or ("",) for s in first], [s or ("",) for s in second]))
        parts = _parallel_map(lambda chunk: [lepod([a], [b]) for a, b in chunk], pairs)
        from .metrics import LePoDReport

        report = LePoDReport([r.led[0] for r in parts], [r.pod[0] for r in parts],
                             [i for i, r in enumerate(parts) if r.unaligned])
        atomic_write_text(os.path.join(args.out, "lepod.tsv"), report.tsv())
        _finish(args, args.out, ["lepod.tsv"], {"first": args.files[0], "second": args.files[1]}, start)
        print(f"LeD {report.led_percent:.2f}  PoD {report.pod_percent:.2f}")
        return 0
    if args.hyp is None or not args.ref:
        raise UsageError("score bleu needs --hyp and at least one --ref")
    hyp = read_lines(args.hyp)
    refs = [read_lines(r) for r in args.ref]
    if any(len(r) != len(hyp) for r in refs):
        raise ValueError("hypothesis and reference files have different line counts")
    result = bleu(hyp, [list(rs) for rs in zip(*refs)], smooth=args.smooth)
    atomic_write_text(os.path.join(args.out, "bleu.txt"), str(result) + "\n")
    inputs = {"hyp": args.hyp}
    inputs.update({f"ref{i}": r for i, r in enumerate(args.ref)})
    _finish(args, args.out, ["bleu.txt"], inputs, start)
    print(result)
    return 0


def cmd_analyze(args) -> int:
    start = time.time()
    with open(args.informal, encoding="utf-8") as fh:
        informal = fh.read().splitlines()
    with open(args.formal, encoding="utf-8") as fh:
        formal = fh.read().splitlines()
    report = analyze(informal, formal)
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "report.txt"), report.table())
    atomic_write_text(os.path.join(args.out, "report.tsv"), report.tsv())
    _finish(args, args.out, ["report.tsv", "report.txt"], {"informal": args.informal, "formal": args.formal}, start)
    print(report.table(), end="")
    return 0


def cmd_benchmark_control(args) -> int:
    start = time.time()
    try:
        schemes = [ControlScheme.parse(s) for s in args.schemes.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(str(exc))
    if not schemes or args.seeds < 1:
        raise UsageError("benchmark-control needs at least one scheme and one seed")
    if args.data:
        data = read_four_way(args.data)
        inputs = {name: os.path.join(args.data, name) for name in ("train.tsv", "dev.tsv", "test.tsv")}
    else:
        data = generate_four_way(SynthSpec(seed=args.seed))
        inputs = {}
    seeds = list(range(args.seed, args.seed + args.seeds))
    model_kwargs = dict(embed_size=args.embed_size, hidden_size=args.hidden_size, dropout=args.dropout)
    report = run_benchmark(data, schemes, seeds, _train_config(args), model_kwargs)
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "table.txt"), report.table())
    atomic_write_text(os.path.join(args.out, "scores.tsv"), report.tsv())
    _finish(args, args.out, ["scores.tsv", "table.txt"], inputs, start)
    print(report.table(), end="")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "finetune": cmd_finetune,
    "label": cmd_label,
    "translate": cmd_translate,
    "score": cmd_score,
    "analyze": cmd_analyze,
    "benchmark-control": cmd_benchmark_control,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
