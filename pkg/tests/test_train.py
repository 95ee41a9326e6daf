import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stylecast import nn
from stylecast.corpus import (FtPair, StyledExample, SynthSpec, Task, Vocab, build_bidirectional_ft, build_vocab,
                              generate_synthetic)
from stylecast.model import ModelConfig, Seq2Seq
from stylecast.schemes import ControlScheme, Style
from stylecast.train import (LOG_HEADER, LrSchedule, TrainConfig, batch_schedule, corpus_perplexity, draw_styles,
                             finetune_osi, finetune_oti, label_counts, label_from_ced, mean_token_loss,
                             osi_label_batch, oti_composite_loss, oti_make_target, train_joint)

from conftest import TOY_TOKENS, toy_model, uniform_model


def reversal_set(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        s = tuple(rng.choice(TOY_TOKENS, size=int(rng.integers(2, 5))))
        out.append(StyledExample(s, tuple(reversed(s)), Style(int(rng.integers(2)))))
    return out


def small_model(scheme=ControlScheme.TAG_SRC_TGT, size=32, seed=0, dropout=0.0):
    vocab = Vocab(TOY_TOKENS)
    return Seq2Seq(ModelConfig(len(vocab), embed_size=size, hidden_size=size, dropout=dropout, scheme=scheme),
                   vocab, seed=seed)


FAST = dict(batch_size=20, checkpoint_interval=10, max_epochs=2)


class CedStub:
    """Stands in for a model: returns fixed per-token losses per style."""

    def __init__(self, informal, formal):
        self.nll = {Style.INFORMAL: informal, Style.FORMAL: formal}

    def batch(self, examples):
        return examples

    def teacher_forced_nll(self, examples):
        style = examples[0].style
        assert all(ex.style is style for ex in examples)
        return [np.asarray(v, dtype=float) for v in self.nll[style]]


# ---------------------------------------------------------------- config and schedule


def test_config_invariants():
    with pytest.raises(ValueError):
        TrainConfig(alpha=-0.1)
    with pytest.raises(ValueError):
        TrainConfig(decay=1.0)
    with pytest.raises(ValueError):
        TrainConfig(patience=0)


def test_config_from_mapping():
    cfg = TrainConfig.from_mapping({"lr": "0.5", "patience": "2", "unknown_key": "x"})
    assert cfg.lr == 0.5 and cfg.patience == 2


def test_lr_decays_after_patience():
    sched = LrSchedule(1e-3, 0.7, patience=4, stop_patience=10)
    sched.update(10.0)
    for _ in range(3):
        sched.update(11.0)
    assert sched.lr == pytest.approx(1e-3)
    sched.update(11.0)
    assert sched.lr == pytest.approx(7e-4)
    for _ in range(4):
        sched.update(11.0)
    assert sched.lr == pytest.approx(4.9e-4)
    assert not sched.should_stop
    sched.update(11.0)
    sched.update(11.0)
    assert sched.should_stop


def test_lr_improvement_resets_counters():
    sched = LrSchedule(1.0, 0.5, patience=2, stop_patience=3)
    sched.update(5.0)
    sched.update(6.0)
    sched.update(4.0)
    sched.update(6.0)
    assert sched.lr == 1.0 and not sched.should_stop


def test_training_loop_decays_lr():
    cfg = TrainConfig(batch_size=10, checkpoint_interval=1, patience=2, stop_patience=50, max_updates=30,
                      lr=0.5, decay=0.7, max_epochs=50)
    result = train_joint(small_model(size=8), reversal_set(40), [], cfg)
    lrs = [row.lr for row in result.log]
    assert min(lrs) < 0.5
    for prev, cur in zip(lrs, lrs[1:]):
        assert cur == prev or cur == pytest.approx(prev * 0.7)


def test_batch_schedule_alternates():
    sched = batch_schedule(64, 64, TrainConfig(batch_size=16), nn.make_rng(0))
    assert [t for t, _ in sched] == ["mt", "ft"] * 4
    covered = sorted(i for t, idx in sched if t == "mt" for i in idx)
    assert covered == list(range(64))


def test_batch_schedule_ratio():
    sched = batch_schedule(64, 64, TrainConfig(batch_size=16, mix_ratio=2.0), nn.make_rng(0))
    tasks = [t for t, _ in sched]
    assert tasks.count("mt") == 2 * tasks.count("ft")


# ---------------------------------------------------------------- joint training


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        train_joint(small_model(size=8), [], [], TrainConfig())


def test_overfit_small_set():
    data = reversal_set(200)
    model = small_model()
    cfg = TrainConfig(batch_size=20, lr=5e-3, checkpoint_interval=50, max_epochs=60, patience=100, stop_patience=100)
    train_joint(model, data, [], cfg)
    assert corpus_perplexity(model, data) < 1.5


def test_same_seed_same_checkpoint(tmp_path):
    data = reversal_set(60)
    ft = build_bidirectional_ft([FtPair(("w1", "w2"), ("w3", "w4")), FtPair(("w5",), ("w6", "w7"))])
    paths = []
    for k in range(2):
        model = small_model(size=8, dropout=0.2)
        train_joint(model, [dataclasses.replace(e, style=None) for e in data], ft, TrainConfig(**FAST))
        paths.append(tmp_path / f"{k}.ckpt")
        model.save(str(paths[-1]))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_best_checkpoint_restored():
    data = reversal_set(60)
    model = small_model(size=8)
    result = train_joint(model, data, [], TrainConfig(**FAST), dev_set=data[:20], keep_snapshots=True)
    best = min(result.log, key=lambda row: row.dev_ppl)
    assert result.best_checkpoint == best.checkpoint
    for name, value in result.snapshots[best.checkpoint].items():
        np.testing.assert_array_equal(model.params[name], value)


def test_log_loss_recomputes_from_snapshots(tmp_path):
    data = reversal_set(60)
    ft = build_bidirectional_ft([FtPair(("w1", "w2"), ("w3",))] * 3)
    cfg = TrainConfig(probe_size=16, **FAST)
    model = small_model(size=8, dropout=0.2)
    log_path = tmp_path / "log.tsv"
    result = train_joint(model, data, ft, cfg, keep_snapshots=True, log_path=str(log_path))
    probe = data[:16] + ft[:16]
    for row in result.log:
        model.params.load(result.snapshots[row.checkpoint])
        assert mean_token_loss(model, probe) == pytest.approx(row.train_loss, abs=1e-4)
    lines = log_path.read_text().splitlines()
    assert lines[0].split("\t") == LOG_HEADER
    assert len(lines) == len(result.log) + 1
    assert log_path.read_text() == result.log_tsv()


# ---------------------------------------------------------------- OSI labeling


def test_label_rule_hand_arithmetic():
    tau, records = label_from_ced([np.array([2.0, 2.0]), np.array([-0.5, 0.5])])
    assert tau == 1.25
    assert [r.sentence_ced for r in records] == [2.0, 0.0]
    assert [r.label for r in records] == [Style.FORMAL, Style.UNKNOWN]


def test_osi_label_batch_uses_informal_minus_formal():
    # ced = nll(informal-conditioned) - nll(formal-conditioned)
    stub = CedStub(informal=[[3.0, 3.0], [1.0, 2.0]], formal=[[1.0, 1.0], [1.5, 1.5]])
    exs = [StyledExample(("a",), ("b", "c")), StyledExample(("d",), ("e", "f"))]
    tau, records = osi_label_batch(stub, exs)
    assert tau == 1.25
    assert [r.label for r in records] == [Style.FORMAL, Style.UNKNOWN]
    flipped = CedStub(informal=stub.nll[Style.FORMAL], formal=stub.nll[Style.INFORMAL])
    assert [r.label for r in osi_label_batch(flipped, exs)[1]] == [Style.INFORMAL, Style.UNKNOWN]


def test_osi_label_batch_empty():
    with pytest.raises(ValueError):
        osi_label_batch(toy_model(), [])


def test_uniform_model_labels_everything_unknown():
    model = uniform_model()
    exs = [StyledExample(("w1", "w2"), ("w3",)), StyledExample(("w4",), ("w5", "w6", "w7"))]
    tau, records = osi_label_batch(model, exs)
    assert tau == 0.0
    assert all(r.label is Style.UNKNOWN for r in records)


ced_lists = st.lists(st.lists(st.floats(-5, 5), min_size=1, max_size=4).map(np.array), min_size=1, max_size=6)


@given(ced_lists)
def test_label_rule_properties(ceds):
    tau, records = label_from_ced(ceds)
    assert tau >= 0
    assert (tau == 0) == all(np.all(c == 0) for c in ceds)
    for r, c in zip(records, ceds):
        assert r.sentence_ced == pytest.approx(float(np.mean(c)), abs=1e-9)
    neg_tau, negated = label_from_ced([-c for c in ceds])
    assert neg_tau == tau
    for a, b in zip(records, negated):
        assert b.label is a.label.flipped()


@given(ced_lists, st.randoms())
def test_label_rule_order_invariant(ceds, rnd):
    order = list(range(len(ceds)))
    rnd.shuffle(order)
    tau, records = label_from_ced(ceds)
    tau2, shuffled = label_from_ced([ceds[i] for i in order])
    assert tau2 == pytest.approx(tau, abs=1e-12)
    assert [shuffled[k].label for k in range(len(order))] == [records[i].label for i in order]


def test_label_counts():
    assert label_counts([Style.FORMAL, Style.UNKNOWN, Style.FORMAL]) == (0, 2, 1)


# ---------------------------------------------------------------- OSI fine-tuning


def _pretrained(scheme=ControlScheme.TAG_SRC_TGT):
    spec = SynthSpec(seed=4, n_mt=300, n_ft=150, n_eval=1)
    mt, ft_pairs, _ = generate_synthetic(spec)
    ft = build_bidirectional_ft([p for p in ft_pairs if p.informal != p.formal])
    vocab = build_vocab([e.source for e in mt] + [e.target for e in mt] + [e.source for e in ft])
    model = Seq2Seq(ModelConfig(len(vocab), embed_size=24, hidden_size=24, dropout=0.0, scheme=scheme), vocab)
    train_joint(model, mt, ft, TrainConfig(batch_size=32, checkpoint_interval=20, max_epochs=3))
    return model, mt, ft


@pytest.fixture(scope="module")
def pretrained():
    return _pretrained()


def test_finetune_rejects_none_scheme():
    model = toy_model(ControlScheme.NONE)
    with pytest.raises(ValueError):
        finetune_osi(model, [StyledExample(("w1",), ("w2",))], [], TrainConfig())
    with pytest.raises(ValueError):
        finetune_oti(model, [StyledExample(("w1",), ("w2",))], [], TrainConfig())


def test_unknown_fraction_after_pretraining(pretrained):
    model, mt, _ = pretrained
    labels = []
    for start in range(0, 256, 32):
        labels += [r.label for r in osi_label_batch(model, mt[start : start + 32])[1]]
    unknown = label_counts(labels)[2] / len(labels)
    assert 0.0 < unknown < 1.0


def test_osi_logs_label_histogram(pretrained):
    model, mt, ft = pretrained
    cfg = TrainConfig(batch_size=32, checkpoint_interval=5, max_updates=10, max_epochs=1)
    result = finetune_osi(model.copy(), mt[:160], ft[:160], cfg)
    labelled = sum(sum(row.labels) for row in result.log)
    mt_batches = 5  # 160 MT pairs / 32, alternated with FT batches over 10 updates
    assert labelled == mt_batches * 32


def test_unknown_step_reduces_loss():
    model = toy_model()
    batch = model.batch([StyledExample(("w1", "w2"), ("w3", "w4"), Style.UNKNOWN)])
    before = model.batch_loss(batch, grad=False)
    model.params.zero_grad()
    model.batch_loss(batch)
    model.params.adam_step(1e-2)
    assert model.batch_loss(batch, grad=False) < before


def test_osi_ignores_alpha(pretrained):
    model, mt, ft = pretrained
    outs = []
    for alpha in (0.0, 0.7):
        m = model.copy()
        finetune_osi(m, mt[:64], ft[:64], TrainConfig(batch_size=32, alpha=alpha, max_updates=4, checkpoint_interval=2))
        outs.append(m.params.snapshot())
    for name in outs[0]:
        np.testing.assert_array_equal(outs[0][name], outs[1][name])


def test_finetuned_checkpoint_loads(pretrained, tmp_path):
    model, mt, ft = pretrained
    m = model.copy()
    finetune_osi(m, mt[:64], ft[:64], TrainConfig(batch_size=32, max_updates=2, checkpoint_interval=1))
    m.save(str(tmp_path / "m.ckpt"))
    assert Seq2Seq.load(str(tmp_path / "m.ckpt")).scheme is model.scheme


# ---------------------------------------------------------------- OTI


def test_oti_transfer_of_memorised_pair():
    pair = FtPair(("w1", "w2", "w3"), ("w4", "w5", "w6", "w7"))
    ft = build_bidirectional_ft([pair])
    model = small_model(size=16)
    cfg = TrainConfig(batch_size=2, lr=1e-2, checkpoint_interval=50, max_epochs=200, patience=100, stop_patience=100)
    train_joint(model, [], ft, cfg)
    assert oti_make_target(model, [pair.informal], [Style.FORMAL]) == [pair.formal]
    assert oti_make_target(model, [pair.formal], [Style.INFORMAL]) == [pair.informal]


def test_oti_max_len_zero_skips():
    model = toy_model()
    assert oti_make_target(model, [("w1",)], [Style.FORMAL], max_len=0) == [()]


def test_draw_styles_deterministic():
    a = draw_styles(nn.make_rng(3), 50)
    assert a == draw_styles(nn.make_rng(3), 50)
    assert set(a) == {Style.INFORMAL, Style.FORMAL}


def test_oti_alpha_zero_equals_joint_continuation(pretrained):
    model, mt, ft = pretrained
    cfg = TrainConfig(batch_size=32, alpha=0.0, max_updates=6, checkpoint_interval=3)
    a, b = model.copy(), model.copy()
    finetune_oti(a, mt[:96], ft[:96], cfg)
    train_joint(b, mt[:96], ft[:96], cfg, lr=cfg.finetune_lr)
    for name in a.params.names():
        np.testing.assert_array_equal(a.params[name], b.params[name])


def test_oti_reports_synthetic_targets(pretrained):
    model, mt, ft = pretrained
    result = finetune_oti(model.copy(), mt[:64], ft[:64], TrainConfig(batch_size=32, max_updates=4, checkpoint_interval=2))
    assert result.notes["synthetic"] + result.notes["skipped"] == 64
    assert 0.0 <= result.notes["identical_fraction"] <= 1.0


def test_oti_composite_gradient():
    model = toy_model()
    mt = [StyledExample(("w1", "w2"), ("w3",)), StyledExample(("w4",), ("w5", "w6"))]
    ft = build_bidirectional_ft([FtPair(("w7",), ("w8", "w9"))])
    syn = [StyledExample(("w1", "w2"), ("w10",), Style.FORMAL)]
    alpha = 0.05

    def grads_of(fn):
        model.params.zero_grad()
        fn()
        return {k: v.copy() for k, v in model.params.grads.items()}

    total = grads_of(lambda: oti_composite_loss(model, mt, ft, syn, alpha))
    parts = [grads_of(lambda: model.batch_loss(model.batch(x))) for x in (mt, ft, syn)]
    for name in total:
        np.testing.assert_allclose(total[name], parts[0][name] + parts[1][name] + alpha * parts[2][name],
                                   atol=1e-12)
    # and the composite gradient agrees with finite differences on a few parameters
    for name in ("embed", "out.bias", "dec.cell.wh"):
        value = model.params[name]
        numeric = nn.numerical_gradient(
            lambda: model.batch_loss(model.batch(mt), grad=False) + model.batch_loss(model.batch(ft), grad=False)
            + alpha * model.batch_loss(model.batch(syn), grad=False), value)
        assert nn.gradient_agreement(total[name], numeric)[1], name
