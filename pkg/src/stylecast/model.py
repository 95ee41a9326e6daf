"""Style-controlled attentional encoder-decoder.

Bidirectional LSTM encoder, additive (MLP) attention, LSTM decoder and a
tied embedding matrix shared by encoder input, decoder input and the
output projection. Ten control schemes decide where the style enters.
Gradients are computed by hand in :meth:`Seq2Seq.backward`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import BOS_ID, EOS_ID, PAD_ID, RESERVED, TAG_IDS, ControlledExample, StyledExample, Task, Vocab, apply_control
from .schemes import ControlScheme, Style

_SUM_SCHEMES = (ControlScheme.FACTOR_SUM, ControlScheme.PRED_SUM, ControlScheme.BOS)
_STYLE_EMBED_SCHEMES = _SUM_SCHEMES + (ControlScheme.FACTOR_CONCAT, ControlScheme.PRED_CONCAT)
_NO_EMIT = [PAD_ID, BOS_ID] + list(TAG_IDS.values())


@dataclass
class ModelConfig:
    vocab_size: int
    embed_size: int = 64
    hidden_size: int = 64
    style_embed_size: Optional[int] = None
    attention_size: Optional[int] = None
    dropout: float = 0.2
    scheme: ControlScheme = ControlScheme.TAG_SRC_TGT
    max_decode_len: int = 40

    def __post_init__(self):
        self.scheme = ControlScheme.parse(self.scheme) if isinstance(self.scheme, str) else self.scheme
        if self.style_embed_size is None:
            self.style_embed_size = self.embed_size if self.scheme in _SUM_SCHEMES else 5
        if self.attention_size is None:
            self.attention_size = self.hidden_size
        for name in ("vocab_size", "embed_size", "hidden_size", "style_embed_size", "attention_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.style_embed_size > self.embed_size:
            raise ValueError("style embedding size must not exceed the word embedding size")
        if self.scheme in _SUM_SCHEMES and self.style_embed_size != self.embed_size:
            raise ValueError(f"{self.scheme.value} sums style and word embeddings; sizes must match")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        fields_ = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**fields_)


@dataclass
class Batch:
    src: np.ndarray
    src_mask: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_mask: np.ndarray
    score_mask: np.ndarray
    style: np.ndarray
    tags: Optional[np.ndarray] = None
    tag_mask: Optional[np.ndarray] = None
    target_tagged: Optional[np.ndarray] = None

    @property
    def all_target_tagged(self) -> bool:
        return self.target_tagged is not None and bool(self.target_tagged.all())

    @property
    def size(self) -> int:
        return self.src.shape[0]

    @classmethod
    def build(cls, examples: Sequence[ControlledExample], vocab: Vocab) -> "Batch":
        if not examples:
            raise ValueError("empty batch")
        blocked = examples[0].blocked
        srcs, tags = [], []
        for ex in examples:
            ids = vocab.encode(ex.source)
            if blocked:
                # untagged sources get a masked-out slot
                tags.append(ids[0] if ex.source_tagged else PAD_ID)
                ids = ids[1:] if ex.source_tagged else ids
            if not ids:
                raise ValueError("source sequence is empty after removing the style tag")
            srcs.append(ids)
        tgts = [vocab.encode(ex.target) for ex in examples]
        b = len(examples)
        s = max(len(x) for x in srcs)
        t = max(len(y) for y in tgts) + 1
        src = np.full((b, s), PAD_ID, dtype=np.int64)
        tgt_in = np.full((b, t), PAD_ID, dtype=np.int64)
        tgt_out = np.full((b, t), PAD_ID, dtype=np.int64)
        for i, (x, y) in enumerate(zip(srcs, tgts)):
            src[i, : len(x)] = x
            tgt_in[i, 0] = BOS_ID
            tgt_in[i, 1 : len(y) + 1] = y
            tgt_out[i, : len(y)] = y
            tgt_out[i, len(y)] = EOS_ID
        src_mask = (src != PAD_ID).astype(nn.DTYPE)
        tgt_mask = np.zeros((b, t), dtype=nn.DTYPE)
        for i, y in enumerate(tgts):
            tgt_mask[i, : len(y) + 1] = 1.0
        target_tagged = np.array([ex.target_tagged for ex in examples], dtype=bool)
        score_mask = tgt_mask.copy()
        score_mask[target_tagged, 0] = 0.0
        tags_arr = np.array(tags, dtype=np.int64) if blocked else None
        return cls(
            src, src_mask, tgt_in, tgt_out, tgt_mask, score_mask,
            np.array([int(ex.style) for ex in examples], dtype=np.int64),
            tags_arr,
            (tags_arr != PAD_ID).astype(nn.DTYPE) if blocked else None,
            target_tagged,
        )


@dataclass
class DecodeResult:
    ids: List[int]
    logprobs: List[float]
    terminated: bool
    tokens: List[str] = field(default_factory=list)


class Seq2Seq:
    def __init__(self, config: ModelConfig, vocab: Vocab, seed: int = 0):
        if config.vocab_size != len(vocab):
            raise ValueError(f"config vocab size {config.vocab_size} != vocabulary size {len(vocab)}")
        self.config = config
        self.vocab = vocab
        self.params = nn.ParamStore()
        self._init_params(nn.make_rng(seed))

    # ------------------------------------------------------------ setup

    @property
    def scheme(self) -> ControlScheme:
        return self.config.scheme

    def _init_params(self, rng):
        c = self.config
        V, E, H, A, Es = c.vocab_size, c.embed_size, c.hidden_size, c.attention_size, c.style_embed_size
        P = self.params
        rec = nn.RECURRENT_INIT
        P.add("embed", nn.uniform_init(rng, (V, E), 0.1))
        enc_in = E + Es if self.scheme is ControlScheme.FACTOR_CONCAT else E
        dec_in = E + Es if self.scheme is ControlScheme.PRED_CONCAT else E
        for prefix, din in (("enc.fwd", enc_in), ("enc.bwd", enc_in), ("dec.cell", dec_in)):
            P.add(f"{prefix}.wx", nn.uniform_init(rng, (din, 4 * H), rec))
            P.add(f"{prefix}.wh", nn.uniform_init(rng, (H, 4 * H), rec))
            bias = np.zeros(4 * H)
            bias[H : 2 * H] = nn.FORGET_BIAS
            P.add(f"{prefix}.b", bias)
        P.add("enc.proj.w", nn.fan_in_init(rng, (2 * H, H)))
        P.add("enc.proj.b", np.zeros(H))
        P.add("enc.ln.g", np.ones(H))
        P.add("enc.ln.b", np.zeros(H))
        P.add("dec.init.w", nn.fan_in_init(rng, (H, H)))
        P.add("dec.init.b", np.zeros(H))
        P.add("att.wq", nn.fan_in_init(rng, (H, A)))
        P.add("att.wk", nn.fan_in_init(rng, (H, A)))
        P.add("att.b", np.zeros(A))
        P.add("att.v", nn.fan_in_init(rng, (A,)))
        P.add("out.w", nn.fan_in_init(rng, (2 * H, E)))
        P.add("out.b", np.zeros(E))
        P.add("out.ln.g", np.ones(E))
        P.add("out.ln.b", np.zeros(E))
        P.add("out.bias", np.zeros(V))
        if self.scheme in _STYLE_EMBED_SCHEMES:
            P.add("style.embed", nn.uniform_init(rng, (len(Style), Es), 0.1))
        if self.scheme is ControlScheme.BIAS:
            P.add("style.bias", np.zeros((len(Style), V)))
        if self.scheme is ControlScheme.TAG_SRC_BLOCK:
            P.add("block.w", nn.fan_in_init(rng, (E, H)))

    # ------------------------------------------------------------ data

    def control(self, example: StyledExample) -> ControlledExample:
        # unlabeled translation pairs train and decode without a tag
        return apply_control(example, self.scheme, allow_untagged=example.task is Task.MT)

    def batch(self, examples: Sequence[StyledExample]) -> Batch:
        return Batch.build([self.control(ex) for ex in examples], self.vocab)

    # ------------------------------------------------------------ forward

    def encode(self, batch: Batch, rng=None):
        """Encoder memory ``(B, S', H)``, its mask, the decoder initial state and a cache."""
        p = self.params.params
        c = self.config
        H = c.hidden_size
        src, mask = batch.src, batch.src_mask
        B, S = src.shape
        x = p["embed"][src]
        if self.scheme is ControlScheme.FACTOR_CONCAT:
            style = np.broadcast_to(p["style.embed"][batch.style][:, None, :], (B, S, c.style_embed_size))
            x = np.concatenate([x, style], axis=-1)
        elif self.scheme is ControlScheme.FACTOR_SUM:
            x = x + p["style.embed"][batch.style][:, None, :]
        emb_mask = nn.dropout_mask(rng, (B, 1, x.shape[-1]), c.dropout)
        xd = nn.apply_mask(x, emb_mask)
        zeros = np.zeros((B, H))
        hf, fwd_cache = nn.lstm_sequence(xd @ p["enc.fwd.wx"] + p["enc.fwd.b"], mask, zeros, zeros, p["enc.fwd.wh"])
        hb, bwd_cache = nn.lstm_sequence(
            xd @ p["enc.bwd.wx"] + p["enc.bwd.b"], mask, zeros, zeros, p["enc.bwd.wh"], reverse=True
        )
        hcat = np.concatenate([hf, hb], axis=-1)
        rnn_mask = nn.dropout_mask(rng, (B, 1, 2 * H), c.dropout)
        hcd = nn.apply_mask(hcat, rnn_mask)
        enc, ln_cache = nn.layer_norm(hcd @ p["enc.proj.w"] + p["enc.proj.b"], p["enc.ln.g"], p["enc.ln.b"])
        memory, memory_mask = enc, mask
        if batch.tags is not None:
            slot = p["embed"][batch.tags] @ p["block.w"]
            memory = np.concatenate([enc, slot[:, None, :]], axis=1)
            memory_mask = np.concatenate([mask, batch.tag_mask[:, None]], axis=1)
        h0 = np.tanh(hb[:, 0] @ p["dec.init.w"] + p["dec.init.b"])
        cache = dict(x=x, xd=xd, emb_mask=emb_mask, fwd=fwd_cache, bwd=bwd_cache, hb0=hb[:, 0],
                     hcd=hcd, rnn_mask=rnn_mask, ln=ln_cache, h0=h0)
        return memory, memory_mask, h0, cache

    def _decoder_inputs(self, ids, style):
        p = self.params.params
        e = p["embed"][ids]
        if self.scheme is ControlScheme.BOS:
            first = ids[:, 0] == BOS_ID
            e[first, 0] = p["style.embed"][style[first]]
        elif self.scheme is ControlScheme.PRED_CONCAT:
            st = p["style.embed"][style][:, None, :]
            e = np.concatenate([e, np.broadcast_to(st, e.shape[:2] + st.shape[-1:])], axis=-1)
        elif self.scheme is ControlScheme.PRED_SUM:
            e = e + p["style.embed"][style][:, None, :]
        return e

    def _output_layer(self, hd, memory, memory_mask, style):
        p = self.params.params
        ctx, _, att_cache = nn.mlp_attention(hd, memory, p["att.wq"], p["att.wk"], p["att.b"], p["att.v"], memory_mask)
        oc = np.concatenate([hd, ctx], axis=-1)
        o1 = np.tanh(oc @ p["out.w"] + p["out.b"])
        o, ln_cache = nn.layer_norm(o1, p["out.ln.g"], p["out.ln.b"])
        logits = o @ p["embed"].T + p["out.bias"]
        if self.scheme is ControlScheme.BIAS:
            logits = logits + p["style.bias"][style][:, None, :]
        return logits, dict(att=att_cache, oc=oc, o1=o1, o=o, ln=ln_cache)

    def forward(self, batch: Batch, rng=None):
        """Teacher-forced per-position losses ``(B, T)`` (zero on padding) and a cache."""
        p = self.params.params
        c = self.config
        memory, memory_mask, h0, enc_cache = self.encode(batch, rng)
        B, T = batch.tgt_in.shape
        e = self._decoder_inputs(batch.tgt_in, batch.style)
        emb_mask = nn.dropout_mask(rng, (B, 1, e.shape[-1]), c.dropout)
        ed = nn.apply_mask(e, emb_mask)
        hd, dec_cache = nn.lstm_sequence(
            ed @ p["dec.cell.wx"] + p["dec.cell.b"], np.ones((B, T)), h0, np.zeros_like(h0), p["dec.cell.wh"]
        )
        rnn_mask = nn.dropout_mask(rng, (B, 1, c.hidden_size), c.dropout)
        hdd = nn.apply_mask(hd, rnn_mask)
        logits, out_cache = self._output_layer(hdd, memory, memory_mask, batch.style)
        losses, probs = nn.softmax_cross_entropy(logits, batch.tgt_out)
        losses = losses * batch.tgt_mask
        cache = dict(batch=batch, enc=enc_cache, e=e, ed=ed, emb_mask=emb_mask, dec=dec_cache,
                     hdd=hdd, rnn_mask=rnn_mask, out=out_cache, probs=probs, memory=memory)
        return losses, cache

    # ------------------------------------------------------------ backward

    def backward(self, cache, dlosses: np.ndarray):
        """Accumulates parameter gradients of ``sum(dlosses * losses)``."""
        p = self.params.params
        P = self.params
        c = self.config
        H, E = c.hidden_size, c.embed_size
        batch = cache["batch"]
        out = cache["out"]
        dembed = np.zeros_like(p["embed"])

        dlogits = nn.softmax_cross_entropy_backward(dlosses * batch.tgt_mask, cache["probs"], batch.tgt_out)
        V = dlogits.shape[-1]
        dl2 = dlogits.reshape(-1, V)
        dembed += dl2.T @ out["o"].reshape(-1, E)
        P.accumulate("out.bias", dl2.sum(axis=0))
        if self.scheme is ControlScheme.BIAS:
            dsb = np.zeros_like(p["style.bias"])
            np.add.at(dsb, batch.style, dlogits.sum(axis=1))
            P.accumulate("style.bias", dsb)
        do = dlogits @ p["embed"]
        do1, dg, db = nn.layer_norm_backward(do, out["ln"])
        P.accumulate("out.ln.g", dg)
        P.accumulate("out.ln.b", db)
        dpre = do1 * (1.0 - out["o1"] ** 2)
        doc, dw, db = nn.affine_backward(dpre, out["oc"], p["out.w"])
        P.accumulate("out.w", dw)
        P.accumulate("out.b", db)
        dhdd = doc[..., :H]
        dq, dmemory, dwq, dwk, dab, dav = nn.mlp_attention_backward(doc[..., H:], out["att"])
        for name, g in (("att.wq", dwq), ("att.wk", dwk), ("att.b", dab), ("att.v", dav)):
            P.accumulate(name, g)
        dhd = nn.apply_mask(dhdd + dq, cache["rnn_mask"])
        dxw, dh0, _, dwh = nn.lstm_sequence_backward(dhd, cache["dec"])
        ded, dwx, db = nn.affine_backward(dxw, cache["ed"], p["dec.cell.wx"])
        P.accumulate("dec.cell.wx", dwx)
        P.accumulate("dec.cell.wh", dwh)
        P.accumulate("dec.cell.b", db)
        de = nn.apply_mask(ded, cache["emb_mask"])
        if self.scheme in (ControlScheme.PRED_CONCAT, ControlScheme.PRED_SUM, ControlScheme.BOS):
            dse = np.zeros_like(p["style.embed"])
            if self.scheme is ControlScheme.PRED_CONCAT:
                np.add.at(dse, batch.style, de[..., E:].sum(axis=1))
                de = de[..., :E]
            elif self.scheme is ControlScheme.PRED_SUM:
                np.add.at(dse, batch.style, de.sum(axis=1))
            else:
                first = batch.tgt_in[:, 0] == BOS_ID
                np.add.at(dse, batch.style[first], de[first, 0])
                de = de.copy()
                de[first, 0] = 0.0
            P.accumulate("style.embed", dse)
        np.add.at(dembed, batch.tgt_in, de)
        self._encoder_backward(cache["enc"], batch, dmemory, dh0, dembed)
        P.accumulate("embed", dembed)

    def _encoder_backward(self, ec, batch, dmemory, dh0, dembed):
        p = self.params.params
        P = self.params
        H, E = self.config.hidden_size, self.config.embed_size
        dpi = dh0 * (1.0 - ec["h0"] ** 2)
        dhb0, dw, db = nn.affine_backward(dpi, ec["hb0"], p["dec.init.w"])
        P.accumulate("dec.init.w", dw)
        P.accumulate("dec.init.b", db)
        if batch.tags is not None:
            dslot = dmemory[:, -1]
            dmemory = dmemory[:, :-1]
            tag_emb = p["embed"][batch.tags]
            P.accumulate("block.w", tag_emb.T @ dslot)
            np.add.at(dembed, batch.tags, dslot @ p["block.w"].T)
        dproj, dg, db = nn.layer_norm_backward(dmemory, ec["ln"])
        P.accumulate("enc.ln.g", dg)
        P.accumulate("enc.ln.b", db)
        dhcd, dw, db = nn.affine_backward(dproj, ec["hcd"], p["enc.proj.w"])
        P.accumulate("enc.proj.w", dw)
        P.accumulate("enc.proj.b", db)
        dhcat = nn.apply_mask(dhcd, ec["rnn_mask"])
        dhb = dhcat[..., H:].copy()
        dhb[:, 0] += dhb0
        dxd = np.zeros_like(ec["xd"])
        for prefix, dh, key in (("enc.fwd", dhcat[..., :H], "fwd"), ("enc.bwd", dhb, "bwd")):
            dxw, _, _, dwh = nn.lstm_sequence_backward(dh, ec[key])
            dx_part, dwx, db = nn.affine_backward(dxw, ec["xd"], p[f"{prefix}.wx"])
            dxd += dx_part
            P.accumulate(f"{prefix}.wx", dwx)
            P.accumulate(f"{prefix}.wh", dwh)
            P.accumulate(f"{prefix}.b", db)
        dx = nn.apply_mask(dxd, ec["emb_mask"])
        if self.scheme is ControlScheme.FACTOR_CONCAT:
            dse = np.zeros_like(p["style.embed"])
            np.add.at(dse, batch.style, dx[..., E:].sum(axis=1))
            P.accumulate("style.embed", dse)
            dx = dx[..., :E]
        elif self.scheme is ControlScheme.FACTOR_SUM:
            dse = np.zeros_like(p["style.embed"])
            np.add.at(dse, batch.style, dx.sum(axis=1))
            P.accumulate("style.embed", dse)
        np.add.at(dembed, batch.src, dx)

    # ------------------------------------------------------------ losses

    def batch_loss(self, batch: Batch, rng=None, weight: float = 1.0, grad: bool = True):
        """Mean per-token training loss of ``batch``; accumulates ``weight``-scaled gradients."""
        losses, cache = self.forward(batch, rng)
        ntok = float(batch.tgt_mask.sum())
        loss = float(losses.sum()) / ntok
        if grad:
            self.backward(cache, np.full(losses.shape, weight / ntok))
        return loss

    def teacher_forced_nll(self, batch: Batch) -> List[np.ndarray]:
        """Per-token losses for each reference (end-of-sequence included, target tag excluded)."""
        losses, _ = self.forward(batch, None)
        out = []
        for i in range(batch.size):
            keep = batch.score_mask[i] > 0
            out.append(losses[i][keep])
        return out

    def score(self, source: Sequence[str], style: Optional[Style], reference: Sequence[str]) -> np.ndarray:
        ex = StyledExample(tuple(source), tuple(reference), style, Task.MT)
        return self.teacher_forced_nll(self.batch([ex]))[0]

    # ------------------------------------------------------------ decoding

    def decode_greedy(self, batch: Batch, max_len: Optional[int] = None) -> List[DecodeResult]:
        p = self.params.params
        max_len = self.config.max_decode_len if max_len is None else max_len
        B = batch.size
        if max_len <= 0:
            return [DecodeResult([], [], False) for _ in range(B)]
        memory, memory_mask, h, _ = self.encode(batch, None)
        c = np.zeros_like(h)
        prev = np.full(B, BOS_ID, dtype=np.int64)
        results = [DecodeResult([], [], False) for _ in range(B)]
        done = np.zeros(B, dtype=bool)
        if batch.target_tagged.any() and not batch.all_target_tagged:
            raise ValueError("cannot decode a batch mixing tagged and untagged targets")
        forced = batch.tgt_out[:, 0] if batch.all_target_tagged else None
        steps = max_len + (1 if forced is not None else 0)
        for step in range(steps):
            e = self._decoder_inputs(prev[:, None], batch.style)[:, 0]
            h, c, _ = nn._cell(e @ p["dec.cell.wx"] + p["dec.cell.b"] + h @ p["dec.cell.wh"], c)
            logits, _ = self._output_layer(h[:, None], memory, memory_mask, batch.style)
            logp = nn.log_softmax(logits[:, 0])
            if forced is not None and step == 0:
                prev = forced.copy()
                continue
            masked = logp.copy()
            masked[:, _NO_EMIT] = -np.inf
            choice = masked.argmax(axis=-1)
            for i in np.flatnonzero(~done):
                tok = int(choice[i])
                results[i].logprobs.append(float(logp[i, tok]))
                if tok == EOS_ID:
                    results[i].terminated = True
                    done[i] = True
                else:
                    results[i].ids.append(tok)
            prev = choice
            if done.all():
                break
        for r in results:
            r.tokens = self.vocab.decode(r.ids)
        return results

    def translate(self, sources: Sequence[Sequence[str]], style: Optional[Style],
                  max_len: Optional[int] = None, batch_size: int = 64) -> List[DecodeResult]:
        """Greedy outputs for raw token sequences at the requested style."""
        out: List[DecodeResult] = []
        for start in range(0, len(sources), batch_size):
            chunk = sources[start : start + batch_size]
            # reference is a placeholder; tag-src-tgt reads its forced tag from it
            exs = [StyledExample(tuple(s) or ("<unk>",), ("<unk>",), style, Task.MT) for s in chunk]
            out.extend(self.decode_greedy(self.batch(exs), max_len))
        return out

    # ------------------------------------------------------------ persistence

    def checkpoint_config(self) -> dict:
        d = self.config.to_dict()
        d["vocab"] = list(self.vocab.itos)
        return d

    def save(self, path: str):
        save_checkpoint(path, self.checkpoint_config(), self.params.params)

    @classmethod
    def from_checkpoint(cls, config: dict, params: dict) -> "Seq2Seq":
        vocab = Vocab(config["vocab"][len(RESERVED) :])
        if vocab.itos != config["vocab"]:
            raise ValueError("checkpoint vocabulary does not start with the reserved tokens")
        model = cls(ModelConfig.from_dict(config), vocab)
        missing = set(model.params.names()) ^ set(params)
        if missing:
            raise ValueError(f"checkpoint parameters do not match scheme: {sorted(missing)}")
        model.params.load(params)
        return model

    @classmethod
    def load(cls, path: str) -> "Seq2Seq":
        return cls.from_checkpoint(*load_checkpoint(path))

    def copy(self) -> "Seq2Seq":
        clone = Seq2Seq(self.config, self.vocab)
        clone.params.load(self.params.snapshot())
        return clone
