"""Dense numerics for the recurrent encoder-decoder.

Every layer is a pair of plain functions: a forward pass that returns its
output together with whatever the backward pass needs, and a backward pass
that maps the upstream gradient to gradients for each input. Arrays are
numpy ``float64`` throughout so finite-difference checks stay meaningful.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

DTYPE = np.float64

LN_EPS = 1e-6
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CLIP_NORM = 5.0
RECURRENT_INIT = 0.08
FORGET_BIAS = 1.0


class DimensionError(ValueError):
    pass


class NonFiniteGradientError(FloatingPointError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; identical seeds give identical draw sequences."""
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------- affine


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise DimensionError(
            f"affine: input {x.shape} incompatible with weight {w.shape} / bias {b.shape}"
        )
    return x @ w + b


def affine_backward(dy, x, w):
    """Gradients of ``x @ w + b`` for any number of leading axes."""
    dx = dy @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dx, x2.T @ dy2, dy2.sum(axis=0)


# ---------------------------------------------------------------- softmax


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, target):
    """Negative log-likelihood of ``target`` under ``softmax(logits)``.

    ``logits`` is ``(..., V)`` and ``target`` an integer array of the
    leading shape (or a plain int for a single vector). Returns the loss
    array and the probabilities, which the backward pass reuses.
    """
    logits = np.asarray(logits, dtype=DTYPE)
    target = np.asarray(target)
    vocab = logits.shape[-1]
    if target.shape != logits.shape[:-1]:
        raise DimensionError(f"targets {target.shape} do not match logits {logits.shape}")
    if target.size and (target.min() < 0 or target.max() >= vocab):
        raise IndexError(f"target index out of range for vocabulary of size {vocab}")
    logp = log_softmax(logits)
    loss = -np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    return loss, np.exp(logp)


def softmax_cross_entropy_backward(dloss, probs, target):
    grad = probs * dloss[..., None]
    np.put_along_axis(
        grad,
        target[..., None],
        np.take_along_axis(grad, target[..., None], axis=-1) - dloss[..., None],
        axis=-1,
    )
    return grad


# ---------------------------------------------------------------- layer norm


def layer_norm(x, gain, bias, eps: float = LN_EPS):
    if gain.shape != (x.shape[-1],) or bias.shape != gain.shape:
        raise DimensionError(f"layer_norm: gain {gain.shape} does not match input {x.shape}")
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    return gain * xhat + bias, (xhat, inv_std, gain)


def layer_norm_backward(dy, cache):
    xhat, inv_std, gain = cache
    lead = tuple(range(dy.ndim - 1))
    dgain = (dy * xhat).sum(axis=lead)
    dbias = dy.sum(axis=lead)
    dxhat = dy * gain
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


# ---------------------------------------------------------------- LSTM


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def recurrent_cell_step(h_prev, c_prev, x, wx, wh, b):
    """One LSTM step; gate blocks are ordered input, forget, candidate, output."""
    hidden = h_prev.shape[-1]
    if wx.shape != (x.shape[-1], 4 * hidden) or wh.shape != (hidden, 4 * hidden):
        raise DimensionError(
            f"cell: input {x.shape}/hidden {h_prev.shape} vs weights {wx.shape}, {wh.shape}"
        )
    return _cell(x @ wx + h_prev @ wh + b, c_prev)


def _cell(z, c_prev):
    hidden = c_prev.shape[-1]
    i = _sigmoid(z[..., :hidden])
    f = _sigmoid(z[..., hidden : 2 * hidden])
    g = np.tanh(z[..., 2 * hidden : 3 * hidden])
    o = _sigmoid(z[..., 3 * hidden :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (i, f, g, o, tc, c_prev)


def _cell_backward(dh, dc, cache):
    i, f, g, o, tc, c_prev = cache
    dc = dc + dh * o * (1.0 - tc**2)
    dz = np.concatenate(
        [
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g**2),
            dh * tc * o * (1.0 - o),
        ],
        axis=-1,
    )
    return dz, dc * f


def recurrent_cell_step_backward(dh, dc, cache_step, h_prev, x, wx, wh):
    """Returns gradients for (h_prev, c_prev, x, wx, wh, b)."""
    dz, dc_prev = _cell_backward(dh, dc, cache_step)
    x2 = np.atleast_2d(x)
    h2 = np.atleast_2d(h_prev)
    dz2 = np.atleast_2d(dz)
    return dz @ wh.T, dc_prev, dz @ wx.T, x2.T @ dz2, h2.T @ dz2, dz2.sum(axis=0)


def lstm_sequence(xw, mask, h0, c0, wh, reverse: bool = False):
    """Run the cell over a padded batch.

    ``xw`` is the precomputed input projection ``x @ wx + b`` of shape
    ``(B, S, 4H)``; ``mask`` is ``(B, S)`` with 1 for real tokens. Padded
    positions carry the previous state through unchanged, so a reversed
    pass over right-padded input starts from ``h0`` at each true end.
    """
    steps = xw.shape[1]
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    h, c = h0, c0
    hs = np.empty(xw.shape[:2] + (h0.shape[-1],), dtype=DTYPE)
    caches = [None] * steps
    h_prevs = np.empty_like(hs)
    for t in order:
        m = mask[:, t, None]
        h_prevs[:, t] = h
        hn, cn, cache = _cell(xw[:, t] + h @ wh, c)
        h = m * hn + (1.0 - m) * h
        c = m * cn + (1.0 - m) * c
        hs[:, t] = h
        caches[t] = cache
    return hs, (caches, h_prevs, mask, reverse, wh)


def lstm_sequence_backward(dhs, cache, dh_last=None, dc_last=None):
    """Returns (dxw, dh0, dc0, dwh)."""
    caches, h_prevs, mask, reverse, wh = cache
    steps = dhs.shape[1]
    order = range(steps) if reverse else range(steps - 1, -1, -1)
    dh = np.zeros_like(dhs[:, 0]) if dh_last is None else dh_last.copy()
    dc = np.zeros_like(dhs[:, 0]) if dc_last is None else dc_last.copy()
    dxw = np.empty(dhs.shape[:2] + (wh.shape[1],), dtype=DTYPE)
    for t in order:
        m = mask[:, t, None]
        dh = dh + dhs[:, t]
        dz, dc_prev = _cell_backward(m * dh, m * dc, caches[t])
        dxw[:, t] = dz
        dh = (1.0 - m) * dh + dz @ wh.T
        dc = (1.0 - m) * dc + dc_prev
    hidden = wh.shape[0]
    dwh = h_prevs.reshape(-1, hidden).T @ dxw.reshape(-1, 4 * hidden)
    return dxw, dh, dc, dwh


# ---------------------------------------------------------------- attention


def mlp_attention(query, memory, wq, wk, b, v, mask=None):
    """Additive attention: ``score_i = v . tanh(q wq + s_i wk + b)``.

    ``query`` is ``(B, T, Hq)`` and ``memory`` ``(B, S, Hm)``; unbatched
    ``(Hq,)`` / ``(S, Hm)`` inputs are accepted too. Returns the context
    vectors, the attention weights and a cache for the backward pass.
    """
    single = query.ndim == 1
    if single:
        query, memory = query[None, None], memory[None]
        mask = None if mask is None else np.asarray(mask)[None]
    if memory.shape[1] == 0:
        raise ValueError("attention over an empty encoder sequence")
    keys = memory @ wk
    pre = np.tanh((query @ wq)[:, :, None, :] + keys[:, None, :, :] + b)
    scores = pre @ v
    if mask is not None:
        scores = np.where(mask[:, None, :] > 0, scores, -1e30)
    weights = softmax(scores)
    context = weights @ memory
    cache = (query, memory, pre, weights, wq, wk, v)
    if single:
        return context[0, 0], weights[0, 0], cache
    return context, weights, cache


def mlp_attention_backward(dcontext, cache):
    """Returns (dquery, dmemory, dwq, dwk, db, dv) for the batched form."""
    query, memory, pre, weights, wq, wk, v = cache
    dweights = dcontext @ memory.transpose(0, 2, 1)
    dmemory = weights.transpose(0, 2, 1) @ dcontext
    dscores = weights * (dweights - (dweights * weights).sum(axis=-1, keepdims=True))
    dv = np.einsum("bts,btsa->a", dscores, pre)
    dpre = dscores[..., None] * v * (1.0 - pre**2)
    dq = dpre.sum(axis=2)
    dk = dpre.sum(axis=1)
    db = dq.sum(axis=(0, 1))
    hq = query.shape[-1]
    hm = memory.shape[-1]
    dwq = query.reshape(-1, hq).T @ dq.reshape(-1, dq.shape[-1])
    dwk = memory.reshape(-1, hm).T @ dk.reshape(-1, dk.shape[-1])
    return dq @ wq.T, dmemory + dk @ wk.T, dwq, dwk, db, dv


# ---------------------------------------------------------------- dropout


def dropout_mask(rng: Optional[np.random.Generator], shape, p: float):
    """Inverted dropout mask, or ``None`` when dropout is inactive."""
    if rng is None or p <= 0.0:
        return None
    keep = rng.random(shape) >= p
    return keep.astype(DTYPE) / (1.0 - p)


def apply_mask(x, mask):
    return x if mask is None else x * mask


# ---------------------------------------------------------------- parameters


def uniform_init(rng, shape, scale):
    return rng.uniform(-scale, scale, size=shape).astype(DTYPE)


def fan_in_init(rng, shape):
    return uniform_init(rng, shape, 1.0 / np.sqrt(shape[0]))


class ParamStore:
    """Named parameters with gradients and Adam moment estimates."""

    def __init__(self):
        self.params: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self.grads: Dict[str, np.ndarray] = {}
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.ascontiguousarray(value, dtype=DTYPE)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> Iterable[str]:
        return self.params.keys()

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def accumulate(self, name: str, grad: np.ndarray):
        self.grads[name] += grad

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float((g * g).sum()) for g in self.grads.values())))

    def clip_grads(self, max_norm: float = CLIP_NORM) -> float:
        norm = self.grad_norm()
        if norm > max_norm:
            scale = max_norm / (norm + 1e-12)
            for g in self.grads.values():
                g *= scale
        return norm

    def adam_step(
        self,
        lr: float,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
        grads: Optional[Dict[str, np.ndarray]] = None,
    ):
        """In-place Adam update with bias correction, using stored or given gradients."""
        grads = self.grads if grads is None else grads
        for name in self.params:
            if not np.all(np.isfinite(grads[name])):
                raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
        self.step += 1
        corr1 = 1.0 - beta1**self.step
        corr2 = 1.0 - beta2**self.step
        for name, p in self.params.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load(self, values: Dict[str, np.ndarray]):
        for name, p in self.params.items():
            if values[name].shape != p.shape:
                raise DimensionError(f"{name}: shape {values[name].shape} != {p.shape}")
            p[...] = values[name]

    def reset_optimizer(self):
        for name in self.params:
            self.m[name].fill(0.0)
            self.v[name].fill(0.0)
        self.step = 0


def numerical_gradient(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of scalar ``f()`` with respect to ``x`` (mutated in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def gradient_agreement(analytic, numeric, atol=1e-3, rtol=1e-4) -> Tuple[float, bool]:
    """Fraction of coordinates within ``rtol`` relative error, and whether all pass ``atol|rtol``."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = diff / np.maximum(scale, 1e-12)
    close_rel = (rel <= rtol) | (diff <= 1e-8)
    return float(close_rel.mean()), bool(np.all((diff <= atol) | (rel <= rtol)))
