#!/usr/bin/env python3
# -*- coding: utf-8 -*-

##################################################################################################
# Copyright (c) 2023-2026, Laboratorio de Microprocesadores
# Facultad de Ciencias Exactas y Tecnología, Universidad Nacional de Tucumán
# https://www.microprocesadores.unt.edu.ar/
#
# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2026, Esteban Volentini <evolentini@herrera.unt.edu.ar>
##################################################################################################

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import erf
from scipy.stats import truncnorm

from .errors import ModelError
from .corpus import NER_TAGS

Params = Dict[str, np.ndarray]

INIT_STD = 0.02
SQRT_HALF = math.sqrt(0.5)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

PRESETS = {
    "desk": dict(n_layers=2, hidden=64, n_heads=4, ffn_size=256),
    "small": dict(n_layers=6, hidden=768, n_heads=12, ffn_size=3072),
    "base": dict(n_layers=12, hidden=768, n_heads=12, ffn_size=3072),
}


class Head(Enum):
    MLM = "mlm"
    CLASSIFY = "classify"


class TaskKind(Enum):
    UPOS = "upos"
    FPOS = "fpos"
    NER = "ner"
    DEP_BRACKET = "dep-bracket"


@dataclass(frozen=True)
class LabelSet:
    labels: Tuple[str, ...]
    kind: TaskKind

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("label set contains duplicated labels")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @classmethod
    def ner(cls) -> "LabelSet":
        return cls(NER_TAGS, TaskKind.NER)

    def to_dict(self) -> Dict:
        return {"kind": self.kind.value, "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, data: Dict) -> "LabelSet":
        return cls(tuple(data["labels"]), TaskKind(data["kind"]))


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    hidden: int = 64
    n_heads: int = 4
    ffn_size: int = 256
    max_positions: int = 128
    dropout: float = 0.1
    layer_norm_eps: float = 1e-12
    n_labels: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "n_layers", "hidden", "n_heads", "ffn_size", "max_positions"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive, got {getattr(self, name)}")
        if self.hidden % self.n_heads:
            raise ModelError(
                f"hidden size {self.hidden} is not divisible by {self.n_heads} heads"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.n_labels < 0:
            raise ModelError(f"n_labels must be non-negative, got {self.n_labels}")

    @property
    def head_size(self) -> int:
        return self.hidden // self.n_heads

    @classmethod
    def preset(cls, name: str, **overrides) -> "ModelConfig":
        if name not in PRESETS:
            raise ModelError(f"unknown model preset '{name}', use one of {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def to_dict(self) -> Dict:
        return asdict(self)


def parameter_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    h, f = config.hidden, config.ffn_size
    shapes = {
        "embeddings.token": (config.vocab_size, h),
        "embeddings.position": (config.max_positions, h),
    }
    for layer in range(config.n_layers):
        prefix = f"layers.{layer}."
        for projection in ("query", "key", "value", "output"):
            shapes[f"{prefix}attention.{projection}.weight"] = (h, h)
            shapes[f"{prefix}attention.{projection}.bias"] = (h,)
        shapes[f"{prefix}attention.norm.scale"] = (h,)
        shapes[f"{prefix}attention.norm.offset"] = (h,)
        shapes[f"{prefix}ffn.inner.weight"] = (h, f)
        shapes[f"{prefix}ffn.inner.bias"] = (f,)
        shapes[f"{prefix}ffn.outer.weight"] = (f, h)
        shapes[f"{prefix}ffn.outer.bias"] = (h,)
        shapes[f"{prefix}ffn.norm.scale"] = (h,)
        shapes[f"{prefix}ffn.norm.offset"] = (h,)
    shapes["mlm.bias"] = (config.vocab_size,)
    shapes["classifier.weight"] = (config.n_labels, h)
    shapes["classifier.bias"] = (config.n_labels,)
    return shapes


def _initial(name: str, shape, rng: np.random.Generator, dtype) -> np.ndarray:
    if name.endswith(".scale"):
        return np.ones(shape, dtype=dtype)
    if name.endswith((".bias", ".offset")) or 0 in shape:
        return np.zeros(shape, dtype=dtype)
    values = truncnorm.rvs(-2.0, 2.0, scale=INIT_STD, size=shape, random_state=rng)
    return np.asarray(values, dtype=dtype)


def init_model(config: ModelConfig, seed: int, dtype=np.float32) -> Params:
    rng = np.random.default_rng(seed)
    return {
        name: _initial(name, shape, rng, dtype)
        for name, shape in parameter_shapes(config).items()
    }


def attach_classifier(
    params: Params, config: ModelConfig, n_labels: int, seed: int
) -> Tuple[Params, ModelConfig]:
    config = replace(config, n_labels=n_labels)
    rng = np.random.default_rng(seed)
    dtype = params["embeddings.token"].dtype
    params = dict(params)
    shape = (n_labels, config.hidden)
    params["classifier.weight"] = _initial("classifier.weight", shape, rng, dtype)
    params["classifier.bias"] = np.zeros((n_labels,), dtype=dtype)
    return params, config


@dataclass
class LabeledBatch:
    input_ids: np.ndarray
    attention_mask: np.ndarray
    labels: np.ndarray
    word_start: np.ndarray


@dataclass
class ForwardResult:
    hidden: np.ndarray
    logits: np.ndarray
    attention: List[np.ndarray] = field(default_factory=list)


@dataclass
class _Trunk:
    input_ids: np.ndarray
    dropout: Optional[np.ndarray]
    layers: List[Dict] = field(default_factory=list)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * SQRT_HALF))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * SQRT_HALF)) + x * np.exp(-0.5 * x * x) * INV_SQRT_2PI


def _layer_norm(x, scale, offset, eps):
    centered = x - x.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv
    return normed * scale + offset, (normed, inv)


def _layer_norm_backward(dy, scale, cache):
    normed, inv = cache
    width = dy.shape[-1]
    d_scale = (dy * normed).reshape(-1, width).sum(axis=0)
    d_offset = dy.reshape(-1, width).sum(axis=0)
    d_normed = dy * scale
    dx = inv * (
        d_normed
        - d_normed.mean(axis=-1, keepdims=True)
        - normed * (d_normed * normed).mean(axis=-1, keepdims=True)
    )
    return dx, d_scale, d_offset


def _dropout(rng, shape, rate, dtype) -> Optional[np.ndarray]:
    if rng is None or rate <= 0.0:
        return None
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / dtype.type(1.0 - rate)


def _check(params: Params, config: ModelConfig, input_ids, attention_mask):
    ids = np.asarray(input_ids)
    if ids.ndim != 2:
        raise ModelError(f"input ids must be a [batch, seq] matrix, got shape {ids.shape}")
    if ids.shape[1] > config.max_positions:
        raise ModelError(
            f"sequence length {ids.shape[1]} exceeds max_positions {config.max_positions}"
        )
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise ModelError(f"input ids must lie in [0, {config.vocab_size})")
    mask = ids != 0 if attention_mask is None else np.asarray(attention_mask, dtype=bool)
    if mask.shape != ids.shape:
        raise ModelError(f"attention mask shape {mask.shape} does not match ids {ids.shape}")
    if ids.size and not mask.any(axis=1).all():
        raise ModelError("every row needs at least one attended position")
    for name, shape in parameter_shapes(config).items():
        if name not in params:
            raise ModelError(f"missing parameter '{name}'")
        if params[name].shape != shape:
            raise ModelError(
                f"parameter '{name}' has shape {params[name].shape}, expected {shape}"
            )
    return ids, mask


def _layer_forward(params, prefix, x, mask_bias, config, rng):
    batch, length, hidden = x.shape
    heads, size = config.n_heads, config.head_size
    scale = 1.0 / math.sqrt(size)
    p = lambda name: params[prefix + name]

    def split(t):
        return t.reshape(batch, length, heads, size).transpose(0, 2, 1, 3)

    q = split(x @ p("attention.query.weight") + p("attention.query.bias"))
    k = split(x @ p("attention.key.weight") + p("attention.key.bias"))
    v = split(x @ p("attention.value.weight") + p("attention.value.bias"))

    scores = (q @ k.transpose(0, 1, 3, 2)) * scale + mask_bias
    probs = softmax(scores)
    context = (probs @ v).transpose(0, 2, 1, 3).reshape(batch, length, hidden)

    attended = context @ p("attention.output.weight") + p("attention.output.bias")
    drop_attention = _dropout(rng, attended.shape, config.dropout, x.dtype)
    if drop_attention is not None:
        attended = attended * drop_attention
    normed, norm_attention = _layer_norm(
        x + attended, p("attention.norm.scale"), p("attention.norm.offset"), config.layer_norm_eps
    )

    inner = normed @ p("ffn.inner.weight") + p("ffn.inner.bias")
    activated = _gelu(inner)
    outer = activated @ p("ffn.outer.weight") + p("ffn.outer.bias")
    drop_ffn = _dropout(rng, outer.shape, config.dropout, x.dtype)
    if drop_ffn is not None:
        outer = outer * drop_ffn
    out, norm_ffn = _layer_norm(
        normed + outer, p("ffn.norm.scale"), p("ffn.norm.offset"), config.layer_norm_eps
    )

    cache = dict(
        x=x, q=q, k=k, v=v, probs=probs, context=context,
        drop_attention=drop_attention, norm_attention=norm_attention, normed=normed,
        inner=inner, activated=activated, drop_ffn=drop_ffn, norm_ffn=norm_ffn,
    )
    return out, cache


def _layer_backward(params, grads, prefix, d_out, cache, config):
    batch, length, hidden = d_out.shape
    heads, size = config.n_heads, config.head_size
    scale = 1.0 / math.sqrt(size)
    p = lambda name: params[prefix + name]

    def accumulate(name, inputs, d_outputs):
        grads[prefix + name + ".weight"] += (
            inputs.reshape(-1, inputs.shape[-1]).T @ d_outputs.reshape(-1, d_outputs.shape[-1])
        )
        grads[prefix + name + ".bias"] += d_outputs.reshape(-1, d_outputs.shape[-1]).sum(axis=0)

    def merge(t):
        return t.transpose(0, 2, 1, 3).reshape(batch, length, hidden)

    d_residual, d_scale, d_offset = _layer_norm_backward(
        d_out, p("ffn.norm.scale"), cache["norm_ffn"]
    )
    grads[prefix + "ffn.norm.scale"] += d_scale
    grads[prefix + "ffn.norm.offset"] += d_offset

    d_outer = d_residual if cache["drop_ffn"] is None else d_residual * cache["drop_ffn"]
    accumulate("ffn.outer", cache["activated"], d_outer)
    d_inner = (d_outer @ p("ffn.outer.weight").T) * _gelu_grad(cache["inner"])
    accumulate("ffn.inner", cache["normed"], d_inner)
    d_normed = d_residual + d_inner @ p("ffn.inner.weight").T

    d_residual, d_scale, d_offset = _layer_norm_backward(
        d_normed, p("attention.norm.scale"), cache["norm_attention"]
    )
    grads[prefix + "attention.norm.scale"] += d_scale
    grads[prefix + "attention.norm.offset"] += d_offset

    d_attended = (
        d_residual if cache["drop_attention"] is None else d_residual * cache["drop_attention"]
    )
    accumulate("attention.output", cache["context"], d_attended)
    d_context = (d_attended @ p("attention.output.weight").T).reshape(
        batch, length, heads, size
    ).transpose(0, 2, 1, 3)

    probs = cache["probs"]
    d_probs = d_context @ cache["v"].transpose(0, 1, 3, 2)
    d_v = probs.transpose(0, 1, 3, 2) @ d_context
    d_scores = probs * (d_probs - (d_probs * probs).sum(axis=-1, keepdims=True))
    d_q = merge(d_scores @ cache["k"] * scale)
    d_k = merge(d_scores.transpose(0, 1, 3, 2) @ cache["q"] * scale)
    d_v = merge(d_v)

    d_x = d_residual
    for name, d_projection in (("query", d_q), ("key", d_k), ("value", d_v)):
        accumulate(f"attention.{name}", cache["x"], d_projection)
        d_x = d_x + d_projection @ p(f"attention.{name}.weight").T
    return d_x


def _encode(params: Params, config: ModelConfig, input_ids, attention_mask, rng=None):
    ids, mask = _check(params, config, input_ids, attention_mask)
    length = ids.shape[1]
    dtype = params["embeddings.token"].dtype

    x = params["embeddings.token"][ids] + params["embeddings.position"][:length]
    drop = _dropout(rng, x.shape, config.dropout, dtype)
    if drop is not None:
        x = x * drop
    mask_bias = np.where(mask[:, None, None, :], 0.0, -np.inf).astype(dtype)

    trunk = _Trunk(input_ids=ids, dropout=drop)
    for layer in range(config.n_layers):
        x, cache = _layer_forward(params, f"layers.{layer}.", x, mask_bias, config, rng)
        if not np.isfinite(x).all():
            raise ModelError(f"non-finite activations in layer {layer}")
        trunk.layers.append(cache)
    return x, trunk


def _encode_backward(params, grads, config, d_hidden, trunk: _Trunk):
    d_x = d_hidden
    for layer in reversed(range(config.n_layers)):
        d_x = _layer_backward(params, grads, f"layers.{layer}.", d_x, trunk.layers[layer], config)
        if not np.isfinite(d_x).all():
            raise ModelError(f"non-finite gradients in layer {layer}")
    if trunk.dropout is not None:
        d_x = d_x * trunk.dropout
    np.add.at(grads["embeddings.token"], trunk.input_ids, d_x)
    grads["embeddings.position"][: d_x.shape[1]] += d_x.sum(axis=0)


def _head_logits(params: Params, hidden: np.ndarray, head: Head) -> np.ndarray:
    if head == Head.MLM:
        return hidden @ params["embeddings.token"].T + params["mlm.bias"]
    if params["classifier.weight"].shape[0] == 0:
        raise ModelError("model has no classifier head, attach one before fine-tuning")
    return hidden @ params["classifier.weight"].T + params["classifier.bias"]


def forward(
    params: Params,
    config: ModelConfig,
    input_ids,
    attention_mask=None,
    head: Head = Head.MLM,
    rng: Optional[np.random.Generator] = None,
) -> ForwardResult:
    hidden, trunk = _encode(params, config, input_ids, attention_mask, rng)
    return ForwardResult(
        hidden=hidden,
        logits=_head_logits(params, hidden, head),
        attention=[cache["probs"] for cache in trunk.layers],
    )


def _cross_entropy(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    log_probs = _log_softmax(logits)
    rows = np.arange(len(targets))
    loss = -float(log_probs[rows, targets].sum())
    d_logits = np.exp(log_probs)
    d_logits[rows, targets] -= 1.0
    return loss, d_logits


def mlm_loss(logits, target_ids, loss_mask) -> Tuple[float, float]:
    mask = np.asarray(loss_mask, dtype=bool)
    if not mask.any():
        raise ModelError("loss mask selects no position")
    loss, _ = _cross_entropy(np.asarray(logits)[mask], np.asarray(target_ids)[mask])
    loss /= int(mask.sum())
    return loss, math.exp(loss)


def _selected_labels(labels, word_start_mask, n_labels: int) -> np.ndarray:
    targets = np.asarray(labels)[np.asarray(word_start_mask, dtype=bool)]
    if targets.size and (targets.min() < 0 or targets.max() >= n_labels):
        raise ModelError(f"label ids must lie in [0, {n_labels})")
    return targets


def classify_loss(logits, labels, word_start_mask) -> float:
    logits = np.asarray(logits)
    mask = np.asarray(word_start_mask, dtype=bool)
    targets = _selected_labels(labels, mask, logits.shape[-1])
    loss, _ = _cross_entropy(logits[mask], targets)
    return loss


def backward(
    params: Params,
    config: ModelConfig,
    batch,
    loss_kind: Head,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, Params]:
    hidden, trunk = _encode(params, config, batch.input_ids, batch.attention_mask, rng)
    grads = {name: np.zeros_like(value) for name, value in params.items()}

    if loss_kind == Head.MLM:
        mask = np.asarray(batch.loss_mask, dtype=bool)
        if not mask.any():
            raise ModelError("loss mask selects no position")
        selected = hidden[mask]
        loss, d_logits = _cross_entropy(
            _head_logits(params, selected, Head.MLM), np.asarray(batch.target_ids)[mask]
        )
        count = len(selected)
        loss, d_logits = loss / count, d_logits / count
        grads["embeddings.token"] += d_logits.T @ selected
        grads["mlm.bias"] += d_logits.sum(axis=0)
        d_selected = d_logits @ params["embeddings.token"]
    else:
        mask = np.asarray(batch.word_start, dtype=bool)
        selected = hidden[mask]
        targets = _selected_labels(batch.labels, mask, config.n_labels)
        loss, d_logits = _cross_entropy(_head_logits(params, selected, Head.CLASSIFY), targets)
        grads["classifier.weight"] += d_logits.T @ selected
        grads["classifier.bias"] += d_logits.sum(axis=0)
        d_selected = d_logits @ params["classifier.weight"]

    d_hidden = np.zeros_like(hidden)
    d_hidden[mask] = d_selected
    _encode_backward(params, grads, config, d_hidden, trunk)
    return loss, grads


def evaluate_mlm(params: Params, config: ModelConfig, batch) -> Tuple[float, int]:
    hidden, _ = _encode(params, config, batch.input_ids, batch.attention_mask)
    mask = np.asarray(batch.loss_mask, dtype=bool)
    if not mask.any():
        return 0.0, 0
    loss, _ = _cross_entropy(
        _head_logits(params, hidden[mask], Head.MLM), np.asarray(batch.target_ids)[mask]
    )
    return loss, int(mask.sum())


def predict_ids(params: Params, config: ModelConfig, batch) -> np.ndarray:
    hidden, _ = _encode(params, config, batch.input_ids, batch.attention_mask)
    mask = np.asarray(batch.word_start, dtype=bool)
    logits = _head_logits(params, hidden[mask], Head.CLASSIFY)
    return logits.argmax(axis=-1)
