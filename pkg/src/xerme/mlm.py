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

import logging
from dataclasses import dataclass
from pathlib import Path
from struct import calcsize, pack, unpack_from
from typing import Iterable, List, Sequence, Union

import numpy as np

from .errors import MaskingError
from .tokenizer import MASK_ID, SPECIALS, Vocab

logger = logging.getLogger(__name__)

MIN_SEQ_LEN = 8
BATCH_MAGIC = b"XMLB"
BATCH_HEADER = "<4sII"


@dataclass(frozen=True)
class MaskingPolicy:
    select_rate: float = 0.15
    mask_rate: float = 0.80
    random_rate: float = 0.10
    keep_rate: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.select_rate <= 1.0:
            raise MaskingError(f"select_rate must lie in [0, 1], got {self.select_rate}")
        rates = (self.mask_rate, self.random_rate, self.keep_rate)
        if any(rate < 0.0 for rate in rates):
            raise MaskingError(f"corruption rates must be non-negative, got {rates}")
        if abs(sum(rates) - 1.0) > 1e-12:
            raise MaskingError(f"mask, random and keep rates must add up to 1, got {sum(rates)}")


@dataclass
class MaskedBatch:
    input_ids: np.ndarray
    target_ids: np.ndarray
    loss_mask: np.ndarray
    attention_mask: np.ndarray

    @property
    def shape(self):
        return self.input_ids.shape

    def __len__(self) -> int:
        return self.input_ids.shape[0]


def epoch_seed(seed: int, epoch: int, step: int = 0, phase: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, phase, epoch, step])


def pack_sequences(
    token_streams: Iterable[Sequence[int]],
    seq_len: int,
    vocab: Vocab,
    break_documents: bool = False,
) -> np.ndarray:
    if seq_len < MIN_SEQ_LEN:
        raise MaskingError(f"seq_len must be at least {MIN_SEQ_LEN}, got {seq_len}")
    content = seq_len - 2

    streams = [list(stream) for stream in token_streams]
    if not break_documents:
        streams = [[id for stream in streams for id in stream]]

    rows = []
    for stream in streams:
        for start in range(0, len(stream), content):
            chunk = stream[start : start + content]
            row = [vocab.cls_id] + chunk + [vocab.sep_id]
            rows.append(row + [vocab.pad_id] * (seq_len - len(row)))
    return np.array(rows, dtype=np.int32).reshape(len(rows), seq_len)


def mask_batch(
    rows: np.ndarray, vocab: Vocab, policy: MaskingPolicy, rng_seed
) -> MaskedBatch:
    rows = np.asarray(rows, dtype=np.int32)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise MaskingError("mask_batch needs a non-empty [batch, seq_len] matrix")
    if vocab.size <= MASK_ID or vocab.piece(MASK_ID) != SPECIALS[MASK_ID]:
        raise MaskingError("vocabulary has no [MASK] token")
    first_regular = len(SPECIALS)
    if vocab.size <= first_regular:
        raise MaskingError("vocabulary has no regular pieces to draw random words from")

    rng = np.random.default_rng(rng_seed)
    eligible = ~np.isin(rows, [vocab.pad_id, vocab.cls_id, vocab.sep_id, vocab.mask_id])
    selected = (rng.random(rows.shape) < policy.select_rate) & eligible
    action = rng.random(rows.shape)
    random_ids = rng.integers(first_regular, vocab.size, size=rows.shape, dtype=np.int32)

    to_mask = selected & (action < policy.mask_rate)
    to_random = selected & ~to_mask & (action < policy.mask_rate + policy.random_rate)

    inputs = rows.copy()
    inputs[to_mask] = vocab.mask_id
    inputs[to_random] = random_ids[to_random]
    return MaskedBatch(
        input_ids=inputs,
        target_ids=rows.copy(),
        loss_mask=selected,
        attention_mask=rows != vocab.pad_id,
    )


def dump_batch(batch: MaskedBatch, path: Union[str, Path]):
    rows, seq_len = batch.shape
    frame = pack(BATCH_HEADER, BATCH_MAGIC, rows, seq_len)
    for matrix in (batch.input_ids, batch.target_ids, batch.loss_mask):
        frame = frame + np.ascontiguousarray(matrix, dtype="<i4").tobytes()
    Path(path).write_bytes(frame)


def load_batch(path: Union[str, Path], vocab: Vocab) -> MaskedBatch:
    frame = Path(path).read_bytes()
    if len(frame) < calcsize(BATCH_HEADER):
        raise MaskingError(f"{path}: truncated batch dump")
    magic, rows, seq_len = unpack_from(BATCH_HEADER, frame)
    if magic != BATCH_MAGIC:
        raise MaskingError(f"{path}: not a batch dump")
    count = rows * seq_len
    data = np.frombuffer(frame, dtype="<i4", offset=calcsize(BATCH_HEADER))
    if data.size != 3 * count:
        raise MaskingError(f"{path}: expected {3 * count} ids, found {data.size}")
    matrices: List[np.ndarray] = [
        data[i * count : (i + 1) * count].reshape(rows, seq_len).astype(np.int32)
        for i in range(3)
    ]
    return MaskedBatch(
        input_ids=matrices[0],
        target_ids=matrices[1],
        loss_mask=matrices[2].astype(bool),
        attention_mask=matrices[1] != vocab.pad_id,
    )
