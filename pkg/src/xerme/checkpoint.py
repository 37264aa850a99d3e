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

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from struct import calcsize, pack, unpack_from
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from crc import Calculator, Configuration

from .errors import CheckpointError
from .model import LabelSet, ModelConfig, Params
from .optim import AdamState, OptimizerConfig
from .tokenizer import Vocab

logger = logging.getLogger(__name__)

MAGIC = b"XRMC"
VERSION = 1
# magic, version, header length, manifest length
PREAMBLE = "<4sHII"
CHECKSUM = "<I"

CRC32 = Configuration(
    width=32,
    polynomial=0x04C11DB7,
    init_value=0xFFFFFFFF,
    final_xor_value=0xFFFFFFFF,
    reverse_input=True,
    reverse_output=True,
)

GROUPS = ("param", "adam.m", "adam.v")


def canonical_json(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode("ascii")


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    params: Params
    vocab_fingerprint: int
    optimizer: Optional[OptimizerConfig] = None
    adam: Optional[AdamState] = None
    step: int = 0
    rng_state: Optional[Dict] = None
    label_set: Optional[LabelSet] = None
    # trainer bookkeeping needed to resume: phase index, steps into phase, running losses
    progress: Dict = field(default_factory=dict)

    def header(self) -> Dict:
        return {
            "config": self.config.to_dict(),
            "label_set": None if self.label_set is None else self.label_set.to_dict(),
            "vocab_fingerprint": f"{self.vocab_fingerprint:016x}",
            "optimizer": None if self.optimizer is None else self.optimizer.to_dict(),
            "step": self.step,
            "rng_state": self.rng_state,
            "progress": self.progress,
        }

    def tensors(self) -> List[Tuple[str, str, np.ndarray]]:
        tensors = [("param", name, value) for name, value in self.params.items()]
        if self.adam is not None:
            tensors += [("adam.m", name, value) for name, value in self.adam.m.items()]
            tensors += [("adam.v", name, value) for name, value in self.adam.v.items()]
        return tensors


class _Checksum:
    def __init__(self) -> None:
        self._crc = None

    @property
    def crc(self) -> Calculator:
        if self._crc is None:
            self._crc = Calculator(CRC32)
        return self._crc


_checksum = _Checksum()


def encode_checkpoint(ckpt: ModelCheckpoint) -> bytes:
    tensors = ckpt.tensors()
    header = canonical_json(ckpt.header())
    manifest = canonical_json([[group, name, list(value.shape)] for group, name, value in tensors])
    frame = pack(PREAMBLE, MAGIC, VERSION, len(header), len(manifest)) + header + manifest
    frame = frame + pack(CHECKSUM, _checksum.crc.checksum(frame))
    payload = b"".join(
        np.ascontiguousarray(value, dtype="<f4").tobytes() for _, _, value in tensors
    )
    return frame + payload


def save_checkpoint(ckpt: ModelCheckpoint, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    partial.write_bytes(encode_checkpoint(ckpt))
    os.replace(partial, path)
    logger.info("checkpoint at step %d written to %s", ckpt.step, path)


def decode_checkpoint(frame: bytes, source: str = "checkpoint") -> ModelCheckpoint:
    if len(frame) < calcsize(PREAMBLE):
        raise CheckpointError(f"{source}: truncated file")
    magic, version, header_size, manifest_size = unpack_from(PREAMBLE, frame)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported version {version}, expected {VERSION}")

    offset = calcsize(PREAMBLE) + header_size + manifest_size
    if len(frame) < offset + calcsize(CHECKSUM):
        raise CheckpointError(f"{source}: truncated file")
    (expected,) = unpack_from(CHECKSUM, frame, offset)
    if _checksum.crc.checksum(frame[:offset]) != expected:
        raise CheckpointError(f"{source}: header checksum mismatch")

    start = calcsize(PREAMBLE)
    try:
        header = json.loads(frame[start : start + header_size])
        manifest = json.loads(frame[start + header_size : offset])
    except ValueError as error:
        raise CheckpointError(f"{source}: corrupted header ({error})") from error

    offset += calcsize(CHECKSUM)
    size = sum(4 * int(np.prod(shape)) for _, _, shape in manifest)
    if len(frame) - offset != size:
        raise CheckpointError(
            f"{source}: truncated file, expected {size} tensor bytes, found {len(frame) - offset}"
        )

    groups: Dict[str, Params] = {group: {} for group in GROUPS}
    for group, name, shape in manifest:
        count = int(np.prod(shape))
        if count == 0:
            groups[group][name] = np.zeros(shape, dtype=np.float32)
            continue
        data = np.frombuffer(frame, dtype="<f4", count=count, offset=offset)
        groups[group][name] = data.reshape(shape).astype(np.float32)
        offset += 4 * count

    adam = None
    if groups["adam.m"]:
        adam = AdamState(groups["adam.m"], groups["adam.v"], header["step"])
    return ModelCheckpoint(
        config=ModelConfig(**header["config"]),
        params=groups["param"],
        vocab_fingerprint=int(header["vocab_fingerprint"], 16),
        optimizer=None if header["optimizer"] is None else OptimizerConfig(**header["optimizer"]),
        adam=adam,
        step=header["step"],
        rng_state=header["rng_state"],
        label_set=None if header["label_set"] is None else LabelSet.from_dict(header["label_set"]),
        progress=header["progress"],
    )


def load_checkpoint(path: Union[str, Path], vocab: Optional[Vocab] = None) -> ModelCheckpoint:
    path = Path(path)
    try:
        frame = path.read_bytes()
    except OSError as error:
        raise CheckpointError(f"{path}: {error.strerror}") from error
    ckpt = decode_checkpoint(frame, str(path))
    if vocab is not None and vocab.fingerprint != ckpt.vocab_fingerprint:
        raise CheckpointError(
            f"{path}: vocabulary fingerprint {vocab.fingerprint:016x} does not match "
            f"checkpoint fingerprint {ckpt.vocab_fingerprint:016x}"
        )
    logger.debug("checkpoint at step %d loaded from %s", ckpt.step, path)
    return ckpt
