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

import numpy as np
import pytest

from xerme.checkpoint import (
    ModelCheckpoint,
    _checksum,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from xerme.errors import CheckpointError
from xerme.model import LabelSet, ModelConfig, TaskKind, attach_classifier, init_model
from xerme.optim import AdamState, OptimizerConfig

from tests.utils import make_vocab

VOCAB = make_vocab(["a", "b", "##a", "##b", "ab"])
CONFIG = ModelConfig(vocab_size=VOCAB.size, n_layers=1, hidden=8, n_heads=2, ffn_size=16,
                     max_positions=16)


def checkpoint(with_adam: bool = True) -> ModelCheckpoint:
    params = init_model(CONFIG, 3)
    adam = None
    if with_adam:
        adam = AdamState.zeros(params)
        for name in params:
            adam.m[name] += 0.5
            adam.v[name] += 0.25
        adam.step = 12
    return ModelCheckpoint(
        config=CONFIG,
        params=params,
        vocab_fingerprint=VOCAB.fingerprint,
        optimizer=OptimizerConfig(learning_rate=1e-3, total_steps=50),
        adam=adam,
        step=12,
        rng_state=np.random.default_rng(9).bit_generator.state,
        progress={"phase": 0, "phase_step": 12, "loss_sum": 4.5, "loss_count": 3},
    )


def test_checksum_is_crc32():
    assert _checksum.crc.checksum(b"123456789") == 0xCBF43926


def test_save_and_load(tmp_path):
    original = checkpoint()
    save_checkpoint(original, tmp_path / "model.ckpt")
    assert not (tmp_path / "model.ckpt.partial").exists()

    loaded = load_checkpoint(tmp_path / "model.ckpt", VOCAB)
    assert loaded.config == CONFIG
    assert loaded.optimizer == original.optimizer
    assert loaded.step == 12
    assert loaded.progress == original.progress
    assert loaded.rng_state == original.rng_state
    assert list(loaded.params) == list(original.params)
    for name, value in original.params.items():
        assert np.array_equal(loaded.params[name], value)
    assert loaded.params["classifier.weight"].shape == (0, 8)
    assert np.all(loaded.adam.m["embeddings.token"] == 0.5)
    assert loaded.adam.step == 12


def test_checkpoint_with_task_head():
    params, config = attach_classifier(init_model(CONFIG, 3), CONFIG, 4, seed=1)
    labels = LabelSet(("A", "B", "C", "D"), TaskKind.UPOS)
    ckpt = ModelCheckpoint(config, params, VOCAB.fingerprint, label_set=labels)
    loaded = decode_checkpoint(encode_checkpoint(ckpt))
    assert loaded.config.n_labels == 4
    assert loaded.label_set == labels
    assert loaded.adam is None
    assert np.array_equal(loaded.params["classifier.weight"], params["classifier.weight"])


def test_encoding_is_deterministic():
    assert encode_checkpoint(checkpoint()) == encode_checkpoint(checkpoint())


def test_vocabulary_mismatch(tmp_path):
    save_checkpoint(checkpoint(), tmp_path / "model.ckpt")
    with pytest.raises(CheckpointError, match="does not match"):
        load_checkpoint(tmp_path / "model.ckpt", make_vocab(["a"]))


def test_truncated_file():
    frame = encode_checkpoint(checkpoint(with_adam=False))
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(frame[:-1])
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(frame[:6])
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(frame[:40])


def test_corrupted_header():
    frame = bytearray(encode_checkpoint(checkpoint(with_adam=False)))
    frame[20] ^= 0xFF
    with pytest.raises(CheckpointError, match="checksum mismatch"):
        decode_checkpoint(bytes(frame))


def test_not_a_checkpoint(tmp_path):
    (tmp_path / "vocab.txt").write_text("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\n")
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(tmp_path / "vocab.txt")
    with pytest.raises(CheckpointError, match="missing.ckpt"):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_reencoding_is_byte_identical():
    frame = encode_checkpoint(checkpoint())
    assert encode_checkpoint(decode_checkpoint(frame)) == frame


def test_interrupted_save_keeps_previous_checkpoint(tmp_path, mocker):
    path = tmp_path / "model.ckpt"
    save_checkpoint(checkpoint(), path)
    previous = path.read_bytes()

    later = checkpoint()
    later.step = 30
    mocker.patch("xerme.checkpoint.os.replace", side_effect=OSError("disk full"))
    with pytest.raises(OSError):
        save_checkpoint(later, path)
    assert path.read_bytes() == previous
    assert load_checkpoint(path, VOCAB).step == 12
