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

import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .checkpoint import ModelCheckpoint, save_checkpoint
from .corpus import AnnotatedSentence, DocumentSet
from .errors import CorpusError, TrainingError, TreeError
from .evaluation import EvalReport, las_uas, pos_accuracy, span_f1
from .mlm import MaskedBatch, MaskingPolicy, epoch_seed, mask_batch, pack_sequences
from .model import (
    Head,
    LabeledBatch,
    LabelSet,
    ModelConfig,
    Params,
    TaskKind,
    attach_classifier,
    backward,
    evaluate_mlm,
    init_model,
    predict_ids,
)
from .optim import AdamState, OptimizerConfig, adam_step
from .tokenizer import CLS_ID, PAD_ID, SEP_ID, Vocab, encode_word, pretokenize
from .treecodec import DepTree, decode_strings, encode_tree, format_label, is_projective

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
METRICS_COLUMNS = ("step", "phase", "lr", "train_loss", "dev_loss", "dev_perplexity")
FINAL_CHECKPOINT = "model.ckpt"
CHECKPOINT_DIR = "checkpoints"

# SeedSequence streams kept apart from batch order and masking seeds
DROPOUT_STREAM = 0xD50
DEV_STREAM = 0xDE5
FINETUNE_STREAM = 0xF17


@dataclass(frozen=True)
class Phase:
    seq_len: int
    batch_size: int
    steps: int

    def __post_init__(self):
        if self.batch_size < 1 or self.steps < 0:
            raise TrainingError(
                "phase needs batch_size >= 1 and steps >= 0, "
                f"got {self.batch_size} and {self.steps}"
            )


@dataclass(frozen=True)
class PretrainSettings:
    eval_interval: int = 100
    checkpoint_interval: int = 0
    max_dev_rows: int = 256
    break_documents: bool = False

    def __post_init__(self):
        if self.eval_interval < 1:
            raise TrainingError(f"eval_interval must be positive, got {self.eval_interval}")
        if self.checkpoint_interval < 0:
            raise TrainingError("checkpoint_interval must be non-negative")


@dataclass(frozen=True)
class FinetuneSettings:
    epochs: int = 10
    batch_size: int = 16
    patience: int = 3
    max_seq_len: Optional[int] = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise TrainingError("epochs, batch_size and patience must be positive")


class MetricsLog:
    def __init__(self, path: Path, append: bool = False) -> None:
        self._path = path
        self._rows: List[Dict[str, str]] = []
        if not append or not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as file:
                csv.writer(file).writerow(METRICS_COLUMNS)

    @property
    def path(self) -> Path:
        return self._path

    @property
    def rows(self) -> List[Dict[str, str]]:
        return self._rows

    def record(self, step: int, phase: int, lr: float, train_loss, dev_loss: float) -> Dict:
        row = {
            "step": str(step),
            "phase": str(phase),
            "lr": f"{lr:.8e}",
            "train_loss": "" if train_loss is None else f"{train_loss:.6f}",
            "dev_loss": f"{dev_loss:.6f}",
            "dev_perplexity": f"{math.exp(dev_loss):.6f}",
        }
        with open(self._path, "a", newline="", encoding="utf-8") as file:
            csv.writer(file).writerow([row[name] for name in METRICS_COLUMNS])
        self._rows.append(row)
        return row


def read_metrics(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as file:
        return list(csv.DictReader(file))


def document_streams(docs: DocumentSet, vocab: Vocab) -> List[List[int]]:
    streams = []
    for document in docs:
        ids = []
        for word in pretokenize(document.text):
            ids.extend(vocab.id_of(piece) for piece in encode_word(vocab, word))
        streams.append(ids)
    return streams


def _slice(batch: MaskedBatch, start: int, stop: int) -> MaskedBatch:
    return MaskedBatch(
        input_ids=batch.input_ids[start:stop],
        target_ids=batch.target_ids[start:stop],
        loss_mask=batch.loss_mask[start:stop],
        attention_mask=batch.attention_mask[start:stop],
    )


@dataclass
class PretrainResult:
    checkpoint: ModelCheckpoint
    metrics: List[Dict[str, str]]
    path: Path


class Pretrainer:
    def __init__(
        self,
        vocab: Vocab,
        model_config: ModelConfig,
        optimizer_config: OptimizerConfig,
        policy: MaskingPolicy,
        phases: Sequence[Phase],
        seed: int,
        output: Union[str, Path],
        settings: Optional[PretrainSettings] = None,
    ) -> None:
        if not phases:
            raise TrainingError("the phase plan is empty")
        longest = max(phase.seq_len for phase in phases)
        if longest > model_config.max_positions:
            raise TrainingError(
                f"phase seq_len {longest} exceeds model max_positions {model_config.max_positions}"
            )
        if model_config.vocab_size != vocab.size:
            raise TrainingError(
                f"model vocab_size {model_config.vocab_size} differs "
                f"from vocabulary size {vocab.size}"
            )
        if optimizer_config.total_steps == 0:
            optimizer_config = replace(
                optimizer_config, total_steps=sum(phase.steps for phase in phases)
            )
        self._vocab = vocab
        self._config = model_config
        self._optimizer = optimizer_config
        self._policy = policy
        self._phases = tuple(phases)
        self._seed = seed
        self._output = Path(output)
        self._settings = settings or PretrainSettings()

        self._params = init_model(model_config, seed)
        self._adam = AdamState.zeros(self._params)
        self._dropout = np.random.default_rng([seed, DROPOUT_STREAM])
        self._step = 0
        self._phase = 0
        self._phase_step = 0
        self._loss_sum = 0.0
        self._loss_count = 0
        self._last_eval = -1
        self._resumed = False

    @property
    def step(self) -> int:
        return self._step

    @property
    def params(self) -> Params:
        return self._params

    @property
    def optimizer(self) -> OptimizerConfig:
        return self._optimizer

    def restore(self, ckpt: ModelCheckpoint):
        if ckpt.config != self._config:
            raise TrainingError("checkpoint model configuration differs from the run configuration")
        if ckpt.vocab_fingerprint != self._vocab.fingerprint:
            raise TrainingError("checkpoint was trained with another vocabulary")
        if ckpt.adam is None or ckpt.rng_state is None or not ckpt.progress:
            raise TrainingError("checkpoint carries no optimizer state to resume from")
        self._params = ckpt.params
        self._adam = ckpt.adam
        self._adam.extend(self._params)
        self._dropout.bit_generator.state = ckpt.rng_state
        self._step = ckpt.step
        self._phase = ckpt.progress["phase"]
        self._phase_step = ckpt.progress["phase_step"]
        self._loss_sum = ckpt.progress["loss_sum"]
        self._loss_count = ckpt.progress["loss_count"]
        self._last_eval = ckpt.progress["last_eval"]
        self._resumed = True
        logger.info("resuming pre-training at step %d, phase %d", self._step, self._phase)

    def checkpoint(self) -> ModelCheckpoint:
        return ModelCheckpoint(
            config=self._config,
            params=self._params,
            vocab_fingerprint=self._vocab.fingerprint,
            optimizer=self._optimizer,
            adam=self._adam,
            step=self._step,
            rng_state=self._dropout.bit_generator.state,
            progress={
                "phase": self._phase,
                "phase_step": self._phase_step,
                "loss_sum": self._loss_sum,
                "loss_count": self._loss_count,
                "last_eval": self._last_eval,
                "threads": os.environ.get("OMP_NUM_THREADS", ""),
            },
        )

    def _dev_batch(self, streams: List[List[int]], phase: Phase, index: int) -> MaskedBatch:
        rows = pack_sequences(streams, phase.seq_len, self._vocab, self._settings.break_documents)
        rows = rows[: self._settings.max_dev_rows]
        if len(rows) == 0:
            raise TrainingError("dev split holds no tokens")
        seed = np.random.SeedSequence([self._seed, DEV_STREAM, index])
        return mask_batch(rows, self._vocab, self._policy, seed)

    def _dev_loss(self, batch: MaskedBatch, batch_size: int) -> float:
        total, count = 0.0, 0
        for start in range(0, len(batch), batch_size):
            nll, selected = evaluate_mlm(
                self._params, self._config, _slice(batch, start, start + batch_size)
            )
            total += nll
            count += selected
        if count == 0:
            raise TrainingError("dev batch has no masked position, the dev split is too small")
        return total / count

    def _evaluate(self, log: MetricsLog, batch: MaskedBatch, phase_index: int, batch_size: int):
        dev_loss = self._dev_loss(batch, batch_size)
        if not math.isfinite(dev_loss):
            raise TrainingError(
                f"dev loss became {dev_loss} at step {self._step} (phase {phase_index}), aborting"
            )
        train_loss = self._loss_sum / self._loss_count if self._loss_count else None
        lr = self._optimizer.learning_rate_at(self._step)
        log.record(self._step, phase_index, lr, train_loss, dev_loss)
        logger.info(
            "step %d phase %d lr %.3e train loss %s dev loss %.4f perplexity %.2f",
            self._step,
            phase_index,
            lr,
            "-" if train_loss is None else f"{train_loss:.4f}",
            dev_loss,
            math.exp(dev_loss),
        )
        self._loss_sum, self._loss_count = 0.0, 0
        self._last_eval = self._step

    def _save(self, path: Path):
        save_checkpoint(self.checkpoint(), path)

    def run(self, train: DocumentSet, dev: DocumentSet) -> PretrainResult:
        if len(train) == 0 or len(dev) == 0:
            raise TrainingError("pre-training needs non-empty train and dev splits")
        train_streams = document_streams(train, self._vocab)
        dev_streams = document_streams(dev, self._vocab)
        log = MetricsLog(self._output / METRICS_FILE, append=self._resumed)
        logger.info(
            "pre-training %d phases, %d steps, threads %s",
            len(self._phases),
            self._optimizer.total_steps,
            os.environ.get("OMP_NUM_THREADS", "default"),
        )

        dev_batch = None
        for index in range(self._phase, len(self._phases)):
            phase = self._phases[index]
            rows = pack_sequences(
                train_streams, phase.seq_len, self._vocab, self._settings.break_documents
            )
            if len(rows) == 0:
                raise TrainingError("train split holds no tokens")
            dev_batch = self._dev_batch(dev_streams, phase, index)
            if self._step == 0 and self._last_eval < 0:
                self._evaluate(log, dev_batch, index, phase.batch_size)

            per_epoch = math.ceil(len(rows) / phase.batch_size)
            order_epoch, order = None, None
            for phase_step in range(self._phase_step, phase.steps):
                epoch, position = divmod(phase_step, per_epoch)
                if epoch != order_epoch:
                    generator = np.random.default_rng(epoch_seed(self._seed, epoch, phase=index))
                    order_epoch, order = epoch, generator.permutation(len(rows))
                first = position * phase.batch_size
                selected = rows[order[first : first + phase.batch_size]]
                batch = mask_batch(
                    selected,
                    self._vocab,
                    self._policy,
                    epoch_seed(self._seed, epoch, position + 1, phase=index),
                )

                self._step += 1
                if batch.loss_mask.any():
                    loss, grads = backward(
                        self._params, self._config, batch, Head.MLM, self._dropout
                    )
                    if not math.isfinite(loss):
                        raise TrainingError(f"training loss became {loss} at step {self._step}")
                    adam_step(self._params, grads, self._adam, self._optimizer, self._step)
                    self._loss_sum += loss
                    self._loss_count += 1
                    logger.debug("step %d loss %.4f", self._step, loss)
                else:
                    logger.debug("step %d skipped, no masked position", self._step)
                self._phase_step = phase_step + 1

                if self._step % self._settings.eval_interval == 0:
                    self._evaluate(log, dev_batch, index, phase.batch_size)
                interval = self._settings.checkpoint_interval
                if interval and self._step % interval == 0:
                    self._save(self._output / CHECKPOINT_DIR / f"step-{self._step:08d}.ckpt")
            self._phase, self._phase_step = index + 1, 0

        if self._last_eval != self._step and dev_batch is not None:
            self._evaluate(log, dev_batch, len(self._phases) - 1, self._phases[-1].batch_size)
        path = self._output / FINAL_CHECKPOINT
        self._save(path)
        return PretrainResult(self.checkpoint(), log.rows, path)


def pretrain(
    train: DocumentSet,
    dev: DocumentSet,
    vocab: Vocab,
    model_config: ModelConfig,
    optimizer_config: OptimizerConfig,
    policy: MaskingPolicy,
    phases: Sequence[Phase],
    seed: int,
    output: Union[str, Path],
    settings: Optional[PretrainSettings] = None,
    resume: Optional[ModelCheckpoint] = None,
) -> PretrainResult:
    trainer = Pretrainer(
        vocab, model_config, optimizer_config, policy, phases, seed, output, settings
    )
    if resume is not None:
        trainer.restore(resume)
    return trainer.run(train, dev)


def task_labels(sentence: AnnotatedSentence, kind: TaskKind) -> Tuple[str, ...]:
    kind = TaskKind(kind)
    if kind == TaskKind.DEP_BRACKET:
        return tuple(format_label(label) for label in encode_tree(DepTree.from_sentence(sentence)))
    layer = {
        TaskKind.UPOS: sentence.upos,
        TaskKind.FPOS: sentence.fpos,
        TaskKind.NER: sentence.ner,
    }[kind]
    if layer is None:
        raise TrainingError(f"sentence has no {kind.value} layer")
    return tuple(layer)


def _labelled(sentences: Sequence[AnnotatedSentence], kind: TaskKind):
    pairs = []
    skipped = 0
    for index, sentence in enumerate(sentences):
        try:
            if kind == TaskKind.DEP_BRACKET and not is_projective(DepTree.from_sentence(sentence)):
                skipped += 1
                continue
            pairs.append((index, task_labels(sentence, kind)))
        except (TrainingError, TreeError, CorpusError) as error:
            raise TrainingError(f"sentence {index}: {error}") from error
    if skipped:
        logger.warning("%d non-projective sentences left out of training", skipped)
    return pairs


def label_set_for(kind: TaskKind, sentences: Sequence[AnnotatedSentence] = ()) -> LabelSet:
    kind = TaskKind(kind)
    if kind == TaskKind.NER:
        return LabelSet.ner()
    labels = sorted({label for _, labels in _labelled(sentences, kind) for label in labels})
    if not labels:
        raise TrainingError(f"no {kind.value} labels found in the data")
    return LabelSet(tuple(labels), kind)


@dataclass(frozen=True)
class Window:
    sentence: int
    first_word: int
    n_words: int
    ids: Tuple[int, ...]
    word_start: Tuple[bool, ...]


def sentence_windows(
    vocab: Vocab, words: Sequence[str], max_seq_len: int, sentence: int = 0
) -> List[Window]:
    # a word never spans two windows
    budget = max_seq_len - 2
    if budget < 1:
        raise TrainingError(f"max_seq_len must be at least 3, got {max_seq_len}")
    pieces = [[vocab.id_of(piece) for piece in encode_word(vocab, word)][:budget] for word in words]
    windows = []
    start = 0
    while start < len(words):
        used, end = 0, start
        while end < len(words) and used + len(pieces[end]) <= budget:
            used += len(pieces[end])
            end += 1
        ids = [CLS_ID] + [id for word in pieces[start:end] for id in word] + [SEP_ID]
        starts = [i == 0 for word in pieces[start:end] for i in range(len(word))]
        starts = [False] + starts + [False]
        windows.append(Window(sentence, start, end - start, tuple(ids), tuple(starts)))
        start = end
    return windows


def labeled_batch(
    windows: Sequence[Window], labels: Optional[Sequence[Sequence[int]]] = None
) -> LabeledBatch:
    width = max(len(window.ids) for window in windows)
    ids = np.full((len(windows), width), PAD_ID, dtype=np.int32)
    attention = np.zeros((len(windows), width), dtype=bool)
    word_start = np.zeros((len(windows), width), dtype=bool)
    label_ids = np.full((len(windows), width), -1, dtype=np.int64)
    for row, window in enumerate(windows):
        ids[row, : len(window.ids)] = window.ids
        attention[row, : len(window.ids)] = True
        word_start[row, : len(window.ids)] = window.word_start
        if labels is not None:
            label_ids[row, np.flatnonzero(word_start[row])] = labels[row]
    return LabeledBatch(ids, attention, label_ids, word_start)


def _predict_windows(
    params: Params, config: ModelConfig, windows: List[Window], batch_size: int
) -> List[np.ndarray]:
    predictions = []
    for start in range(0, len(windows), batch_size):
        chunk = windows[start : start + batch_size]
        flat = predict_ids(params, config, labeled_batch(chunk))
        offsets = np.cumsum([0] + [window.n_words for window in chunk])
        predictions += [flat[offsets[i] : offsets[i + 1]] for i in range(len(chunk))]
    return predictions


def _predict(
    params: Params,
    config: ModelConfig,
    label_set: LabelSet,
    vocab: Vocab,
    sentences: Sequence[Sequence[str]],
    batch_size: int,
    max_seq_len: int,
) -> List[List[str]]:
    windows = [
        window
        for index, words in enumerate(sentences)
        for window in sentence_windows(vocab, words, max_seq_len, index)
    ]
    labels: List[List[str]] = [[] for _ in sentences]
    if windows:
        for window, ids in zip(windows, _predict_windows(params, config, windows, batch_size)):
            labels[window.sentence] += [label_set.labels[int(id)] for id in ids]
    return labels


def predict_corpus(
    ckpt: ModelCheckpoint, vocab: Vocab, sentences: Sequence[Sequence[str]], batch_size: int = 32
) -> List[List[str]]:
    if ckpt.label_set is None or ckpt.config.n_labels != len(ckpt.label_set):
        raise TrainingError("checkpoint has not been fine-tuned for a labelling task")
    if vocab.fingerprint != ckpt.vocab_fingerprint:
        raise TrainingError("vocabulary does not match the checkpoint")
    return _predict(
        ckpt.params,
        ckpt.config,
        ckpt.label_set,
        vocab,
        sentences,
        batch_size,
        ckpt.config.max_positions,
    )


def predict_labels(ckpt: ModelCheckpoint, vocab: Vocab, words: Sequence[str]) -> List[str]:
    return predict_corpus(ckpt, vocab, [words])[0]


def score_labels(
    kind: TaskKind, gold: Sequence[AnnotatedSentence], predicted: Sequence[Sequence[str]]
) -> Tuple[str, EvalReport]:
    kind = TaskKind(kind)
    if kind == TaskKind.NER:
        return "f1", span_f1([sentence.ner for sentence in gold], predicted)
    if kind == TaskKind.DEP_BRACKET:
        trees = [decode_strings(labels)[0] for labels in predicted]
        return "las", las_uas([DepTree.from_sentence(sentence) for sentence in gold], trees)
    return "accuracy", pos_accuracy([task_labels(sentence, kind) for sentence in gold], predicted)


@dataclass
class FinetuneResult:
    checkpoint: ModelCheckpoint
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0


def finetune(
    ckpt: ModelCheckpoint,
    vocab: Vocab,
    train: Sequence[AnnotatedSentence],
    dev: Sequence[AnnotatedSentence],
    label_set: LabelSet,
    optimizer_config: OptimizerConfig,
    seed: int,
    settings: Optional[FinetuneSettings] = None,
) -> FinetuneResult:
    settings = settings or FinetuneSettings()
    if not train or not dev:
        raise TrainingError("fine-tuning needs non-empty train and dev sentences")
    if vocab.fingerprint != ckpt.vocab_fingerprint:
        raise TrainingError("vocabulary does not match the checkpoint")
    max_seq_len = settings.max_seq_len or ckpt.config.max_positions
    if max_seq_len > ckpt.config.max_positions:
        raise TrainingError(
            f"max_seq_len {max_seq_len} exceeds model max_positions {ckpt.config.max_positions}"
        )

    examples = _labelled(train, label_set.kind)
    missing = sorted(
        {label for _, labels in examples for label in labels if label not in label_set}
    )
    if missing:
        raise TrainingError(
            f"labels absent from the {label_set.kind.value} label set: {', '.join(missing)}"
        )

    windows, window_labels = [], []
    for index, labels in examples:
        for window in sentence_windows(vocab, train[index].words, max_seq_len, index):
            windows.append(window)
            chunk = labels[window.first_word : window.first_word + window.n_words]
            window_labels.append([label_set.index(label) for label in chunk])

    params, config = attach_classifier(ckpt.params, ckpt.config, len(label_set), seed)
    params = {name: value.copy() for name, value in params.items()}
    per_epoch = math.ceil(len(windows) / settings.batch_size)
    if optimizer_config.total_steps == 0:
        optimizer_config = replace(optimizer_config, total_steps=settings.epochs * per_epoch)
    adam = AdamState.zeros(params)
    dropout = np.random.default_rng([seed, FINETUNE_STREAM, DROPOUT_STREAM])
    dev_words = [sentence.words for sentence in dev]

    best_score, best_epoch, best_params = -1.0, 0, params
    history = []
    step = 0
    for epoch in range(1, settings.epochs + 1):
        order = np.random.default_rng([seed, FINETUNE_STREAM, epoch]).permutation(len(windows))
        total, words = 0.0, 0
        for position in range(per_epoch):
            rows = order[position * settings.batch_size : (position + 1) * settings.batch_size]
            batch = labeled_batch([windows[i] for i in rows], [window_labels[i] for i in rows])
            loss, grads = backward(params, config, batch, Head.CLASSIFY, dropout)
            if not math.isfinite(loss):
                raise TrainingError(f"fine-tuning loss became {loss} in epoch {epoch}")
            step += 1
            adam_step(params, grads, adam, optimizer_config, step)
            total += loss
            words += int(batch.word_start.sum())

        predicted = _predict(
            params, config, label_set, vocab, dev_words, settings.batch_size, max_seq_len
        )
        name, report = score_labels(label_set.kind, dev, predicted)
        score = report.metrics[name]
        train_loss = total / max(words, 1)
        history.append({"epoch": epoch, "train_loss": train_loss, f"dev_{name}": score})
        logger.info("epoch %d train loss %.4f dev %s %.4f", epoch, train_loss, name, score)

        if score > best_score:
            best_score, best_epoch = score, epoch
            best_params = {key: value.copy() for key, value in params.items()}
        elif epoch - best_epoch >= settings.patience:
            logger.info("no dev improvement for %d epochs, stopping", settings.patience)
            break

    result = ModelCheckpoint(
        config=config,
        params=best_params,
        vocab_fingerprint=ckpt.vocab_fingerprint,
        optimizer=optimizer_config,
        step=step,
        label_set=label_set,
        progress={"best_epoch": best_epoch, f"dev_{name}": best_score},
    )
    return FinetuneResult(result, history, best_epoch)
