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
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import click

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .corpus import (
    AnnotatedSentence,
    SplitSpec,
    load_raw_corpus,
    read_bio,
    read_conllu,
    split_corpus,
    split_sentences,
    write_bio,
    write_conllu,
    format_conllu,
    parse_conllu_text,
    write_raw_corpus,
    write_split_manifest,
)
from .errors import ExitCode, XermeError
from .evaluation import Metric, las_uas, pos_accuracy, render_report, span_f1, write_per_sentence
from .model import TaskKind
from .stats import DEFAULT_ALPHA, DEFAULT_TRIALS, TASK_FOR, compare_outputs
from .tokenizer import Vocab, encode_word, pretokenize, segmentation_stats, train_vocab
from .training import finetune, label_set_for, predict_corpus, pretrain
from .treecodec import DepTree, decode_strings, encode_corpus, format_label

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
TASKS = [kind.value for kind in TaskKind]
EVAL_TASKS = ["upos", "fpos", "ner", "dep"]


def read_task(path, kind: str) -> List[AnnotatedSentence]:
    return read_bio(path) if kind == "ner" else read_conllu(path)


def layer(sentences: Sequence[AnnotatedSentence], kind: str, path) -> List[Sequence[str]]:
    attribute = {"upos": "upos", "fpos": "fpos", "ner": "ner"}[kind]
    layers = [getattr(sentence, attribute) for sentence in sentences]
    for index, values in enumerate(layers):
        if values is None:
            raise XermeError(f"{path}: sentence {index} has no {kind} layer")
    return layers


def trees(sentences: Sequence[AnnotatedSentence], path) -> List[DepTree]:
    for index, sentence in enumerate(sentences):
        if sentence.heads is None or sentence.deprels is None:
            raise XermeError(f"{path}: sentence {index} has no dependency layer")
    return [DepTree.from_sentence(sentence) for sentence in sentences]


@click.group()
@click.version_option(__version__, prog_name="xerme")
@click.option("--verbose", "-v", is_flag=True, help="Log debugging details.")
@click.option("--quiet", "-q", is_flag=True, help="Log warnings and errors only.")
def cli(verbose: bool, quiet: bool):
    package = logging.getLogger("xerme")
    for handler in list(package.handlers):
        package.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package.addHandler(handler)
    package.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)


@cli.group()
def tokenizer():
    """Train and apply sub-word vocabularies."""


@tokenizer.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--size", default=30000, show_default=True, type=int)
@click.option("--min-frequency", default=2, show_default=True, type=int)
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False))
def tokenizer_train(corpus_path: str, size: int, min_frequency: int, out: str):
    vocab = train_vocab(load_raw_corpus(corpus_path), size, min_frequency)
    vocab.save(out)
    logger.info("vocabulary of %d pieces written to %s", vocab.size, out)


@tokenizer.command("encode")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "source", default="-", type=click.File("r", encoding="utf-8"))
def tokenizer_encode(vocab_path: str, source):
    vocab = Vocab.load(vocab_path)
    for line in source:
        pieces = [piece for word in pretokenize(line) for piece in encode_word(vocab, word)]
        click.echo(" ".join(pieces))


@tokenizer.command("stats")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
def tokenizer_stats(vocab_path: str, corpus_path: str):
    vocab = Vocab.load(vocab_path)
    words = (word for line in load_raw_corpus(corpus_path).lines() for word in pretokenize(line))
    stats = segmentation_stats(vocab, words)
    result = {
        "words": stats.words,
        "pieces": stats.pieces,
        "fertility": stats.fertility,
        "split_rate": stats.split_rate,
        "unk_rate": stats.unk_rate,
    }
    click.echo(json.dumps(result, sort_keys=True, indent=2))


@cli.command("corpus-split")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--train-fraction", default=0.95, show_default=True, type=float)
@click.option(
    "--unit", default="document", show_default=True, type=click.Choice(["document", "file"])
)
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
def corpus_split(corpus_path: str, train_fraction: float, unit: str, out: str):
    spec = SplitSpec(train_fraction, unit)
    train, dev = split_corpus(load_raw_corpus(corpus_path), spec)
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    write_raw_corpus(train, directory / "train.txt")
    write_raw_corpus(dev, directory / "dev.txt")
    write_split_manifest(train, dev, spec, directory / "split.tsv")
    logger.info("%d train and %d dev documents written to %s", len(train), len(dev), directory)


def run_config(config: str, overrides, seed: Optional[int], output: Optional[str]) -> RunConfig:
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"seed={seed}")
    if output is not None:
        overrides.append(f"output={json.dumps(output)}")
    return RunConfig(yaml=config, overrides=overrides)


def config_options(function):
    function = click.option("--output", default=None, help="Output directory.")(function)
    function = click.option(
        "--seed", default=None, type=int, help="Seed for every random choice."
    )(function)
    function = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a configuration key.",
    )(function)
    return click.argument("config", type=click.Path(exists=True, dir_okay=False))(function)


@cli.command("pretrain")
@config_options
@click.option("--resume", default=None, type=click.Path(exists=True, dir_okay=False))
def pretrain_command(config: str, overrides, seed, output, resume):
    run = run_config(config, overrides, seed, output)
    train, dev = split_corpus(
        load_raw_corpus(run.require("corpus.path")),
        SplitSpec(run.get("corpus.train_fraction"), run.get("corpus.unit")),
    )
    vocab_path = Path(run.get("tokenizer.vocab"))
    if vocab_path.exists():
        vocab = Vocab.load(vocab_path)
    else:
        vocab = train_vocab(train, run.get("tokenizer.size"), run.get("tokenizer.min_frequency"))
        vocab_path.parent.mkdir(parents=True, exist_ok=True)
        vocab.save(vocab_path)
        logger.info("vocabulary of %d pieces written to %s", vocab.size, vocab_path)

    model_config = run.model_config(vocab.size)
    optimizer, masking, phases, settings = run.optimizer, run.masking, run.phases, run.training
    checkpoint = load_checkpoint(resume, vocab) if resume else None
    run.save()
    result = pretrain(
        train,
        dev,
        vocab,
        model_config,
        optimizer,
        masking,
        phases,
        run.seed,
        run.output,
        settings,
        checkpoint,
    )
    logger.info("pre-trained model written to %s", result.path)


@cli.command("finetune")
@config_options
def finetune_command(config: str, overrides, seed, output):
    run = run_config(config, overrides, seed, output)
    kind = run.task_kind
    vocab = Vocab.load(run.get("tokenizer.vocab"))
    checkpoint = load_checkpoint(run.require("task.checkpoint"), vocab)
    file_kind = "ner" if kind == TaskKind.NER else "conllu"
    train = read_task(run.require("task.train"), file_kind)
    split = run.dev_split
    if split:
        train, dev = split_sentences(train, **split)
        logger.info("held out %d of %d sentences for dev", len(dev), len(train) + len(dev))
    else:
        dev = read_task(run.require("task.dev"), file_kind)
    settings = run.finetuning
    run.save()
    result = finetune(
        checkpoint, vocab, train, dev, label_set_for(kind, train), run.optimizer, run.seed, settings
    )
    save_checkpoint(result.checkpoint, run.get("task.save"))
    click.echo(json.dumps(result.history[-1], sort_keys=True))


@cli.command("predict")
@click.option(
    "--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True, dir_okay=False)
)
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False))
def predict_command(checkpoint_path: str, vocab_path: str, input_path: str, out: str):
    vocab = Vocab.load(vocab_path)
    checkpoint = load_checkpoint(checkpoint_path, vocab)
    if checkpoint.label_set is None:
        raise XermeError(f"{checkpoint_path}: checkpoint has not been fine-tuned")
    kind = checkpoint.label_set.kind
    sentences = read_task(input_path, "ner" if kind == TaskKind.NER else "conllu")
    predicted = predict_corpus(checkpoint, vocab, [sentence.words for sentence in sentences])

    if kind == TaskKind.NER:
        write_bio([replace(s, ner=tuple(labels)) for s, labels in zip(sentences, predicted)], out)
        return
    labelled = []
    for sentence, labels in zip(sentences, predicted):
        if kind == TaskKind.DEP_BRACKET:
            tree, report = decode_strings(labels)
            sentence = replace(sentence, heads=tree.heads, deprels=tree.deprels)
            if sum(report.values()):
                logger.debug("repairs %s", dict(report))
        elif kind == TaskKind.UPOS:
            sentence = replace(sentence, upos=tuple(labels))
        else:
            sentence = replace(sentence, fpos=tuple(labels))
        labelled.append(sentence)
    write_conllu(labelled, out)


@cli.command("eval")
@click.option("--task", "task", required=True, type=click.Choice(EVAL_TASKS))
@click.option("--gold", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--format", "format", default="json", show_default=True, type=click.Choice(["json", "table"])
)
@click.option("--per-sentence", default=None, type=click.Path(dir_okay=False))
def eval_command(task: str, gold: str, pred: str, format: str, per_sentence: Optional[str]):
    gold_sentences, pred_sentences = read_task(gold, task), read_task(pred, task)
    if task == "dep":
        report = las_uas(trees(gold_sentences, gold), trees(pred_sentences, pred))
    elif task == "ner":
        report = span_f1(layer(gold_sentences, task, gold), layer(pred_sentences, task, pred))
    else:
        report = pos_accuracy(layer(gold_sentences, task, gold), layer(pred_sentences, task, pred))
    click.echo(render_report(report, format), nl=False)
    if per_sentence:
        write_per_sentence(report, per_sentence)


@cli.command("compare")
@click.option(
    "--test", default="shuffle", show_default=True, type=click.Choice(["shuffle", "ttest"])
)
@click.option("--metric", required=True, type=click.Choice([metric.value for metric in Metric]))
@click.option(
    "--layer",
    "layer_name",
    default="upos",
    show_default=True,
    type=click.Choice(["upos", "fpos", "ner"]),
)
@click.option("--gold", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--trials", default=DEFAULT_TRIALS, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--alpha", default=DEFAULT_ALPHA, show_default=True, type=float)
def compare_command(test, metric, layer_name, gold, path_a, path_b, trials, seed, alpha):
    """Compares systems A and B against gold; accuracy reads the tag layer chosen with --layer."""
    metric = Metric(metric)
    if TASK_FOR[metric] == "dep":
        corpora = [trees(read_task(path, "dep"), path) for path in (gold, path_a, path_b)]
    else:
        name = "ner" if metric == Metric.SPAN_F1 else layer_name
        corpora = [layer(read_task(path, name), name, path) for path in (gold, path_a, path_b)]
    verdict = compare_outputs(*corpora, metric, test=test, n_trials=trials, seed=seed, alpha=alpha)
    click.echo(json.dumps(verdict, sort_keys=True))


@cli.group()
def treecode():
    """Convert between CoNLL-U trees and bracket labels."""


@treecode.command("encode")
@click.option("--input", "source", default="-", type=click.File("r", encoding="utf-8"))
@click.option("--output", "target", default="-", type=click.File("w", encoding="utf-8"))
def treecode_encode(source, target):
    """Writes one 'words<TAB>labels' line per projective sentence."""
    sentences = parse_conllu_text(source.read(), source.name)
    encoded = encode_corpus(sentences)
    for sentence, labels in zip(sentences, encoded.labels):
        if labels is None:
            continue
        text = " ".join(format_label(label) for label in labels)
        target.write(f"{' '.join(sentence.words)}\t{text}\n")
    logger.info(
        "%d sentences encoded, %d non-projective skipped", encoded.encoded, encoded.non_projective
    )


@treecode.command("decode")
@click.option("--input", "source", default="-", type=click.File("r", encoding="utf-8"))
@click.option("--output", "target", default="-", type=click.File("w", encoding="utf-8"))
def treecode_decode(source, target):
    sentences = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        words, separator, labels = line.rstrip("\n").partition("\t")
        words, labels = words.split(" "), labels.split()
        if not separator or len(words) != len(labels):
            raise XermeError(f"line {lineno}: expected as many labels as words")
        tree, report = decode_strings(labels)
        if sum(report.values()):
            logger.info("line %d repaired: %s", lineno, {k: v for k, v in report.items() if v})
        sentences.append(AnnotatedSentence(tuple(words), heads=tree.heads, deprels=tree.deprels))
    target.write(format_conllu(sentences))


def run(argv: Optional[List[str]] = None) -> int:
    try:
        result = cli.main(args=argv, prog_name="xerme", standalone_mode=False)
    except click.ClickException as error:
        error.show()
        return error.exit_code
    except click.exceptions.Abort:
        return ExitCode.RUNTIME_ERROR.value
    except XermeError as error:
        logging.getLogger("xerme").error("%s", error)
        return error.exit_code.value
    except OSError as error:
        logging.getLogger("xerme").error("%s", error)
        return ExitCode.RUNTIME_ERROR.value
    return result if isinstance(result, int) else ExitCode.SUCCESS.value


def main():
    sys.exit(run())
