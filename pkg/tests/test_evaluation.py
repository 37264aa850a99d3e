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
import json

import numpy as np
import pytest

from xerme.errors import EvalError
from xerme.evaluation import (
    Metric,
    bio_to_spans,
    las_uas,
    metric_value,
    pos_accuracy,
    render_report,
    span_f1,
    spans_to_bio,
    write_per_sentence,
)
from xerme.treecodec import DepTree, random_projective_tree

GOLD_NER = [["B-PER", "I-PER", "O", "B-LOC"], ["B-MISC", "O"]]
PRED_NER = [["B-PER", "I-PER", "O", "B-ORG"], ["O", "O"]]


def test_pos_accuracy():
    report = pos_accuracy([["A", "B", "C"], ["A", "B"]], [["A", "X", "C"], ["A", "B"]])
    assert report.metrics["accuracy"] == pytest.approx(0.8)
    assert report.per_sentence["accuracy"] == pytest.approx([2 / 3, 1.0])
    assert report.counts == {"sentences": 2, "tokens": 5}
    assert report.statistics.tolist() == [[2, 3], [2, 2]]


def test_misaligned_outputs():
    with pytest.raises(EvalError, match="sentence 1: gold has 2 tokens, prediction has 1"):
        pos_accuracy([["A"], ["A", "B"]], [["A"], ["A"]])
    with pytest.raises(EvalError, match="gold has 2 sentences, prediction has 1"):
        pos_accuracy([["A"], ["B"]], [["A"]])
    with pytest.raises(EvalError, match="empty corpus"):
        span_f1([], [])


def test_bio_spans():
    tags = ["B-PER", "I-PER", "O", "I-LOC", "I-LOC", "B-ORG", "I-PER"]
    assert bio_to_spans(tags) == {
        ("PER", 0, 1), ("LOC", 3, 4), ("ORG", 5, 5), ("PER", 6, 6),
    }
    assert spans_to_bio({("PER", 0, 1), ("LOC", 3, 4)}, 6) == [
        "B-PER", "I-PER", "O", "B-LOC", "I-LOC", "O",
    ]
    with pytest.raises(EvalError, match="overlaps"):
        spans_to_bio({("PER", 0, 1), ("LOC", 1, 2)}, 4)
    with pytest.raises(EvalError, match="outside 2 tokens"):
        spans_to_bio({("PER", 1, 2)}, 2)


def test_span_f1():
    report = span_f1(GOLD_NER, PRED_NER)
    assert report.metrics["precision"] == pytest.approx(0.5)
    assert report.metrics["recall"] == pytest.approx(1 / 3)
    assert report.metrics["f1"] == pytest.approx(0.4)
    assert report.metrics["accuracy"] == pytest.approx(4 / 6)
    assert report.by_type["PER"] == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    assert report.by_type["LOC"]["recall"] == 0.0
    assert report.by_type["ORG"]["precision"] == 0.0
    assert report.statistics.tolist() == [[1, 2, 2, 3, 4], [0, 0, 1, 1, 2]]


def test_las_uas():
    gold = [DepTree((2, 0, 2), ("a", "root", "b"))]
    pred = [DepTree((2, 0, 1), ("x", "root", "c"))]
    report = las_uas(gold, pred)
    assert report.metrics["uas"] == pytest.approx(2 / 3)
    assert report.metrics["las"] == pytest.approx(1 / 3)
    assert report.statistics.tolist() == [[1, 2, 3]]


def test_metric_value_is_vectorized():
    totals = np.array([[[1, 2, 2, 3, 4]], [[2, 2, 2, 4, 4]]])
    values = metric_value(Metric.SPAN_F1, "ner", totals)
    assert values.shape == (2, 1)
    assert values[:, 0] == pytest.approx([0.5, 1.0])
    assert metric_value(Metric.ACCURACY, "ner", totals)[:, 0] == pytest.approx([0.75, 1.0])
    with pytest.raises(EvalError, match="not defined for task 'pos'"):
        metric_value(Metric.LAS, "pos", totals)


def test_render_report():
    report = span_f1(GOLD_NER, PRED_NER)
    data = json.loads(render_report(report))
    assert data["metrics"]["f1"] == pytest.approx(0.4)
    assert data["counts"]["gold_spans"] == 3

    table = render_report(report, "table")
    assert "task: ner" in table
    assert "f1             0.4000" in table
    assert "PER      1.0000   1.0000   1.0000" in table
    with pytest.raises(EvalError, match="unknown report format"):
        render_report(report, "xml")


def test_write_per_sentence(tmp_path):
    report = las_uas(
        [DepTree((0, 1), ("root", "a")), DepTree((2, 0), ("a", "root"))],
        [DepTree((0, 1), ("root", "a")), DepTree((0, 1), ("root", "a"))],
    )
    write_per_sentence(report, tmp_path / "scores.csv")
    with open(tmp_path / "scores.csv", newline="") as file:
        rows = list(csv.reader(file))
    assert rows == [
        ["sentence", "las", "uas"],
        ["0", "1.000000", "1.000000"],
        ["1", "0.000000", "0.000000"],
    ]


def test_hand_examples():
    report = span_f1([["B-PER", "O", "O"]], [["B-PER", "O", "B-LOC"]])
    assert report.metrics["precision"] == 0.5
    assert report.metrics["recall"] == 1.0
    assert report.metrics["f1"] == pytest.approx(2 / 3)

    report = las_uas([DepTree((2, 0), ("a", "root"))], [DepTree((2, 0), ("x", "root"))])
    assert report.metrics["uas"] == 1.0
    assert report.metrics["las"] == 0.5


def brute_force_spans(tags):
    spans = set()
    for start, tag in enumerate(tags):
        prefix, _, kind = tag.partition("-")
        if prefix not in ("B", "I") or not kind:
            continue
        if prefix == "I" and start > 0 and tags[start - 1] in (f"B-{kind}", f"I-{kind}"):
            continue
        end = start
        while end + 1 < len(tags) and tags[end + 1] == f"I-{kind}":
            end += 1
        spans.add((kind, start, end))
    return spans


def test_metrics_match_brute_force():
    rng = np.random.default_rng(11)
    tags = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC", "I-ORG"]
    for _ in range(200):
        lengths = rng.integers(1, 12, size=rng.integers(1, 6))
        gold = [[tags[i] for i in rng.integers(0, len(tags), n)] for n in lengths]
        pred = [[tags[i] for i in rng.integers(0, len(tags), n)] for n in lengths]

        tokens = sum(len(sentence) for sentence in gold)
        matches = sum(g == p for a, b in zip(gold, pred) for g, p in zip(a, b))
        assert pos_accuracy(gold, pred).metrics["accuracy"] == pytest.approx(matches / tokens)

        gold_spans = [brute_force_spans(sentence) for sentence in gold]
        pred_spans = [brute_force_spans(sentence) for sentence in pred]
        correct = sum(len(g & p) for g, p in zip(gold_spans, pred_spans))
        found = sum(len(p) for p in pred_spans)
        expected = sum(len(g) for g in gold_spans)
        precision = correct / found if found else 0.0
        recall = correct / expected if expected else 0.0
        f1 = 2 * precision * recall / (precision + recall) if correct else 0.0
        report = span_f1(gold, pred)
        assert report.metrics["precision"] == pytest.approx(precision)
        assert report.metrics["recall"] == pytest.approx(recall)
        assert report.metrics["f1"] == pytest.approx(f1)

        gold_trees = [random_projective_tree(int(n), rng, ("a", "b")) for n in lengths]
        pred_trees = [random_projective_tree(int(n), rng, ("a", "b")) for n in lengths]
        arcs = [
            (g.heads[i] == p.heads[i], g.deprels[i] == p.deprels[i])
            for g, p in zip(gold_trees, pred_trees)
            for i in range(g.n)
        ]
        report = las_uas(gold_trees, pred_trees)
        assert report.metrics["uas"] == pytest.approx(sum(h for h, _ in arcs) / tokens)
        assert report.metrics["las"] == pytest.approx(sum(h and r for h, r in arcs) / tokens)
