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
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Set, Tuple, Union

import numpy as np
from mako.template import Template

from .corpus import NER_CLASSES
from .errors import EvalError
from .treecodec import DepTree

logger = logging.getLogger(__name__)

Span = Tuple[str, int, int]

TABLE = """\
task: ${report.task}
%for name in sorted(report.metrics):
${"%-12s %8.4f" % (name, report.metrics[name])}
%endfor
%for name in sorted(report.counts):
${"%-12s %8d" % (name, report.counts[name])}
%endfor
%if report.by_type:

${"%-6s %8s %8s %8s" % ("type", "P", "R", "F1")}
%for kind in sorted(report.by_type):
<% scores = report.by_type[kind] %>\\
${"%-6s %8.4f %8.4f %8.4f" % (kind, scores["precision"], scores["recall"], scores["f1"])}
%endfor
%endif
"""


class Metric(Enum):
    ACCURACY = "accuracy"
    SPAN_F1 = "span_f1"
    LAS = "las"
    UAS = "uas"


# sufficient statistics per sentence, in column order
COLUMNS = {
    "pos": ("correct", "tokens"),
    "ner": ("correct_spans", "pred_spans", "gold_spans", "correct", "tokens"),
    "dep": ("las_correct", "uas_correct", "tokens"),
}

TASK_OF_METRIC = {
    Metric.ACCURACY: ("pos", "ner"),
    Metric.SPAN_F1: ("ner",),
    Metric.LAS: ("dep",),
    Metric.UAS: ("dep",),
}


@dataclass
class EvalReport:
    task: str
    metrics: Dict[str, float]
    per_sentence: Dict[str, List[float]]
    counts: Dict[str, int]
    statistics: np.ndarray
    by_type: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def columns(self) -> Tuple[str, ...]:
        return COLUMNS[self.task]

    def to_dict(self) -> Dict:
        result = {"task": self.task, "metrics": self.metrics, "counts": self.counts}
        if self.by_type:
            result["by_type"] = self.by_type
        return result


def _ratio(numerator, denominator):
    numerator = np.asarray(numerator, dtype=np.float64)
    denominator = np.asarray(denominator, dtype=np.float64)
    return np.divide(numerator, denominator, out=np.zeros_like(numerator), where=denominator > 0)


def _f1(precision, recall):
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    total = precision + recall
    return np.divide(
        2.0 * precision * recall, total, out=np.zeros_like(total), where=total > 0
    )


def metric_value(metric: Metric, task: str, totals: np.ndarray) -> np.ndarray:
    if task not in TASK_OF_METRIC[metric]:
        raise EvalError(f"metric '{metric.value}' is not defined for task '{task}'")
    column = {name: totals[..., index] for index, name in enumerate(COLUMNS[task])}
    if metric == Metric.ACCURACY:
        return _ratio(column["correct"], column["tokens"])
    if metric == Metric.SPAN_F1:
        return _f1(
            _ratio(column["correct_spans"], column["pred_spans"]),
            _ratio(column["correct_spans"], column["gold_spans"]),
        )
    if metric == Metric.LAS:
        return _ratio(column["las_correct"], column["tokens"])
    return _ratio(column["uas_correct"], column["tokens"])


def _aligned(gold: Sequence, pred: Sequence):
    if not gold:
        raise EvalError("cannot evaluate an empty corpus")
    if len(gold) != len(pred):
        raise EvalError(f"gold has {len(gold)} sentences, prediction has {len(pred)}")
    for index, (expected, found) in enumerate(zip(gold, pred)):
        if len(expected) != len(found):
            raise EvalError(
                f"sentence {index}: gold has {len(expected)} tokens, prediction has {len(found)}"
            )


def pos_accuracy(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]) -> EvalReport:
    _aligned(gold, pred)
    statistics = np.array(
        [
            [sum(1 for g, p in zip(expected, found) if g == p), len(expected)]
            for expected, found in zip(gold, pred)
        ],
        dtype=np.int64,
    )
    totals = statistics.sum(axis=0)
    return EvalReport(
        task="pos",
        metrics={"accuracy": float(metric_value(Metric.ACCURACY, "pos", totals))},
        per_sentence={"accuracy": [float(v) for v in _ratio(statistics[:, 0], statistics[:, 1])]},
        counts={"sentences": len(gold), "tokens": int(totals[1])},
        statistics=statistics,
    )


def bio_to_spans(tags: Sequence[str]) -> Set[Span]:
    # an orphan I-X opens a new span
    spans = set()
    current = None
    for index, tag in enumerate(tags):
        prefix, _, kind = tag.partition("-")
        if prefix == "I" and kind and current is not None and current[0] == kind:
            current[2] = index
            continue
        if current is not None:
            spans.add(tuple(current))
            current = None
        if prefix in ("B", "I") and kind:
            current = [kind, index, index]
    if current is not None:
        spans.add(tuple(current))
    return spans


def spans_to_bio(spans: Set[Span], n: int) -> List[str]:
    tags = ["O"] * n
    for kind, start, end in sorted(spans, key=lambda span: span[1]):
        if not 0 <= start <= end < n:
            raise EvalError(f"span ({kind}, {start}, {end}) lies outside {n} tokens")
        if any(tag != "O" for tag in tags[start : end + 1]):
            raise EvalError(f"span ({kind}, {start}, {end}) overlaps another span")
        tags[start] = f"B-{kind}"
        for index in range(start + 1, end + 1):
            tags[index] = f"I-{kind}"
    return tags


def span_f1(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]) -> EvalReport:
    _aligned(gold, pred)
    rows = []
    by_type: Dict[str, Counter] = {kind: Counter() for kind in NER_CLASSES}
    for expected, found in zip(gold, pred):
        gold_spans, pred_spans = bio_to_spans(expected), bio_to_spans(found)
        correct = gold_spans & pred_spans
        for name, spans in (("gold", gold_spans), ("pred", pred_spans), ("correct", correct)):
            for kind, _, _ in spans:
                by_type.setdefault(kind, Counter())[name] += 1
        rows.append(
            [
                len(correct),
                len(pred_spans),
                len(gold_spans),
                sum(1 for g, p in zip(expected, found) if g == p),
                len(expected),
            ]
        )
    statistics = np.array(rows, dtype=np.int64)
    totals = statistics.sum(axis=0)
    precision = float(_ratio(totals[0], totals[1]))
    recall = float(_ratio(totals[0], totals[2]))

    breakdown = {}
    for kind, counts in by_type.items():
        kind_precision = float(_ratio(counts["correct"], counts["pred"]))
        kind_recall = float(_ratio(counts["correct"], counts["gold"]))
        breakdown[kind] = {
            "precision": kind_precision,
            "recall": kind_recall,
            "f1": float(_f1(kind_precision, kind_recall)),
        }

    return EvalReport(
        task="ner",
        metrics={
            "precision": precision,
            "recall": recall,
            "f1": float(_f1(precision, recall)),
            "accuracy": float(_ratio(totals[3], totals[4])),
        },
        per_sentence={"accuracy": [float(v) for v in _ratio(statistics[:, 3], statistics[:, 4])]},
        counts={
            "sentences": len(gold),
            "tokens": int(totals[4]),
            "gold_spans": int(totals[2]),
            "pred_spans": int(totals[1]),
        },
        statistics=statistics,
        by_type=breakdown,
    )


def las_uas(gold: Sequence[DepTree], pred: Sequence[DepTree]) -> EvalReport:
    _aligned([tree.heads for tree in gold], [tree.heads for tree in pred])
    rows = []
    for expected, found in zip(gold, pred):
        heads = [g == p for g, p in zip(expected.heads, found.heads)]
        labelled = [
            head and g == p for head, g, p in zip(heads, expected.deprels, found.deprels)
        ]
        rows.append([sum(labelled), sum(heads), expected.n])
    statistics = np.array(rows, dtype=np.int64)
    totals = statistics.sum(axis=0)
    return EvalReport(
        task="dep",
        metrics={
            "las": float(metric_value(Metric.LAS, "dep", totals)),
            "uas": float(metric_value(Metric.UAS, "dep", totals)),
        },
        per_sentence={
            "las": [float(v) for v in _ratio(statistics[:, 0], statistics[:, 2])],
            "uas": [float(v) for v in _ratio(statistics[:, 1], statistics[:, 2])],
        },
        counts={"sentences": len(gold), "tokens": int(totals[2])},
        statistics=statistics,
    )


def render_report(report: EvalReport, format: str = "json") -> str:
    if format == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if format == "table":
        return Template(TABLE).render(report=report)
    raise EvalError(f"unknown report format '{format}', use json or table")


def write_per_sentence(report: EvalReport, path: Union[str, Path]):
    names = sorted(report.per_sentence)
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(["sentence"] + names)
        for index, values in enumerate(zip(*(report.per_sentence[name] for name in names))):
            writer.writerow([index] + [f"{value:.6f}" for value in values])
    logger.info("per-sentence scores for %d sentences written to %s", len(report.statistics), path)
