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
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy.special import betainc

from .errors import EvalError, StatsError
from .evaluation import EvalReport, Metric, las_uas, metric_value, pos_accuracy, span_f1

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 10000
DEFAULT_ALPHA = 0.01
MIN_TRIALS = 100
# shuffled differences within this distance of the observed one count as ties
TOLERANCE = 1e-12
CHUNK = 1024

TASK_FOR = {
    Metric.ACCURACY: "pos",
    Metric.SPAN_F1: "ner",
    Metric.LAS: "dep",
    Metric.UAS: "dep",
}


@dataclass(frozen=True)
class PairedSample:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.ndim != 1 or a.shape != b.shape:
            raise StatsError(f"paired samples must be aligned vectors, got {a.shape} and {b.shape}")
        if len(a) < 2:
            raise StatsError("a paired sample needs at least 2 sentences")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    mean_diff: float


@dataclass(frozen=True)
class ShuffleTestResult:
    metric: str
    observed_diff: float
    n_trials: int
    n_at_least_as_extreme: int
    p_value: float
    seed: int


def student_t_pvalue(t: float, df: int) -> float:
    return float(betainc(0.5 * df, 0.5, df / (df + t * t)))


def paired_ttest(sample: PairedSample) -> TTestResult:
    diff = sample.a - sample.b
    n = len(diff)
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        raise StatsError(f"degenerate sample, every difference equals {mean:.6g}")
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t=t, df=n - 1, p=student_t_pvalue(t, n - 1), mean_diff=mean)


def shuffle_statistics(
    statistics_a: np.ndarray,
    statistics_b: np.ndarray,
    metric: Metric,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    task: Optional[str] = None,
) -> ShuffleTestResult:
    task = task or TASK_FOR[metric]
    a = np.asarray(statistics_a, dtype=np.float64)
    b = np.asarray(statistics_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise StatsError(f"misaligned outputs: statistics shapes {a.shape} and {b.shape}")
    if n_trials < MIN_TRIALS:
        raise StatsError(f"n_trials must be at least {MIN_TRIALS}, got {n_trials}")

    total_a, total_b = a.sum(axis=0), b.sum(axis=0)
    delta = b - a
    observed = abs(float(metric_value(metric, task, total_a) - metric_value(metric, task, total_b)))

    rng = np.random.default_rng(seed)
    extreme = 0
    remaining = n_trials
    while remaining:
        size = min(CHUNK, remaining)
        swaps = (rng.random((size, len(a))) < 0.5).astype(np.float64)
        moved = swaps @ delta
        diffs = np.abs(
            metric_value(metric, task, total_a + moved)
            - metric_value(metric, task, total_b - moved)
        )
        extreme += int((diffs >= observed - TOLERANCE).sum())
        remaining -= size

    result = ShuffleTestResult(
        metric=metric.value,
        observed_diff=observed,
        n_trials=n_trials,
        n_at_least_as_extreme=extreme,
        p_value=(extreme + 1) / (n_trials + 1),
        seed=seed,
    )
    logger.debug("shuffle test %s", result)
    return result


def evaluate(metric: Metric, gold: Sequence, pred: Sequence) -> EvalReport:
    task = TASK_FOR[metric]
    if task == "dep":
        return las_uas(gold, pred)
    if task == "ner":
        return span_f1(gold, pred)
    return pos_accuracy(gold, pred)


def stratified_shuffle_test(
    gold: Sequence,
    out_a: Sequence,
    out_b: Sequence,
    metric: Metric,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> ShuffleTestResult:
    metric = Metric(metric)
    try:
        report_a = evaluate(metric, gold, out_a)
        report_b = evaluate(metric, gold, out_b)
    except EvalError as error:
        raise StatsError(f"misaligned outputs: {error}") from error
    return shuffle_statistics(report_a.statistics, report_b.statistics, metric, n_trials, seed)


def compare_outputs(
    gold: Sequence,
    out_a: Sequence,
    out_b: Sequence,
    metric: Union[Metric, str],
    test: str = "shuffle",
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
) -> Dict:
    metric = Metric(metric)
    if test == "shuffle":
        result = stratified_shuffle_test(gold, out_a, out_b, metric, n_trials, seed)
        verdict = {
            "diff": result.observed_diff,
            "p": result.p_value,
            "trials": result.n_trials,
            "seed": result.seed,
        }
    elif test == "ttest":
        if metric == Metric.SPAN_F1:
            raise StatsError("span F1 has no per-sentence value, t-test NER outputs on accuracy")
        key = metric.value
        try:
            values_a = evaluate(metric, gold, out_a).per_sentence[key]
            values_b = evaluate(metric, gold, out_b).per_sentence[key]
        except EvalError as error:
            raise StatsError(f"misaligned outputs: {error}") from error
        result = paired_ttest(PairedSample(values_a, values_b))
        verdict = {"diff": result.mean_diff, "t": result.t, "df": result.df, "p": result.p}
    else:
        raise StatsError(f"unknown test '{test}', use shuffle or ttest")
    verdict.update(
        {"test": test, "metric": metric.value, "alpha": alpha, "significant": verdict["p"] < alpha}
    )
    return verdict
