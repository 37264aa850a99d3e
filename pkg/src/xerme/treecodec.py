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

# "<" head to the right, ">" head to the left, "\" and "/" count left and right dependents.

import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import AnnotatedSentence
from .errors import TreeError

logger = logging.getLogger(__name__)

ROOT_MARKER = "ROOT"
SEPARATOR = "@"
LABEL = re.compile(r"^(?P<right><)?(?P<left_deps>\\*)(?P<right_deps>/*)(?P<left>>)?$")

REPAIR_KINDS = ("missing_root", "extra_root", "unassigned", "out_of_range", "cycle")


@dataclass(frozen=True)
class DepTree:
    heads: Tuple[int, ...]
    deprels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(int(head) for head in self.heads))
        object.__setattr__(self, "deprels", tuple(self.deprels))
        n = len(self.heads)
        if n == 0:
            raise TreeError("a dependency tree needs at least one word")
        if len(self.deprels) != n:
            raise TreeError(f"{len(self.deprels)} relations for {n} words")
        for index, head in enumerate(self.heads, start=1):
            if not 0 <= head <= n:
                raise TreeError(f"word {index} has head {head} outside 0..{n}")
            if head == index:
                raise TreeError(f"word {index} is its own head")
        roots = self.heads.count(0)
        if roots != 1:
            raise TreeError(f"tree has {roots} roots, expected 1")
        if _cycles(list(self.heads)):
            raise TreeError("tree contains a cycle")

    @property
    def n(self) -> int:
        return len(self.heads)

    @property
    def root(self) -> int:
        return self.heads.index(0) + 1

    @classmethod
    def from_sentence(cls, sentence: AnnotatedSentence) -> "DepTree":
        if sentence.heads is None or sentence.deprels is None:
            raise TreeError("sentence has no dependency layer")
        return cls(sentence.heads, sentence.deprels)


class Incoming(Enum):
    FROM_LEFT = ">"
    FROM_RIGHT = "<"
    ROOT = ""


@dataclass(frozen=True)
class BracketLabel:
    incoming: Incoming
    n_left_deps: int = 0
    n_right_deps: int = 0
    deprel: str = ""

    def __post_init__(self):
        if self.n_left_deps < 0 or self.n_right_deps < 0:
            raise TreeError("dependent counts must be non-negative")

    def __str__(self) -> str:
        return format_label(self)


def format_label(label: BracketLabel) -> str:
    brackets = "\\" * label.n_left_deps + "/" * label.n_right_deps
    if label.incoming == Incoming.FROM_RIGHT:
        brackets = "<" + brackets
    elif label.incoming == Incoming.FROM_LEFT:
        brackets = brackets + ">"
    elif not brackets:
        brackets = ROOT_MARKER
    return f"{brackets}{SEPARATOR}{label.deprel}"


def parse_label(text: str) -> BracketLabel:
    brackets, separator, deprel = text.partition(SEPARATOR)
    if not separator:
        raise TreeError(f"label {text!r} has no '{SEPARATOR}' separator")
    if brackets == ROOT_MARKER:
        return BracketLabel(Incoming.ROOT, 0, 0, deprel)
    match = LABEL.match(brackets)
    if match is None or (match["right"] and match["left"]):
        raise TreeError(f"malformed bracket label {text!r}")
    if match["right"]:
        incoming = Incoming.FROM_RIGHT
    elif match["left"]:
        incoming = Incoming.FROM_LEFT
    else:
        incoming = Incoming.ROOT
    return BracketLabel(incoming, len(match["left_deps"]), len(match["right_deps"]), deprel)


def _arcs(tree: DepTree) -> List[Tuple[int, int]]:
    return [tuple(sorted((head, dependent))) for dependent, head in enumerate(tree.heads, start=1)]


def is_projective(tree: DepTree) -> bool:
    arcs = _arcs(tree)
    for left, right in arcs:
        for inner_left, inner_right in arcs:
            if left < inner_left < right < inner_right:
                return False
    return True


def encode_tree(tree: DepTree) -> List[BracketLabel]:
    if not is_projective(tree):
        raise TreeError("cannot encode a non-projective tree")
    left_deps = [0] * (tree.n + 1)
    right_deps = [0] * (tree.n + 1)
    for dependent, head in enumerate(tree.heads, start=1):
        if head == 0:
            continue
        if dependent < head:
            left_deps[head] += 1
        else:
            right_deps[head] += 1

    labels = []
    for word, (head, deprel) in enumerate(zip(tree.heads, tree.deprels), start=1):
        if head == 0:
            incoming = Incoming.ROOT
        elif head < word:
            incoming = Incoming.FROM_LEFT
        else:
            incoming = Incoming.FROM_RIGHT
        labels.append(BracketLabel(incoming, left_deps[word], right_deps[word], deprel))
    return labels


def _cycles(heads: List[int]) -> List[List[int]]:
    state = [0] * (len(heads) + 1)
    cycles = []
    for start in range(1, len(heads) + 1):
        path = []
        node = start
        while node != 0 and state[node] == 0:
            state[node] = start
            path.append(node)
            node = heads[node - 1]
        if node != 0 and state[node] == start:
            cycles.append(path[path.index(node) :])
        for visited in path:
            state[visited] = -1
    return cycles


def repair(
    heads: Sequence[Optional[int]], deprels: Sequence[str], roots: Optional[Sequence[int]] = None
) -> Tuple[DepTree, Counter]:
    n = len(heads)
    if n == 0:
        raise TreeError("cannot repair an empty sentence")
    report: Counter = Counter({kind: 0 for kind in REPAIR_KINDS})
    fixed: List[Optional[int]] = list(heads)
    if roots is None:
        roots = [word for word in range(1, n + 1) if fixed[word - 1] == 0]
    roots = list(roots)

    if not roots:
        roots = [1]
        report["missing_root"] += 1
    root = roots[0]
    fixed[root - 1] = 0
    for extra in roots[1:]:
        fixed[extra - 1] = root
        report["extra_root"] += 1

    for word in range(1, n + 1):
        head = fixed[word - 1]
        if word == root:
            continue
        if head is None:
            fixed[word - 1] = root
            report["unassigned"] += 1
        elif not 0 < head <= n:
            fixed[word - 1] = root
            report["out_of_range"] += 1

    for word in range(1, n + 1):
        if fixed[word - 1] == word:
            fixed[word - 1] = root
            report["cycle"] += 1
    while True:
        cycles = _cycles(fixed)
        if not cycles:
            break
        for cycle in cycles:
            fixed[min(cycle) - 1] = root
            report["cycle"] += 1

    return DepTree(tuple(fixed), tuple(deprels)), report


def decode_labels(labels: Sequence[Optional[BracketLabel]]) -> Tuple[DepTree, Counter]:
    if not labels:
        raise TreeError("cannot decode an empty label sequence")
    heads: List[Optional[int]] = [None] * len(labels)
    left_stack: List[int] = []
    right_stack: List[int] = []
    roots = []
    for word, label in enumerate(labels, start=1):
        if label is None:
            continue
        for _ in range(label.n_left_deps):
            if left_stack:
                heads[left_stack.pop() - 1] = word
        if label.incoming == Incoming.FROM_RIGHT:
            left_stack.append(word)
        elif label.incoming == Incoming.FROM_LEFT:
            if right_stack:
                heads[word - 1] = right_stack.pop()
        else:
            roots.append(word)
            heads[word - 1] = 0
        right_stack.extend([word] * label.n_right_deps)
    deprels = ["_" if label is None else label.deprel for label in labels]
    return repair(heads, deprels, roots)


def decode_strings(labels: Sequence[str]) -> Tuple[DepTree, Counter]:
    parsed = []
    malformed = 0
    for text in labels:
        try:
            parsed.append(parse_label(text))
        except TreeError:
            malformed += 1
            parsed.append(None)
    tree, report = decode_labels(parsed)
    report["malformed"] = malformed
    return tree, report


def random_projective_tree(
    n: int, rng: np.random.Generator, deprels: Sequence[str] = ("dep",)
) -> DepTree:
    if n < 1:
        raise TreeError(f"a random tree needs n >= 1, got {n}")
    heads = [0] * n

    def attach(start: int, end: int, head: int):
        # words start..end (inclusive) hang projectively below head
        if start > end:
            return
        word = int(rng.integers(start, end + 1))
        heads[word - 1] = head
        cut = int(rng.integers(start, word + 1))
        attach(start, cut - 1, head)
        attach(cut, word - 1, word)
        cut = int(rng.integers(word, end + 1))
        attach(word + 1, cut, word)
        attach(cut + 1, end, head)

    root = int(rng.integers(1, n + 1))
    attach(1, root - 1, root)
    attach(root + 1, n, root)
    labels = [deprels[int(index)] for index in rng.integers(0, len(deprels), size=n)]
    labels[root - 1] = "root"
    return DepTree(tuple(heads), tuple(labels))


@dataclass
class EncodedCorpus:
    labels: List[Optional[List[BracketLabel]]]
    non_projective: int

    @property
    def encoded(self) -> int:
        return sum(1 for labels in self.labels if labels is not None)


def encode_corpus(sentences: Iterable[AnnotatedSentence]) -> EncodedCorpus:
    labels: List[Optional[List[BracketLabel]]] = []
    rejected = 0
    for sentence in sentences:
        tree = DepTree.from_sentence(sentence)
        if is_projective(tree):
            labels.append(encode_tree(tree))
        else:
            labels.append(None)
            rejected += 1
    if rejected:
        logger.warning("%d non-projective trees were not encoded", rejected)
    return EncodedCorpus(labels, rejected)
