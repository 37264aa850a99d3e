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

from xerme.corpus import AnnotatedSentence, read_conllu
from xerme.errors import TreeError
from xerme.treecodec import (
    BracketLabel,
    DepTree,
    Incoming,
    decode_labels,
    decode_strings,
    encode_corpus,
    encode_tree,
    format_label,
    is_projective,
    parse_label,
    random_projective_tree,
    repair,
)

from tests.utils import DATA_DIR

NON_PROJECTIVE = DepTree((3, 4, 0, 3), ("a", "b", "root", "c"))


def test_encode_sample_tree():
    sentence = read_conllu(DATA_DIR / "sample.conllu")[0]
    labels = encode_tree(DepTree.from_sentence(sentence))
    assert [format_label(label) for label in labels] == [
        "<@det", "<\\@nsubj", "\\//@root", ">@obj", ">@punct",
    ]


def test_single_word_tree():
    labels = encode_tree(DepTree((0,), ("root",)))
    assert [str(label) for label in labels] == ["ROOT@root"]
    tree, report = decode_strings(["ROOT@root"])
    assert tree.heads == (0,)
    assert sum(report.values()) == 0


def test_label_parsing():
    assert parse_label("<\\\\/@nmod") == BracketLabel(Incoming.FROM_RIGHT, 2, 1, "nmod")
    assert parse_label("/>@obj") == BracketLabel(Incoming.FROM_LEFT, 0, 1, "obj")
    assert parse_label("\\/@root") == BracketLabel(Incoming.ROOT, 1, 1, "root")
    assert parse_label("ROOT@root") == BracketLabel(Incoming.ROOT, 0, 0, "root")
    with pytest.raises(TreeError, match="no '@' separator"):
        parse_label("<\\")
    with pytest.raises(TreeError, match="malformed"):
        parse_label("<>@x")
    with pytest.raises(TreeError, match="malformed"):
        parse_label("/\\@x")


def test_tree_validation():
    with pytest.raises(TreeError, match="2 roots"):
        DepTree((0, 0), ("a", "b"))
    with pytest.raises(TreeError, match="cycle"):
        DepTree((0, 3, 2), ("a", "b", "c"))
    with pytest.raises(TreeError, match="its own head"):
        DepTree((0, 2), ("a", "b"))
    with pytest.raises(TreeError, match="at least one word"):
        DepTree((), ())


def test_non_projective_trees_are_rejected():
    assert not is_projective(NON_PROJECTIVE)
    with pytest.raises(TreeError, match="non-projective"):
        encode_tree(NON_PROJECTIVE)


def test_arcs_over_the_root_are_non_projective():
    assert not is_projective(DepTree((3, 0, 2), ("a", "root", "b")))


def test_random_trees_roundtrip():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        tree = random_projective_tree(int(rng.integers(1, 41)), rng, ("nsubj", "obj", "det"))
        assert is_projective(tree)
        assert tree.deprels[tree.root - 1] == "root"
        decoded, report = decode_strings([format_label(label) for label in encode_tree(tree)])
        assert decoded == tree
        assert sum(report.values()) == 0


def test_any_label_sequence_decodes_to_a_tree():
    rng = np.random.default_rng(7)
    pieces = ["<", ">", "\\", "/", "ROOT", "@dep", "x"]
    for _ in range(5000):
        n = int(rng.integers(1, 26))
        labels = ["".join(rng.choice(pieces, size=int(rng.integers(1, 5)))) for _ in range(n)]
        tree, _ = decode_strings(labels)
        assert tree.n == n
        assert DepTree(tree.heads, tree.deprels) == tree

    for _ in range(5000):
        n = int(rng.integers(1, 26))
        valid = encode_tree(random_projective_tree(n, rng, ("nsubj", "obj")))
        labels = [format_label(label) for label in valid]
        shuffled = [labels[int(i)] for i in rng.permutation(n)]
        tree, _ = decode_strings(shuffled)
        assert tree.n == n
        assert DepTree(tree.heads, tree.deprels) == tree


def test_decode_reports_repairs():
    tree, report = decode_strings(["<@det", "xx", "ROOT@root"])
    assert tree.heads == (3, 3, 0)
    assert tree.deprels == ("det", "_", "root")
    assert report["malformed"] == 1
    assert report["unassigned"] == 2

    tree, report = decode_strings(["ROOT@root", "ROOT@root"])
    assert tree.heads == (0, 1)
    assert report["extra_root"] == 1

    tree, report = decode_labels(
        [BracketLabel(Incoming.FROM_RIGHT), BracketLabel(Incoming.FROM_LEFT)]
    )
    assert tree.heads == (0, 1)
    assert report["missing_root"] == 1
    assert report["unassigned"] == 1


def test_repair_breaks_cycles_and_bad_heads():
    tree, report = repair([2, 1, 0], ["a", "b", "root"])
    assert tree.heads == (3, 1, 0)
    assert report["cycle"] == 1

    tree, report = repair([0, 7, None], ["root", "a", "b"])
    assert tree.heads == (0, 1, 1)
    assert report["out_of_range"] == 1
    assert report["unassigned"] == 1


def test_encode_corpus_skips_non_projective():
    sentences = read_conllu(DATA_DIR / "sample.conllu")
    sentences.append(
        AnnotatedSentence(("a", "b", "c", "d"), heads=NON_PROJECTIVE.heads,
                          deprels=NON_PROJECTIVE.deprels)
    )
    encoded = encode_corpus(sentences)
    assert encoded.encoded == 2
    assert encoded.non_projective == 1
    assert encoded.labels[2] is None
