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

import pytest

from xerme.corpus import (
    AnnotatedSentence,
    SplitSpec,
    SplitUnit,
    format_conllu,
    load_raw_corpus,
    parse_conllu_text,
    read_bio,
    read_conllu,
    read_split_manifest,
    split_corpus,
    split_sentences,
    write_bio,
    write_conllu,
    write_raw_corpus,
    write_split_manifest,
)
from xerme.errors import CorpusError

from tests.utils import DATA_DIR


def test_raw_corpus_documents_and_ids():
    docs = load_raw_corpus(DATA_DIR / "raw")
    assert docs.ids == ["a.txt:0", "a.txt:1", "a.txt:2", "sub/b.txt:0", "sub/b.txt:1"]
    assert docs[0].lines == ["O gato come peixe.", "O can come carne."]
    assert docs[2].text == "Chove en Santiago."
    assert docs[3].source == "sub/b.txt"


def test_raw_corpus_single_file():
    docs = load_raw_corpus(DATA_DIR / "raw" / "a.txt")
    assert docs.ids == ["a.txt:0", "a.txt:1", "a.txt:2"]


def test_raw_corpus_missing_path():
    with pytest.raises(CorpusError, match="no such file"):
        load_raw_corpus(DATA_DIR / "missing")


def test_raw_corpus_invalid_utf8(tmp_path):
    (tmp_path / "bad.txt").write_bytes(b"ola\n\xff\xfe\n")
    with pytest.raises(CorpusError, match="invalid UTF-8 at byte offset 4"):
        load_raw_corpus(tmp_path)


def test_split_by_document_is_a_prefix():
    docs = load_raw_corpus(DATA_DIR / "raw")
    train, dev = split_corpus(docs, SplitSpec())
    assert train.ids == docs.ids[:4]
    assert dev.ids == docs.ids[4:]


def test_split_by_file_keeps_files_together():
    docs = load_raw_corpus(DATA_DIR / "raw")
    train, dev = split_corpus(docs, SplitSpec(0.5, SplitUnit.FILE))
    assert [doc.source for doc in train] == ["a.txt"] * 3
    assert [doc.source for doc in dev] == ["sub/b.txt"] * 2


def test_split_needs_two_units():
    docs = load_raw_corpus(DATA_DIR / "raw" / "a.txt")
    with pytest.raises(CorpusError, match="at least 2 units"):
        split_corpus(docs, SplitSpec(0.5, SplitUnit.FILE))


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_range(fraction):
    with pytest.raises(CorpusError, match="train_fraction"):
        SplitSpec(fraction)


def test_split_manifest_and_raw_corpus_roundtrip(tmp_path):
    docs = load_raw_corpus(DATA_DIR / "raw")
    spec = SplitSpec(0.6)
    train, dev = split_corpus(docs, spec)
    write_split_manifest(train, dev, spec, tmp_path / "split.tsv")
    assert read_split_manifest(tmp_path / "split.tsv") == (spec, train.ids, dev.ids)

    write_raw_corpus(train, tmp_path / "train.txt")
    reloaded = load_raw_corpus(tmp_path / "train.txt")
    assert [doc.text for doc in reloaded] == [doc.text for doc in train]


def test_split_manifest_without_header(tmp_path):
    (tmp_path / "split.tsv").write_text("train\ta.txt:0\n")
    with pytest.raises(CorpusError, match="split.tsv:1"):
        read_split_manifest(tmp_path / "split.tsv")


def test_split_sentences_by_dev_tokens():
    sentences = [AnnotatedSentence(("a",) * n) for n in (3, 4, 5, 2, 2)]
    train, dev = split_sentences(sentences, dev_tokens=4)
    assert [len(s) for s in train] == [3, 4, 5]
    assert [len(s) for s in dev] == [2, 2]

    train, dev = split_sentences(sentences, train_fraction=0.5)
    assert (len(train), len(dev)) == (3, 2)

    with pytest.raises(CorpusError, match="exactly one"):
        split_sentences(sentences)


def test_read_conllu_layers():
    first, second = read_conllu(DATA_DIR / "sample.conllu")
    assert first.words == ("O", "gato", "come", "peixe", ".")
    assert first.upos == ("DET", "NOUN", "VERB", "NOUN", "PUNCT")
    assert first.fpos[0] == "DA0MS0"
    assert first.heads == (2, 3, 0, 3, 3)
    assert first.deprels[2] == "root"
    assert first.ner is None

    assert second.words == ("Vai", "de", "o", "porto", ".")
    assert len(second.extras) == 1
    assert second.extras[0][0] == 1
    assert second.extras[0][1]["form"] == "do"


def test_conllu_roundtrip_keeps_multiword_tokens(tmp_path):
    sentences = read_conllu(DATA_DIR / "sample.conllu")
    write_conllu(sentences, tmp_path / "out.conllu")
    text = (tmp_path / "out.conllu").read_text()
    assert "2-3\tdo" in text
    assert text.index("2-3\tdo") < text.index("2\tde")
    assert read_conllu(tmp_path / "out.conllu") == sentences


def test_conllu_bad_column_count():
    with pytest.raises(CorpusError, match="<stdin>:2: expected 10 tab-separated columns"):
        parse_conllu_text("# text = x\n1\tx\tx\n\n")


def test_conllu_two_roots():
    text = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n\n"
    with pytest.raises(CorpusError, match="sentence 0: sentence has 2 root words"):
        parse_conllu_text(text)


def test_conllu_without_trees(tmp_path):
    sentences = read_conllu(DATA_DIR / "postags.conllu")
    assert sentences[0].upos == ("DET", "NOUN", "VERB")
    assert sentences[0].heads is None and sentences[0].deprels is None

    write_conllu(sentences, tmp_path / "out.conllu")
    lines = (tmp_path / "out.conllu").read_text().splitlines()
    assert lines[0].split("\t")[6:8] == ["_", "_"]
    assert read_conllu(tmp_path / "out.conllu") == sentences
    assert format_conllu([AnnotatedSentence(("a",))]).startswith("1\ta\t_\t_\t_")


def test_conllu_bad_id():
    with pytest.raises(CorpusError, match="<stdin>"):
        parse_conllu_text("x\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n")


def test_sentence_validation():
    with pytest.raises(CorpusError, match="layer 'upos' has 1 entries for 2 words"):
        AnnotatedSentence(("a", "b"), upos=("X",))
    with pytest.raises(CorpusError, match="word 2 is its own head"):
        AnnotatedSentence(("a", "b"), heads=(0, 2))
    with pytest.raises(CorpusError, match="head 5 outside"):
        AnnotatedSentence(("a", "b"), heads=(0, 5))


def test_read_bio():
    first, second = read_bio(DATA_DIR / "sample.bio")
    assert first.words[:3] == ("Rosalía", "de", "Castro")
    assert first.ner == ("B-PER", "I-PER", "I-PER", "O", "O", "B-LOC", "O")
    assert second.ner == ("O", "B-ORG", "I-ORG", "I-ORG", "O")


def test_bio_roundtrip(tmp_path):
    sentences = read_bio(DATA_DIR / "sample.bio")
    write_bio(sentences, tmp_path / "out.bio")
    assert read_bio(tmp_path / "out.bio") == sentences


def test_bio_unknown_tag(tmp_path):
    (tmp_path / "bad.bio").write_text("Lugo B-LOC\nXunta B-GOV\n")
    with pytest.raises(CorpusError, match="bad.bio:2: unknown tag 'B-GOV'"):
        read_bio(tmp_path / "bad.bio")
