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
import yaml
from yamlinclude import YamlIncludeConstructor
from pathlib import Path
from typing import Dict, List, Sequence

from xerme.corpus import AnnotatedSentence, Document, DocumentSet
from xerme.tokenizer import SPECIALS, Vocab

DATA_DIR = Path(__file__).parent / "data"

SYLLABLES = ("ca", "mi", "ño", "se", "ra", "lo", "pa", "te", "no", "su")


def load_config(filename: str) -> Dict:
    YamlIncludeConstructor.add_to_loader_class(
        loader_class=yaml.FullLoader, base_dir=DATA_DIR
    )

    with open(DATA_DIR / filename) as file:
        result = yaml.load(file, Loader=yaml.FullLoader)
    return result


def make_vocab(pieces: Sequence[str]) -> Vocab:
    return Vocab(list(SPECIALS) + list(pieces))


def patterned_words(n_words: int, seed: int = 0) -> List[str]:
    """Words following a fixed cyclic grammar with a little noise, easy to model."""
    rng = np.random.default_rng(seed)
    words = []
    for index in range(n_words):
        position = index % len(SYLLABLES)
        if rng.random() < 0.05:
            position = int(rng.integers(0, len(SYLLABLES)))
        words.append(SYLLABLES[position] + SYLLABLES[(position + 3) % len(SYLLABLES)])
    return words


def patterned_corpus(n_tokens: int, n_documents: int, seed: int = 0) -> DocumentSet:
    words = patterned_words(n_tokens, seed)
    size = len(words) // n_documents
    documents = []
    for index in range(n_documents):
        text = " ".join(words[index * size : (index + 1) * size])
        documents.append(Document(f"synthetic:{index}", text, ((0, len(text)),), "synthetic"))
    return DocumentSet(tuple(documents))


def patterned_vocab() -> Vocab:
    pieces = sorted({a + b for a in SYLLABLES for b in SYLLABLES})
    return make_vocab(pieces)


TOY_TAGS = {"gato": "NOUN", "come": "VERB", "o": "DET", "rápido": "ADV", "peixe": "NOUN2"}


def toy_sentences(n: int, seed: int = 0) -> List[AnnotatedSentence]:
    rng = np.random.default_rng(seed)
    words = sorted(TOY_TAGS)
    sentences = []
    for _ in range(n):
        chosen = [words[int(i)] for i in rng.integers(0, len(words), size=int(rng.integers(3, 9)))]
        sentences.append(
            AnnotatedSentence(tuple(chosen), upos=tuple(TOY_TAGS[word] for word in chosen))
        )
    return sentences
