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

import logging, math, re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from conllu import parse as parse_conllu
from conllu import TokenList
from conllu.exceptions import ParseException
from conllu.models import Token

from .errors import CorpusError

logger = logging.getLogger(__name__)

NER_CLASSES = ("PER", "LOC", "ORG", "MISC")
NER_TAGS = ("O",) + tuple(f"{p}-{c}" for c in NER_CLASSES for p in ("B", "I"))

MANIFEST_HEADER = re.compile(r"^#\s*train_fraction=(?P<fraction>\S+)\s+unit=(?P<unit>\S+)")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    spans: Tuple[Tuple[int, int], ...] = ()
    source: str = ""

    @property
    def lines(self) -> List[str]:
        return [self.text[start:end] for start, end in self.spans]


@dataclass(frozen=True)
class DocumentSet:
    documents: Tuple[Document, ...] = ()

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, index: int) -> Document:
        return self.documents[index]

    @property
    def ids(self) -> List[str]:
        return [document.doc_id for document in self.documents]

    def lines(self) -> Iterator[str]:
        for document in self.documents:
            yield from document.lines


@dataclass(frozen=True)
class AnnotatedSentence:
    words: Tuple[str, ...]
    upos: Optional[Tuple[str, ...]] = None
    fpos: Optional[Tuple[str, ...]] = None
    heads: Optional[Tuple[int, ...]] = None
    deprels: Optional[Tuple[str, ...]] = None
    ner: Optional[Tuple[str, ...]] = None
    # multiword token ranges and empty nodes, as (words before the line, token)
    extras: Tuple[Tuple[int, Token], ...] = field(default=(), compare=False)

    def __post_init__(self):
        n = len(self.words)
        for name in ("upos", "fpos", "heads", "deprels", "ner"):
            layer = getattr(self, name)
            if layer is not None and len(layer) != n:
                raise CorpusError(
                    f"layer '{name}' has {len(layer)} entries for {n} words"
                )
        if self.heads is not None:
            for index, head in enumerate(self.heads, start=1):
                if not 0 <= head <= n:
                    raise CorpusError(f"word {index} has head {head} outside 0..{n}")
                if head == index:
                    raise CorpusError(f"word {index} is its own head")
            roots = sum(1 for head in self.heads if head == 0)
            if roots != 1:
                raise CorpusError(f"sentence has {roots} root words, expected 1")

    def __len__(self) -> int:
        return len(self.words)


class SplitUnit(Enum):
    DOCUMENT = "document"
    FILE = "file"


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.95
    unit: SplitUnit = SplitUnit.DOCUMENT

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise CorpusError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        if not isinstance(self.unit, SplitUnit):
            object.__setattr__(self, "unit", SplitUnit(self.unit))


def _decode(filename: Path) -> str:
    try:
        data = filename.read_bytes()
    except OSError as error:
        raise CorpusError(f"{filename}: {error.strerror}") from error
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as error:
        raise CorpusError(
            f"{filename}: invalid UTF-8 at byte offset {error.start}"
        ) from error


def _blocks(text: str) -> Iterator[Tuple[int, List[Tuple[int, int]]]]:
    start, spans, offset = None, [], 0
    for line in text.splitlines(keepends=True):
        body = line.rstrip("\r\n")
        if body.strip():
            if start is None:
                start, spans = offset, []
            spans.append((offset, offset + len(body)))
        elif start is not None:
            yield start, spans
            start = None
        offset += len(line)
    if start is not None:
        yield start, spans


def _corpus_files(path: Path) -> List[Tuple[str, Path]]:
    if path.is_file():
        return [(path.name, path)]
    files = []
    for filename in path.rglob("*"):
        relative = filename.relative_to(path)
        if filename.is_file() and not any(p.startswith(".") for p in relative.parts):
            files.append((relative.as_posix(), filename))
    return sorted(files)


def load_raw_corpus(path: Union[str, Path]) -> DocumentSet:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"{path}: no such file or directory")

    documents = []
    for name, filename in _corpus_files(path):
        text = _decode(filename)
        for index, (start, spans) in enumerate(_blocks(text)):
            end = spans[-1][1]
            documents.append(
                Document(
                    doc_id=f"{name}:{index}",
                    text=text[start:end],
                    spans=tuple((s - start, e - start) for s, e in spans),
                    source=name,
                )
            )
    logger.info("Loaded %d documents from %s", len(documents), path)
    return DocumentSet(tuple(documents))


def _prefix_size(count: int, fraction: float) -> int:
    if count < 2:
        raise CorpusError(f"at least 2 units are needed to split, got {count}")
    size = math.ceil(round(fraction * count, 9))
    return min(max(size, 1), count - 1)


def split_corpus(docs: DocumentSet, spec: SplitSpec) -> Tuple[DocumentSet, DocumentSet]:
    if spec.unit == SplitUnit.FILE:
        units: List[List[Document]] = []
        for document in docs:
            if not units or units[-1][0].source != document.source:
                units.append([])
            units[-1].append(document)
    else:
        units = [[document] for document in docs]

    size = _prefix_size(len(units), spec.train_fraction)
    train = tuple(d for unit in units[:size] for d in unit)
    dev = tuple(d for unit in units[size:] for d in unit)
    logger.info("Split %d documents into %d train / %d dev", len(docs), len(train), len(dev))
    return DocumentSet(train), DocumentSet(dev)


def split_sentences(
    sentences: Sequence[AnnotatedSentence],
    train_fraction: Optional[float] = None,
    dev_tokens: Optional[int] = None,
) -> Tuple[List[AnnotatedSentence], List[AnnotatedSentence]]:
    if (train_fraction is None) == (dev_tokens is None):
        raise CorpusError("give exactly one of train_fraction or dev_tokens")
    if train_fraction is not None:
        size = _prefix_size(len(sentences), SplitSpec(train_fraction).train_fraction)
    else:
        if dev_tokens <= 0:
            raise CorpusError(f"dev_tokens must be positive, got {dev_tokens}")
        if len(sentences) < 2:
            raise CorpusError(f"at least 2 units are needed to split, got {len(sentences)}")
        size, tokens = len(sentences), 0
        while size > 0 and tokens < dev_tokens:
            size -= 1
            tokens += len(sentences[size])
        size = min(max(size, 1), len(sentences) - 1)
    return list(sentences[:size]), list(sentences[size:])


def write_split_manifest(
    train: DocumentSet, dev: DocumentSet, spec: SplitSpec, path: Union[str, Path]
):
    lines = [f"# train_fraction={spec.train_fraction} unit={spec.unit.value}"]
    lines += [f"train\t{doc_id}" for doc_id in train.ids]
    lines += [f"dev\t{doc_id}" for doc_id in dev.ids]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_split_manifest(path: Union[str, Path]) -> Tuple[SplitSpec, List[str], List[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = MANIFEST_HEADER.match(lines[0]) if lines else None
    if not header:
        raise CorpusError(f"{path}:1: missing split manifest header")
    spec = SplitSpec(float(header["fraction"]), SplitUnit(header["unit"]))
    sides = {"train": [], "dev": []}
    for lineno, line in enumerate(lines[1:], start=2):
        side, _, doc_id = line.partition("\t")
        if side not in sides or not doc_id:
            raise CorpusError(f"{path}:{lineno}: malformed manifest line")
        sides[side].append(doc_id)
    return spec, sides["train"], sides["dev"]


def write_raw_corpus(docs: DocumentSet, path: Union[str, Path]):
    text = "\n\n".join(document.text for document in docs)
    Path(path).write_text(text + "\n" if text else "", encoding="utf-8")


def _validate_conllu(path: str, text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != 10:
            raise CorpusError(
                f"{path}:{lineno}: expected 10 tab-separated columns, found {len(columns)}"
            )
        if columns[0].isdigit() and columns[6] != "_" and not columns[6].isdigit():
            raise CorpusError(f"{path}:{lineno}: head '{columns[6]}' is not an integer")


def _layer(tokens: List[Token], name: str) -> Optional[Tuple[str, ...]]:
    values = [token.get(name) for token in tokens]
    if all(value in (None, "_") for value in values):
        return None
    return tuple("_" if value is None else str(value) for value in values)


def read_conllu(path: Union[str, Path]) -> List[AnnotatedSentence]:
    path = Path(path)
    return parse_conllu_text(_decode(path), str(path))


def parse_conllu_text(text: str, path: str = "<stdin>") -> List[AnnotatedSentence]:
    _validate_conllu(path, text)

    try:
        tokenlists = parse_conllu(text)
    except ParseException as error:
        raise CorpusError(f"{path}: {error}") from error

    sentences = []
    for index, tokenlist in enumerate(tokenlists):
        words, extras = [], []
        for token in tokenlist:
            if isinstance(token["id"], int):
                words.append(token)
            else:
                extras.append((len(words), token))
        heads = [token.get("head") for token in words]
        try:
            sentences.append(
                AnnotatedSentence(
                    words=tuple(token["form"] for token in words),
                    upos=_layer(words, "upos"),
                    fpos=_layer(words, "xpos"),
                    heads=None if None in heads else tuple(heads),
                    deprels=_layer(words, "deprel"),
                    extras=tuple(extras),
                )
            )
        except CorpusError as error:
            raise CorpusError(f"{path}: sentence {index}: {error}") from error
    logger.debug("Read %d sentences from %s", len(sentences), path)
    return sentences


def _value(layer: Optional[Sequence], index: int):
    if layer is None or layer[index] == "_":
        return None
    return layer[index]


def format_conllu(sentences: Sequence[AnnotatedSentence]) -> str:
    blocks = []
    for sentence in sentences:
        extras = list(sentence.extras)
        tokens = []
        for index, word in enumerate(sentence.words):
            while extras and extras[0][0] == index:
                tokens.append(extras.pop(0)[1])
            tokens.append(
                Token(
                    {
                        "id": index + 1,
                        "form": word,
                        "lemma": None,
                        "upos": _value(sentence.upos, index),
                        "xpos": _value(sentence.fpos, index),
                        "feats": None,
                        "head": None if sentence.heads is None else sentence.heads[index],
                        "deprel": _value(sentence.deprels, index),
                        "deps": None,
                        "misc": None,
                    }
                )
            )
        tokens.extend(token for _, token in extras)
        blocks.append(TokenList(tokens).serialize())
    return "".join(blocks)


def write_conllu(sentences: Sequence[AnnotatedSentence], path: Union[str, Path]):
    Path(path).write_text(format_conllu(sentences), encoding="utf-8")


def read_bio(path: Union[str, Path]) -> List[AnnotatedSentence]:
    path = Path(path)
    sentences, words, tags = [], [], []
    for lineno, line in enumerate(_decode(path).splitlines(), start=1):
        columns = line.split()
        if not columns:
            if words:
                sentences.append(AnnotatedSentence(tuple(words), ner=tuple(tags)))
                words, tags = [], []
            continue
        if columns[0] == "-DOCSTART-":
            continue
        if len(columns) != 2:
            raise CorpusError(f"{path}:{lineno}: expected 'token TAG', found {line!r}")
        if columns[1] not in NER_TAGS:
            raise CorpusError(f"{path}:{lineno}: unknown tag '{columns[1]}'")
        words.append(columns[0])
        tags.append(columns[1])
    if words:
        sentences.append(AnnotatedSentence(tuple(words), ner=tuple(tags)))
    return sentences


def write_bio(sentences: Sequence[AnnotatedSentence], path: Union[str, Path]):
    blocks = []
    for sentence in sentences:
        if sentence.ner is None:
            raise CorpusError("write_bio needs the ner layer on every sentence")
        blocks.append(
            "".join(f"{word} {tag}\n" for word, tag in zip(sentence.words, sentence.ner))
        )
    Path(path).write_text("\n".join(blocks), encoding="utf-8")
