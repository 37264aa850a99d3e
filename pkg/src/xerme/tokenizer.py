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
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .corpus import DocumentSet
from .errors import VocabError

logger = logging.getLogger(__name__)

SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(len(SPECIALS))
CONTINUATION = "##"
MAX_WORD_CHARS = 100

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    value = FNV_OFFSET
    for byte in data:
        value = ((value ^ byte) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return value


class Vocab:
    def __init__(self, pieces: Sequence[str]) -> None:
        pieces = tuple(pieces)
        if pieces[: len(SPECIALS)] != SPECIALS:
            raise VocabError(f"vocabulary must start with {', '.join(SPECIALS)}")
        index = {}
        for position, piece in enumerate(pieces):
            if not piece or any(c.isspace() for c in piece):
                raise VocabError(f"invalid piece {piece!r} at id {position}")
            if piece in index:
                raise VocabError(f"duplicate piece {piece!r} at ids {index[piece]} and {position}")
            index[piece] = position
        self._pieces = pieces
        self._index = index
        self._longest = max(len(self._body(p)) for p in pieces)
        self._fingerprint = None

    @staticmethod
    def _body(piece: str) -> str:
        return piece[len(CONTINUATION) :] if piece.startswith(CONTINUATION) else piece

    @property
    def pieces(self) -> Tuple[str, ...]:
        return self._pieces

    @property
    def size(self) -> int:
        return len(self._pieces)

    @property
    def pad_id(self) -> int:
        return PAD_ID

    @property
    def unk_id(self) -> int:
        return UNK_ID

    @property
    def cls_id(self) -> int:
        return CLS_ID

    @property
    def sep_id(self) -> int:
        return SEP_ID

    @property
    def mask_id(self) -> int:
        return MASK_ID

    @property
    def special_ids(self) -> Tuple[int, ...]:
        return tuple(range(len(SPECIALS)))

    @property
    def longest_piece(self) -> int:
        return self._longest

    @property
    def fingerprint(self) -> int:
        if self._fingerprint is None:
            self._fingerprint = fnv1a_64(self.to_text().encode("utf-8"))
        return self._fingerprint

    def __len__(self) -> int:
        return len(self._pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._pieces == other._pieces

    def id_of(self, piece: str) -> Optional[int]:
        return self._index.get(piece)

    def piece(self, id: int) -> str:
        if not 0 <= id < len(self._pieces):
            raise VocabError(f"id {id} outside vocabulary of size {len(self._pieces)}")
        return self._pieces[id]

    def is_special(self, id: int) -> bool:
        return 0 <= id < len(SPECIALS)

    def is_continuation(self, id: int) -> bool:
        return self.piece(id).startswith(CONTINUATION)

    def to_text(self) -> str:
        return "".join(f"{piece}\n" for piece in self._pieces)

    def save(self, path: Union[str, Path]):
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocab":
        try:
            text = Path(path).read_bytes().decode("utf-8")
        except (OSError, UnicodeDecodeError) as error:
            raise VocabError(f"{path}: cannot read vocabulary ({error})") from error
        return cls(text.splitlines())


@dataclass(frozen=True)
class TokenSequence:
    ids: Tuple[int, ...]
    word_start: Tuple[bool, ...]
    source_words: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class SegmentationStats:
    words: int
    pieces: int
    split_words: int
    unknown_words: int

    @property
    def fertility(self) -> float:
        return self.pieces / self.words if self.words else 0.0

    @property
    def split_rate(self) -> float:
        return self.split_words / self.words if self.words else 0.0

    @property
    def unk_rate(self) -> float:
        return self.unknown_words / self.words if self.words else 0.0


def _is_punctuation(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def pretokenize(text: str) -> List[str]:
    words = []
    for token in unicodedata.normalize("NFC", text).split():
        current = ""
        for char in token:
            if _is_punctuation(char):
                if current:
                    words.append(current)
                current = ""
                words.append(char)
            else:
                current += char
        if current:
            words.append(current)
    return words


def _merged(left: str, right: str) -> str:
    return left + right[len(CONTINUATION) :]


class _PairStatistics:
    def __init__(self, counts: Dict[str, int]) -> None:
        self.words = sorted(counts)
        self.freqs = [counts[word] for word in self.words]
        self.splits = [[w[0]] + [CONTINUATION + c for c in w[1:]] for w in self.words]
        self.pieces: Counter = Counter()
        self.pairs: Counter = Counter()
        self.where: Dict[Tuple[str, str], Set[int]] = defaultdict(set)
        for index in range(len(self.words)):
            self._account(index, +1)

    def _account(self, index: int, sign: int):
        split, freq = self.splits[index], self.freqs[index]
        for piece in split:
            self.pieces[piece] += sign * freq
            if self.pieces[piece] <= 0:
                del self.pieces[piece]
        for pair in zip(split, split[1:]):
            self.pairs[pair] += sign * freq
            if sign > 0:
                self.where[pair].add(index)
            elif self.pairs[pair] <= 0:
                del self.pairs[pair]

    def _key(self, pair: Tuple[str, str]):
        freq = self.pairs[pair]
        score = freq / (self.pieces[pair[0]] * self.pieces[pair[1]])
        return (-score, -freq, pair)

    def best(self, min_frequency: int) -> Optional[Tuple[str, str]]:
        candidates = [pair for pair, freq in self.pairs.items() if freq >= min_frequency]
        return min(candidates, key=self._key) if candidates else None

    def rejected(self) -> List[Tuple[str, str]]:
        return sorted(self.pairs, key=self._key)

    def merge(self, pair: Tuple[str, str]):
        left, right = pair
        for index in sorted(self.where.pop(pair, ())):
            split = self.splits[index]
            if not any(a == left and b == right for a, b in zip(split, split[1:])):
                continue
            self._account(index, -1)
            merged, position = [], 0
            while position < len(split):
                if (
                    position + 1 < len(split)
                    and split[position] == left
                    and split[position + 1] == right
                ):
                    merged.append(_merged(left, right))
                    position += 2
                else:
                    merged.append(split[position])
                    position += 1
            self.splits[index] = merged
            self._account(index, +1)
        self.pairs.pop(pair, None)


def train_vocab(
    corpus: DocumentSet, target_size: int = 30000, min_frequency: int = 2
) -> Vocab:
    counts = Counter(word for line in corpus.lines() for word in pretokenize(line))
    if not counts:
        raise VocabError("cannot train a vocabulary on an empty corpus")

    chars = sorted({char for word in counts for char in word})
    alphabet = chars + [CONTINUATION + char for char in chars]
    required = len(SPECIALS) + len(alphabet)
    if target_size < required:
        raise VocabError(
            f"target size {target_size} is too small, the alphabet needs at least {required}"
        )

    pieces = list(SPECIALS) + alphabet
    known = set(pieces)
    statistics = _PairStatistics(counts)
    merges = 0
    while len(pieces) < target_size:
        pair = statistics.best(min_frequency)
        if pair is None:
            break
        statistics.merge(pair)
        merges += 1
        piece = _merged(*pair)
        if piece not in known:
            pieces.append(piece)
            known.add(piece)

    padding = 0
    for pair in statistics.rejected():
        if len(pieces) >= target_size:
            break
        piece = _merged(*pair)
        if piece not in known:
            pieces.append(piece)
            known.add(piece)
            padding += 1

    if len(pieces) < target_size:
        raise VocabError(
            f"corpus only yields {len(pieces)} pieces, cannot reach {target_size}"
        )
    logger.info(
        "Trained vocabulary of %d pieces (%d characters, %d merges, %d padding)",
        len(pieces), len(chars), merges, padding,
    )
    return Vocab(pieces)


def encode_word(vocab: Vocab, word: str) -> List[str]:
    word = unicodedata.normalize("NFC", word)
    if len(word) > MAX_WORD_CHARS:
        return [SPECIALS[UNK_ID]]

    pieces, start = [], 0
    while start < len(word):
        end = min(len(word), start + vocab.longest_piece)
        piece = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = CONTINUATION + candidate
            if candidate in vocab:
                piece = candidate
                break
            end -= 1
        if piece is None:
            return [SPECIALS[UNK_ID]]
        pieces.append(piece)
        start = end
    return pieces


def encode_sentence(
    vocab: Vocab, words: Sequence[str], add_specials: bool = True
) -> TokenSequence:
    if not words:
        raise VocabError("cannot encode an empty sentence")
    ids, word_start = [], []
    if add_specials:
        ids.append(CLS_ID)
        word_start.append(False)
    for word in words:
        for position, piece in enumerate(encode_word(vocab, word)):
            ids.append(vocab.id_of(piece))
            word_start.append(position == 0)
    if add_specials:
        ids.append(SEP_ID)
        word_start.append(False)
    return TokenSequence(tuple(ids), tuple(word_start), tuple(words))


def decode(vocab: Vocab, ids: Iterable[int]) -> str:
    words: List[str] = []
    for id in ids:
        piece = vocab.piece(int(id))
        if vocab.is_special(int(id)):
            continue
        if piece.startswith(CONTINUATION) and words:
            words[-1] += piece[len(CONTINUATION) :]
        else:
            words.append(Vocab._body(piece))
    return " ".join(words)


def segmentation_stats(vocab: Vocab, words: Iterable[str]) -> SegmentationStats:
    total = pieces = split = unknown = 0
    for word in words:
        segments = encode_word(vocab, word)
        total += 1
        pieces += len(segments)
        split += len(segments) > 1
        unknown += segments == [SPECIALS[UNK_ID]]
    return SegmentationStats(total, pieces, split, unknown)
