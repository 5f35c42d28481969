"""Deterministic word tokenization and sentence splitting.

Every metric in this package counts tokens and sentences through this
module, so the rules are intentionally simple and fully reproducible:

* whitespace-delimited chunks, with leading/trailing punctuation detached
  into their own tokens;
* tokens with internal digit-punctuation patterns (scores like "3-1",
  decimals like "4.5", grouped numbers like "1,000") are kept whole;
* a configurable abbreviation list ("Mr.", "U.S.", ...) keeps the trailing
  period attached and suppresses sentence breaks;
* input is NFC-normalized before any rule is applied.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

__all__ = [
    "Token",
    "TokenSeq",
    "Sentence",
    "SentenceSeq",
    "tokenize",
    "split_sentences",
    "token_count",
    "load_abbreviations",
    "DEFAULT_ABBREVIATIONS",
]

DEFAULT_ABBREVIATIONS = frozenset({"Mr.", "Mrs.", "Dr.", "U.S.", "St."})

# Characters detached from chunk edges. Internal occurrences are kept.
_PUNCT = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~…‘’“”«»")

# Leading currency symbols are kept attached when a digit follows.
_CURRENCY = set("$€£¥₹")

_WS_CHUNK = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenSeq:
    """Tokens with character spans into the NFC-normalized source."""

    tokens: tuple[Token, ...]
    source: str

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @property
    def strings(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class SentenceSeq:
    sentences: tuple[Sentence, ...]
    source: str

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


def load_abbreviations(path) -> frozenset[str]:
    """Read an abbreviation list, one entry per line, '#' comments allowed."""
    entries = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                entries.add(line)
    return frozenset(entries)


def _split_chunk(chunk: str, offset: int, abbreviations: frozenset[str]) -> list[Token]:
    """Apply the edge-detachment rules to one whitespace-delimited chunk."""
    if chunk in abbreviations:
        return [Token(chunk, offset, offset + len(chunk))]

    start = 0
    end = len(chunk)
    leading: list[tuple[str, int]] = []
    trailing: list[tuple[str, int]] = []

    while start < end and chunk[start] in _PUNCT:
        # a currency symbol stays attached to the amount it prefixes
        if chunk[start] in _CURRENCY and start + 1 < len(chunk) and chunk[start + 1].isdigit():
            break
        leading.append((chunk[start], offset + start))
        start += 1
    while end > start:
        core = chunk[start:end]
        if core in abbreviations or core[-1] not in _PUNCT:
            break
        trailing.append((core[-1], offset + end - 1))
        end -= 1

    tokens = [Token(ch, pos, pos + 1) for ch, pos in leading]
    if end > start:
        tokens.append(Token(chunk[start:end], offset + start, offset + end))
    tokens.extend(Token(ch, pos, pos + 1) for ch, pos in reversed(trailing))
    return tokens


def tokenize(text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> TokenSeq:
    """Tokenize text into words and detached punctuation marks."""
    source = unicodedata.normalize("NFC", text)
    tokens: list[Token] = []
    for m in _WS_CHUNK.finditer(source):
        tokens.extend(_split_chunk(m.group(), m.start(), abbreviations))
    return TokenSeq(tuple(tokens), source)


def token_count(text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> int:
    return len(tokenize(text, abbreviations))


# A sentence boundary is terminal punctuation (optionally followed by a
# closing quote/bracket run) then whitespace, then a capital letter, digit
# or opening quote.
_BOUNDARY = re.compile(r"[.!?]+[\"'’”)\]]*(\s+)(?=[\"'‘“(\[]*[A-Z0-9])")


def split_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> SentenceSeq:
    """Split text into sentences on terminal punctuation.

    Boundaries inside abbreviations from the exception list do not split.
    Every non-whitespace character lands in exactly one sentence.
    """
    source = unicodedata.normalize("NFC", text)
    if not source.strip():
        return SentenceSeq((), source)

    cut_points = []
    for m in _BOUNDARY.finditer(source):
        # The chunk ending at the punctuation decides the abbreviation case:
        # "Mr." must not split, "home." must.
        chunk_start = m.start()
        while chunk_start > 0 and not source[chunk_start - 1].isspace():
            chunk_start -= 1
        chunk = source[chunk_start : m.start(1)]
        if chunk in abbreviations:
            continue
        cut_points.append((m.start(1), m.end(1)))

    sentences: list[Sentence] = []
    pos = 0
    for ws_start, ws_end in cut_points:
        seg = source[pos:ws_start]
        sentences.append(_trim(seg, pos))
        pos = ws_end
    sentences.append(_trim(source[pos:], pos))
    return SentenceSeq(tuple(s for s in sentences if s is not None), source)


def _trim(segment: str, offset: int) -> Sentence | None:
    stripped = segment.strip()
    if not stripped:
        return None
    start = offset + len(segment) - len(segment.lstrip())
    end = offset + len(segment.rstrip())
    return Sentence(stripped, start, end)
