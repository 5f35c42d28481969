"""Rule-based unique-entity extraction and entity density.

Entity density (unique entities per token) is the central measurement of
this toolkit. The extractor is a deterministic rule cascade:

1. maximal runs of capitalized tokens (sentence-initial capitalized tokens
   are kept unless they are common function words and never recur
   capitalized mid-sentence);
2. tokens containing digits (scores, ages, counts, dates);
3. currency-symbol-prefixed tokens;
4. a weekday/month gazetteer (case-insensitive, extensible from a file).

Uniqueness is per text, keyed on the case-folded surface form. For exact
reproduction studies a JSONL sidecar of externally computed entity lists
can override the cascade entirely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from . import textcore

__all__ = [
    "EntityCategory",
    "Entity",
    "EntitySet",
    "ExtractorConfig",
    "DensityRecord",
    "SidecarError",
    "extract_entities",
    "entity_density",
    "corpus_density",
    "load_entity_sidecar",
    "load_gazetteer",
    "DEFAULT_GAZETTEER",
]


class EntityCategory(str, Enum):
    PERSON_LIKE = "PERSON_LIKE"
    ORG_LOC_LIKE = "ORG_LOC_LIKE"
    NUMERIC = "NUMERIC"
    DATE_LIKE = "DATE_LIKE"
    MONEY = "MONEY"
    OTHER = "OTHER"


DEFAULT_GAZETTEER = frozenset(
    w.casefold()
    for w in (
        "Monday Tuesday Wednesday Thursday Friday Saturday Sunday "
        "January February March April May June July August September "
        "October November December"
    ).split()
)

# Sentence-initial capitalized function words are ordinary sentence
# capitalization, not names.
_FUNCTION_WORDS = frozenset(
    """
    a an the this that these those it its he she they we you i his her their
    our your in on at by for of to from with without as and or but nor so yet
    if when while after before because although though since until once
    there here what who whom whose which why how not no all both each few
    more most other some such only own same than too very just now then
    is are was were be been being do does did have has had will would can
    could may might must shall should
    """.split()
)

_CURRENCY = "$€£¥₹"


@dataclass(frozen=True)
class Entity:
    surface_form: str
    category: EntityCategory
    first_span: tuple[int, int]


@dataclass(frozen=True)
class EntitySet:
    """Unique entities of one text, keyed by case-folded surface form."""

    entities: tuple[Entity, ...]

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self):
        return iter(self.entities)

    @property
    def surface_forms(self) -> set[str]:
        return {e.surface_form for e in self.entities}


@dataclass(frozen=True)
class ExtractorConfig:
    gazetteer: frozenset[str] = DEFAULT_GAZETTEER
    function_words: frozenset[str] = _FUNCTION_WORDS
    abbreviations: frozenset[str] = textcore.DEFAULT_ABBREVIATIONS


@dataclass(frozen=True)
class DensityRecord:
    token_count: int
    entity_count: int
    density: float


class SidecarError(ValueError):
    """Malformed or inconsistent entity sidecar file."""


def load_gazetteer(path) -> frozenset[str]:
    """Read gazetteer terms, one per line, case-insensitive."""
    terms = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                terms.add(line.casefold())
    return frozenset(terms)


def _is_capitalized(tok: str) -> bool:
    return tok[:1].isalpha() and tok[:1].isupper()


def _categorize(surface: str, gazetteer: frozenset[str]) -> EntityCategory:
    if surface[0] in _CURRENCY:
        return EntityCategory.MONEY
    if surface.casefold() in gazetteer:
        return EntityCategory.DATE_LIKE
    if any(ch.isdigit() for ch in surface):
        return EntityCategory.NUMERIC
    if " " in surface:
        return EntityCategory.PERSON_LIKE
    return EntityCategory.ORG_LOC_LIKE


def extract_entities(text: str, config: ExtractorConfig | None = None) -> EntitySet:
    """Run the rule cascade over the text and deduplicate surface forms."""
    config = config or ExtractorConfig()
    sentences = textcore.split_sentences(text, config.abbreviations)

    sent_tokens = [
        textcore.tokenize(s.text, config.abbreviations) for s in sentences
    ]

    # A sentence-initial capitalized token counts as a name when it recurs
    # capitalized mid-sentence, sits in the gazetteer, or is not a common
    # function word (plain sentence capitalization).
    mid_sentence_caps = {
        tok.text.casefold()
        for seq in sent_tokens
        for i, tok in enumerate(seq)
        if i > 0 and _is_capitalized(tok.text)
    }

    found: dict[str, Entity] = {}

    def add(surface: str, start: int, end: int) -> None:
        key = surface.casefold()
        if key not in found:
            found[key] = Entity(surface, _categorize(surface, config.gazetteer), (start, end))

    for sentence, seq in zip(sentences, sent_tokens):
        tokens = list(seq)
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if _is_capitalized(tok.text) and _qualifies(
                tok.text, i, mid_sentence_caps, config
            ):
                j = i + 1
                while j < len(tokens) and _is_capitalized(tokens[j].text):
                    j += 1
                start = sentence.start + tokens[i].start
                end = sentence.start + tokens[j - 1].end
                add(sentence.text[tokens[i].start : tokens[j - 1].end], start, end)
                i = j
                continue
            if any(ch.isdigit() for ch in tok.text) or tok.text[0] in _CURRENCY:
                add(tok.text, sentence.start + tok.start, sentence.start + tok.end)
            elif tok.text.casefold() in config.gazetteer:
                add(tok.text, sentence.start + tok.start, sentence.start + tok.end)
            i += 1

    return EntitySet(tuple(found.values()))


def _qualifies(
    token: str, index: int, mid_sentence_caps: set[str], config: ExtractorConfig
) -> bool:
    if index > 0:
        return True
    key = token.casefold()
    return (
        key in mid_sentence_caps
        or key in config.gazetteer
        or key not in config.function_words
    )


def entity_density(summary: str, entity_set: EntitySet) -> DensityRecord:
    """Unique entities per token for one summary."""
    tokens = textcore.token_count(summary)
    if tokens == 0:
        raise ValueError("cannot compute entity density of a zero-token summary")
    return DensityRecord(tokens, len(entity_set), len(entity_set) / tokens)


def corpus_density(records: list[DensityRecord]) -> float:
    """Arithmetic mean of per-summary densities (mean of ratios)."""
    if not records:
        raise ValueError("corpus_density requires at least one record")
    return sum(r.density for r in records) / len(records)


def load_entity_sidecar(path, known_summary_ids=None) -> dict[str, EntitySet]:
    """Load externally computed entity annotations.

    JSONL rows: {"summary_id": str, "entities": [str]}. When
    known_summary_ids is given, rows referencing other ids are rejected.
    """
    result: dict[str, EntitySet] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SidecarError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(row, dict) or "summary_id" not in row or "entities" not in row:
                raise SidecarError(f"line {lineno}: expected summary_id and entities keys")
            sid = row["summary_id"]
            ents = row["entities"]
            if not isinstance(sid, str) or not isinstance(ents, list) or not all(
                isinstance(e, str) for e in ents
            ):
                raise SidecarError(f"line {lineno}: malformed row")
            if known_summary_ids is not None and sid not in known_summary_ids:
                raise SidecarError(f"line {lineno}: unknown summary id {sid!r}")
            dedup: dict[str, Entity] = {}
            for surface in ents:
                key = surface.casefold()
                if key not in dedup:
                    dedup[key] = Entity(surface, EntityCategory.OTHER, (0, 0))
            result[sid] = EntitySet(tuple(dedup.values()))
    return result
