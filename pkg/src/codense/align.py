"""Greedy source-to-summary sentence alignment and derived statistics.

A summary sentence is aligned by repeatedly adding the source sentence
that most improves the alignment score of the concatenated selection,
stopping as soon as the marginal gain is no longer positive. Fusion is
the mean number of aligned source sentences per summary sentence;
content distribution is the mean (1-based) rank of all aligned source
sentences, raw and normalized by document length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from . import overlap, textcore
from .textcore import SentenceSeq

__all__ = [
    "AlignmentMap",
    "ContentRank",
    "make_scorer",
    "default_scorer",
    "align_sentence",
    "align_summary",
    "fusion_score",
    "content_distribution",
    "GAIN_EPSILON",
    "MAX_ALIGNED",
]

# Absolute epsilon absorbing float noise in "gain no longer positive".
GAIN_EPSILON = 1e-9
# Bound on greedy selections per target sentence.
MAX_ALIGNED = 10

Scorer = Callable[[Sequence[str], Sequence[str]], float]


@dataclass(frozen=True)
class AlignmentMap:
    """Aligned source-sentence indices per summary sentence (greedy order)."""

    per_sentence: tuple[tuple[int, ...], ...]
    n_source: int


@dataclass(frozen=True)
class ContentRank:
    mean_rank: float | None
    norm_rank: float | None

    @property
    def defined(self) -> bool:
        return self.mean_rank is not None


def _mean_rouge12(candidate: Sequence[str], reference: Sequence[str]) -> float:
    r1 = overlap.rouge_n(candidate, reference, 1).f1
    r2 = overlap.rouge_n(candidate, reference, 2).f1
    return (r1 + r2) / 2


def _rouge1_recall(candidate: Sequence[str], reference: Sequence[str]) -> float:
    return overlap.rouge_n(candidate, reference, 1).recall


_SCORERS: dict[str, Scorer] = {
    "rouge12-f1": _mean_rouge12,
    "rouge1-recall": _rouge1_recall,
}


def default_scorer() -> Scorer:
    return _mean_rouge12


def make_scorer(name: str) -> Scorer:
    try:
        return _SCORERS[name]
    except KeyError:
        raise ValueError(
            f"unknown alignment scorer {name!r}; available: {sorted(_SCORERS)}"
        ) from None


def align_sentence(
    source: SentenceSeq | Sequence[str],
    target_sentence: str,
    scorer: Scorer | None = None,
) -> tuple[int, ...]:
    """Greedily select source sentences for one target sentence.

    Returns indices in selection order. Empty when even the best single
    source sentence scores zero against the target.
    """
    texts = source.texts if isinstance(source, SentenceSeq) else list(source)
    if not texts:
        raise ValueError("cannot align against an empty source document")
    scorer = scorer or default_scorer()

    source_tokens = [textcore.tokenize(t).strings for t in texts]
    target_tokens = textcore.tokenize(target_sentence).strings

    selected: list[int] = []
    current = 0.0
    cap = min(MAX_ALIGNED, len(texts))
    while len(selected) < cap:
        best_idx = -1
        best_score = float("-inf")
        for idx in range(len(texts)):
            if idx in selected:
                continue
            candidate: list[str] = []
            for k in sorted(selected + [idx]):
                candidate.extend(source_tokens[k])
            score = scorer(candidate, target_tokens)
            if score > best_score + GAIN_EPSILON:
                best_score = score
                best_idx = idx
        if best_idx < 0 or best_score - current <= GAIN_EPSILON:
            break
        selected.append(best_idx)
        current = best_score
    return tuple(selected)


def align_summary(
    source: SentenceSeq, summary: SentenceSeq, scorer: Scorer | None = None
) -> AlignmentMap:
    """Align every summary sentence against the source document."""
    if len(summary) == 0:
        raise ValueError("summary has no sentences")
    per_sentence = tuple(
        align_sentence(source, sent.text, scorer) for sent in summary
    )
    return AlignmentMap(per_sentence, len(source))


def fusion_score(
    source: SentenceSeq,
    summary: SentenceSeq,
    scorer: Scorer | None = None,
    alignment: AlignmentMap | None = None,
) -> float:
    """Mean aligned-source-sentence count per summary sentence."""
    alignment = alignment or align_summary(source, summary, scorer)
    counts = [len(s) for s in alignment.per_sentence]
    return sum(counts) / len(counts)


def content_distribution(
    source: SentenceSeq,
    summary: SentenceSeq,
    scorer: Scorer | None = None,
    alignment: AlignmentMap | None = None,
) -> ContentRank:
    """Mean 1-based rank of all aligned source sentences, pooled with
    multiplicity across summary sentences. Undefined (None fields) when
    nothing aligns anywhere."""
    alignment = alignment or align_summary(source, summary, scorer)
    ranks = [idx + 1 for sent in alignment.per_sentence for idx in sent]
    if not ranks:
        return ContentRank(None, None)
    mean_rank = sum(ranks) / len(ranks)
    n = alignment.n_source
    if n == 1:
        norm = 0.0
    else:
        norm = sum((r - 1) / (n - 1) for r in ranks) / len(ranks)
    return ContentRank(mean_rank, norm)
