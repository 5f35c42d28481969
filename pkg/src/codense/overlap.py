"""N-gram overlap (ROUGE-N) and extractive fragment statistics.

Token comparison is case-folded and unstemmed throughout. Fragments follow
the greedy maximal-span scan: at each summary position take the longest
span that occurs contiguously in the article (ties broken by the earliest
article occurrence), advance by its length, or by one if nothing matches.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .textcore import TokenSeq

__all__ = [
    "RougeScore",
    "Fragment",
    "FragmentSet",
    "rouge_n",
    "extractive_fragments",
    "extractive_density",
    "extractive_coverage",
]


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float
    n: int


@dataclass(frozen=True)
class Fragment:
    summary_start: int
    article_start: int
    length: int


@dataclass(frozen=True)
class FragmentSet:
    fragments: tuple[Fragment, ...]

    def __len__(self) -> int:
        return len(self.fragments)

    def __iter__(self):
        return iter(self.fragments)


def _strings(tokens) -> list[str]:
    if isinstance(tokens, TokenSeq):
        return [t.text.casefold() for t in tokens]
    return [str(t).casefold() for t in tokens]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n: int) -> RougeScore:
    """Clipped n-gram overlap precision/recall/F1."""
    if n <= 0:
        raise ValueError(f"n-gram order must be positive, got {n}")
    cand = _strings(candidate)
    ref = _strings(reference)
    cand_grams = _ngrams(cand, n)
    ref_grams = _ngrams(ref, n)
    cand_total = sum(cand_grams.values())
    ref_total = sum(ref_grams.values())
    if cand_total == 0 or ref_total == 0:
        return RougeScore(0.0, 0.0, 0.0, n)
    overlap = sum((cand_grams & ref_grams).values())
    p = overlap / cand_total
    r = overlap / ref_total
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f1, n)


def extractive_fragments(article, summary) -> FragmentSet:
    """Greedy maximal shared token spans between article and summary."""
    art = _strings(article)
    summ = _strings(summary)

    positions: dict[str, list[int]] = {}
    for j, tok in enumerate(art):
        positions.setdefault(tok, []).append(j)

    fragments: list[Fragment] = []
    i = 0
    while i < len(summ):
        best_len = 0
        best_pos = -1
        for j in positions.get(summ[i], ()):
            length = 0
            while (
                i + length < len(summ)
                and j + length < len(art)
                and summ[i + length] == art[j + length]
            ):
                length += 1
            if length > best_len:
                best_len = length
                best_pos = j
        if best_len > 0:
            fragments.append(Fragment(i, best_pos, best_len))
            i += best_len
        else:
            i += 1
    return FragmentSet(tuple(fragments))


def extractive_density(fragset: FragmentSet, summary_len: int) -> float:
    """Mean squared fragment length per summary token."""
    if summary_len <= 0:
        raise ValueError("summary length must be positive")
    return sum(f.length**2 for f in fragset) / summary_len


def extractive_coverage(fragset: FragmentSet, summary_len: int) -> float:
    """Fraction of summary tokens covered by extractive fragments."""
    if summary_len <= 0:
        raise ValueError("summary length must be positive")
    return sum(f.length for f in fragset) / summary_len
