"""LLM-as-judge Likert (1-5) scoring of summaries along five dimensions.

Each (summary, dimension) pair gets its own request. Quality and
Coherence are article-independent, so their prompts omit the Article
block. Replies are parsed for the first standalone integer in 1..5; a
failed parse is retried once with an explicit format reminder.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .codchain import CoDChain
from .llm import ChatClient, LlmRequest

__all__ = [
    "LikertDimension",
    "DIMENSIONS",
    "LikertRow",
    "LikertScores",
    "LikertParseError",
    "build_likert_prompt",
    "parse_likert",
    "judge_corpus",
    "aggregate_scores",
]


@dataclass(frozen=True)
class LikertDimension:
    name: str
    definition_text: str
    includes_article: bool


DIMENSIONS: dict[str, LikertDimension] = {
    d.name: d
    for d in (
        LikertDimension(
            "Informative",
            "An informative summary captures the important information in "
            "the article and presents it accurately and concisely.",
            includes_article=True,
        ),
        LikertDimension(
            "Quality",
            "A high quality summary is comprehensible and understandable.",
            includes_article=False,
        ),
        LikertDimension(
            "Coherence",
            "A coherent summary is well-structured and well-organized.",
            includes_article=False,
        ),
        LikertDimension(
            "Attributable",
            "Is all the information in the summary fully attributable to "
            "the Article?",
            includes_article=True,
        ),
        LikertDimension(
            "Overall",
            "A good summary should convey the main ideas in the Article in "
            "a concise, logical, and coherent fashion.",
            includes_article=True,
        ),
    )
}

PARSE_REMINDER = "Respond with a single integer 1-5."


class LikertParseError(ValueError):
    pass


def build_likert_prompt(
    dim: LikertDimension | str, article: str | None, summary: str
) -> str:
    """Fill the rating template for one dimension."""
    if isinstance(dim, str):
        try:
            dim = DIMENSIONS[dim]
        except KeyError:
            raise ValueError(f"unknown dimension {dim!r}") from None
    if not summary.strip():
        raise ValueError("summary is empty")
    if dim.includes_article and not (article and article.strip()):
        raise ValueError(f"dimension {dim.name} requires the article text")

    parts = []
    if dim.includes_article:
        parts.append(f"Article: {article}\n")
    parts.append(f"Summary: {summary}\n")
    parts.append(
        f"Please rate the summary (1=worst to 5=best) with respect to "
        f"{dim.name}.\n"
    )
    parts.append(dim.definition_text)
    return "\n".join(parts) + "\n"


# A sentence-final period does not disqualify ("4." parses as 4), but a
# decimal tail or word character does ("4.5", "4a" do not match here).
_STANDALONE_INT = re.compile(r"(?<![\w.-])-?\d+(?!\.?\d)(?![\w-])")


def parse_likert(raw: str) -> int:
    """First standalone integer in the reply; must lie in 1..5."""
    if not raw:
        raise LikertParseError("empty response")
    m = _STANDALONE_INT.search(raw)
    if not m:
        raise LikertParseError(f"no integer rating found in {raw[:80]!r}")
    value = int(m.group())
    if not 1 <= value <= 5:
        raise LikertParseError(f"rating {value} outside 1..5")
    return value


@dataclass(frozen=True)
class LikertRow:
    summary_id: str
    step: int
    dimension: str
    score: int
    raw: str


@dataclass
class LikertScores:
    rows: list[LikertRow] = field(default_factory=list)
    failures: list[tuple[str, int, str, str]] = field(default_factory=list)

    def per_step_dimension_means(self) -> dict[int, dict[str, float]]:
        sums: dict[int, dict[str, list[int]]] = {}
        for row in self.rows:
            sums.setdefault(row.step, {}).setdefault(row.dimension, []).append(
                row.score
            )
        return {
            step: {dim: sum(v) / len(v) for dim, v in dims.items()}
            for step, dims in sorted(sums.items())
        }

    def per_step_average(self) -> dict[int, float]:
        """Cross-dimension mean of the per-dimension means, per step."""
        means = self.per_step_dimension_means()
        return {
            step: sum(dims.values()) / len(dims) for step, dims in means.items()
        }


def aggregate_scores(rows: list[LikertRow]) -> LikertScores:
    return LikertScores(rows=list(rows))


def judge_corpus(
    chains: list[CoDChain],
    dims: list[str] | None,
    client: ChatClient,
    articles: dict[str, str] | None = None,
) -> LikertScores:
    """Score every (summary, dimension) pair; gaps are recorded, not fatal.

    articles maps article_id to source text; required for the
    article-dependent dimensions.
    """
    if not chains:
        raise ValueError("no chains to judge")
    dim_names = dims or list(DIMENSIONS)
    for name in dim_names:
        if name not in DIMENSIONS:
            raise ValueError(f"unknown dimension {name!r}")
    articles = articles or {}

    scores = LikertScores()
    for chain in chains:
        article = articles.get(chain.article_id)
        for step_no, step in enumerate(chain.steps, start=1):
            summary_id = f"{chain.article_id}:{step_no}"
            for name in dim_names:
                dim = DIMENSIONS[name]
                prompt = build_likert_prompt(dim, article, step.summary)
                raw = client.complete(LlmRequest(prompt=prompt)).text
                try:
                    score = parse_likert(raw)
                except LikertParseError:
                    raw = client.complete(
                        LlmRequest(prompt=f"{prompt}\n{PARSE_REMINDER}\n")
                    ).text
                    try:
                        score = parse_likert(raw)
                    except LikertParseError as exc:
                        scores.failures.append((summary_id, step_no, name, str(exc)))
                        continue
                scores.rows.append(LikertRow(summary_id, step_no, name, score, raw))
    return scores
