"""Human-preference analytics: vote shares, agreement, correlations.

Ballots carry one or more first-place picks (ties are allowed).
Per-annotator shares count every tied pick fully, so a heavy-tying
annotator's column can exceed 100%; the aggregate column splits each
ballot's credit evenly over its picks and therefore always sums to 100.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

__all__ = [
    "PreferenceBallot",
    "VoteShareTable",
    "StepSummary",
    "vote_shares",
    "step_summary",
    "fleiss_kappa",
    "preference_vector",
    "pearson",
    "meta_eval",
    "load_ballots",
    "save_ballots",
    "ballots_to_counts",
]


@dataclass(frozen=True)
class PreferenceBallot:
    article_id: str
    annotator_id: str
    chosen_steps: frozenset[int]
    ts: str = ""

    def __post_init__(self):
        if not self.chosen_steps:
            raise ValueError("a ballot must name at least one step")


@dataclass(frozen=True)
class VoteShareTable:
    per_annotator: dict[str, dict[int, float]]
    aggregate: dict[int, float]


@dataclass(frozen=True)
class StepSummary:
    modal: int
    median: int
    expected: float


def vote_shares(ballots: list[PreferenceBallot], n_steps: int = 5) -> VoteShareTable:
    """Percent share of first-place votes per step.

    Per-annotator columns count ties fully against that annotator's ballot
    count; the aggregate column uses fractional credit 1/|picks| per ballot.
    """
    if not ballots:
        raise ValueError("no ballots")
    steps = range(1, n_steps + 1)
    for b in ballots:
        if not set(b.chosen_steps) <= set(steps):
            raise ValueError(
                f"ballot for {b.article_id!r} names steps outside 1..{n_steps}"
            )

    by_annotator: dict[str, list[PreferenceBallot]] = {}
    for b in ballots:
        by_annotator.setdefault(b.annotator_id, []).append(b)

    per_annotator = {
        ann: {
            s: 100.0 * sum(1 for b in rows if s in b.chosen_steps) / len(rows)
            for s in steps
        }
        for ann, rows in by_annotator.items()
    }
    aggregate = {
        s: 100.0
        * sum(1 / len(b.chosen_steps) for b in ballots if s in b.chosen_steps)
        / len(ballots)
        for s in steps
    }
    return VoteShareTable(per_annotator, aggregate)


def step_summary(aggregate_shares: dict[int, float]) -> StepSummary:
    """Modal, median and expected step of an aggregate share distribution."""
    total = sum(aggregate_shares.values())
    if total <= 0:
        raise ValueError("degenerate all-zero share distribution")
    steps = sorted(aggregate_shares)
    modal = max(steps, key=lambda s: aggregate_shares[s])
    cumulative = 0.0
    median = steps[-1]
    for s in steps:
        cumulative += aggregate_shares[s]
        if cumulative >= total / 2:
            median = s
            break
    expected = sum(s * aggregate_shares[s] for s in steps) / total
    return StepSummary(modal, median, expected)


def fleiss_kappa(counts: list[list[int]], raters_per_item: int) -> float:
    """Chance-corrected agreement for fixed-rater categorical assignments.

    counts is an items x categories matrix of assignment counts; every row
    must sum to raters_per_item. When observed and expected agreement are
    both perfect (all mass in one category) the convention is kappa = 1.
    """
    if len(counts) < 2:
        raise ValueError("need at least 2 items")
    n_cats = len(counts[0])
    if n_cats < 2:
        raise ValueError("need at least 2 categories")
    if raters_per_item < 2:
        raise ValueError("need at least 2 raters per item")
    for i, row in enumerate(counts):
        if len(row) != n_cats:
            raise ValueError(f"row {i} has {len(row)} categories, expected {n_cats}")
        if sum(row) != raters_per_item:
            raise ValueError(
                f"row {i} sums to {sum(row)}, expected {raters_per_item}"
            )

    n_items = len(counts)
    n = raters_per_item
    p_bar = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in counts
    ) / n_items
    p_j = [sum(row[j] for row in counts) / (n_items * n) for j in range(n_cats)]
    p_e = sum(p * p for p in p_j)
    if math.isclose(p_e, 1.0):
        return 1.0 if math.isclose(p_bar, 1.0) else 0.0
    return (p_bar - p_e) / (1 - p_e)


def preference_vector(ballots: list[PreferenceBallot]) -> dict[str, float]:
    """First-place counts per summary id under fractional tie credit.

    Summary ids are "article_id:step", matching the judge output.
    """
    vector: dict[str, float] = {}
    for b in ballots:
        credit = 1 / len(b.chosen_steps)
        for s in b.chosen_steps:
            key = f"{b.article_id}:{s}"
            vector[key] = vector.get(key, 0.0) + credit
    return vector


def pearson(x: list[float], y: list[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(x) != len(y):
        raise ValueError("vectors differ in length")
    if len(x) < 2:
        raise ValueError("need at least 2 points")
    mx = sum(x) / len(x)
    my = sum(y) / len(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sx = math.sqrt(sum(v * v for v in dx))
    sy = math.sqrt(sum(v * v for v in dy))
    if sx == 0 or sy == 0:
        raise ValueError("correlation undefined for a constant vector")
    return sum(a * b for a, b in zip(dx, dy)) / (sx * sy)


def meta_eval(
    pref_vector: dict[str, float],
    likert_rows,
    candidate_summary_ids: set[str] | None = None,
) -> dict[str, float]:
    """Per-dimension Pearson r between first-place counts and Likert scores.

    Summaries never voted for count as zero; candidate_summary_ids widens
    the join to include them (defaults to ids present in either input).
    """
    by_dim: dict[str, dict[str, float]] = {}
    for row in likert_rows:
        by_dim.setdefault(row.dimension, {})[row.summary_id] = float(row.score)

    result: dict[str, float] = {}
    for dim, scores in by_dim.items():
        ids = set(scores)
        if candidate_summary_ids is not None:
            ids &= candidate_summary_ids
        ids_sorted = sorted(ids)
        if len(ids_sorted) < 2:
            raise ValueError(f"dimension {dim}: fewer than 2 joined rows")
        x = [pref_vector.get(i, 0.0) for i in ids_sorted]
        y = [scores[i] for i in ids_sorted]
        result[dim] = pearson(x, y)
    return result


def save_ballots(path, ballots: list[PreferenceBallot]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for b in ballots:
            fh.write(
                json.dumps(
                    {
                        "article_id": b.article_id,
                        "annotator_id": b.annotator_id,
                        "chosen_steps": sorted(b.chosen_steps),
                        "ts": b.ts,
                    }
                )
                + "\n"
            )


def load_ballots(path) -> list[PreferenceBallot]:
    ballots = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                ballots.append(
                    PreferenceBallot(
                        article_id=row["article_id"],
                        annotator_id=row["annotator_id"],
                        chosen_steps=frozenset(int(s) for s in row["chosen_steps"]),
                        ts=row.get("ts", ""),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"ballot file line {lineno}: {exc}") from exc
    return ballots


def ballots_to_counts(
    ballots: list[PreferenceBallot], n_steps: int = 5
) -> tuple[list[list[int]], int]:
    """Items x categories count matrix for fleiss_kappa.

    Only single-pick ballots form a fixed-rater design; tied ballots are
    excluded, as are articles not rated by every remaining annotator.
    """
    singles = [b for b in ballots if len(b.chosen_steps) == 1]
    annotators = sorted({b.annotator_id for b in singles})
    by_article: dict[str, dict[str, int]] = {}
    for b in singles:
        step = next(iter(b.chosen_steps))
        by_article.setdefault(b.article_id, {})[b.annotator_id] = step
    rows = []
    for _, votes in sorted(by_article.items()):
        if len(votes) != len(annotators):
            continue
        row = [0] * n_steps
        for step in votes.values():
            row[step - 1] += 1
        rows.append(row)
    return rows, len(annotators)
