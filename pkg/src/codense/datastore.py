"""Corpus ingestion, run persistence and report emission.

Everything lives in JSONL under an append-only run directory:

    runs/<run_id>/
        manifest.json   file inventory with content hashes
        articles.jsonl  imported corpus snapshot
        chains.jsonl    generated densification chains
        metrics.jsonl   per-(article, step) metric rows
        scores.jsonl    judge scores
        ballots.jsonl   annotation ballots
        raw/            verbatim request/response bodies
        report/         emitted CSV tables and data series

Writes go through write-temp-then-rename; loads verify content hashes
against the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import align, entities, overlap, textcore
from .codchain import CoDChain, CoDStep
from .likertjudge import DIMENSIONS, LikertRow, LikertScores
from .prefstats import (
    PreferenceBallot,
    load_ballots,
    step_summary,
    vote_shares,
)

__all__ = [
    "ArticleRecord",
    "CorpusError",
    "CorruptRunError",
    "RunStore",
    "import_corpus",
    "compute_metrics",
    "emit_report",
    "ReportResult",
]


@dataclass(frozen=True)
class ArticleRecord:
    article_id: str
    text: str
    reference_summary: str | None = None
    source: str = ""


class CorpusError(ValueError):
    pass


class CorruptRunError(RuntimeError):
    pass


DEFAULT_FIELD_MAP = {"id": "id", "text": "text", "reference": "reference"}


def import_corpus(path, field_map: dict[str, str] | None = None) -> list[ArticleRecord]:
    """Read a JSONL or CSV corpus; field_map names the id/text/reference columns."""
    fm = dict(DEFAULT_FIELD_MAP)
    fm.update(field_map or {})
    path = Path(path)
    rows: list[tuple[int, dict]] = []
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                rows.append((lineno, row))
    else:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append((lineno, json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc

    records: list[ArticleRecord] = []
    seen: dict[str, int] = {}
    for lineno, row in rows:
        if fm["id"] not in row or fm["text"] not in row:
            missing = fm["id"] if fm["id"] not in row else fm["text"]
            raise CorpusError(f"line {lineno}: missing field {missing!r}")
        article_id = str(row[fm["id"]])
        text = row[fm["text"]]
        if not isinstance(text, str) or not text.strip():
            raise CorpusError(f"line {lineno}: empty article text")
        if article_id in seen:
            raise CorpusError(
                f"duplicate article id {article_id!r} on lines "
                f"{seen[article_id]} and {lineno}"
            )
        seen[article_id] = lineno
        reference = row.get(fm["reference"]) or None
        records.append(ArticleRecord(article_id, text, reference, str(path)))
    return records


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


TABLE1_HEADER = ["step", "tokens", "entities", "density"]
TABLE2_HEADER = ["step"]  # extended with annotator columns at emit time
TABLE3_HEADER = ["step"] + list(DIMENSIONS) + ["average"]


class RunStore:
    """Single run directory with hashed, atomically written artifacts."""

    def __init__(self, runs_root, run_id: str):
        self.run_id = run_id
        self.root = Path(runs_root) / run_id
        self.raw_dir = self.root / "raw"
        self.report_dir = self.root / "report"

    # -- paths ---------------------------------------------------------
    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def path(self, name: str) -> Path:
        return self.root / name

    def ensure_dirs(self) -> None:
        self.raw_dir.mkdir(parents=True, exist_ok=True)
        self.report_dir.mkdir(parents=True, exist_ok=True)

    # -- manifest ------------------------------------------------------
    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {"run_id": self.run_id, "files": {}, "config": {}}

    def record_config(self, config: dict) -> None:
        manifest = self._load_manifest()
        manifest["config"].update(config)
        self.ensure_dirs()
        _atomic_write(self.manifest_path, json.dumps(manifest, indent=2) + "\n")

    def _register(self, name: str) -> None:
        manifest = self._load_manifest()
        manifest["files"][name] = _sha256(self.path(name))
        _atomic_write(self.manifest_path, json.dumps(manifest, indent=2) + "\n")

    def _verify(self, name: str) -> None:
        manifest = self._load_manifest()
        expected = manifest["files"].get(name)
        if expected is None:
            return
        actual = _sha256(self.path(name))
        if actual != expected:
            raise CorruptRunError(
                f"{name} hash mismatch: manifest {expected[:12]}, file {actual[:12]}"
            )

    def write_jsonl(self, name: str, rows: list[dict]) -> Path:
        self.ensure_dirs()
        content = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
        _atomic_write(self.path(name), content)
        self._register(name)
        return self.path(name)

    def read_jsonl(self, name: str) -> list[dict]:
        self._verify(name)
        rows = []
        with open(self.path(name), encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return rows

    def write_raw(self, name: str, content: str) -> Path:
        self.ensure_dirs()
        path = self.raw_dir / name
        _atomic_write(path, content)
        return path

    # -- articles ------------------------------------------------------
    def save_articles(self, records: list[ArticleRecord]) -> None:
        self.write_jsonl(
            "articles.jsonl",
            [
                {
                    "article_id": r.article_id,
                    "text": r.text,
                    "reference_summary": r.reference_summary,
                    "source": r.source,
                }
                for r in records
            ],
        )

    def load_articles(self) -> list[ArticleRecord]:
        return [
            ArticleRecord(
                r["article_id"], r["text"], r.get("reference_summary"), r.get("source", "")
            )
            for r in self.read_jsonl("articles.jsonl")
        ]

    # -- chains --------------------------------------------------------
    def save_chains(self, chains: list[CoDChain]) -> None:
        self.write_jsonl(
            "chains.jsonl",
            [
                {
                    "article_id": c.article_id,
                    "model_id": c.model_id,
                    "created_at": c.created_at,
                    "prompt_fingerprint": c.prompt_fingerprint,
                    "attempt_count": c.attempt_count,
                    "steps": [
                        {
                            "Missing_Entities": list(s.missing_entities),
                            "Denser_Summary": s.summary,
                        }
                        for s in c.steps
                    ],
                }
                for c in chains
            ],
        )
        for c in chains:
            for i, raw in enumerate(c.raw_attempts, start=1):
                self.write_raw(f"{c.article_id}.attempt{i}.txt", raw)

    def load_chains(self) -> list[CoDChain]:
        if not self.path("chains.jsonl").exists():
            return []
        return [
            CoDChain(
                article_id=r["article_id"],
                steps=tuple(
                    CoDStep(tuple(s["Missing_Entities"]), s["Denser_Summary"])
                    for s in r["steps"]
                ),
                model_id=r.get("model_id", ""),
                created_at=r.get("created_at", ""),
                prompt_fingerprint=r.get("prompt_fingerprint", ""),
            )
            for r in self.read_jsonl("chains.jsonl")
        ]

    # -- scores --------------------------------------------------------
    def save_scores(self, scores: LikertScores) -> None:
        self.write_jsonl(
            "scores.jsonl",
            [
                {
                    "summary_id": r.summary_id,
                    "step": r.step,
                    "dimension": r.dimension,
                    "score": r.score,
                    "raw": r.raw,
                }
                for r in scores.rows
            ],
        )

    def load_scores(self) -> LikertScores:
        rows = [
            LikertRow(r["summary_id"], r["step"], r["dimension"], r["score"], r.get("raw", ""))
            for r in self.read_jsonl("scores.jsonl")
        ]
        return LikertScores(rows=rows)

    def load_run_ballots(self) -> list[PreferenceBallot]:
        self._verify("ballots.jsonl")
        return load_ballots(self.path("ballots.jsonl"))

    # -- metrics -------------------------------------------------------
    def save_metrics(self, rows: list[dict]) -> None:
        self.write_jsonl("metrics.jsonl", rows)

    def load_metrics(self) -> list[dict]:
        return self.read_jsonl("metrics.jsonl")


def compute_metrics(
    articles: list[ArticleRecord],
    chains: list[CoDChain],
    extractor_config: entities.ExtractorConfig | None = None,
    scorer=None,
) -> list[dict]:
    """Per-(article, step) metric rows: direct and indirect statistics."""
    texts = {a.article_id: a.text for a in articles}
    rows: list[dict] = []
    for chain in chains:
        article_text = texts.get(chain.article_id)
        if article_text is None:
            continue
        article_tokens = textcore.tokenize(article_text)
        source_sentences = textcore.split_sentences(article_text)
        for step_no, step in enumerate(chain.steps, start=1):
            row: dict = {
                "article_id": chain.article_id,
                "step": step_no,
                "summary_id": f"{chain.article_id}:{step_no}",
            }
            summary = step.summary
            if not summary.strip():
                row["flag"] = "empty-summary"
                rows.append(row)
                continue
            summary_tokens = textcore.tokenize(summary)
            ents = entities.extract_entities(summary, extractor_config)
            density = entities.entity_density(summary, ents)
            fragset = overlap.extractive_fragments(article_tokens, summary_tokens)
            summary_sentences = textcore.split_sentences(summary)
            alignment = align.align_summary(source_sentences, summary_sentences, scorer)
            rank = align.content_distribution(
                source_sentences, summary_sentences, alignment=alignment
            )
            row.update(
                tokens=density.token_count,
                entities=density.entity_count,
                density=density.density,
                extractive_density=overlap.extractive_density(
                    fragset, len(summary_tokens)
                ),
                extractive_coverage=overlap.extractive_coverage(
                    fragset, len(summary_tokens)
                ),
                fusion=align.fusion_score(
                    source_sentences, summary_sentences, alignment=alignment
                ),
                content_rank_mean=rank.mean_rank,
                content_rank_norm=rank.norm_rank,
            )
            rows.append(row)
    return rows


@dataclass
class ReportResult:
    emitted: list[str] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)
    summary_lines: list[str] = field(default_factory=list)


def emit_report(store: RunStore, n_steps: int = 5) -> ReportResult:
    """Emit CSV tables and per-step data series from persisted artifacts."""
    result = ReportResult()
    store.ensure_dirs()

    # table1.csv and the data series need metric rows.
    if store.path("metrics.jsonl").exists():
        metrics = [m for m in store.load_metrics() if "flag" not in m]
        _emit_table1(store, metrics, n_steps, result)
        _emit_series(store, metrics, n_steps, result)
    else:
        result.skipped["table1.csv"] = "no metrics.jsonl (run `analyze` first)"
        result.skipped["series"] = "no metrics.jsonl (run `analyze` first)"

    # table2.csv needs ballots.
    if store.path("ballots.jsonl").exists():
        ballots = store.load_run_ballots()
        if ballots:
            _emit_table2(store, ballots, n_steps, result)
        else:
            result.skipped["table2.csv"] = "ballots.jsonl is empty"
    else:
        result.skipped["table2.csv"] = "no ballots.jsonl (run `annotate` first)"

    # table3.csv needs judge scores.
    if store.path("scores.jsonl").exists():
        scores = store.load_scores()
        if scores.rows:
            _emit_table3(store, scores, result)
        else:
            result.skipped["table3.csv"] = "scores.jsonl is empty"
    else:
        result.skipped["table3.csv"] = "no scores.jsonl (run `judge` first)"

    _atomic_write(
        store.report_dir / "summary.txt", "\n".join(result.summary_lines) + "\n"
    )
    return result


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _mean(values: list[float]) -> float:
    return statistics.fmean(values)


def _emit_table1(store, metrics, n_steps, result) -> None:
    rows = []
    for step in range(1, n_steps + 1):
        step_rows = [m for m in metrics if m["step"] == step]
        if not step_rows:
            continue
        rows.append(
            [
                step,
                round(_mean([m["tokens"] for m in step_rows]), 1),
                round(_mean([m["entities"] for m in step_rows]), 1),
                round(_mean([m["density"] for m in step_rows]), 3),
            ]
        )
    _write_csv(store.report_dir / "table1.csv", TABLE1_HEADER, rows)
    result.emitted.append("table1.csv")
    result.summary_lines.append("direct statistics (mean per step):")
    for row in rows:
        result.summary_lines.append(
            f"  step {row[0]}: tokens={row[1]} entities={row[2]} density={row[3]}"
        )


def _emit_series(store, metrics, n_steps, result) -> None:
    series = {
        "density": "density",
        "extractive_density": "extractive_density",
        "fusion": "fusion",
        "content_rank": "content_rank_norm",
    }
    for name, key in series.items():
        rows = []
        for step in range(1, n_steps + 1):
            values = [
                m[key] for m in metrics if m["step"] == step and m.get(key) is not None
            ]
            if values:
                rows.append([step, repr(_mean(values))])
        _write_csv(store.report_dir / f"series_{name}.csv", ["step", name], rows)
        result.emitted.append(f"series_{name}.csv")


def _emit_table2(store, ballots, n_steps, result) -> None:
    table = vote_shares(ballots, n_steps)
    annotators = sorted(table.per_annotator)
    header = ["step"] + annotators + ["aggregate"]
    rows = []
    for step in range(1, n_steps + 1):
        rows.append(
            [step]
            + [round(table.per_annotator[a][step], 1) for a in annotators]
            + [round(table.aggregate[step], 1)]
        )
    _write_csv(store.report_dir / "table2.csv", header, rows)
    result.emitted.append("table2.csv")
    summary = step_summary(table.aggregate)
    result.summary_lines.append(
        f"preferences: modal={summary.modal} median={summary.median} "
        f"expected={summary.expected:.2f}"
    )


def _emit_table3(store, scores, result) -> None:
    means = scores.per_step_dimension_means()
    averages = scores.per_step_average()
    rows = []
    for step in sorted(means):
        dims = means[step]
        rows.append(
            [step]
            + [round(dims.get(d, float("nan")), 2) for d in DIMENSIONS]
            + [round(averages[step], 2)]
        )
    _write_csv(store.report_dir / "table3.csv", TABLE3_HEADER, rows)
    result.emitted.append("table3.csv")
    result.summary_lines.append("judge averages per step:")
    for step in sorted(averages):
        result.summary_lines.append(f"  step {step}: {averages[step]:.2f}")
