"""Command-line entry points.

Exit codes are a stable contract: 0 success, 1 hard failure, 2 partial
failure (some items failed, results for the rest were persisted).
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import align, codchain, datastore, entities, likertjudge, textcore
from .llm import HttpLlmClient, LlmRequest, LlmResponse, LlmTransportError


class _ArticleKeyedMock:
    """Mock client resolving scripted responses by the article embedded in
    the prompt. Fixture: JSON object article_id -> response string or list
    of per-attempt strings; "*" is the fallback entry."""

    def __init__(self, fixture: dict, articles: list[datastore.ArticleRecord]):
        self.fixture = fixture
        self.articles = articles
        self._cursors: dict[str, int] = {}

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = "*"
        for a in self.articles:
            if a.text in request.prompt:
                key = a.article_id
                break
        entry = self.fixture.get(key, self.fixture.get("*"))
        if entry is None:
            raise LlmTransportError(f"mock fixture has no entry for {key!r}")
        if isinstance(entry, str):
            return LlmResponse(entry)
        pos = self._cursors.get(key, 0)
        self._cursors[key] = pos + 1
        return LlmResponse(entry[min(pos, len(entry) - 1)])


def _load_mock(path, articles):
    with open(path, encoding="utf-8") as fh:
        return _ArticleKeyedMock(json.load(fh), articles)


@click.group()
def main():
    """Chain-of-density summary generation and evaluation."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out-run", "run_id", required=True)
@click.option("--runs-dir", default="runs", type=click.Path())
@click.option("--steps", default=5, show_default=True)
@click.option("--mock", "mock_path", type=click.Path(exists=True))
@click.option("--llm-url", envvar="LLM_URL")
@click.option("--llm-model", default="gpt-4")
@click.option("--id-field", default="id")
@click.option("--text-field", default="text")
@click.option("--reference-field", default="reference")
@click.option("--workers", default=4, show_default=True)
def densify(corpus, run_id, runs_dir, steps, mock_path, llm_url, llm_model,
            id_field, text_field, reference_field, workers):
    """Generate densification chains for every article in the corpus."""
    try:
        articles = datastore.import_corpus(
            corpus, {"id": id_field, "text": text_field, "reference": reference_field}
        )
    except datastore.CorpusError as exc:
        raise click.ClickException(str(exc))
    if not articles:
        raise click.ClickException("corpus is empty")

    if mock_path:
        client = _load_mock(mock_path, articles)
    elif llm_url:
        client = HttpLlmClient(llm_url, llm_model)
    else:
        raise click.ClickException("no endpoint configured: pass --llm-url or --mock")

    spec = codchain.PromptSpec(n_steps=steps)
    store = datastore.RunStore(runs_dir, run_id)
    store.record_config(
        {"command": "densify", "n_steps": steps, "model": llm_model, "mock": bool(mock_path)}
    )
    store.save_articles(articles)

    def generate(article):
        return codchain.run_cod(
            article.text,
            spec,
            client,
            article_id=article.article_id,
            model_id=llm_model,
        )

    chains, failures = [], []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for article, outcome in zip(
            articles, pool.map(lambda a: _capture(generate, a), articles)
        ):
            if isinstance(outcome, Exception):
                failures.append((article.article_id, outcome))
            else:
                chains.append(outcome)

    store.save_chains(chains)
    click.echo(f"persisted {len(chains)} chains under {store.root}")
    for article_id, exc in failures:
        click.echo(f"FAILED {article_id}: {exc}", err=True)
    if failures:
        sys.exit(2 if chains else 1)


def _capture(fn, arg):
    try:
        return fn(arg)
    except Exception as exc:  # noqa: BLE001 - reported per-article
        return exc


@main.command()
@click.option("--run", "run_id", required=True)
@click.option("--runs-dir", default="runs", type=click.Path())
@click.option("--align-scorer", default="rouge12-f1", show_default=True)
@click.option("--gazetteer", type=click.Path(exists=True))
@click.option("--abbrev-file", type=click.Path(exists=True))
def analyze(run_id, runs_dir, align_scorer, gazetteer, abbrev_file):
    """Compute per-summary direct and indirect statistics for a run."""
    store = datastore.RunStore(runs_dir, run_id)
    if not store.path("chains.jsonl").exists():
        raise click.ClickException(f"run {run_id!r} has no chains")
    chains = store.load_chains()
    articles = store.load_articles()

    config = entities.ExtractorConfig(
        gazetteer=entities.load_gazetteer(gazetteer)
        if gazetteer
        else entities.DEFAULT_GAZETTEER,
        abbreviations=textcore.load_abbreviations(abbrev_file)
        if abbrev_file
        else textcore.DEFAULT_ABBREVIATIONS,
    )
    scorer = align.make_scorer(align_scorer)
    rows = datastore.compute_metrics(articles, chains, config, scorer)
    store.save_metrics(rows)
    flagged = sum(1 for r in rows if "flag" in r)
    click.echo(f"wrote {len(rows)} metric rows ({flagged} flagged)")


@main.command()
@click.option("--run", "run_id", required=True)
@click.option("--runs-dir", default="runs", type=click.Path())
@click.option("--dims", default="all", show_default=True,
              help='"all" or comma-separated dimension names')
@click.option("--mock", "mock_path", type=click.Path(exists=True))
@click.option("--llm-url", envvar="LLM_URL")
@click.option("--llm-model", default="gpt-4")
def judge(run_id, runs_dir, dims, mock_path, llm_url, llm_model):
    """Likert-score every summary of a run along the judge dimensions."""
    store = datastore.RunStore(runs_dir, run_id)
    if not store.path("chains.jsonl").exists():
        raise click.ClickException(f"run {run_id!r} has no chains")
    chains = store.load_chains()
    articles = {a.article_id: a.text for a in store.load_articles()}

    dim_names = None if dims == "all" else [d.strip() for d in dims.split(",")]
    if dim_names:
        unknown = [d for d in dim_names if d not in likertjudge.DIMENSIONS]
        if unknown:
            raise click.ClickException(f"unknown dimensions: {unknown}")

    if mock_path:
        client = _load_mock(mock_path, store.load_articles())
    elif llm_url:
        client = HttpLlmClient(llm_url, llm_model)
    else:
        raise click.ClickException("no endpoint configured: pass --llm-url or --mock")

    scores = likertjudge.judge_corpus(chains, dim_names, client, articles)
    store.save_scores(scores)

    means = scores.per_step_dimension_means()
    averages = scores.per_step_average()
    header = ["step"] + (dim_names or list(likertjudge.DIMENSIONS)) + ["average"]
    click.echo("\t".join(header))
    for step in sorted(means):
        cells = [str(step)]
        for d in header[1:-1]:
            value = means[step].get(d)
            cells.append(f"{value:.2f}" if value is not None else "-")
        cells.append(f"{averages[step]:.2f}")
        click.echo("\t".join(cells))
    if scores.failures:
        click.echo(f"{len(scores.failures)} judgments failed", err=True)
        sys.exit(2)


@main.command()
@click.option("--run", "run_id", required=True)
@click.option("--runs-dir", default="runs", type=click.Path())
@click.option("--listen", default="127.0.0.1:8000", show_default=True)
@click.option("--annotators", required=True, help="comma-separated annotator ids")
@click.option("--seed", default=0, show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False))
def annotate(run_id, runs_dir, listen, annotators, seed, ui_dir):
    """Serve the blinded annotation UI and JSON API for a run."""
    import uvicorn

    from .annosrv import AnnotationSession, create_app

    store = datastore.RunStore(runs_dir, run_id)
    if not store.path("chains.jsonl").exists():
        raise click.ClickException(f"run {run_id!r} has no chains")
    session = AnnotationSession(
        store,
        store.load_articles(),
        store.load_chains(),
        [a.strip() for a in annotators.split(",") if a.strip()],
        seed=seed,
    )
    app = create_app(session, Path(ui_dir) if ui_dir else None)
    host, _, port = listen.partition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    except OSError as exc:
        raise click.ClickException(f"cannot listen on {listen}: {exc}")


@main.command()
@click.option("--run", "run_id", required=True)
@click.option("--runs-dir", default="runs", type=click.Path())
@click.option("--steps", default=5, show_default=True)
def report(run_id, runs_dir, steps):
    """Emit CSV tables and data series for a run."""
    store = datastore.RunStore(runs_dir, run_id)
    if not store.root.exists():
        raise click.ClickException(f"run {run_id!r} does not exist")
    result = datastore.emit_report(store, n_steps=steps)
    for name in result.emitted:
        click.echo(f"emitted {store.report_dir / name}")
    for name, reason in result.skipped.items():
        click.echo(f"skipped {name}: {reason}", err=True)
    for line in result.summary_lines:
        click.echo(line)
    if not result.emitted:
        sys.exit(1)


if __name__ == "__main__":
    main()
