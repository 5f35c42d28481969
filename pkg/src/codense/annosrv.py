"""Blinded annotation HTTP service backing the human-preference study.

Each annotator walks a fixed article queue. Candidates are served under
shuffled labels A..E; the label-to-step mapping is derived from a seed,
persisted server-side before the task is served, and applied only at
ballot-write time, so no API response ever reveals a step index before
the vote lands.
"""

from __future__ import annotations

import datetime as dt
import json
import random
import string
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Response
from fastapi.responses import FileResponse, JSONResponse

from .codchain import CoDChain
from .datastore import ArticleRecord, RunStore

__all__ = ["AnnotationSession", "create_app", "GUIDELINE_TEXT"]

# Shown to annotators before voting; editable protocol asset.
GUIDELINE_TEXT = (
    "Pick the summary you would most want to read instead of the article: "
    "it should convey the main ideas accurately and concisely, stay "
    "faithful to the article, and remain easy to follow. Select one "
    "summary; select several only if you genuinely cannot separate them."
)


@dataclass(frozen=True)
class _Task:
    article_id: str
    labels_to_steps: dict[str, int]


class AnnotationSession:
    """Task assignment and ballot persistence for one annotation run."""

    def __init__(
        self,
        store: RunStore,
        articles: list[ArticleRecord],
        chains: list[CoDChain],
        annotators: list[str],
        seed: int = 0,
    ):
        if not annotators:
            raise ValueError("at least one annotator is required")
        by_id = {c.article_id: c for c in chains}
        self.articles = [a for a in articles if a.article_id in by_id]
        if not self.articles:
            raise ValueError("no articles with chains to annotate")
        self.chains = by_id
        self.annotators = list(annotators)
        self.seed = seed
        self.store = store
        self._lock = threading.Lock()
        self._completed: dict[str, set[str]] = {a: set() for a in annotators}
        self._replay_ballots()

    # -- persistence ---------------------------------------------------
    def _ballots_path(self):
        return self.store.path("ballots.jsonl")

    def _replay_ballots(self) -> None:
        path = self._ballots_path()
        if not path.exists():
            return
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                if row["annotator_id"] in self._completed:
                    self._completed[row["annotator_id"]].add(row["article_id"])

    def _append_ballot(self, row: dict) -> None:
        self.store.ensure_dirs()
        with open(self._ballots_path(), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row) + "\n")

    def _persist_mapping(self, annotator: str, task: _Task) -> None:
        self.store.ensure_dirs()
        path = self.store.path("blinding.jsonl")
        entry = {
            "annotator_id": annotator,
            "article_id": task.article_id,
            "mapping": task.labels_to_steps,
        }
        existing = set()
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        row = json.loads(line)
                        existing.add((row["annotator_id"], row["article_id"]))
        if (annotator, task.article_id) not in existing:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")

    # -- task assignment -----------------------------------------------
    def _shuffle(self, annotator: str, article_id: str, n: int) -> dict[str, int]:
        rng = random.Random(f"{self.seed}:{annotator}:{article_id}")
        steps = list(range(1, n + 1))
        rng.shuffle(steps)
        labels = string.ascii_uppercase[:n]
        return dict(zip(labels, steps))

    def next_task(self, annotator: str) -> _Task | None:
        done = self._completed[annotator]
        for article in self.articles:
            if article.article_id in done:
                continue
            chain = self.chains[article.article_id]
            task = _Task(
                article.article_id,
                self._shuffle(annotator, article.article_id, len(chain.steps)),
            )
            self._persist_mapping(annotator, task)
            return task
        return None

    def progress(self, annotator: str) -> tuple[int, int]:
        return len(self._completed[annotator]), len(self.articles)

    @property
    def total_ballots(self) -> int:
        return sum(len(done) for done in self._completed.values())

    @property
    def all_done(self) -> bool:
        return all(
            len(done) == len(self.articles) for done in self._completed.values()
        )

    # -- voting ----------------------------------------------------------
    def vote(self, annotator: str, article_id: str, chosen_labels: list[str]):
        """Returns (status_code, payload)."""
        with self._lock:
            if annotator not in self._completed:
                return 404, {"error": f"unknown annotator {annotator!r}"}
            if article_id not in self.chains:
                return 422, {"error": f"unknown article {article_id!r}"}
            if article_id in self._completed[annotator]:
                return 409, {"error": "vote already recorded for this task"}
            chain = self.chains[article_id]
            mapping = self._shuffle(annotator, article_id, len(chain.steps))
            labels = [str(l) for l in chosen_labels]
            if not labels or len(set(labels)) != len(labels):
                return 422, {"error": "chosen_labels must be a non-empty set"}
            bad = [l for l in labels if l not in mapping]
            if bad:
                return 422, {"error": f"invalid labels: {bad}"}
            steps = sorted(mapping[l] for l in labels)
            self._append_ballot(
                {
                    "article_id": article_id,
                    "annotator_id": annotator,
                    "chosen_steps": steps,
                    "ts": dt.datetime.now(dt.timezone.utc).isoformat(),
                }
            )
            self._completed[annotator].add(article_id)
            completed, total = self.progress(annotator)
            return 201, {"status": "recorded", "completed": completed, "total": total}


def create_app(session: AnnotationSession, ui_dir=None) -> FastAPI:
    app = FastAPI(title="codense annotation service")

    @app.get("/api/task")
    def get_task(annotator: str):
        if annotator not in session._completed:
            return JSONResponse({"error": f"unknown annotator {annotator!r}"}, 404)
        task = session.next_task(annotator)
        if task is None:
            return Response(status_code=204)
        chain = session.chains[task.article_id]
        article = next(
            a for a in session.articles if a.article_id == task.article_id
        )
        candidates = [
            {"label": label, "summary": chain.steps[step - 1].summary}
            for label, step in sorted(task.labels_to_steps.items())
        ]
        completed, total = session.progress(annotator)
        return {
            "article_id": task.article_id,
            "article": article.text,
            "candidates": candidates,
            "guidelines": GUIDELINE_TEXT,
            "progress": {"completed": completed, "total": total},
        }

    @app.post("/api/vote")
    def post_vote(body: dict):
        annotator = body.get("annotator", "")
        article_id = body.get("article_id", "")
        labels = body.get("chosen_labels", [])
        if not isinstance(labels, list):
            return JSONResponse({"error": "chosen_labels must be a list"}, 422)
        status, payload = session.vote(annotator, article_id, labels)
        return JSONResponse(payload, status)

    @app.get("/api/progress")
    def get_progress():
        return {
            "ballots": session.total_ballots,
            "all_done": session.all_done,
        }

    @app.get("/")
    def index():
        if ui_dir is not None:
            candidate = ui_dir / "index.html"
            if candidate.exists():
                return FileResponse(candidate)
        from importlib import resources

        page = resources.files("codense.ui").joinpath("index.html")
        return Response(page.read_text(encoding="utf-8"), media_type="text/html")

    @app.get("/app.js")
    def app_js():
        if ui_dir is not None:
            candidate = ui_dir / "app.js"
            if candidate.exists():
                return FileResponse(candidate, media_type="text/javascript")
        return Response(status_code=404)

    return app
