"""Chain-of-density prompt construction, response parsing and orchestration.

One prompt produces the whole densification chain: the model is asked to
repeat an identify-then-rewrite two-step a fixed number of times and to
answer with a JSON array of {"Missing_Entities", "Denser_Summary"}
objects. Parsing tolerates surrounding prose and code fences; schema
strictness lives in validation, not in locating the array.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, replace
from importlib import resources

from . import textcore
from .llm import ChatClient, LlmRequest, prompt_fingerprint

__all__ = [
    "PromptSpec",
    "CoDStep",
    "CoDChain",
    "RetryPolicy",
    "ParseError",
    "LengthMismatch",
    "SchemaError",
    "ChainGenerationError",
    "build_cod_prompt",
    "build_vanilla_prompt",
    "parse_cod_response",
    "validate_chain",
    "run_cod",
    "load_prompt_template",
]

MISSING_ENTITY_CRITERIA = (
    "Relevant: to the main story.",
    "Specific: descriptive yet concise (5 words or fewer).",
    "Novel: not in the previous summary.",
    "Faithful: present in the Article.",
    "Anywhere: located anywhere in the Article.",
)

JSON_REMINDER = "Answer in valid JSON only."


@dataclass(frozen=True)
class PromptSpec:
    n_steps: int = 5
    entities_per_step: tuple[int, int] = (1, 3)
    length_budget_words: int = 80
    vanilla_budget_words: int = 70
    template: str | None = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        lo, hi = self.entities_per_step
        if lo > hi:
            raise ValueError("entities_per_step lower bound exceeds upper bound")


@dataclass(frozen=True)
class CoDStep:
    missing_entities: tuple[str, ...]
    summary: str


@dataclass(frozen=True)
class CoDChain:
    article_id: str
    steps: tuple[CoDStep, ...]
    model_id: str = ""
    created_at: str = ""
    prompt_fingerprint: str = ""
    raw_attempts: tuple[str, ...] = ()

    @property
    def attempt_count(self) -> int:
        return len(self.raw_attempts)


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 2


class ParseError(ValueError):
    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class LengthMismatch(ParseError):
    def __init__(self, found: int, expected: int, raw: str = ""):
        super().__init__(f"expected {expected} chain steps, found {found}", raw)
        self.found = found
        self.expected = expected


class SchemaError(ParseError):
    def __init__(self, index: int, key: str, raw: str = ""):
        super().__init__(f"step {index} is missing key {key!r}", raw)
        self.index = index
        self.key = key


class ChainGenerationError(RuntimeError):
    def __init__(self, message: str, attempts: tuple[str, ...]):
        super().__init__(message)
        self.attempts = attempts

    @property
    def last_raw(self) -> str:
        return self.attempts[-1] if self.attempts else ""


def load_prompt_template() -> str:
    """The packaged chain prompt template, comment header stripped."""
    raw = (
        resources.files("codense.templates")
        .joinpath("cod_prompt.txt")
        .read_text(encoding="utf-8")
    )
    lines = [ln for ln in raw.splitlines() if not ln.startswith("#")]
    return "\n".join(lines).strip() + "\n"


def build_cod_prompt(article: str, spec: PromptSpec | None = None) -> str:
    """Render the chain prompt for one article."""
    if not article.strip():
        raise ValueError("article is empty")
    spec = spec or PromptSpec()
    template = spec.template or load_prompt_template()
    return template.format(
        article=article,
        n_steps=spec.n_steps,
        entity_min=spec.entities_per_step[0],
        entity_max=spec.entities_per_step[1],
        length_budget_words=spec.length_budget_words,
    )


def build_vanilla_prompt(article: str, budget_words: int = 70) -> str:
    """Render the single-shot short-summary baseline prompt."""
    if not article.strip():
        raise ValueError("article is empty")
    return (
        f"Article: {article}\n\n"
        f"Write a VERY short summary of the Article. "
        f"Do not exceed {budget_words} words.\n"
    )


_FENCE = re.compile(r"```[a-zA-Z0-9_-]*")


def _locate_json_array(raw: str):
    """First parseable JSON array anywhere in the text."""
    cleaned = _FENCE.sub(" ", raw)
    decoder = json.JSONDecoder()
    for pos, ch in enumerate(cleaned):
        if ch != "[":
            continue
        try:
            value, _ = decoder.raw_decode(cleaned, pos)
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    return None


def _coerce_entities(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(e.strip() for e in value.split(";") if e.strip())
    if isinstance(value, list):
        return tuple(str(e).strip() for e in value if str(e).strip())
    return ()


def parse_cod_response(raw: str, spec: PromptSpec | None = None) -> CoDChain:
    """Extract and validate the chain-step array from a raw model reply."""
    if not raw:
        raise ParseError("empty response", raw)
    spec = spec or PromptSpec()
    array = _locate_json_array(raw)
    if array is None:
        raise ParseError("no JSON array found in response", raw)
    if len(array) != spec.n_steps:
        raise LengthMismatch(len(array), spec.n_steps, raw)
    steps = []
    for k, element in enumerate(array):
        if not isinstance(element, dict):
            raise SchemaError(k, "Missing_Entities", raw)
        for key in ("Missing_Entities", "Denser_Summary"):
            if key not in element:
                raise SchemaError(k, key, raw)
        summary = element["Denser_Summary"]
        if not isinstance(summary, str) or not summary.strip():
            raise SchemaError(k, "Denser_Summary", raw)
        steps.append(CoDStep(_coerce_entities(element["Missing_Entities"]), summary))
    return CoDChain(article_id="", steps=tuple(steps))


def validate_chain(chain: CoDChain, tolerance: float = 0.20) -> list[str]:
    """Advisory budget-adherence warnings; never raises."""
    warnings: list[str] = []
    if not chain.steps:
        return warnings
    counts = [textcore.token_count(s.summary) for s in chain.steps]
    base = counts[0]
    for k, (step, count) in enumerate(zip(chain.steps, counts), start=1):
        if base > 0 and abs(count - base) / base > tolerance:
            warnings.append(
                f"step {k}: token count {count} deviates more than "
                f"{tolerance:.0%} from step 1 ({base})"
            )
        if not step.missing_entities:
            warnings.append(f"step {k}: empty missing-entity list")
    for k in range(1, len(counts)):
        if counts[k - 1] > 0 and (counts[k] - counts[k - 1]) / counts[k - 1] > tolerance:
            warnings.append(
                f"step {k + 1}: summary grew more than {tolerance:.0%} "
                f"over step {k} ({counts[k - 1]} -> {counts[k]})"
            )
    return warnings


def run_cod(
    article: str,
    spec: PromptSpec | None = None,
    client: ChatClient | None = None,
    retry_policy: RetryPolicy | None = None,
    article_id: str = "",
    model_id: str = "",
) -> CoDChain:
    """Send one chain prompt and parse the reply, retrying on parse failure."""
    if client is None:
        raise ValueError("a chat client is required")
    spec = spec or PromptSpec()
    retry_policy = retry_policy or RetryPolicy()

    prompt = build_cod_prompt(article, spec)
    fingerprint = prompt_fingerprint(prompt)
    attempts: list[str] = []
    last_error: ParseError | None = None

    for attempt in range(retry_policy.max_retries + 1):
        sent = prompt if attempt == 0 else f"{prompt}\n{JSON_REMINDER}\n"
        response = client.complete(LlmRequest(prompt=sent, model=model_id))
        attempts.append(response.text)
        try:
            chain = parse_cod_response(response.text, spec)
        except ParseError as exc:
            last_error = exc
            continue
        return replace(
            chain,
            article_id=article_id,
            model_id=model_id,
            created_at=dt.datetime.now(dt.timezone.utc).isoformat(),
            prompt_fingerprint=fingerprint,
            raw_attempts=tuple(attempts),
        )
    raise ChainGenerationError(
        f"chain generation failed after {len(attempts)} attempts: {last_error}",
        tuple(attempts),
    )
