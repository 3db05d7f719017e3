"""Oracle client: rendering, transport, retries, caching, and parsing.

A response is cached only after it parses, so a malformed reply is retried
by re-sending the identical prompt instead of being replayed from disk.
With a warm cache a rerun issues zero network requests and reproduces its
outputs bit-exactly.
"""

from __future__ import annotations

import logging
import os
import time

import requests

from ..rules import Ternary
from .cache import ResponseCache, cache_key
from .config import STAGES, OracleConfig
from .parsing import (
    OracleParseError,
    parse_answers,
    parse_clusters,
    parse_judge_score,
    parse_opposites,
    parse_statements,
    render_pairs,
)
from .templates import PromptTemplate, load_template

logger = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """The chat-completion endpoint could not produce a response text."""


class OracleError(RuntimeError):
    """All retries failed; carries the request id for the failing call."""

    def __init__(self, message: str, request_id: str):
        super().__init__(message)
        self.request_id = request_id


class HttpChatTransport:
    """Minimal chat-completions client (OpenAI-style JSON shape)."""

    def __init__(self, session: requests.Session | None = None):
        self._session = session or requests.Session()

    def complete(self, template_name: str, prompt: str, config: OracleConfig) -> str:
        if not config.base_url:
            raise TransportError(
                f"stage {template_name!r} has no base_url configured; "
                "use the mock transport for offline runs"
            )
        headers = {"Content-Type": "application/json"}
        if config.api_key_env:
            key = os.environ.get(config.api_key_env)
            if not key:
                raise TransportError(
                    f"environment variable {config.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        payload.update(dict(config.extra_options))
        try:
            response = self._session.post(
                config.base_url.rstrip("/") + "/chat/completions",
                json=payload,
                headers=headers,
                timeout=config.timeout,
            )
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"chat completion failed: {exc}") from exc


class OracleClient:
    """The five oracle operations behind one transport and one cache."""

    def __init__(
        self,
        transport,
        cache: ResponseCache | None = None,
        configs: dict[str, OracleConfig] | None = None,
        sleep=time.sleep,
    ):
        self.transport = transport
        self.cache = cache
        self.configs = configs or {stage: OracleConfig() for stage in STAGES}
        self._templates: dict[str, PromptTemplate] = {}
        self._sleep = sleep

    def config_for(self, stage: str) -> OracleConfig:
        try:
            return self.configs[stage]
        except KeyError:
            raise ValueError(f"no oracle config for stage {stage!r}") from None

    def identity(self) -> dict[str, str]:
        """Model ids per stage; part of the elicitation content hash."""
        return {stage: self.config_for(stage).model_id for stage in STAGES}

    def _template(self, name: str) -> PromptTemplate:
        if name not in self._templates:
            self._templates[name] = load_template(name)
        return self._templates[name]

    def _call(self, stage: str, parse, **values):
        """Render, fetch (cache first), parse; cache only parsed responses."""
        config = self.config_for(stage)
        template = self._template(stage)
        prompt = template.render(**values)
        key = cache_key(template.name, prompt, config.model_id)
        if self.cache is not None:
            cached = self.cache.get(key)
            if cached is not None:
                try:
                    return parse(cached)
                except OracleParseError:
                    logger.warning(
                        "cached response %s no longer parses; refetching", key[:12]
                    )
        last_error: Exception | None = None
        for attempt in range(config.retry.attempts):
            if attempt > 0 and config.retry.backoff > 0:
                self._sleep(config.retry.backoff * 2 ** (attempt - 1))
            try:
                response = self.transport.complete(template.name, prompt, config)
                value = parse(response)
            except (TransportError, OracleParseError) as exc:
                last_error = exc
                logger.warning(
                    "oracle %s attempt %d/%d failed: %s",
                    stage,
                    attempt + 1,
                    config.retry.attempts,
                    exc,
                )
                continue
            if self.cache is not None:
                self.cache.put(key, template.name, config.model_id, response)
            return value
        raise OracleError(
            f"oracle stage {stage!r} failed after {config.retry.attempts} attempts: "
            f"{last_error}",
            request_id=key,
        )

    # -- the five operations -------------------------------------------------

    def summarize_review(self, text: str) -> list[str]:
        """Evaluative statements extracted from one review."""
        if not text.strip():
            raise ValueError("cannot summarize empty review text")
        return self._call("summarize", parse_statements, REVIEW_COMMENT=text)

    def make_opposites(self, statements: list[str]) -> list[tuple[str, str]]:
        """(positive, negative) version of each statement, positive first."""
        if not statements:
            raise ValueError("make_opposites needs at least one statement")
        listing = "\n".join(f"{i}. {s}" for i, s in enumerate(statements, 1))
        return self._call(
            "opposites",
            lambda raw: parse_opposites(raw, len(statements)),
            EVALUATIVE_STATEMENTS=listing,
        )

    def cluster_pairs(self, pairs: list[tuple[str, str]]) -> list[tuple[str, str, str]]:
        """Cluster opinion pairs; returns (description, positive, negative)."""
        if len(pairs) < 2:
            raise ValueError("clustering needs at least two opinion pairs")
        return self._call("cluster", parse_clusters, OPINION_PAIRS=render_pairs(pairs))

    def answer(
        self, review_text: str, points: list[tuple[str, str]]
    ) -> list[Ternary]:
        """Ternary verdict of the review on each (positive, negative) point."""
        if not points:
            raise ValueError("answer needs at least one summary point")
        return self._call(
            "qa",
            lambda raw: parse_answers(raw, len(points)),
            REVIEW_COMMENT=review_text,
            OPINION_PAIRS=render_pairs(points),
        )

    def judge_score(self, instructor_review: str, peer_review: str) -> float:
        """Reference score in [0, 10] for a peer review against the truth."""
        if not instructor_review.strip() or not peer_review.strip():
            raise ValueError("judge needs nonempty instructor and peer reviews")
        return self._call(
            "judge",
            parse_judge_score,
            INSTRUCTOR_REVIEW=instructor_review,
            PEER_REVIEW=peer_review,
        )
