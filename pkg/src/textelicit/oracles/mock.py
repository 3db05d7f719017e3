"""Deterministic offline stand-in for the chat-completion oracles.

The mock is a pure function of its inputs (no clock, no randomness) so
golden files stay auditable.  Its contract:

- summarization splits the review on sentence-ending periods and keeps the
  sentences containing a sentiment keyword;
- opposites flips the first sentiment keyword through a fixed antonym
  table and labels the original's sentiment by that keyword's polarity;
- clustering groups opinion pairs greedily by token-Jaccard similarity of
  at least 0.5 against each cluster's first pair;
- question answering reports Positive (Negative) when every content token
  of the positive (negative) opinion appears in the review and the other
  side's tokens do not all appear, Neither otherwise;
- the judge scores ten times the token-Jaccard overlap of the two reviews,
  rounded to one decimal.

Responses are rendered in the same tag structure the real models are
prompted for, so the production parsers are exercised end to end.
"""

from __future__ import annotations

import re
import threading

from .config import OracleConfig

ANTONYMS = [
    ("correct", "incorrect"),
    ("clear", "unclear"),
    ("sound", "flawed"),
    ("complete", "incomplete"),
    ("good", "poor"),
    ("right", "wrong"),
    ("rigorous", "sloppy"),
    ("concise", "verbose"),
    ("organized", "disorganized"),
    ("justified", "unjustified"),
]

POSITIVE_WORDS = frozenset(positive for positive, _ in ANTONYMS)
NEGATIVE_WORDS = frozenset(negative for _, negative in ANTONYMS)
KEYWORDS = POSITIVE_WORDS | NEGATIVE_WORDS
OPPOSITE = {p: n for p, n in ANTONYMS} | {n: p for p, n in ANTONYMS}

# "a" and "b" stay content tokens: they distinguish part labels.
STOPWORDS = frozenset(
    "the is are was were of in on to and or it this that with for an at very quite".split()
)


def tokens(text: str) -> list[str]:
    return [t for t in re.split(r"[^0-9a-zA-Z]+", text.lower()) if t]


def content_tokens(text: str) -> frozenset[str]:
    return frozenset(t for t in tokens(text) if t not in STOPWORDS)


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def _extract(prompt: str, tag: str) -> str:
    match = re.search(rf"<{tag}>(.*?)</{tag}>", prompt, flags=re.DOTALL)
    if not match:
        raise ValueError(f"mock oracle: prompt lacks <{tag}> input")
    return match.group(1)


def _pair_lines(block: str) -> list[tuple[str, str]]:
    pairs = []
    for line in block.splitlines():
        line = re.sub(r"^\s*\d+[.)]\s*", "", line).strip()
        if not line:
            continue
        bracketed = re.findall(r"\[([^\[\]]+)\]", line)
        if len(bracketed) >= 2:
            pairs.append((bracketed[0].strip(), bracketed[1].strip()))
    return pairs


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in text.split(".") if s.strip()]


class MockChatTransport:
    """Tag-structured responses computed with the keyword rules above."""

    def __init__(self) -> None:
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, template_name: str, prompt: str, config: OracleConfig) -> str:
        with self._lock:
            self.calls += 1
        handler = getattr(self, f"_{template_name}", None)
        if handler is None:
            raise ValueError(f"mock oracle: unknown template {template_name!r}")
        return handler(prompt)

    def _summarize(self, prompt: str) -> str:
        review = _extract(prompt, "review_comment")
        kept = [s for s in _sentences(review) if set(tokens(s)) & KEYWORDS]
        numbered = "\n".join(f"{i}. {s}" for i, s in enumerate(kept, 1))
        return (
            f"<numbered_entries>{numbered}</numbered_entries>\n"
            f"<rewrited_entries>{numbered}</rewrited_entries>"
        )

    def _opposites(self, prompt: str) -> str:
        block = _extract(prompt, "evaluative_statements")
        statements = [
            re.sub(r"^\s*\d+[.)]\s*", "", line).strip()
            for line in block.splitlines()
            if line.strip()
        ]
        parts = []
        for i, statement in enumerate(statements, 1):
            keyword = next((t for t in tokens(statement) if t in OPPOSITE), None)
            if keyword is None:
                sentiment = "Positive"
                opposite = f"it is not the case that {statement}"
            else:
                sentiment = "Positive" if keyword in POSITIVE_WORDS else "Negative"
                opposite = re.sub(
                    rf"\b{re.escape(keyword)}\b",
                    OPPOSITE[keyword],
                    statement,
                    count=1,
                    flags=re.IGNORECASE,
                )
            parts.append(
                f"<result_{i}>\n<original>{statement}</original>\n"
                f"<sentiment>{sentiment}</sentiment>\n"
                f"<opposite>{opposite}</opposite>\n</result_{i}>"
            )
        return "\n".join(parts)

    def _cluster(self, prompt: str) -> str:
        pairs = _pair_lines(_extract(prompt, "opinion_pairs"))
        clusters: list[tuple[frozenset[str], tuple[str, str]]] = []
        for positive, negative in pairs:
            signature = content_tokens(positive)
            for i, (rep_tokens, _) in enumerate(clusters):
                if _jaccard(signature, rep_tokens) >= 0.5:
                    break
            else:
                clusters.append((signature, (positive, negative)))
        body = []
        for i, (_, (positive, negative)) in enumerate(clusters, 1):
            body.append(
                f"<cluster_{i}>\n<description>Cluster {i}: {positive}</description>\n"
                f"<representative>[{positive}] [{negative}]</representative>\n"
                f"</cluster_{i}>"
            )
        draft = "; ".join(positive for _, (positive, _) in clusters)
        return (
            "<clustering>\n<epoch_1>\n"
            f"<draft>{draft}</draft>\n<analysis>keyword-overlap grouping</analysis>\n"
            "</epoch_1>\n</clustering>\n"
            "<clusters>\n" + "\n".join(body) + "\n</clusters>"
        )

    def _qa(self, prompt: str) -> str:
        review_tokens = set(tokens(_extract(prompt, "review_comment")))
        pairs = _pair_lines(_extract(prompt, "opinion_pairs"))
        blocks = []
        for i, (positive, negative) in enumerate(pairs, 1):
            pos_hit = content_tokens(positive) <= review_tokens
            neg_hit = content_tokens(negative) <= review_tokens
            if pos_hit and not neg_hit:
                conclusion = "Positive"
            elif neg_hit and not pos_hit:
                conclusion = "Negative"
            else:
                conclusion = "Neither"
            blocks.append(
                f"<result>\n<index>{i}</index>\n"
                f"<opinion_pair>[{positive}] [{negative}]</opinion_pair>\n"
                "<statements>\nStatement: token containment\nAnalysis: mock rule\n</statements>\n"
                f"<rubric>containment check chooses \"{conclusion}\"</rubric>\n"
                f"<conclusion>{conclusion}</conclusion>\n</result>"
            )
        return "\n".join(blocks)

    def _judge(self, prompt: str) -> str:
        instructor = content_tokens(_extract(prompt, "instructor_review"))
        peer = content_tokens(_extract(prompt, "peer_review"))
        score = round(10.0 * _jaccard(instructor, peer), 1)
        return (
            "<evaluation_process>Point 1: token overlap</evaluation_process>\n"
            "<assessment>mock overlap assessment</assessment>"
            f"<scoring>jaccard overlap scaled to 10</scoring>"
            f"<final_score>{score}</final_score>"
        )
