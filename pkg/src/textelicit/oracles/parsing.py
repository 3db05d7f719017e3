"""Parsers for the tag-structured oracle responses.

Every parser either returns a well-formed value or raises OracleParseError
carrying the raw response; partial values never escape.
"""

from __future__ import annotations

import logging
import re

from ..rules import Ternary

logger = logging.getLogger(__name__)

__all__ = [
    "OracleParseError",
    "parse_statements",
    "parse_opposites",
    "parse_clusters",
    "parse_answers",
    "parse_judge_score",
    "split_representative",
    "render_pairs",
]


class OracleParseError(ValueError):
    """The oracle response did not match the expected tag structure."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


def _tag_blocks(text: str, tag: str) -> list[str]:
    return re.findall(rf"<{tag}>(.*?)</{tag}>", text, flags=re.DOTALL)


def _require_tag(text: str, tag: str, raw: str) -> str:
    blocks = _tag_blocks(text, tag)
    if not blocks:
        raise OracleParseError(f"missing <{tag}> tag in oracle response", raw)
    return blocks[-1]


_INDEX_PREFIX = re.compile(r"^\s*\d+[.)]\s*")


def parse_statements(raw: str) -> list[str]:
    """Extract the rewritten evaluative statements, one per nonempty line."""
    block = _require_tag(raw, "rewrited_entries", raw)
    statements = []
    for line in block.splitlines():
        line = _INDEX_PREFIX.sub("", line).strip()
        if line:
            statements.append(line)
    return statements


def parse_opposites(raw: str, expected_count: int) -> list[tuple[str, str]]:
    """Extract (positive, negative) pairs, oriented positive-first."""
    blocks = re.findall(r"<result_(\d+)>(.*?)</result_\1>", raw, flags=re.DOTALL)
    if len(blocks) != expected_count:
        raise OracleParseError(
            f"expected {expected_count} opposite results, found {len(blocks)}", raw
        )
    pairs = []
    for _, block in blocks:
        original = _require_tag(block, "original", raw).strip()
        sentiment = _require_tag(block, "sentiment", raw).strip().lower()
        opposite = _require_tag(block, "opposite", raw).strip()
        if not original or not opposite:
            raise OracleParseError("empty statement in opposite result", raw)
        if sentiment.startswith("pos"):
            pairs.append((original, opposite))
        elif sentiment.startswith("neg"):
            pairs.append((opposite, original))
        else:
            raise OracleParseError(f"unrecognized sentiment {sentiment!r}", raw)
    return pairs


def split_representative(text: str, raw: str = "") -> tuple[str, str]:
    """Split a "[positive] [negative]" representative into its two opinions."""
    bracketed = re.findall(r"\[([^\[\]]+)\]", text)
    if len(bracketed) >= 2:
        positive, negative = bracketed[0].strip(), bracketed[1].strip()
    else:
        # Tolerate a bare "Positive sentence. Negative sentence." rendering.
        sentences = [s.strip() for s in re.split(r"(?<=\.)\s+", text.strip()) if s.strip()]
        if len(sentences) != 2:
            raise OracleParseError(
                f"cannot split representative into a pair: {text!r}", raw or text
            )
        positive, negative = sentences
    if not positive or not negative or positive == negative:
        raise OracleParseError(f"degenerate representative pair: {text!r}", raw or text)
    return positive, negative


def parse_clusters(raw: str) -> list[tuple[str, str, str]]:
    """Extract (description, positive, negative) per final cluster.

    Only the final <clusters> block counts; intermediate <epoch_i> drafts
    inside <clustering> are ignored.
    """
    clusters_block = _tag_blocks(raw, "clusters")
    if not clusters_block:
        raise OracleParseError("missing <clusters> block in oracle response", raw)
    final = clusters_block[-1]
    entries = re.findall(r"<cluster_(\d+)>(.*?)</cluster_\1>", final, flags=re.DOTALL)
    if not entries:
        raise OracleParseError("no <cluster_i> entries in <clusters> block", raw)
    out = []
    for _, block in entries:
        description = _require_tag(block, "description", raw).strip()
        representative = _require_tag(block, "representative", raw).strip()
        positive, negative = split_representative(representative, raw)
        out.append((description, positive, negative))
    return out


_CONCLUSIONS = {"positive": Ternary.ONE, "negative": Ternary.ZERO, "neither": Ternary.BOT}


def parse_answers(raw: str, count: int) -> list[Ternary]:
    """Map each opinion pair's <conclusion> to a ternary report value.

    Results are keyed by their 1-based <index>; a pair whose index never
    appears is treated as bot with a warning, but a malformed conclusion is
    a parse error.
    """
    answers: list[Ternary] = [Ternary.BOT] * count
    seen: set[int] = set()
    blocks = _tag_blocks(raw, "result")
    if not blocks:
        raise OracleParseError("no <result> blocks in oracle response", raw)
    for block in blocks:
        index_text = _require_tag(block, "index", raw).strip()
        try:
            index = int(index_text)
        except ValueError:
            raise OracleParseError(f"non-numeric <index> {index_text!r}", raw) from None
        if not 1 <= index <= count:
            raise OracleParseError(f"<index> {index} out of range 1..{count}", raw)
        conclusion = _require_tag(block, "conclusion", raw).strip().lower()
        if conclusion not in _CONCLUSIONS:
            raise OracleParseError(f"unrecognized conclusion {conclusion!r}", raw)
        answers[index - 1] = _CONCLUSIONS[conclusion]
        seen.add(index)
    missing = [i for i in range(1, count + 1) if i not in seen]
    if missing:
        logger.warning("oracle answer missing indices %s; treating as bot", missing)
    return answers


def parse_judge_score(raw: str) -> float:
    """Extract the numeric <final_score>, clamped into [0, 10]."""
    block = _require_tag(raw, "final_score", raw).strip()
    match = re.fullmatch(r"-?\d+(?:\.\d+)?", block)
    if not match:
        raise OracleParseError(f"non-numeric <final_score> {block!r}", raw)
    return min(max(float(block), 0.0), 10.0)


def render_pairs(pairs: list[tuple[str, str]]) -> str:
    """Wire format for opinion-pair lists: "i. [positive] [negative]" lines."""
    return "\n".join(
        f"{i}. [{positive}] [{negative}]" for i, (positive, negative) in enumerate(pairs, 1)
    )
