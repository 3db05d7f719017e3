"""Summarization, question-answering, and judge oracles with caching."""

from .cache import ResponseCache, cache_key
from .client import HttpChatTransport, OracleClient, OracleError, TransportError
from .config import STAGES, OracleConfig, RetryPolicy, stage_configs
from .mock import MockChatTransport
from .parsing import OracleParseError
from .templates import PromptTemplate, RenderError, load_template

__all__ = [
    "ResponseCache",
    "cache_key",
    "HttpChatTransport",
    "OracleClient",
    "OracleError",
    "TransportError",
    "STAGES",
    "OracleConfig",
    "RetryPolicy",
    "stage_configs",
    "MockChatTransport",
    "OracleParseError",
    "PromptTemplate",
    "RenderError",
    "load_template",
]
