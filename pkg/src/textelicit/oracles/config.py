"""Configuration for chat-completion oracle calls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# One oracle role per pipeline stage; a stronger model for clustering and a
# faster one elsewhere is a configuration choice, not code.
STAGES = ("summarize", "opposites", "cluster", "qa", "judge")


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: float = 1.0  # seconds; doubles after each failed attempt

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("retry attempts must be at least 1")
        if self.backoff < 0 or not math.isfinite(self.backoff):
            raise ValueError("retry backoff must be a finite nonnegative number")


@dataclass(frozen=True)
class OracleConfig:
    """Per-stage settings for one chat-completion endpoint.

    ``temperature`` defaults to 0 so cached runs stay reproducible; override
    it only deliberately.  Credentials are read from the environment
    variable named by ``api_key_env``, never passed on a command line.
    ``extra_options`` is an opaque provider passthrough (for example to
    disable a provider's built-in chain-of-thought feature).
    """

    base_url: str = ""
    model_id: str = "mock"
    temperature: float = 0.0
    max_output_tokens: int = 8192
    max_in_flight: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    api_key_env: str | None = None
    timeout: float = 120.0
    extra_options: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "OracleConfig":
        raw = dict(raw)
        retry_raw = raw.pop("retry", None)
        retry = RetryPolicy(**retry_raw) if retry_raw else RetryPolicy()
        extra = raw.pop("extra_options", None)
        extra_options = tuple(sorted(extra.items())) if extra else ()
        return cls(retry=retry, extra_options=extra_options, **raw)


def stage_configs(
    defaults: OracleConfig | None = None,
    overrides: dict[str, dict] | None = None,
) -> dict[str, OracleConfig]:
    """Build one config per stage from defaults plus per-stage overrides."""
    base = defaults or OracleConfig()
    configs: dict[str, OracleConfig] = {}
    overrides = overrides or {}
    for stage in STAGES:
        if stage in overrides:
            merged = {**_as_dict(base), **overrides[stage]}
            configs[stage] = OracleConfig.from_dict(merged)
        else:
            configs[stage] = base
    unknown = set(overrides) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown oracle stages in overrides: {sorted(unknown)}")
    return configs


def _as_dict(config: OracleConfig) -> dict:
    return {
        "base_url": config.base_url,
        "model_id": config.model_id,
        "temperature": config.temperature,
        "max_output_tokens": config.max_output_tokens,
        "max_in_flight": config.max_in_flight,
        "retry": {"attempts": config.retry.attempts, "backoff": config.retry.backoff},
        "api_key_env": config.api_key_env,
        "timeout": config.timeout,
        "extra_options": dict(config.extra_options),
    }
