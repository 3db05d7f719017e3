"""Prompt templates with strict placeholder binding.

Templates ship verbatim as data files next to this module; the code never
edits prompt text, it only substitutes the {{PLACEHOLDER}} slots.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

_PLACEHOLDER = re.compile(r"\{\{([A-Z_]+)\}\}")

TEMPLATE_NAMES = ("summarize", "opposites", "cluster", "qa", "judge")


class RenderError(ValueError):
    """A placeholder in the template body was left unbound (or mistyped)."""


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body))

    def render(self, **values: str) -> str:
        """Substitute placeholders; unbound or unknown names are rejected.

        Substitution is a single pass, so braces inside the values are never
        re-expanded.
        """
        needed = self.placeholders()
        given = set(values)
        missing = needed - given
        if missing:
            raise RenderError(
                f"template {self.name!r} has unbound placeholders: {sorted(missing)}"
            )
        unknown = given - needed
        if unknown:
            raise RenderError(
                f"template {self.name!r} got values for unknown placeholders: "
                f"{sorted(unknown)}"
            )
        return _PLACEHOLDER.sub(lambda match: str(values[match.group(1)]), self.body)


def load_template(name: str) -> PromptTemplate:
    if name not in TEMPLATE_NAMES:
        raise ValueError(f"unknown template {name!r}, expected one of {TEMPLATE_NAMES}")
    body = (
        resources.files("textelicit.oracles").joinpath(f"prompts/{name}.txt").read_text()
    )
    return PromptTemplate(name=name, body=body)
