"""Prompt templates with named placeholders, loaded from versioned files.

Templates are plain text files named ``<name>.v<version>.md`` whose bodies
contain ``{{placeholder}}`` slots. Keeping them on disk (instead of inline
strings) makes prompt ablations a config change, not a code change.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import PlaceholderMissingError

_PLACEHOLDER = re.compile(r"\{\{([a-z][a-z0-9_]*)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: str
    body: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.body))

    def require(self, *names: str) -> None:
        """Check that the body references every placeholder a stage fills."""
        missing = sorted(set(names) - self.placeholders())
        if missing:
            raise PlaceholderMissingError(
                f"template {self.name} v{self.version}: body lacks placeholder(s) {missing}"
            )

    def render(self, **values: str) -> str:
        def substitute(match: re.Match) -> str:
            key = match.group(1)
            if key not in values:
                raise PlaceholderMissingError(
                    f"template {self.name} v{self.version}: no value for placeholder {key!r}"
                )
            return values[key]

        return _PLACEHOLDER.sub(substitute, self.body)


def load_template(path: str | Path) -> PromptTemplate:
    path = Path(path)
    stem = path.stem  # e.g. "translate.v1"
    if ".v" in stem:
        name, _, version = stem.rpartition(".v")
    else:
        name, version = stem, "0"
    return PromptTemplate(name=name, version=version, body=path.read_text(encoding="utf-8"))


def default_template(name: str) -> PromptTemplate:
    """Load the packaged template for a stage (e.g. "translate", "prove")."""
    package_dir = resources.files(__package__) / "templates"
    candidates = sorted(
        p for p in package_dir.iterdir() if p.name.startswith(f"{name}.v") and p.name.endswith(".md")
    )
    if not candidates:
        raise FileNotFoundError(f"no packaged template named {name!r}")
    with resources.as_file(candidates[-1]) as real_path:
        return load_template(real_path)


def template_from_dir(directory: str | Path, name: str) -> PromptTemplate:
    """Load the highest-versioned ``<name>.v*.md`` from a templates directory."""
    directory = Path(directory)
    candidates = sorted(directory.glob(f"{name}.v*.md"))
    if not candidates:
        raise FileNotFoundError(f"no template named {name!r} under {directory}")
    return load_template(candidates[-1])
