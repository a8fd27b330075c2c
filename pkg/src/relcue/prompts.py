"""Prompt templates and placeholder substitution.

The templates live as plain-text data files under ``relcue/templates``; each
one carries its few-shot examples inline, so rendering is nothing more than
literal token replacement. Placeholder names are the bare token without the
surrounding brackets or braces (``"REL CLS"``, ``"SUB CUES"``, ...).
"""

from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from importlib import resources

from .errors import MissingBinding

TEMPLATE_NAMES = ("taxonomy", "description", "weight", "filter_subject", "filter_object")

# Placeholder name -> the literal text to replace in the template. List-valued
# placeholders swallow their surrounding brackets because the rendered value is
# itself a bracketed list; bare tokens keep whatever quoting the template has.
_TARGETS: dict[str, dict[str, str]] = {
    "taxonomy": {"ALL OBJ CLS": "[ALL OBJ CLS]"},
    "description": {
        "REL CLS": "REL CLS",
        "SUB HL CLS": "SUB HL CLS",
        "OBJ HL CLS": "OBJ HL CLS",
    },
    "weight": {
        "REL CLS": "REL CLS",
        "SUB HL CLS": "SUB HL CLS",
        "OBJ HL CLS": "OBJ HL CLS",
        "SUB CUES": "[SUB CUES]",
        "OBJ CUES": "[OBJ CUES]",
        "POS CUES": "[POS CUES]",
    },
    "filter_subject": {"SUB CLS": "{SUB CLS}", "REL CLS": "{REL CLS}"},
    "filter_object": {"OBJ CLS": "{OBJ CLS}", "REL CLS": "{REL CLS}"},
}

# Class-name templates used when embedding predicate labels directly.
CLASS_PROMPT_TEMPLATES = {
    "photo": "a photo of {}",
    "plain": "{}",
}
DEFAULT_CLASS_TEMPLATE = "photo"


@lru_cache(maxsize=None)
def template_text(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    path = resources.files("relcue").joinpath("templates", f"{name}.txt")
    return path.read_text(encoding="utf-8")


def required_placeholders(name: str) -> tuple[str, ...]:
    return tuple(sorted(_TARGETS[name]))


def render_prompt(template: str, bindings: dict[str, str]) -> str:
    """Fill in a named template; extra bindings are ignored."""
    text = template_text(template)
    for name, target in _TARGETS[template].items():
        if name not in bindings:
            raise MissingBinding(name)
        text = text.replace(target, bindings[name])
    return text


def format_string_list(items: list[str]) -> str:
    """Render cue lists the way the templates quote them: ``["a", "b"]``."""
    return json.dumps(list(items))


def class_prompt(label: str, template: str = DEFAULT_CLASS_TEMPLATE) -> str:
    return CLASS_PROMPT_TEMPLATES[template].format(label)


def prompt_digest(text: str) -> str:
    """Stable hex digest used for provenance records and embedding keys."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
