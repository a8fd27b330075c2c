"""Cue packs: parsed LLM output describing how to recognise each predicate.

A pack bundles, per (predicate, subject high-level class, object high-level
class), the textual cue lists for the subject, object, and spatial components
together with the mixing weights, plus the object taxonomy and the per-class
deny lists produced by the plausibility filter. Parsers here are deliberately
forgiving: model output drifts, so anything that cannot be parsed falls back
to a flagged neutral value instead of aborting a build.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AmbiguousAnswer, MissingCueEntry, ParseFailure, SchemaError, UnknownClass
from .fsio import atomic_write_text

PACK_VERSION = 1
HIGH_LEVEL_CLASSES = ("human", "animal", "product")
WILDCARD = "any"
# Binding used for the high-level slots when building packs without taxonomy
# guidance; the template still needs some noun there.
UNGUIDED_BINDING = "entity"

_WEIGHT_TOL = 1e-6


@dataclass(frozen=True)
class CueSet:
    """Cue phrases for the three scoring components; any list may be empty."""

    subject_cues: tuple[str, ...] = ()
    object_cues: tuple[str, ...] = ()
    position_cues: tuple[str, ...] = ()

    @classmethod
    def empty(cls) -> "CueSet":
        return cls()


@dataclass(frozen=True)
class CueWeights:
    w_subject: float
    w_object: float
    w_position: float
    fallback: bool = False

    def __post_init__(self) -> None:
        total = self.w_subject + self.w_object + self.w_position
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {total}, expected 1")
        for value in (self.w_subject, self.w_object, self.w_position):
            if not -_WEIGHT_TOL <= value <= 1.0 + _WEIGHT_TOL:
                raise ValueError(f"weight {value} outside [0, 1]")

    @classmethod
    def uniform(cls, fallback: bool = False) -> "CueWeights":
        third = 1.0 / 3.0
        return cls(third, third, third, fallback=fallback)

    @classmethod
    def normalized(cls, w_subject: float, w_object: float, w_position: float,
                   fallback: bool = False) -> "CueWeights":
        total = w_subject + w_object + w_position
        if total <= 0:
            return cls.uniform(fallback=True)
        return cls(w_subject / total, w_object / total, w_position / total, fallback=fallback)


@dataclass(frozen=True)
class CueEntry:
    cues: CueSet
    weights: CueWeights
    model: str = ""
    prompt_digest: str = ""
    parse_failed: bool = False


@dataclass
class CuePack:
    guided: bool
    taxonomy: dict[str, str] = field(default_factory=dict)
    entries: dict[tuple[str, str, str], CueEntry] = field(default_factory=dict)
    subject_deny: dict[str, frozenset[str]] = field(default_factory=dict)
    object_deny: dict[str, frozenset[str]] = field(default_factory=dict)
    version: int = PACK_VERSION

    def entry_for(self, predicate: str, sub_hl: str, obj_hl: str) -> CueEntry:
        key = (predicate, sub_hl, obj_hl) if self.guided else (predicate, WILDCARD, WILDCARD)
        try:
            return self.entries[key]
        except KeyError:
            raise MissingCueEntry(f"no cue entry for {key}") from None

    def denied(self, predicate: str, subject_class: str, object_class: str) -> bool:
        return (predicate in self.subject_deny.get(subject_class, frozenset())
                or predicate in self.object_deny.get(object_class, frozenset()))


def map_high_level(object_class: str, taxonomy: dict[str, str]) -> str:
    try:
        return taxonomy[object_class]
    except KeyError:
        raise UnknownClass(f"object class {object_class!r} not in taxonomy") from None


_HEADER_RE = re.compile(r"^\s*\[\s*([a-z][a-z ]*?)\s*\]\s*:?\s*$", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*-\s*(.*\S)\s*$")
_CUE_SECTIONS = ("subject", "object", "position")


def parse_cues(response: str) -> CueSet:
    """Pull the dash bullets out of the [subject]/[object]/[position] sections."""
    collected: dict[str, list[str]] = {name: [] for name in _CUE_SECTIONS}
    current: str | None = None
    saw_header = False
    for line in response.splitlines():
        header = _HEADER_RE.match(line)
        if header:
            name = header.group(1).lower()
            if name in collected:
                current = name
                saw_header = True
            else:
                current = None
            continue
        if current is None:
            continue
        bullet = _BULLET_RE.match(line)
        if not bullet:
            continue
        text = bullet.group(1).rstrip(".").strip()
        if text:
            collected[current].append(text)
    if not saw_header:
        raise ParseFailure("no [subject]/[object]/[position] section header found")
    return CueSet(subject_cues=tuple(collected["subject"]),
                  object_cues=tuple(collected["object"]),
                  position_cues=tuple(collected["position"]))


_WEIGHT_HEAD_RE = re.compile(r"Weight\([^)]*\)\s*=")
_FLOAT_RE = re.compile(r"\d+(?:\.\d+)?")
_COMPONENT_RE = re.compile(r"\b(subject|object|position)\b", re.IGNORECASE)


def parse_weights(response: str) -> CueWeights:
    """Read the final ``Weight(...) = a * ... + b * ... + c * ...`` expression.

    Coefficients attach to whichever of subject/object/position their term
    mentions; a missing term contributes 0. Sums within 0.05 of 1 are
    renormalized; anything else (including no expression at all) yields
    uniform weights with the fallback flag set.
    """
    heads = list(_WEIGHT_HEAD_RE.finditer(response))
    if not heads:
        return CueWeights.uniform(fallback=True)
    tail = response[heads[-1].end():]
    blank = re.search(r"\n\s*\n", tail)
    if blank:
        tail = tail[:blank.start()]
    found: dict[str, float] = {}
    for term in tail.split("+"):
        number = _FLOAT_RE.search(term)
        component = _COMPONENT_RE.search(term)
        if not number or not component:
            continue
        name = component.group(1).lower()
        found.setdefault(name, float(number.group(0)))
    if not found:
        return CueWeights.uniform(fallback=True)
    w_s = found.get("subject", 0.0)
    w_o = found.get("object", 0.0)
    w_p = found.get("position", 0.0)
    total = w_s + w_o + w_p
    if abs(total - 1.0) > 0.05:
        return CueWeights.uniform(fallback=True)
    return CueWeights.normalized(w_s, w_o, w_p)


_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_yes_no(response: str) -> bool:
    matches = _YES_NO_RE.findall(response)
    if not matches:
        raise AmbiguousAnswer("response contains neither Yes nor No")
    return matches[-1].lower() == "yes"


_TAXONOMY_LINE_RE = re.compile(
    r"""^\s*(?:[-*\d.)\s]*)\s*"?([^":]+?)"?\s*(?::|->)\s*"?(human|animal|product)"?\s*\.?\s*$""",
    re.IGNORECASE,
)


def parse_taxonomy(response: str, object_classes: list[str]) -> tuple[dict[str, str], list[str]]:
    """Map object classes to high-level classes from a line-per-class response.

    Returns the mapping plus the classes the response never assigned; callers
    decide the default for those (the builder uses "product").
    """
    known = {name.lower(): name for name in object_classes}
    mapping: dict[str, str] = {}
    for line in response.splitlines():
        match = _TAXONOMY_LINE_RE.match(line)
        if not match:
            continue
        raw, high = match.group(1).strip().lower(), match.group(2).lower()
        if raw in known and known[raw] not in mapping:
            mapping[known[raw]] = high
    missing = [name for name in object_classes if name not in mapping]
    return mapping, missing


def _entry_key_str(key: tuple[str, str, str]) -> str:
    for part in key:
        if "|" in part:
            raise SchemaError(f"'|' not allowed in pack key part {part!r}")
    return "|".join(key)


def _round6(value: float) -> float:
    return round(value, 6)


def pack_to_dict(pack: CuePack) -> dict:
    entries = {}
    for key, entry in pack.entries.items():
        entries[_entry_key_str(key)] = {
            "subject_cues": list(entry.cues.subject_cues),
            "object_cues": list(entry.cues.object_cues),
            "position_cues": list(entry.cues.position_cues),
            "weights": {
                "w_subject": _round6(entry.weights.w_subject),
                "w_object": _round6(entry.weights.w_object),
                "w_position": _round6(entry.weights.w_position),
                "fallback": entry.weights.fallback,
            },
            "provenance": {"model": entry.model, "prompt_digest": entry.prompt_digest},
            "parse_failed": entry.parse_failed,
        }
    return {
        "version": pack.version,
        "guided": pack.guided,
        "taxonomy": dict(sorted(pack.taxonomy.items())),
        "entries": entries,
        "filters": {
            "subject_deny": {cls: sorted(preds) for cls, preds in sorted(pack.subject_deny.items()) if preds},
            "object_deny": {cls: sorted(preds) for cls, preds in sorted(pack.object_deny.items()) if preds},
        },
    }


def save_cue_pack(pack: CuePack, path: Path) -> None:
    payload = json.dumps(pack_to_dict(pack), sort_keys=True, indent=2, ensure_ascii=True)
    atomic_write_text(Path(path), payload + "\n")


def pack_digest(pack: CuePack) -> str:
    """Hex digest of the canonical serialization; used in report fingerprints."""
    payload = json.dumps(pack_to_dict(pack), sort_keys=True, separators=(",", ":"),
                         ensure_ascii=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise SchemaError(f"missing field {key!r} in {context}")
    return mapping[key]


def load_cue_pack(path: Path) -> CuePack:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read cue pack: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"cue pack is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("cue pack root must be an object")
    version = _require(raw, "version", "cue pack")
    if version != PACK_VERSION:
        raise SchemaError(f"unsupported cue pack version {version!r}")
    guided = _require(raw, "guided", "cue pack")
    taxonomy = _require(raw, "taxonomy", "cue pack")
    for cls, high in taxonomy.items():
        if high not in HIGH_LEVEL_CLASSES:
            raise SchemaError(f"taxonomy maps {cls!r} to unknown class {high!r}")
    entries: dict[tuple[str, str, str], CueEntry] = {}
    for key_str, body in _require(raw, "entries", "cue pack").items():
        parts = tuple(key_str.split("|"))
        if len(parts) != 3:
            raise SchemaError(f"malformed entry key {key_str!r}")
        if not guided and (parts[1] != WILDCARD or parts[2] != WILDCARD):
            raise SchemaError(f"unguided pack has non-wildcard entry {key_str!r}")
        weights_raw = _require(body, "weights", key_str)
        try:
            weights = CueWeights.normalized(
                float(_require(weights_raw, "w_subject", key_str)),
                float(_require(weights_raw, "w_object", key_str)),
                float(_require(weights_raw, "w_position", key_str)),
                fallback=bool(weights_raw.get("fallback", False)),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad weights in entry {key_str!r}: {exc}") from exc
        provenance = body.get("provenance", {})
        entries[parts] = CueEntry(
            cues=CueSet(
                subject_cues=tuple(_require(body, "subject_cues", key_str)),
                object_cues=tuple(_require(body, "object_cues", key_str)),
                position_cues=tuple(_require(body, "position_cues", key_str)),
            ),
            weights=weights,
            model=provenance.get("model", ""),
            prompt_digest=provenance.get("prompt_digest", ""),
            parse_failed=bool(body.get("parse_failed", False)),
        )
    filters = _require(raw, "filters", "cue pack")
    subject_deny = {cls: frozenset(preds) for cls, preds in _require(filters, "subject_deny", "filters").items()}
    object_deny = {cls: frozenset(preds) for cls, preds in _require(filters, "object_deny", "filters").items()}
    return CuePack(guided=bool(guided), taxonomy=dict(taxonomy), entries=entries,
                   subject_deny=subject_deny, object_deny=object_deny, version=version)
