"""Builds a CuePack by driving the LLM through the prompt templates.

Query plan: one taxonomy call, then per predicate either nine guided
(description, weight) pairs spanning the high-level class grid or a single
wildcard pair, then a subject-side and an object-side plausibility question
for every (object class, predicate) combination. Unparseable description
responses produce flagged empty entries; their weight query is skipped since
there are no cues to weigh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cues import (
    HIGH_LEVEL_CLASSES,
    UNGUIDED_BINDING,
    WILDCARD,
    CueEntry,
    CuePack,
    CueSet,
    CueWeights,
    parse_cues,
    parse_taxonomy,
    parse_weights,
    parse_yes_no,
)
from .errors import AmbiguousAnswer, ParseFailure
from .llm import LlmClient, LlmRequest, default_model
from .prompts import format_string_list, prompt_digest, render_prompt

DEFAULT_MAX_TOKENS = 1024


@dataclass
class BuildReport:
    model: str = ""
    guided: bool = True
    taxonomy_defaulted: list[str] = field(default_factory=list)
    description_queries: int = 0
    weight_queries: int = 0
    filter_queries: int = 0
    cue_parse_failures: int = 0
    weight_fallbacks: int = 0
    ambiguous_filters: int = 0

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "guided": self.guided,
            "taxonomy_defaulted": sorted(self.taxonomy_defaulted),
            "description_queries": self.description_queries,
            "weight_queries": self.weight_queries,
            "filter_queries": self.filter_queries,
            "cue_parse_failures": self.cue_parse_failures,
            "weight_fallbacks": self.weight_fallbacks,
            "ambiguous_filters": self.ambiguous_filters,
        }


def _ask(llm: LlmClient, model: str, prompt: str, mode: str, max_tokens: int) -> str:
    request = LlmRequest(model=model, prompt=prompt, temperature=0.0, max_tokens=max_tokens)
    return llm.complete(request, mode=mode).text


def assemble_cue_pack(
    predicates: list[str],
    object_classes: list[str],
    guided: bool,
    llm: LlmClient,
    model: str | None = None,
    mode: str = "online",
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> tuple[CuePack, BuildReport]:
    model = model or default_model()
    report = BuildReport(model=model, guided=guided)
    pack = CuePack(guided=guided)

    taxonomy_prompt = render_prompt("taxonomy", {"ALL OBJ CLS": format_string_list(object_classes)})
    taxonomy_text = _ask(llm, model, taxonomy_prompt, mode, max_tokens)
    mapping, missing = parse_taxonomy(taxonomy_text, object_classes)
    for name in missing:
        mapping[name] = "product"
    report.taxonomy_defaulted = list(missing)
    pack.taxonomy = mapping

    if guided:
        pairs = [(sub, obj) for sub in HIGH_LEVEL_CLASSES for obj in HIGH_LEVEL_CLASSES]
    else:
        pairs = [(WILDCARD, WILDCARD)]
    for predicate in predicates:
        for sub_hl, obj_hl in pairs:
            sub_binding = sub_hl if guided else UNGUIDED_BINDING
            obj_binding = obj_hl if guided else UNGUIDED_BINDING
            description_prompt = render_prompt("description", {
                "REL CLS": predicate,
                "SUB HL CLS": sub_binding,
                "OBJ HL CLS": obj_binding,
            })
            description_text = _ask(llm, model, description_prompt, mode, max_tokens)
            report.description_queries += 1
            try:
                cues = parse_cues(description_text)
            except ParseFailure:
                report.cue_parse_failures += 1
                pack.entries[(predicate, sub_hl, obj_hl)] = CueEntry(
                    cues=CueSet.empty(),
                    weights=CueWeights.uniform(fallback=True),
                    model=model,
                    prompt_digest=prompt_digest(description_prompt),
                    parse_failed=True,
                )
                continue
            weight_prompt = render_prompt("weight", {
                "REL CLS": predicate,
                "SUB HL CLS": sub_binding,
                "OBJ HL CLS": obj_binding,
                "SUB CUES": format_string_list(list(cues.subject_cues)),
                "OBJ CUES": format_string_list(list(cues.object_cues)),
                "POS CUES": format_string_list(list(cues.position_cues)),
            })
            weight_text = _ask(llm, model, weight_prompt, mode, max_tokens)
            report.weight_queries += 1
            weights = parse_weights(weight_text)
            if weights.fallback:
                report.weight_fallbacks += 1
            pack.entries[(predicate, sub_hl, obj_hl)] = CueEntry(
                cues=cues,
                weights=weights,
                model=model,
                prompt_digest=prompt_digest(description_prompt + "\n" + weight_prompt),
            )

    for object_class in object_classes:
        subject_denied: set[str] = set()
        object_denied: set[str] = set()
        for predicate in predicates:
            subject_prompt = render_prompt("filter_subject", {
                "SUB CLS": object_class,
                "REL CLS": predicate,
            })
            object_prompt = render_prompt("filter_object", {
                "OBJ CLS": object_class,
                "REL CLS": predicate,
            })
            for prompt, denied in ((subject_prompt, subject_denied), (object_prompt, object_denied)):
                answer_text = _ask(llm, model, prompt, mode, max_tokens)
                report.filter_queries += 1
                try:
                    if not parse_yes_no(answer_text):
                        denied.add(predicate)
                except AmbiguousAnswer:
                    report.ambiguous_filters += 1
        if subject_denied:
            pack.subject_deny[object_class] = frozenset(subject_denied)
        if object_denied:
            pack.object_deny[object_class] = frozenset(object_denied)

    return pack, report
