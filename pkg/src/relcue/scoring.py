"""Relation scoring: decomposed aggregation, baselines, masking, softmax.

The decomposed score for predicate r is

    S(r) = phi(v_sub, t_class) + phi(v_obj, t_class)
         + sum over components k in {subject, object, position} of
           (w_k / |D_k|) * sum over cue texts d in D_k of phi(v_k, t_d)

where phi is cosine similarity, t_class embeds the templated predicate label,
and t_d embeds each cue phrase verbatim. Components with no cues contribute
nothing. The baselines score the union crop against the class prompt (cls) or
against a mean over per-predicate description texts (clsde).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cues import CuePack
from .embeddings import EmbeddingProvider, cosine, text_key
from .errors import (
    EmptyDescriptionList,
    EmptySupport,
    MissingUnionEmbedding,
)
from .prompts import DEFAULT_CLASS_TEMPLATE, class_prompt


@dataclass(frozen=True)
class ScoreConfig:
    class_template: str = DEFAULT_CLASS_TEMPLATE
    temperature: float = 1.0
    cue_off: bool = False
    spatial_off: bool = False
    weight_off: bool = False

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True, eq=False)
class TripletContext:
    """Vectors and labels for one subject-object pair.

    Region/spatial vectors may be omitted when only the baselines run, and
    v_union when only the decomposed score runs; each scorer checks for what
    it needs.
    """

    v_sub: np.ndarray | None = None
    v_obj: np.ndarray | None = None
    v_spatial: np.ndarray | None = None
    v_union: np.ndarray | None = None
    sub_class: str = ""
    obj_class: str = ""
    sub_hl: str = ""
    obj_hl: str = ""


@dataclass(frozen=True, eq=False)
class RelationScoreTable:
    scores: dict[str, float]
    masked: frozenset[str]
    distribution: dict[str, float]
    mask_dropped: bool = False


def _class_vector(predicate: str, provider: EmbeddingProvider, config: ScoreConfig) -> np.ndarray:
    return provider.get(text_key(class_prompt(predicate, config.class_template)))


def score_recode(
    ctx: TripletContext,
    predicate: str,
    pack: CuePack,
    provider: EmbeddingProvider,
    config: ScoreConfig = ScoreConfig(),
) -> float:
    if ctx.v_sub is None or ctx.v_obj is None:
        raise ValueError("decomposed scoring needs subject and object embeddings")
    entry = pack.entry_for(predicate, ctx.sub_hl, ctx.obj_hl)
    t_class = _class_vector(predicate, provider, config)
    score = cosine(ctx.v_sub, t_class) + cosine(ctx.v_obj, t_class)
    if config.cue_off:
        return score

    components = [
        ("subject", ctx.v_sub, entry.cues.subject_cues, entry.weights.w_subject),
        ("object", ctx.v_obj, entry.cues.object_cues, entry.weights.w_object),
    ]
    if config.spatial_off:
        # Dropping the position term renormalizes the remaining pair.
        pair = entry.weights.w_subject + entry.weights.w_object
        if pair > 0:
            components = [(name, vec, cues, weight / pair)
                          for name, vec, cues, weight in components]
        else:
            components = [(name, vec, cues, 0.5) for name, vec, cues, _ in components]
    else:
        components.append(("position", ctx.v_spatial, entry.cues.position_cues,
                           entry.weights.w_position))

    active = [(name, vec, cues, weight) for name, vec, cues, weight in components if cues]
    if config.weight_off and active:
        uniform = 1.0 / len(active)
        active = [(name, vec, cues, uniform) for name, vec, cues, _ in active]
    for _name, vec, cues, weight in active:
        total = 0.0
        for cue in cues:
            total += cosine(vec, provider.get(text_key(cue)))
        score += weight * total / len(cues)
    return score


def score_cls(
    ctx: TripletContext,
    predicate: str,
    provider: EmbeddingProvider,
    config: ScoreConfig = ScoreConfig(),
) -> float:
    if ctx.v_union is None:
        raise MissingUnionEmbedding(f"cls scoring for {predicate!r} needs a union embedding")
    return cosine(ctx.v_union, _class_vector(predicate, provider, config))


def score_clsde(
    ctx: TripletContext,
    predicate: str,
    class_descriptions: list[str],
    provider: EmbeddingProvider,
) -> float:
    if ctx.v_union is None:
        raise MissingUnionEmbedding(f"clsde scoring for {predicate!r} needs a union embedding")
    if not class_descriptions:
        raise EmptyDescriptionList(f"no class descriptions for {predicate!r}")
    total = 0.0
    for description in class_descriptions:
        total += cosine(ctx.v_union, provider.get(text_key(description)))
    return total / len(class_descriptions)


def apply_filter(
    scores: dict[str, float],
    pack: CuePack,
    sub_class: str,
    obj_class: str,
) -> tuple[frozenset[str], bool]:
    """Mask denied predicates; returns (mask, dropped).

    When the deny rules would mask every predicate, the mask is dropped so a
    valid distribution survives, and the dropped flag reports it.
    """
    masked = frozenset(r for r in scores if pack.denied(r, sub_class, obj_class))
    if scores and masked == frozenset(scores):
        return frozenset(), True
    return masked, False


def softmax(
    scores: dict[str, float],
    mask: frozenset[str] = frozenset(),
    temperature: float = 1.0,
) -> dict[str, float]:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    support = [r for r in scores if r not in mask]
    if not support:
        raise EmptySupport("every predicate is masked")
    peak = max(scores[r] for r in support)
    exps = {r: math.exp((scores[r] - peak) / temperature) for r in support}
    total = sum(exps.values())
    distribution = {r: 0.0 for r in scores}
    for r in support:
        distribution[r] = exps[r] / total
    return distribution


def build_table(
    scores: dict[str, float],
    masked: frozenset[str] = frozenset(),
    temperature: float = 1.0,
    mask_dropped: bool = False,
) -> RelationScoreTable:
    return RelationScoreTable(
        scores=dict(scores),
        masked=masked,
        distribution=softmax(scores, masked, temperature),
        mask_dropped=mask_dropped,
    )
