"""Per-pair prediction and graph-constrained recall metrics.

Each ordered subject-object pair gets exactly one predicted predicate (the
argmax of the per-pair distribution), predictions are ranked by confidence
with a total, documented tie order, and R@K / mR@K are averaged per image
and per predicate class respectively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cues import CuePack, map_high_level, pack_digest
from .datasets import Dataset, GroundTruth, SceneAnnotation
from .embeddings import EmbeddingProvider, region_key, spatial_embedding_key, union_key
from .errors import EmptyGroundTruth, KeyNotFound, SchemaError
from .fsio import atomic_write_text
from .geometry import spatial_key
from .scoring import (
    ScoreConfig,
    TripletContext,
    apply_filter,
    score_cls,
    score_clsde,
    score_recode,
    softmax,
)

MODES = ("recode", "recode_unguided", "cls", "clsde")
DEFAULT_K = (20, 50, 100)
REPORT_VERSION = 1


@dataclass(frozen=True)
class PairPrediction:
    subject_id: str
    object_id: str
    predicate: str
    confidence: float


@dataclass(frozen=True)
class EvalOptions:
    mode: str = "recode"
    filter_on: bool = False
    all_pairs: bool = False
    score: ScoreConfig = ScoreConfig()
    # predicate -> description texts; required for clsde.
    class_descriptions: dict[str, tuple[str, ...]] | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "clsde" and not self.class_descriptions:
            raise ValueError("clsde mode requires class descriptions")


@dataclass
class RecallReport:
    k_values: tuple[int, ...]
    recall: dict[int, float]
    mean_recall: dict[int, float]
    per_predicate: dict[int, dict[str, float]]
    counts: dict[str, int]
    fingerprint: dict = field(default_factory=dict)


def _candidate_pairs(scene: SceneAnnotation, all_pairs: bool) -> list[tuple[str, str]]:
    if all_pairs:
        ids = [obj.object_id for obj in scene.objects]
        return [(s, o) for s in ids for o in ids if s != o]
    seen: dict[tuple[str, str], None] = {}
    for gt in scene.gt_triplets:
        seen.setdefault((gt.subject_id, gt.object_id))
    return sorted(seen)


def predict_scene(
    scene: SceneAnnotation,
    pack: CuePack,
    provider: EmbeddingProvider,
    predicates: list[str],
    options: EvalOptions = EvalOptions(),
    counters: dict[str, int] | None = None,
) -> list[PairPrediction]:
    if options.mode == "recode" and not pack.guided:
        raise ValueError("mode recode expects a guided pack; use recode_unguided")
    if options.mode == "recode_unguided" and pack.guided:
        raise ValueError("mode recode_unguided expects an unguided (wildcard) pack")

    def fetch(key):
        try:
            return provider.get(key)
        except KeyNotFound as exc:
            raise KeyNotFound(exc.key, context=f"image {scene.image_id}") from None

    predictions: list[PairPrediction] = []
    index = {predicate: i for i, predicate in enumerate(predicates)}
    for subject_id, object_id in _candidate_pairs(scene, options.all_pairs):
        subject = scene.object_by_id(subject_id)
        target = scene.object_by_id(object_id)
        ctx_kwargs = dict(
            v_sub=None, v_obj=None, v_spatial=None, v_union=None,
            sub_class=subject.class_name, obj_class=target.class_name,
            sub_hl="", obj_hl="",
        )
        if options.mode in ("recode", "recode_unguided"):
            ctx_kwargs["v_sub"] = fetch(region_key(scene.image_id, subject.box))
            ctx_kwargs["v_obj"] = fetch(region_key(scene.image_id, target.box))
            if not options.score.spatial_off:
                pair_key = spatial_key(subject.box, target.box, scene.size)
                ctx_kwargs["v_spatial"] = fetch(spatial_embedding_key(pair_key))
            if pack.guided:
                ctx_kwargs["sub_hl"] = map_high_level(subject.class_name, pack.taxonomy)
                ctx_kwargs["obj_hl"] = map_high_level(target.class_name, pack.taxonomy)
        else:
            ctx_kwargs["v_union"] = fetch(union_key(scene.image_id, subject.box, target.box))

        ctx = TripletContext(**ctx_kwargs)
        scores: dict[str, float] = {}
        for predicate in predicates:
            if options.mode in ("recode", "recode_unguided"):
                scores[predicate] = score_recode(ctx, predicate, pack, provider, options.score)
            elif options.mode == "cls":
                scores[predicate] = score_cls(ctx, predicate, provider, options.score)
            else:
                descriptions = options.class_descriptions.get(predicate, ())
                scores[predicate] = score_clsde(ctx, predicate, list(descriptions), provider)

        if options.filter_on:
            masked, dropped = apply_filter(scores, pack, subject.class_name, target.class_name)
            if dropped and counters is not None:
                counters["mask_dropped"] = counters.get("mask_dropped", 0) + 1
        else:
            masked = frozenset()
        distribution = softmax(scores, masked, options.score.temperature)
        support = [r for r in predicates if r not in masked]
        best = max(support, key=lambda r: (distribution[r], -index[r]))
        predictions.append(PairPrediction(
            subject_id=subject_id, object_id=object_id,
            predicate=best, confidence=distribution[best]))
    return predictions


def rank_predictions(
    predictions: list[PairPrediction],
    predicate_order: list[str] | None = None,
) -> list[PairPrediction]:
    """Total order: confidence desc, then subject, object, predicate index."""
    if predicate_order is None:
        position = {}
    else:
        position = {predicate: i for i, predicate in enumerate(predicate_order)}

    def sort_key(prediction: PairPrediction):
        return (
            -prediction.confidence,
            prediction.subject_id,
            prediction.object_id,
            position.get(prediction.predicate, -1),
            prediction.predicate,
        )

    return sorted(predictions, key=sort_key)


def recall_at_k(
    predictions: list[PairPrediction],
    gt_triplets: list[GroundTruth],
    k: int,
    predicate_order: list[str] | None = None,
) -> float:
    if k < 1:
        raise ValueError("K must be >= 1")
    if not gt_triplets:
        raise EmptyGroundTruth("image has no ground-truth triplets")
    kept = rank_predictions(predictions, predicate_order)[:k]
    kept_triplets = {(p.subject_id, p.object_id, p.predicate) for p in kept}
    hits = sum(1 for gt in gt_triplets
               if (gt.subject_id, gt.object_id, gt.predicate) in kept_triplets)
    return hits / len(gt_triplets)


def mean_recall_at_k(
    predictions_by_image: dict[str, list[PairPrediction]],
    gts_by_image: dict[str, list[GroundTruth]],
    k: int,
    predicate_order: list[str] | None = None,
) -> tuple[float, dict[str, float]]:
    """Returns (mR@K, per-predicate recall map).

    Per predicate class: for each image containing that class in its GT, the
    fraction of its class instances recovered inside the image's global top-K;
    the class value averages those per-image fractions; mR@K averages classes.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    per_class: dict[str, list[float]] = {}
    for image_id, gts in gts_by_image.items():
        if not gts:
            continue
        kept = rank_predictions(predictions_by_image.get(image_id, []), predicate_order)[:k]
        kept_triplets = {(p.subject_id, p.object_id, p.predicate) for p in kept}
        by_class: dict[str, list[GroundTruth]] = {}
        for gt in gts:
            by_class.setdefault(gt.predicate, []).append(gt)
        for predicate, instances in by_class.items():
            hits = sum(1 for gt in instances
                       if (gt.subject_id, gt.object_id, gt.predicate) in kept_triplets)
            per_class.setdefault(predicate, []).append(hits / len(instances))
    table = {predicate: sum(values) / len(values)
             for predicate, values in per_class.items()}
    if not table:
        return 0.0, {}
    return sum(table.values()) / len(table), table


def make_fingerprint(
    pack: CuePack,
    provider: EmbeddingProvider,
    options: EvalOptions,
    k_values: tuple[int, ...],
) -> dict:
    return {
        "mode": options.mode,
        "flags": {
            "filter": options.filter_on,
            "cue_off": options.score.cue_off,
            "spatial_off": options.score.spatial_off,
            "weight_off": options.score.weight_off,
            "all_pairs": options.all_pairs,
        },
        "class_template": options.score.class_template,
        "temperature": options.score.temperature,
        "k_values": list(k_values),
        "pack_digest": pack_digest(pack),
        "provider": provider.provider_id,
    }


def evaluate_dataset(
    dataset: Dataset,
    pack: CuePack,
    provider: EmbeddingProvider,
    options: EvalOptions = EvalOptions(),
    k_values: tuple[int, ...] = DEFAULT_K,
    jobs: int = 1,
) -> RecallReport:
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    # Each scene gets its own counter dict so worker threads never share
    # mutable state; the merge below keeps totals deterministic.
    scene_counters = [dict() for _ in dataset.scenes]

    def run(scene: SceneAnnotation, counter: dict[str, int]):
        return predict_scene(scene, pack, provider,
                             dataset.predicate_classes, options, counter)

    if jobs > 1 and len(dataset.scenes) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, dataset.scenes, scene_counters))
    else:
        results = [run(scene, counter)
                   for scene, counter in zip(dataset.scenes, scene_counters)]

    counters: dict[str, int] = {}
    for counter in scene_counters:
        for name, value in counter.items():
            counters[name] = counters.get(name, 0) + value
    predictions_by_image: dict[str, list[PairPrediction]] = {}
    gts_by_image: dict[str, list[GroundTruth]] = {}
    empty_images = 0
    total_gt = 0
    for scene, predictions in zip(dataset.scenes, results):
        predictions_by_image[scene.image_id] = predictions
        gts_by_image[scene.image_id] = list(scene.gt_triplets)
        total_gt += len(scene.gt_triplets)
        if not scene.gt_triplets:
            empty_images += 1

    order = dataset.predicate_classes
    recall: dict[int, float] = {}
    mean_recall: dict[int, float] = {}
    per_predicate: dict[int, dict[str, float]] = {}
    for k in k_values:
        per_image = [
            recall_at_k(predictions_by_image[image_id], gts, k, order)
            for image_id, gts in gts_by_image.items() if gts
        ]
        recall[k] = sum(per_image) / len(per_image) if per_image else 0.0
        mean_recall[k], per_predicate[k] = mean_recall_at_k(
            predictions_by_image, gts_by_image, k, order)

    counts = {
        "images": len(dataset.scenes),
        "images_scored": len(dataset.scenes) - empty_images,
        "empty_gt_images": empty_images,
        "gt_triplets": total_gt,
        "mask_dropped": counters.get("mask_dropped", 0),
        "clamp_warnings": dataset.clamp_warnings,
    }
    return RecallReport(
        k_values=tuple(k_values),
        recall=recall,
        mean_recall=mean_recall,
        per_predicate=per_predicate,
        counts=counts,
        fingerprint=make_fingerprint(pack, provider, options, tuple(k_values)),
    )


def report_to_dict(report: RecallReport) -> dict:
    return {
        "version": REPORT_VERSION,
        "fingerprint": report.fingerprint,
        "counts": report.counts,
        "recall": {str(k): report.recall[k] for k in report.k_values},
        "mean_recall": {str(k): report.mean_recall[k] for k in report.k_values},
        "per_predicate": {
            str(k): dict(sorted(report.per_predicate[k].items()))
            for k in report.k_values
        },
    }


def report_from_dict(raw: dict) -> RecallReport:
    if raw.get("version") != REPORT_VERSION:
        raise SchemaError(f"unsupported report version {raw.get('version')!r}")
    k_values = tuple(int(k) for k in raw["recall"])
    return RecallReport(
        k_values=k_values,
        recall={int(k): v for k, v in raw["recall"].items()},
        mean_recall={int(k): v for k, v in raw["mean_recall"].items()},
        per_predicate={int(k): dict(v) for k, v in raw["per_predicate"].items()},
        counts=dict(raw["counts"]),
        fingerprint=dict(raw.get("fingerprint", {})),
    )


def format_report_table(report: RecallReport) -> str:
    lines = [f"{'K':>6}  {'R@K':>8}  {'mR@K':>8}"]
    for k in report.k_values:
        lines.append(f"{k:>6}  {report.recall[k]:>8.4f}  {report.mean_recall[k]:>8.4f}")
    return "\n".join(lines) + "\n"


def write_report(report: RecallReport, path: Path, fmt: str = "json") -> None:
    path = Path(path)
    if fmt == "json":
        payload = json.dumps(report_to_dict(report), sort_keys=True, indent=2,
                             ensure_ascii=True) + "\n"
    elif fmt == "table":
        payload = format_report_table(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    atomic_write_text(path, payload)


def load_report(path: Path) -> RecallReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
