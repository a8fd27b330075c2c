"""Scene-graph dataset loading and validation.

The on-disk format is a single JSON document:

    {"object_classes": [...], "predicate_classes": [...],
     "images": [{"image_id", "width", "height",
                 "objects": [{"object_id", "class", "bbox": [x, y, w, h]}],
                 "relations": [{"subject_id", "object_id", "predicate"}]}]}

Boxes are top-left-origin pixel rectangles. Object ids are canonicalized to
strings at load time so downstream sorting and report output never depend on
the producer's id type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError, UnknownObjectClass, UnknownPredicate
from .geometry import BoundingBox, ImageSize, clamp_box


@dataclass(frozen=True)
class SceneObject:
    object_id: str
    class_name: str
    box: BoundingBox


@dataclass(frozen=True)
class GroundTruth:
    subject_id: str
    object_id: str
    predicate: str


@dataclass(frozen=True)
class SceneAnnotation:
    image_id: str
    size: ImageSize
    objects: tuple[SceneObject, ...]
    gt_triplets: tuple[GroundTruth, ...]

    def object_by_id(self, object_id: str) -> SceneObject:
        for candidate in self.objects:
            if candidate.object_id == object_id:
                return candidate
        raise KeyError(object_id)


@dataclass
class Dataset:
    object_classes: list[str]
    predicate_classes: list[str]
    scenes: list[SceneAnnotation]
    clamp_warnings: int = 0

    def predicate_index(self, predicate: str) -> int:
        return self.predicate_classes.index(predicate)


def _string_list(raw, name: str) -> list[str]:
    if not isinstance(raw, list) or not all(isinstance(v, str) for v in raw):
        raise SchemaError(f"{name} must be a list of strings")
    if len(set(raw)) != len(raw):
        raise SchemaError(f"{name} contains duplicates")
    return list(raw)


def _id_string(raw, context: str) -> str:
    if isinstance(raw, bool) or not isinstance(raw, (int, str)):
        raise SchemaError(f"{context}: object id must be an integer or string, got {raw!r}")
    return str(raw)


def load_dataset(path: Path) -> Dataset:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read dataset: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"dataset is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("dataset root must be an object")
    for required in ("object_classes", "predicate_classes", "images"):
        if required not in raw:
            raise SchemaError(f"dataset missing field {required!r}")
    object_classes = _string_list(raw["object_classes"], "object_classes")
    predicate_classes = _string_list(raw["predicate_classes"], "predicate_classes")
    object_class_set = set(object_classes)
    predicate_set = set(predicate_classes)

    scenes: list[SceneAnnotation] = []
    seen_images: set[str] = set()
    clamp_warnings = 0
    if not isinstance(raw["images"], list):
        raise SchemaError("images must be a list")
    for image in raw["images"]:
        image_id = str(image.get("image_id", ""))
        if not image_id:
            raise SchemaError("image missing image_id")
        if image_id in seen_images:
            raise SchemaError(f"duplicate image_id {image_id}")
        seen_images.add(image_id)
        width, height = image.get("width"), image.get("height")
        if not isinstance(width, (int, float)) or not isinstance(height, (int, float)) \
                or width <= 0 or height <= 0:
            raise SchemaError(f"image {image_id}: bad dimensions {width}x{height}")
        size = ImageSize(float(width), float(height))

        objects: list[SceneObject] = []
        seen_ids: set[str] = set()
        for entry in image.get("objects", []):
            object_id = _id_string(entry.get("object_id"), f"image {image_id}")
            if object_id in seen_ids:
                raise SchemaError(f"image {image_id}: duplicate object_id {object_id}")
            seen_ids.add(object_id)
            class_name = entry.get("class")
            if class_name not in object_class_set:
                raise UnknownObjectClass(
                    f"image {image_id}: object class {class_name!r} not in object_classes")
            bbox = entry.get("bbox")
            if (not isinstance(bbox, list) or len(bbox) != 4
                    or not all(isinstance(v, (int, float)) for v in bbox)):
                raise SchemaError(f"image {image_id}: object {object_id} bbox must be [x,y,w,h]")
            x, y, w, h = (float(v) for v in bbox)
            if w <= 0 or h <= 0:
                raise SchemaError(
                    f"image {image_id}: object {object_id} has zero-area box {bbox}")
            clamped = clamp_box(x, y, w, h, size)
            if clamped is None:
                raise SchemaError(
                    f"image {image_id}: object {object_id} box {bbox} lies outside the image")
            if (clamped.x, clamped.y, clamped.w, clamped.h) != (x, y, w, h):
                clamp_warnings += 1
            objects.append(SceneObject(object_id, class_name, clamped))

        gt: list[GroundTruth] = []
        for entry in image.get("relations", []):
            subject_id = _id_string(entry.get("subject_id"), f"image {image_id}")
            object_id = _id_string(entry.get("object_id"), f"image {image_id}")
            if subject_id == object_id:
                raise SchemaError(
                    f"image {image_id}: relation with subject == object ({subject_id})")
            for ref in (subject_id, object_id):
                if ref not in seen_ids:
                    raise SchemaError(
                        f"image {image_id}: relation references missing object {ref}")
            predicate = entry.get("predicate")
            if predicate not in predicate_set:
                raise UnknownPredicate(
                    f"image {image_id}: predicate {predicate!r} not in predicate_classes")
            gt.append(GroundTruth(subject_id, object_id, predicate))

        scenes.append(SceneAnnotation(
            image_id=image_id, size=size,
            objects=tuple(objects), gt_triplets=tuple(gt)))

    return Dataset(object_classes=object_classes, predicate_classes=predicate_classes,
                   scenes=scenes, clamp_warnings=clamp_warnings)
