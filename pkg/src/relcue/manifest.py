"""Embedding manifest: the list of every vector a run will need.

The manifest is the hand-off point between this package and whatever encoder
fills the archive.  It enumerates keys with enough source detail to compute
each vector without re-reading the dataset:

    {"version": 1, "encoder": "ViT-B/32", "dim": 512,
     "entries": [
        {"key": "text:<digest>", "kind": "text", "prompt": "..."},
        {"key": "region:im0:4:8:15:16", "kind": "region",
         "image": "im0.jpg", "box": [4, 8, 15, 16]},
        {"key": "union:...", "kind": "union", "image": "...", "box": [...]},
        {"key": "spatial:HM-QL-N-S", "kind": "spatial", "png": "HM-QL-N-S.png"}]}

Entries are sorted by key and deduplicated, so building twice from the same
inputs yields identical bytes.  Boxes carry the same clamped, rounded integer
coordinates that appear in the key string.
"""

from __future__ import annotations

import json
from pathlib import Path

from .cues import CuePack
from .datasets import Dataset, SceneAnnotation
from .embeddings import (
    KEY_KINDS,
    box_ints,
    region_key,
    spatial_embedding_key,
    text_key,
    union_box,
    union_key,
)
from .errors import SchemaError
from .fsio import atomic_write_text
from .geometry import spatial_key
from .prompts import class_prompt

MANIFEST_VERSION = 1
DEFAULT_ENCODER = "ViT-B/32"
DEFAULT_DIM = 512


def _pairs(scene: SceneAnnotation, all_pairs: bool) -> list[tuple[str, str]]:
    if all_pairs:
        ids = [obj.object_id for obj in scene.objects]
        return [(s, o) for s in ids for o in ids if s != o]
    seen: dict[tuple[str, str], None] = {}
    for gt in scene.gt_triplets:
        seen.setdefault((gt.subject_id, gt.object_id))
    return sorted(seen)


def build_manifest(
    dataset: Dataset,
    pack: CuePack,
    class_template: str = "photo",
    all_pairs: bool = False,
    image_name: str = "{image_id}.jpg",
    atlas_names: dict[str, str] | None = None,
    class_descriptions: dict[str, list[str]] | None = None,
    encoder: str = DEFAULT_ENCODER,
    dim: int = DEFAULT_DIM,
) -> dict:
    """Enumerate every embedding key an evaluation over dataset+pack touches.

    atlas_names maps canonical spatial keys to PNG filenames (the atlas
    manifest's "keys" section); when omitted, the exporter's default naming
    of "<canonical>.png" is assumed.
    """
    entries: dict[str, dict] = {}

    def add(key, descriptor: dict) -> None:
        entries.setdefault(str(key), {"key": str(key), **descriptor})

    def add_text(prompt: str) -> None:
        add(text_key(prompt), {"kind": "text", "prompt": prompt})

    for predicate in dataset.predicate_classes:
        add_text(class_prompt(predicate, class_template))
    for entry in pack.entries.values():
        for cue in (entry.cues.subject_cues + entry.cues.object_cues
                    + entry.cues.position_cues):
            add_text(cue)
    for descriptions in (class_descriptions or {}).values():
        for description in descriptions:
            add_text(description)

    for scene in dataset.scenes:
        image = image_name.format(image_id=scene.image_id)
        for obj in scene.objects:
            add(region_key(scene.image_id, obj.box),
                {"kind": "region", "image": image, "box": list(box_ints(obj.box))})
        for subject_id, object_id in _pairs(scene, all_pairs):
            sub = scene.object_by_id(subject_id).box
            obj = scene.object_by_id(object_id).box
            add(union_key(scene.image_id, sub, obj),
                {"kind": "union", "image": image,
                 "box": list(box_ints(union_box(sub, obj)))})
            canonical = spatial_key(sub, obj, scene.size).canonical()
            if atlas_names is None:
                png = f"{canonical}.png"
            elif canonical in atlas_names:
                png = atlas_names[canonical]
            else:
                raise SchemaError(f"atlas manifest lacks spatial key {canonical}")
            add(spatial_embedding_key(spatial_key(sub, obj, scene.size)),
                {"kind": "spatial", "png": png})

    return {
        "version": MANIFEST_VERSION,
        "encoder": encoder,
        "dim": dim,
        "entries": [entries[key] for key in sorted(entries)],
    }


def atlas_name_map(atlas_manifest: dict) -> dict[str, str]:
    """Extract canonical-key -> filename from an atlas manifest document."""
    keys = atlas_manifest.get("keys")
    if not isinstance(keys, dict):
        raise SchemaError("atlas manifest missing keys section")
    return {canonical: record["file"] for canonical, record in keys.items()}


def write_manifest(manifest: dict, path: str | Path) -> None:
    atomic_write_text(Path(path), json.dumps(
        manifest, sort_keys=True, indent=2, ensure_ascii=True) + "\n")


def load_manifest(path: str | Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read manifest: {exc}") from None
    if not isinstance(raw, dict) or raw.get("version") != MANIFEST_VERSION:
        raise SchemaError("unsupported manifest document")
    if not isinstance(raw.get("entries"), list):
        raise SchemaError("manifest entries must be a list")
    seen: set[str] = set()
    for entry in raw["entries"]:
        if not isinstance(entry, dict) or not isinstance(entry.get("key"), str):
            raise SchemaError("manifest entry missing key")
        if entry["key"] in seen:
            raise SchemaError(f"duplicate manifest key {entry['key']}")
        seen.add(entry["key"])
        kind = entry.get("kind")
        if kind not in KEY_KINDS:
            raise SchemaError(f"unknown entry kind {kind!r}")
        if kind == "text" and not isinstance(entry.get("prompt"), str):
            raise SchemaError("text entry missing prompt")
        if kind in ("region", "union"):
            box = entry.get("box")
            if not isinstance(entry.get("image"), str) or not isinstance(box, list) \
                    or len(box) != 4 or not all(isinstance(v, int) for v in box):
                raise SchemaError(f"bad {kind} entry for {entry['key']}")
        if kind == "spatial" and not isinstance(entry.get("png"), str):
            raise SchemaError("spatial entry missing png")
    return raw
