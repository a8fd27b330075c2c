import json
from collections import Counter

import pytest

from relcue.cues import CueEntry, CuePack, CueSet, CueWeights
from relcue.datasets import Dataset, GroundTruth, SceneAnnotation, SceneObject
from relcue.embeddings import ArchiveProvider, MockProvider, write_archive
from relcue.errors import SchemaError
from relcue.evaluation import EvalOptions, evaluate_dataset
from relcue.geometry import BoundingBox, ImageSize, spatial_key
from relcue.manifest import (
    atlas_name_map,
    build_manifest,
    build_manifest as _bm,
    load_manifest,
    write_manifest,
)

SUB_BOX = BoundingBox(10, 20, 50, 100)
OBJ_BOX = BoundingBox(40, 60, 200, 150)


def _entry(*cues):
    subject = tuple(c for c in cues[: len(cues) // 2])
    objectc = tuple(c for c in cues[len(cues) // 2:])
    return CueEntry(
        cues=CueSet(subject_cues=subject, object_cues=objectc, position_cues=()),
        weights=CueWeights(0.5, 0.5, 0.0),
    )


def _fixture(shared_cue=False, extra_objects=0):
    objects = [
        SceneObject("0", "man", SUB_BOX),
        SceneObject("1", "horse", OBJ_BOX),
    ]
    for i in range(extra_objects):
        objects.append(SceneObject(f"x{i}", "man",
                                   BoundingBox(300 + 30 * i, 200, 40, 40)))
    scene = SceneAnnotation(
        image_id="im0",
        size=ImageSize(640, 480),
        objects=tuple(objects),
        gt_triplets=(GroundTruth("0", "1", "on"),),
    )
    dataset = Dataset(
        object_classes=["man", "horse"],
        predicate_classes=["on", "under", "near"],
        scenes=[scene],
    )
    last = "on cue s" if shared_cue else "near cue s"
    pack = CuePack(guided=False, entries={
        ("on", "any", "any"): _entry("on cue s", "on cue o"),
        ("under", "any", "any"): _entry("under cue s", "under cue o"),
        ("near", "any", "any"): _entry(last, "near cue o"),
    })
    return dataset, pack


def test_counting_fixture():
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)
    kinds = Counter(entry["kind"] for entry in manifest["entries"])
    assert kinds == {"text": 9, "region": 2, "union": 1, "spatial": 1}
    assert len(manifest["entries"]) == 13
    assert manifest["encoder"] == "ViT-B/32"
    assert manifest["dim"] == 512
    prompts = {e["prompt"] for e in manifest["entries"] if e["kind"] == "text"}
    assert "a photo of on" in prompts
    assert "on cue s" in prompts


def test_shared_cue_string_deduplicated():
    dataset, pack = _fixture(shared_cue=True)
    manifest = build_manifest(dataset, pack)
    kinds = Counter(entry["kind"] for entry in manifest["entries"])
    assert kinds["text"] == 8
    assert len(manifest["entries"]) == 12


def test_empty_dataset_empty_manifest():
    dataset = Dataset(object_classes=[], predicate_classes=[], scenes=[])
    manifest = build_manifest(dataset, CuePack(guided=False))
    assert manifest["entries"] == []


def test_entries_sorted_by_key():
    dataset, pack = _fixture()
    keys = [entry["key"] for entry in build_manifest(dataset, pack)["entries"]]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_region_box_matches_key_fields():
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)
    for entry in manifest["entries"]:
        if entry["kind"] in ("region", "union"):
            tail = entry["key"].rsplit(":", 4)
            assert [int(v) for v in tail[1:]] == entry["box"]
            assert entry["image"] == "im0.jpg"


def test_union_covers_both_boxes():
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)
    union = next(e for e in manifest["entries"] if e["kind"] == "union")
    assert union["box"] == [10, 20, 230, 190]


def test_spatial_entry_uses_canonical_png():
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)
    spatial = next(e for e in manifest["entries"] if e["kind"] == "spatial")
    canonical = spatial_key(SUB_BOX, OBJ_BOX, ImageSize(640, 480)).canonical()
    assert spatial["key"] == f"spatial:{canonical}"
    assert spatial["png"] == f"{canonical}.png"


def test_atlas_names_respected():
    dataset, pack = _fixture()
    canonical = spatial_key(SUB_BOX, OBJ_BOX, ImageSize(640, 480)).canonical()
    manifest = build_manifest(dataset, pack,
                              atlas_names={canonical: "000042.png"})
    spatial = next(e for e in manifest["entries"] if e["kind"] == "spatial")
    assert spatial["png"] == "000042.png"
    with pytest.raises(SchemaError):
        build_manifest(dataset, pack, atlas_names={"other": "x.png"})


def test_atlas_name_map_extraction():
    doc = {"canvas": 224, "keys": {"HL-HL-E-L": {"file": "HL-HL-E-L.png",
                                                 "dist_degraded": False}}}
    assert atlas_name_map(doc) == {"HL-HL-E-L": "HL-HL-E-L.png"}
    with pytest.raises(SchemaError):
        atlas_name_map({"canvas": 224})


def test_image_name_template():
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack, image_name="{image_id}.png")
    region = next(e for e in manifest["entries"] if e["kind"] == "region")
    assert region["image"] == "im0.png"


def test_class_template_changes_prompts():
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack, class_template="plain")
    prompts = {e["prompt"] for e in manifest["entries"] if e["kind"] == "text"}
    assert "on" in prompts
    assert "a photo of on" not in prompts


def test_class_descriptions_add_text_keys():
    dataset, pack = _fixture()
    base = build_manifest(dataset, pack)
    manifest = build_manifest(dataset, pack, class_descriptions={
        "on": ["subject resting on object", "on cue s"]})
    kinds = Counter(entry["kind"] for entry in manifest["entries"])
    assert kinds["text"] == 10  # one new prompt; "on cue s" already present
    assert len(manifest["entries"]) == len(base["entries"]) + 1


def test_all_pairs_expands_unions():
    dataset, pack = _fixture(extra_objects=1)
    manifest = build_manifest(dataset, pack, all_pairs=True)
    kinds = Counter(entry["kind"] for entry in manifest["entries"])
    assert kinds["region"] == 3
    # the union envelope is symmetric, so mirrored pairs share one crop;
    # spatial keys are direction-sensitive and stay distinct
    assert kinds["union"] == 3
    assert kinds["spatial"] == 6


def test_build_is_deterministic(tmp_path):
    dataset, pack = _fixture()
    a, b = build_manifest(dataset, pack), _bm(dataset, pack)
    assert a == b
    write_manifest(a, tmp_path / "a.json")
    write_manifest(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_load_round_trip(tmp_path):
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)
    write_manifest(manifest, tmp_path / "m.json")
    assert load_manifest(tmp_path / "m.json") == manifest


def test_load_rejects_bad_documents(tmp_path):
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)

    def reject(mutate):
        doc = json.loads(json.dumps(manifest))
        mutate(doc)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            load_manifest(path)

    reject(lambda d: d.update(version=99))
    reject(lambda d: d["entries"].append(dict(d["entries"][0])))
    reject(lambda d: d["entries"][0].update(kind="tensor"))
    reject(lambda d: d.update(entries="nope"))

    def strip_prompt(doc):
        entry = next(e for e in doc["entries"] if e["kind"] == "text")
        del entry["prompt"]
    reject(strip_prompt)

    def break_box(doc):
        entry = next(e for e in doc["entries"] if e["kind"] == "region")
        entry["box"] = [1, 2, 3]
    reject(break_box)

    def strip_png(doc):
        entry = next(e for e in doc["entries"] if e["kind"] == "spatial")
        del entry["png"]
    reject(strip_png)

    (tmp_path / "nojson.json").write_text("{{{")
    with pytest.raises(SchemaError):
        load_manifest(tmp_path / "nojson.json")


def test_manifest_covers_evaluation(tmp_path):
    """An archive holding exactly the manifest keys satisfies evaluate."""
    dataset, pack = _fixture()
    manifest = build_manifest(dataset, pack)
    provider = MockProvider(dim=16)
    vectors = {entry["key"]: provider.get(entry["key"])
               for entry in manifest["entries"]}
    write_archive(vectors.items(), tmp_path / "arch")
    archive = ArchiveProvider.open(tmp_path / "arch")
    for mode in ("recode_unguided", "cls"):
        report = evaluate_dataset(dataset, pack, archive,
                                  EvalOptions(mode=mode), k_values=(1,))
        assert report.counts["images_scored"] == 1
