import json
import random

import pytest

from datagen import synthetic_dataset, write_dataset
from relcue.datasets import load_dataset
from relcue.errors import SchemaError, UnknownObjectClass, UnknownPredicate


def _doc():
    return {
        "object_classes": ["man", "horse"],
        "predicate_classes": ["riding", "near"],
        "images": [
            {
                "image_id": "im0",
                "width": 640,
                "height": 480,
                "objects": [
                    {"object_id": 0, "class": "man", "bbox": [10, 20, 50, 100]},
                    {"object_id": 1, "class": "horse", "bbox": [40, 60, 200, 150]},
                ],
                "relations": [
                    {"subject_id": 0, "object_id": 1, "predicate": "riding"},
                ],
            }
        ],
    }


def _load(tmp_path, doc):
    path = tmp_path / "data.json"
    path.write_text(json.dumps(doc))
    return load_dataset(path)


def test_load_happy_path(tmp_path):
    ds = _load(tmp_path, _doc())
    assert ds.object_classes == ["man", "horse"]
    assert ds.predicate_classes == ["riding", "near"]
    assert len(ds.scenes) == 1
    scene = ds.scenes[0]
    assert scene.image_id == "im0"
    assert scene.size.width == 640 and scene.size.height == 480
    assert [o.object_id for o in scene.objects] == ["0", "1"]
    assert scene.objects[0].class_name == "man"
    assert scene.objects[0].box.w == 50.0
    gt = scene.gt_triplets[0]
    assert (gt.subject_id, gt.object_id, gt.predicate) == ("0", "1", "riding")
    assert ds.clamp_warnings == 0


def test_object_lookup(tmp_path):
    scene = _load(tmp_path, _doc()).scenes[0]
    assert scene.object_by_id("1").class_name == "horse"
    with pytest.raises(KeyError):
        scene.object_by_id("7")


def test_ids_canonicalized_to_strings(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][0]["object_id"] = "left"
    doc["images"][0]["relations"][0]["subject_id"] = "left"
    ds = _load(tmp_path, doc)
    assert ds.scenes[0].objects[0].object_id == "left"
    assert ds.scenes[0].gt_triplets[0].subject_id == "left"


def test_predicate_index(tmp_path):
    ds = _load(tmp_path, _doc())
    assert ds.predicate_index("riding") == 0
    assert ds.predicate_index("near") == 1


def test_box_clamped_and_counted(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][1]["bbox"] = [600, 60, 100, 150]
    ds = _load(tmp_path, doc)
    assert ds.clamp_warnings == 1
    assert ds.scenes[0].objects[1].box.w == 40.0


def test_box_fully_outside_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][1]["bbox"] = [700, 60, 100, 150]
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_zero_area_box_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][1]["bbox"] = [40, 60, 0, 150]
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_unknown_object_class(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][0]["class"] = "unicorn"
    with pytest.raises(UnknownObjectClass):
        _load(tmp_path, doc)


def test_unknown_predicate(tmp_path):
    doc = _doc()
    doc["images"][0]["relations"][0]["predicate"] = "orbiting"
    with pytest.raises(UnknownPredicate):
        _load(tmp_path, doc)


def test_duplicate_object_id_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][1]["object_id"] = 0
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_duplicate_image_id_rejected(tmp_path):
    doc = _doc()
    doc["images"].append(json.loads(json.dumps(doc["images"][0])))
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_empty_dataset_loads(tmp_path):
    ds = _load(tmp_path, {"object_classes": [], "predicate_classes": [],
                          "images": []})
    assert ds.scenes == []


def test_duplicate_vocabulary_rejected(tmp_path):
    doc = _doc()
    doc["object_classes"] = ["man", "man"]
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)
    doc = _doc()
    doc["predicate_classes"] = ["riding", "riding"]
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_relation_referencing_missing_object(tmp_path):
    doc = _doc()
    doc["images"][0]["relations"][0]["object_id"] = 9
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_self_relation_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["relations"][0]["object_id"] = 0
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_bad_image_dims_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["width"] = 0
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_bad_bbox_shape_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][0]["bbox"] = [10, 20, 50]
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_bool_object_id_rejected(tmp_path):
    doc = _doc()
    doc["images"][0]["objects"][0]["object_id"] = True
    with pytest.raises(SchemaError):
        _load(tmp_path, doc)


def test_missing_field_rejected(tmp_path):
    for field in ("object_classes", "predicate_classes", "images"):
        doc = _doc()
        del doc[field]
        with pytest.raises(SchemaError):
            _load(tmp_path, doc)


def test_non_json_rejected(tmp_path):
    path = tmp_path / "data.json"
    path.write_text("not json {")
    with pytest.raises(SchemaError):
        load_dataset(path)


def test_non_object_root_rejected(tmp_path):
    path = tmp_path / "data.json"
    path.write_text("[1, 2]")
    with pytest.raises(SchemaError):
        load_dataset(path)


def test_synthetic_generator_loads(tmp_path):
    rng = random.Random(7)
    doc = synthetic_dataset(rng, n_images=12)
    write_dataset(doc, tmp_path / "synth.json")
    ds = load_dataset(tmp_path / "synth.json")
    assert len(ds.scenes) == 12
    assert ds.clamp_warnings == 0
    for scene in ds.scenes:
        assert scene.gt_triplets
        for gt in scene.gt_triplets:
            assert gt.subject_id != gt.object_id


def test_synthetic_generator_seed_stable():
    a = synthetic_dataset(random.Random(11), n_images=5)
    b = synthetic_dataset(random.Random(11), n_images=5)
    assert a == b
