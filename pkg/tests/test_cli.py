import json
import random

import pytest

from datagen import build_pack, synthetic_dataset, write_dataset
from relcue.atlas import render
from relcue.cli import main
from relcue.cues import load_cue_pack
from relcue.geometry import SpatialKey


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    doc = synthetic_dataset(random.Random(77), n_images=6)
    write_dataset(doc, tmp / "d.json")
    build_pack(tmp / "cache")
    build_pack(tmp / "cache", guided=False)
    return tmp


def _gen_cues(workdir, out, *extra):
    return main(["gen-cues", "--dataset", str(workdir / "d.json"),
                 "--out", str(out), "--cache", str(workdir / "cache"),
                 "--offline", "--model", "fake-model", *extra])


def test_gen_cues_writes_pack(workdir, tmp_path, capsys):
    rc = _gen_cues(workdir, tmp_path / "pack.json")
    out = capsys.readouterr().out
    assert rc == 0
    assert "wrote" in out and "54 entries" in out
    pack = load_cue_pack(tmp_path / "pack.json")
    assert pack.guided
    assert (tmp_path / "pack.json.report.json").exists()


def test_gen_cues_rerun_is_byte_identical(workdir, tmp_path):
    assert _gen_cues(workdir, tmp_path / "a.json") == 0
    assert _gen_cues(workdir, tmp_path / "b.json") == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_gen_cues_unguided(workdir, tmp_path):
    rc = _gen_cues(workdir, tmp_path / "pack.json", "--unguided")
    assert rc == 0
    pack = load_cue_pack(tmp_path / "pack.json")
    assert not pack.guided
    assert all(key[1] == "any" for key in pack.entries)


def test_gen_cues_vocab_files(workdir, tmp_path):
    (tmp_path / "preds.txt").write_text("on\nriding\nholding\nnear\nbehind\nunder\n")
    (tmp_path / "classes.txt").write_text(
        "man\nwoman\ndog\nhorse\nchair\ntable\nkite\ntree\n")
    rc = main(["gen-cues", "--predicates", str(tmp_path / "preds.txt"),
               "--classes", str(tmp_path / "classes.txt"),
               "--out", str(tmp_path / "pack.json"),
               "--cache", str(workdir / "cache"),
               "--offline", "--model", "fake-model"])
    assert rc == 0
    assert load_cue_pack(tmp_path / "pack.json").guided


def test_gen_cues_cold_cache_fails(workdir, tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("LLM_ENDPOINT", raising=False)
    rc = main(["gen-cues", "--dataset", str(workdir / "d.json"),
               "--out", str(tmp_path / "pack.json"),
               "--cache", str(tmp_path / "cold"), "--offline"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_render_spatial(tmp_path, capsys):
    out = tmp_path / "img.png"
    rc = main(["render-spatial", "QM-HL-N-S", "--out", str(out)])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    expected = render(SpatialKey.from_string("QM-HL-N-S")).to_png_bytes()
    assert out.read_bytes() == expected


def test_render_spatial_bad_key(tmp_path, capsys):
    rc = main(["render-spatial", "ZZ-ZZ-Z-Z", "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_atlas_export(tmp_path, capsys):
    rc = main(["atlas", "export", "--out", str(tmp_path / "atlas")])
    assert rc == 0
    assert "1944" in capsys.readouterr().out
    assert (tmp_path / "atlas" / "atlas-manifest.json").exists()


@pytest.fixture(scope="module")
def staged(workdir, tmp_path_factory):
    """Pack + manifest built once for the evaluate tests."""
    tmp = tmp_path_factory.mktemp("staged")
    assert _gen_cues(workdir, tmp / "pack.json") == 0
    rc = main(["build-manifest", "--dataset", str(workdir / "d.json"),
               "--pack", str(tmp / "pack.json"), "--out", str(tmp / "m.json")])
    assert rc == 0
    return tmp


def test_build_manifest_output(staged, capsys):
    manifest = json.loads((staged / "m.json").read_text())
    assert manifest["version"] == 1
    assert manifest["entries"]


def test_evaluate_single_mode(workdir, staged, tmp_path, capsys):
    rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
               "--pack", str(staged / "pack.json"),
               "--out", str(tmp_path / "report.json"), "--k", "1,5"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "R@K" in out and "wrote" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["recall"]) == {"1", "5"}
    assert report["fingerprint"]["mode"] == "recode"
    assert report["fingerprint"]["flags"]["filter"] is False


def test_evaluate_table_format(workdir, staged, tmp_path):
    rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
               "--pack", str(staged / "pack.json"),
               "--out", str(tmp_path / "report.txt"), "--k", "2",
               "--format", "table"])
    assert rc == 0
    text = (tmp_path / "report.txt").read_text()
    assert text.startswith(f"{'K':>6}")
    assert len(text.strip().split("\n")) == 2


def test_evaluate_ablation_recorded(workdir, staged, tmp_path):
    rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
               "--pack", str(staged / "pack.json"),
               "--out", str(tmp_path / "report.json"), "--k", "2",
               "--ablate", "weight", "--ablate", "spatial"])
    assert rc == 0
    flags = json.loads((tmp_path / "report.json").read_text())["fingerprint"]["flags"]
    assert flags["weight_off"] is True
    assert flags["spatial_off"] is True
    assert flags["cue_off"] is False


def test_evaluate_filter_noop_on_empty_deny(workdir, staged, tmp_path):
    pack = load_cue_pack(staged / "pack.json")
    assert not pack.subject_deny and not pack.object_deny
    for flag, name in (("off", "off.json"), ("on", "on.json")):
        rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
                   "--pack", str(staged / "pack.json"),
                   "--out", str(tmp_path / name), "--k", "1,3",
                   "--filter", flag])
        assert rc == 0
    off = json.loads((tmp_path / "off.json").read_text())
    on = json.loads((tmp_path / "on.json").read_text())
    assert off["recall"] == on["recall"]
    assert off["mean_recall"] == on["mean_recall"]
    assert on["fingerprint"]["flags"]["filter"] is True


def test_evaluate_compare_writes_delta(workdir, staged, tmp_path, capsys):
    rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
               "--pack", str(staged / "pack.json"),
               "--out", str(tmp_path / "reports"),
               "--compare", "cls,recode", "--k", "1,2"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "delta recode-cls" in out
    cls = json.loads((tmp_path / "reports" / "cls.json").read_text())
    recode = json.loads((tmp_path / "reports" / "recode.json").read_text())
    delta = json.loads((tmp_path / "reports" / "delta.json").read_text())
    assert delta["baseline"] == "cls"
    for k in ("1", "2"):
        assert delta["against"]["recode"]["recall"][k] == pytest.approx(
            recode["recall"][k] - cls["recall"][k])


def test_evaluate_jobs_deterministic(workdir, staged, tmp_path):
    for jobs, name in (("1", "a.json"), ("3", "b.json")):
        rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
                   "--pack", str(staged / "pack.json"),
                   "--out", str(tmp_path / name), "--k", "1,2",
                   "--jobs", jobs])
        assert rc == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_evaluate_missing_archive_key(workdir, staged, tmp_path, capsys):
    from relcue.embeddings import MockProvider, text_key, write_archive

    mock = MockProvider(dim=8)
    write_archive([(str(text_key("x")), mock.get(text_key("x")))],
                  tmp_path / "arch")
    rc = main(["evaluate", "--dataset", str(workdir / "d.json"),
               "--pack", str(staged / "pack.json"),
               "--out", str(tmp_path / "report.json"), "--k", "1",
               "--provider", "archive", "--archive", str(tmp_path / "arch")])
    err = capsys.readouterr().err
    assert rc == 1
    assert "missing embedding key:" in err


def test_pipeline_byte_identical_across_runs(workdir, tmp_path):
    outputs = []
    for run in ("one", "two"):
        base = tmp_path / run
        base.mkdir()
        assert _gen_cues(workdir, base / "pack.json") == 0
        assert main(["build-manifest", "--dataset", str(workdir / "d.json"),
                     "--pack", str(base / "pack.json"),
                     "--out", str(base / "m.json")]) == 0
        assert main(["evaluate", "--dataset", str(workdir / "d.json"),
                     "--pack", str(base / "pack.json"),
                     "--out", str(base / "report.json"), "--k", "1,2"]) == 0
        outputs.append(tuple((base / name).read_bytes()
                             for name in ("pack.json", "m.json", "report.json")))
    assert outputs[0] == outputs[1]


def test_server_unreachable(tmp_path, capsys):
    rc = main(["--server", "http://127.0.0.1:9", "render-spatial", "QM-HL-N-S",
               "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_no_subcommand_exits_with_usage():
    with pytest.raises(SystemExit):
        main([])
