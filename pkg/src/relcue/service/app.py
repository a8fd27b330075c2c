"""FastAPI application exposing the pipeline stages.

The CLI talks to these endpoints either in-process or over the wire; both
paths share the same request models and error mapping, so behaviour is
identical no matter where the service runs.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..atlas import MANIFEST_NAME, export_atlas, render
from ..cue_builder import assemble_cue_pack
from ..cues import load_cue_pack, save_cue_pack
from ..datasets import load_dataset
from ..embeddings import ArchiveProvider, MockProvider
from ..errors import (
    AuthError,
    CacheMiss,
    HttpError,
    KeyNotFound,
    LlmUnavailable,
    RelcueError,
    SchemaError,
)
from ..evaluation import (
    EvalOptions,
    evaluate_dataset,
    report_to_dict,
)
from ..fsio import atomic_write_text
from ..geometry import BoundingBox, ImageSize, SpatialKey, clamp_box, spatial_key
from ..llm import LlmClient
from ..manifest import atlas_name_map, build_manifest, write_manifest
from ..scoring import ScoreConfig
from .models import (
    AtlasExportRequest,
    AtlasExportResponse,
    BuildManifestRequest,
    BuildManifestResponse,
    EvaluateRequest,
    EvaluateResponse,
    GenCuesRequest,
    GenCuesResponse,
    SpatialKeyRequest,
    SpatialKeyResponse,
)


def _status_for(exc: RelcueError) -> int:
    if isinstance(exc, KeyNotFound):
        return 404
    if isinstance(exc, (LlmUnavailable, CacheMiss)):
        return 503
    if isinstance(exc, (AuthError, HttpError)):
        return 502
    return 400


def load_class_descriptions(path: str) -> dict[str, list[str]]:
    """Read a predicate -> description-list JSON file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read class descriptions: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaError("class descriptions must map predicate to list")
    out: dict[str, list[str]] = {}
    for predicate, descriptions in raw.items():
        if not isinstance(descriptions, list) \
                or not all(isinstance(d, str) for d in descriptions):
            raise SchemaError(f"descriptions for {predicate!r} must be strings")
        out[predicate] = list(descriptions)
    return out


def _read_json(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {what}: {exc}") from None


def create_app() -> FastAPI:
    app = FastAPI(title="relcue", version=__version__)

    @app.exception_handler(RelcueError)
    async def relcue_error(_request, exc: RelcueError):
        payload = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, KeyNotFound):
            payload["key"] = exc.key
        return JSONResponse(status_code=_status_for(exc), content=payload)

    @app.exception_handler(ValueError)
    async def value_error(_request, exc: ValueError):
        return JSONResponse(status_code=400,
                            content={"error": "ValueError", "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/spatial-key", response_model=SpatialKeyResponse)
    def spatial_key_route(req: SpatialKeyRequest):
        size = ImageSize(req.width, req.height)
        sub = clamp_box(*req.subject_box, size)
        obj = clamp_box(*req.object_box, size)
        if sub is None or obj is None:
            raise SchemaError("box lies outside the image")
        return SpatialKeyResponse(key=spatial_key(sub, obj, size).canonical())

    @app.get("/atlas/render/{key}")
    def atlas_render(key: str):
        image = render(SpatialKey.from_string(key))
        return Response(content=image.to_png_bytes(), media_type="image/png")

    @app.post("/atlas/export", response_model=AtlasExportResponse)
    def atlas_export(req: AtlasExportRequest):
        manifest = export_atlas(req.out_dir)
        degraded = sum(1 for record in manifest["keys"].values()
                       if record["dist_degraded"])
        return AtlasExportResponse(
            out_dir=req.out_dir,
            keys=len(manifest["keys"]),
            degraded=degraded,
            manifest=str(Path(req.out_dir) / MANIFEST_NAME),
        )

    @app.post("/cues/generate", response_model=GenCuesResponse)
    def cues_generate(req: GenCuesRequest):
        if req.dataset:
            dataset = load_dataset(req.dataset)
            predicates = list(dataset.predicate_classes)
            object_classes = list(dataset.object_classes)
        else:
            predicates = list(req.predicates or [])
            object_classes = list(req.object_classes or [])
        client = LlmClient(Path(req.cache_dir))
        pack, report = assemble_cue_pack(
            predicates, object_classes, guided=req.guided, llm=client,
            model=req.model, mode="offline" if req.offline else "online")
        save_cue_pack(pack, req.out)
        report_out = req.report_out or f"{req.out}.report.json"
        atomic_write_text(Path(report_out), json.dumps(
            report.as_dict(), sort_keys=True, indent=2) + "\n")
        return GenCuesResponse(out=req.out, report_out=report_out,
                               entries=len(pack.entries), report=report.as_dict())

    @app.post("/manifest/build", response_model=BuildManifestResponse)
    def manifest_build(req: BuildManifestRequest):
        dataset = load_dataset(req.dataset)
        pack = load_cue_pack(req.pack)
        atlas_names = None
        if req.atlas_manifest:
            atlas_names = atlas_name_map(_read_json(req.atlas_manifest,
                                                    "atlas manifest"))
        descriptions = None
        if req.class_descriptions:
            descriptions = {k: list(v) for k, v in
                            load_class_descriptions(req.class_descriptions).items()}
        manifest = build_manifest(
            dataset, pack,
            class_template=req.class_template,
            all_pairs=req.all_pairs,
            image_name=req.image_name,
            atlas_names=atlas_names,
            class_descriptions=descriptions,
            encoder=req.encoder,
            dim=req.dim,
        )
        write_manifest(manifest, req.out)
        return BuildManifestResponse(out=req.out, entries=len(manifest["entries"]))

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest):
        dataset = load_dataset(req.dataset)
        pack = load_cue_pack(req.pack)
        if req.provider.kind == "archive":
            provider = ArchiveProvider.open(req.provider.path)
        else:
            provider = MockProvider(dim=req.provider.dim)
        descriptions = None
        if req.class_descriptions:
            descriptions = {k: tuple(v) for k, v in
                            load_class_descriptions(req.class_descriptions).items()}
        score = ScoreConfig(
            class_template=req.class_template,
            temperature=req.temperature,
            cue_off=req.cue_off,
            spatial_off=req.spatial_off,
            weight_off=req.weight_off,
        )
        reports: dict[str, dict] = {}
        for mode in req.modes:
            options = EvalOptions(
                mode=mode,
                filter_on=req.filter_on,
                all_pairs=req.all_pairs,
                score=score,
                class_descriptions=descriptions if mode == "clsde" else None,
            )
            report = evaluate_dataset(dataset, pack, provider, options,
                                      tuple(req.k_values), jobs=req.jobs)
            reports[mode] = report_to_dict(report)
        delta = None
        if len(req.modes) > 1:
            base = reports[req.modes[0]]
            delta = {"baseline": req.modes[0], "against": {}}
            for mode in req.modes[1:]:
                other = reports[mode]
                delta["against"][mode] = {
                    "recall": {k: other["recall"][k] - base["recall"][k]
                               for k in base["recall"]},
                    "mean_recall": {k: other["mean_recall"][k] - base["mean_recall"][k]
                                    for k in base["mean_recall"]},
                }
        return EvaluateResponse(reports=reports, delta=delta)

    return app


app = create_app()
