"""Request and response bodies for the service endpoints.

Paths in request bodies are interpreted by the service process, which in the
default deployment is the same machine as the caller (the CLI runs the app
in-process unless pointed at a remote server).
"""

from __future__ import annotations

from pydantic import BaseModel, field_validator, model_validator

from ..evaluation import MODES
from ..manifest import DEFAULT_DIM, DEFAULT_ENCODER
from ..prompts import CLASS_PROMPT_TEMPLATES


def _check_box(box: list[float]) -> list[float]:
    if len(box) != 4:
        raise ValueError("box must be [x, y, w, h]")
    if box[2] <= 0 or box[3] <= 0:
        raise ValueError("box must have positive width and height")
    return box


class SpatialKeyRequest(BaseModel):
    subject_box: list[float]
    object_box: list[float]
    width: float
    height: float

    _sub = field_validator("subject_box")(_check_box)
    _obj = field_validator("object_box")(_check_box)

    @field_validator("width", "height")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("image dimensions must be positive")
        return value


class SpatialKeyResponse(BaseModel):
    key: str


class AtlasExportRequest(BaseModel):
    out_dir: str


class AtlasExportResponse(BaseModel):
    out_dir: str
    keys: int
    degraded: int
    manifest: str


class GenCuesRequest(BaseModel):
    out: str
    cache_dir: str
    dataset: str | None = None
    predicates: list[str] | None = None
    object_classes: list[str] | None = None
    guided: bool = True
    model: str | None = None
    offline: bool = False
    report_out: str | None = None

    @model_validator(mode="after")
    def _has_vocabulary(self) -> "GenCuesRequest":
        explicit = self.predicates is not None and self.object_classes is not None
        if not self.dataset and not explicit:
            raise ValueError("provide dataset or predicates + object_classes")
        return self


class GenCuesResponse(BaseModel):
    out: str
    report_out: str
    entries: int
    report: dict


class BuildManifestRequest(BaseModel):
    dataset: str
    pack: str
    out: str
    atlas_manifest: str | None = None
    class_template: str = "photo"
    all_pairs: bool = False
    image_name: str = "{image_id}.jpg"
    class_descriptions: str | None = None
    encoder: str = DEFAULT_ENCODER
    dim: int = DEFAULT_DIM

    @field_validator("class_template")
    @classmethod
    def _known_template(cls, value: str) -> str:
        if value not in CLASS_PROMPT_TEMPLATES:
            raise ValueError(f"unknown class template {value!r}")
        return value


class BuildManifestResponse(BaseModel):
    out: str
    entries: int


class ProviderSpec(BaseModel):
    kind: str = "mock"
    dim: int = 64
    path: str | None = None

    @model_validator(mode="after")
    def _consistent(self) -> "ProviderSpec":
        if self.kind not in ("mock", "archive"):
            raise ValueError("provider kind must be mock or archive")
        if self.kind == "archive" and not self.path:
            raise ValueError("archive provider needs a path")
        if self.kind == "mock" and self.dim < 2:
            raise ValueError("mock dimension must be >= 2")
        return self


class EvaluateRequest(BaseModel):
    dataset: str
    pack: str
    provider: ProviderSpec = ProviderSpec()
    modes: list[str] = ["recode"]
    filter_on: bool = False
    cue_off: bool = False
    spatial_off: bool = False
    weight_off: bool = False
    k_values: list[int] = [20, 50, 100]
    class_template: str = "photo"
    temperature: float = 1.0
    all_pairs: bool = False
    class_descriptions: str | None = None
    jobs: int = 1

    @model_validator(mode="after")
    def _consistent(self) -> "EvaluateRequest":
        if not self.modes:
            raise ValueError("at least one mode required")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("duplicate modes")
        for mode in self.modes:
            if mode not in MODES:
                raise ValueError(f"unknown mode {mode!r}")
        if "clsde" in self.modes and not self.class_descriptions:
            raise ValueError("clsde mode needs a class-descriptions file")
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ValueError("k_values must be positive")
        if self.class_template not in CLASS_PROMPT_TEMPLATES:
            raise ValueError(f"unknown class template {self.class_template!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        return self


class EvaluateResponse(BaseModel):
    reports: dict[str, dict]
    delta: dict | None = None
