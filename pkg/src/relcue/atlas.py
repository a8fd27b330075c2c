"""Simulated spatial-layout images, one per spatial key.

Each of the 1944 keys is rendered as a 224x224 white canvas holding a red
subject outline and a green object outline whose geometry realizes the
key's shape, size, direction, and distance buckets.  Layout and rendering
are pure functions of the key, so repeated renders are byte-identical.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import (
    DISTANCES,
    POSITIONS,
    SHAPES,
    SIZES,
    BoundingBox,
    ImageSize,
    SpatialKey,
    distance_bucket,
)

CANVAS_SIDE = 224
CANVAS = ImageSize(CANVAS_SIDE, CANVAS_SIDE)

# Realization constants: centers of the decided geometry bands, so that a
# clean layout round-trips through the bucket functions.
ASPECT_BY_SHAPE = {"H": 2.0, "V": 0.5, "Q": 1.0}
AREA_FRACTION_BY_SIZE = {"S": 0.04, "M": 0.12, "L": 0.30}
DIST_FRACTION = {"S": 0.15, "M": 0.35, "L": 0.60}

# Unit displacement of the subject center, image coordinates (y grows down).
_DIAG = math.sqrt(0.5)
DIRECTION = {
    "N": (0.0, -1.0),
    "S": (0.0, 1.0),
    "E": (1.0, 0.0),
    "W": (-1.0, 0.0),
    "NE": (_DIAG, -_DIAG),
    "NW": (-_DIAG, -_DIAG),
    "SE": (_DIAG, _DIAG),
    "SW": (-_DIAG, _DIAG),
}

STROKE_WIDTH = 3
SUBJECT_COLOR = (255, 0, 0)
OBJECT_COLOR = (0, 255, 0)
BACKGROUND = (255, 255, 255)

MANIFEST_NAME = "atlas-manifest.json"


@dataclass(frozen=True)
class SpatialLayout:
    """Integer-pixel placement of the two outlines on the canvas.

    dist_degraded is set when the requested center separation had to be
    shrunk to keep both rectangles on the canvas, far enough that the
    realized distance bucket no longer matches the key.
    """

    sub_rect: BoundingBox
    obj_rect: BoundingBox
    canvas: ImageSize
    dist_degraded: bool


@dataclass(frozen=True)
class RasterImage:
    width: int
    height: int
    pixels: bytes  # row-major RGB8

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError("pixel buffer length does not match dimensions")

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)

    def to_png_bytes(self) -> bytes:
        image = Image.frombytes("RGB", (self.width, self.height), self.pixels)
        buffer = io.BytesIO()
        image.save(buffer, format="PNG", optimize=False, compress_level=6)
        return buffer.getvalue()


def enumerate_keys() -> list[SpatialKey]:
    """All 1944 spatial keys in lexicographic order of their canonical strings."""
    keys = [
        SpatialKey(ss, sz, os_, oz, pos, dist)
        for ss, sz, os_, oz, pos, dist in product(SHAPES, SIZES, SHAPES, SIZES, POSITIONS, DISTANCES)
    ]
    return sorted(keys, key=lambda k: k.canonical())


def _rect_dims(shape: str, size: str) -> tuple[int, int]:
    area = AREA_FRACTION_BY_SIZE[size] * CANVAS.area
    aspect = ASPECT_BY_SHAPE[shape]
    w = math.sqrt(area * aspect)
    h = math.sqrt(area / aspect)
    return round(w), round(h)


def layout(key: SpatialKey) -> SpatialLayout:
    """Deterministic placement realizing the key's buckets on the canvas.

    The midpoint of the two centers sits at the canvas center and the subject
    is displaced along the key's compass direction.  If either rectangle would
    overflow, the separation shrinks uniformly until both fit.
    """
    sub_w, sub_h = _rect_dims(key.sub_shape, key.sub_size)
    obj_w, obj_h = _rect_dims(key.obj_shape, key.obj_size)
    ux, uy = DIRECTION[key.rel_pos]
    half_canvas = CANVAS_SIDE / 2.0

    separation = DIST_FRACTION[key.dist] * CANVAS.diagonal

    # Largest half-separation keeping each center far enough from the border.
    limit = math.inf
    for w, h in ((sub_w, sub_h), (obj_w, obj_h)):
        if ux != 0.0:
            limit = min(limit, (half_canvas - w / 2.0) / abs(ux))
        if uy != 0.0:
            limit = min(limit, (half_canvas - h / 2.0) / abs(uy))
    half_sep = min(separation / 2.0, limit)

    sub_cx = half_canvas + half_sep * ux
    sub_cy = half_canvas + half_sep * uy
    obj_cx = half_canvas - half_sep * ux
    obj_cy = half_canvas - half_sep * uy

    def place(cx: float, cy: float, w: int, h: int) -> BoundingBox:
        x = min(max(round(cx - w / 2.0), 0), CANVAS_SIDE - w)
        y = min(max(round(cy - h / 2.0), 0), CANVAS_SIDE - h)
        return BoundingBox(x, y, w, h)

    sub_rect = place(sub_cx, sub_cy, sub_w, sub_h)
    obj_rect = place(obj_cx, obj_cy, obj_w, obj_h)
    degraded = distance_bucket(sub_rect, obj_rect, CANVAS) != key.dist
    return SpatialLayout(sub_rect, obj_rect, CANVAS, degraded)


def _draw_outline(canvas: np.ndarray, rect: BoundingBox, color: tuple[int, int, int]) -> None:
    x, y = int(rect.x), int(rect.y)
    w, h = int(rect.w), int(rect.h)
    s = STROKE_WIDTH
    canvas[y : y + s, x : x + w] = color
    canvas[y + h - s : y + h, x : x + w] = color
    canvas[y : y + h, x : x + s] = color
    canvas[y : y + h, x + w - s : x + w] = color


def render(key: SpatialKey) -> RasterImage:
    """Rasterize the key's layout; object drawn first, subject overdraws."""
    placed = layout(key)
    canvas = np.full((CANVAS_SIDE, CANVAS_SIDE, 3), 255, dtype=np.uint8)
    _draw_outline(canvas, placed.obj_rect, OBJECT_COLOR)
    _draw_outline(canvas, placed.sub_rect, SUBJECT_COLOR)
    return RasterImage(CANVAS_SIDE, CANVAS_SIDE, canvas.tobytes())


def export_atlas(out_dir: str | Path) -> dict:
    """Write one PNG per key plus a manifest; returns the manifest document."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    entries = {}
    for key in enumerate_keys():
        canonical = key.canonical()
        filename = f"{canonical}.png"
        image = render(key)
        (out_path / filename).write_bytes(image.to_png_bytes())
        entries[canonical] = {
            "file": filename,
            "dist_degraded": layout(key).dist_degraded,
        }
    manifest = {"canvas": CANVAS_SIDE, "keys": entries}
    manifest_text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    (out_path / MANIFEST_NAME).write_text(manifest_text)
    return manifest
