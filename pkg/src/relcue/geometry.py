"""Bounding-box attributes and the discrete spatial key of a subject-object pair.

A pair of boxes is summarized by six discrete attributes: shape and size of
each box, the compass direction of the subject relative to the object, and
the normalized center distance.  The resulting key identifies one image in
the simulated spatial-layout set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SHAPES = ("H", "V", "Q")
SIZES = ("S", "M", "L")
POSITIONS = ("N", "S", "E", "W", "NE", "NW", "SE", "SW")
DISTANCES = ("S", "M", "L")

# Sector order for angle index floor((theta + 22.5) / 45) % 8, theta in degrees
# measured counter-clockwise from east with y pointing up.
_SECTOR_ORDER = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")


@dataclass(frozen=True)
class BucketThresholds:
    """Interval boundaries for the four discrete attributes.

    Shape uses aspect-ratio bands, size uses area as a fraction of the image,
    distance uses center separation as a fraction of the image diagonal.
    Lower bounds are inclusive, upper bounds exclusive.
    """

    aspect_low: float = 3.0 / 4.0
    aspect_high: float = 4.0 / 3.0
    area_small: float = 0.05
    area_large: float = 0.25
    dist_small: float = 0.25
    dist_large: float = 0.5


DEFAULT_THRESHOLDS = BucketThresholds()


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box with top-left corner (x, y) and positive extent."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extent must be positive, got w={self.w}, h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h


@dataclass(frozen=True)
class ImageSize:
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def clamp_box(x: float, y: float, w: float, h: float, img: ImageSize) -> BoundingBox | None:
    """Clamp a raw box to image bounds; None when nothing remains."""
    x2 = min(x + w, img.width)
    y2 = min(y + h, img.height)
    x = max(x, 0.0)
    y = max(y, 0.0)
    if x2 - x <= 0 or y2 - y <= 0:
        return None
    return BoundingBox(x, y, x2 - x, y2 - y)


@dataclass(frozen=True)
class SpatialKey:
    """Discrete spatial-attribute tuple of a subject-object pair.

    Canonical string form is "{sub_shape}{sub_size}-{obj_shape}{obj_size}-{rel_pos}-{dist}",
    e.g. "QM-HL-N-S".  There are 3*3*3*3*8*3 = 1944 distinct keys.
    """

    sub_shape: str
    sub_size: str
    obj_shape: str
    obj_size: str
    rel_pos: str
    dist: str

    def __post_init__(self):
        if self.sub_shape not in SHAPES or self.obj_shape not in SHAPES:
            raise ValueError(f"invalid shape in {self!r}")
        if self.sub_size not in SIZES or self.obj_size not in SIZES:
            raise ValueError(f"invalid size in {self!r}")
        if self.rel_pos not in POSITIONS:
            raise ValueError(f"invalid relative position in {self!r}")
        if self.dist not in DISTANCES:
            raise ValueError(f"invalid distance in {self!r}")

    def canonical(self) -> str:
        return (
            f"{self.sub_shape}{self.sub_size}-{self.obj_shape}{self.obj_size}"
            f"-{self.rel_pos}-{self.dist}"
        )

    def __str__(self) -> str:
        return self.canonical()

    @classmethod
    def from_string(cls, text: str) -> "SpatialKey":
        parts = text.split("-")
        if len(parts) != 4 or len(parts[0]) != 2 or len(parts[1]) != 2:
            raise ValueError(f"malformed spatial key {text!r}")
        return cls(parts[0][0], parts[0][1], parts[1][0], parts[1][1], parts[2], parts[3])


def shape_bucket(box: BoundingBox, thresholds: BucketThresholds = DEFAULT_THRESHOLDS) -> str:
    """Horizontal / vertical / square band of the box aspect ratio."""
    rho = box.aspect
    if rho > thresholds.aspect_high:
        return "H"
    if rho < thresholds.aspect_low:
        return "V"
    return "Q"


def size_bucket(
    box: BoundingBox, img: ImageSize, thresholds: BucketThresholds = DEFAULT_THRESHOLDS
) -> str:
    """Small / medium / large band of the box area as a fraction of the image."""
    fraction = box.area / img.area
    if fraction < thresholds.area_small:
        return "S"
    if fraction < thresholds.area_large:
        return "M"
    return "L"


def position_bucket(sub: BoundingBox, obj: BoundingBox) -> str:
    """Compass direction of the subject center relative to the object center.

    Image coordinates grow downward, so the angle is taken on the flipped
    displacement (atan2(-dy, dx)) and split into eight 45-degree sectors,
    lower bound inclusive.  A zero displacement maps to N by convention.
    """
    cs = sub.center
    co = obj.center
    dx = cs[0] - co[0]
    dy = cs[1] - co[1]
    if dx == 0 and dy == 0:
        return "N"
    theta = math.degrees(math.atan2(-dy, dx))
    index = math.floor((theta + 22.5) / 45.0) % 8
    return _SECTOR_ORDER[index]


def distance_bucket(
    sub: BoundingBox,
    obj: BoundingBox,
    img: ImageSize,
    thresholds: BucketThresholds = DEFAULT_THRESHOLDS,
) -> str:
    """Small / medium / large band of center distance over the image diagonal."""
    cs = sub.center
    co = obj.center
    normalized = math.hypot(cs[0] - co[0], cs[1] - co[1]) / img.diagonal
    if normalized < thresholds.dist_small:
        return "S"
    if normalized < thresholds.dist_large:
        return "M"
    return "L"


def spatial_key(
    sub: BoundingBox,
    obj: BoundingBox,
    img: ImageSize,
    thresholds: BucketThresholds = DEFAULT_THRESHOLDS,
) -> SpatialKey:
    """Compose the four bucket attributes of a subject-object pair."""
    return SpatialKey(
        sub_shape=shape_bucket(sub, thresholds),
        sub_size=size_bucket(sub, img, thresholds),
        obj_shape=shape_bucket(obj, thresholds),
        obj_size=size_bucket(obj, img, thresholds),
        rel_pos=position_bucket(sub, obj),
        dist=distance_bucket(sub, obj, img, thresholds),
    )
