"""Core value types and the vector/geometry operations everything else shares.

Embeddings are plain numpy arrays, kept at unit L2 norm and in float64 for
all in-memory arithmetic; file formats narrow them to 32-bit storage and
they are re-normalized on load.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidEmbedding

# Reserved label for "no confident identity". Never a participant name,
# never stored in a gallery, and allowed to repeat within one frame.
UNKNOWN = "Unknown"

# Tolerance for the unit-norm invariant on embeddings.
NORM_TOL = 1e-6

# Default embedding dimensionality used by generators when unspecified.
DEFAULT_DIM = 512

SOURCE_CLASSIFIED = "classified"
SOURCE_REUSED = "reused"
SOURCE_OCCLUDED = "occluded"
ENTRY_SOURCES = (SOURCE_CLASSIFIED, SOURCE_REUSED, SOURCE_OCCLUDED)


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit L2 norm, preserving direction.

    Raises InvalidEmbedding for zero or non-finite input, since those have
    no direction to preserve.
    """
    arr = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(arr))
    if n == 0.0 or not np.isfinite(n):
        raise InvalidEmbedding("cannot normalize a zero or non-finite vector")
    return arr / n


def cosine_distance(a, b) -> float:
    """1 - dot(a, b) for unit vectors; lies in [0, 2].

    Both inputs are assumed unit-normalized, which makes this equivalent to
    (and cheaper than) full cosine distance. Mismatched shapes raise
    DimensionMismatch.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    d = 1.0 - float(np.dot(a, b))
    # round-off on unit vectors can land a hair outside the metric's range
    return min(2.0, max(0.0, d))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box: top-left corner plus positive width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width/height must be positive: {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, 1 when identical."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = ix2 - ix
    ih = iy2 - iy
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Landmarks:
    """Five facial keypoints (eyes, nose tip, mouth corners) in pixel space."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) != 5:
            raise ValueError(f"expected 5 landmark points, got {len(self.points)}")


@dataclass(frozen=True, eq=False)
class Detection:
    """One detected face in one frame, with its embedding.

    gt_label is only present on synthetic/benchmark streams where the true
    identity is known; production streams leave it None.
    """

    frame: int
    box: BoundingBox
    embedding: np.ndarray
    landmarks: Landmarks | None = None
    gt_label: str | None = None


@dataclass(frozen=True)
class FrameEntry:
    """One identity assertion in a frame's output.

    source records how the assertion was produced: a fresh classification,
    a box-overlap reuse of a tracked identity, or an occlusion placeholder
    held at the identity's last seen box.
    """

    label: str
    box: BoundingBox
    distance: float
    source: str

    def __post_init__(self):
        if self.source not in ENTRY_SOURCES:
            raise ValueError(f"unknown entry source: {self.source!r}")
        if self.distance < 0:
            raise ValueError(f"distance must be non-negative: {self.distance}")


@dataclass(frozen=True, eq=False)
class FrameResult:
    """All identity assertions for one frame."""

    frame: int
    entries: tuple[FrameEntry, ...] = field(default_factory=tuple)

    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.entries)


def duplicate_named_labels(result: FrameResult) -> set[str]:
    """Non-Unknown labels that appear more than once in a frame.

    The tracker guarantees this set is empty for its output; the per-frame
    baseline makes no such promise.
    """
    seen: set[str] = set()
    dups: set[str] = set()
    for e in result.entries:
        if e.label == UNKNOWN:
            continue
        if e.label in seen:
            dups.add(e.label)
        seen.add(e.label)
    return dups
