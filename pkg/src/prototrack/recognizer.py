"""Minimum-distance classification of embeddings against a gallery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyGallery
from .gallery import Gallery
from .types import UNKNOWN


@dataclass(frozen=True)
class RecognizerConfig:
    """Thresholds for classification and detection pre-filtering.

    unknown_threshold: distances above this become Unknown.
    min_area: absolute pixel-area floor for detections; 0 disables.
    min_area_fraction: floor as a fraction of the frame area; 0 disables.
    At most one of the two area modes may be active.
    """

    unknown_threshold: float = 0.6
    min_area: float = 0.0
    min_area_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.unknown_threshold <= 2.0:
            raise ValueError(f"unknown_threshold outside [0, 2]: {self.unknown_threshold}")
        if self.min_area < 0 or self.min_area_fraction < 0:
            raise ValueError("area thresholds must be non-negative")
        if self.min_area > 0 and self.min_area_fraction > 0:
            raise ValueError("min_area and min_area_fraction are mutually exclusive")


@dataclass(frozen=True)
class Classification:
    """Outcome of matching one embedding: winning label, its distance, and
    the best (label, distance) among the other participants when any exist."""

    label: str
    distance: float
    runner_up: tuple | None = None


def area_filter(detection, frame_area, cfg: RecognizerConfig) -> bool:
    """True when the detection's box is large enough to keep.

    A box is rejected iff its area falls below the configured floor. The
    fractional mode needs the frame area; passing None with that mode
    configured is a usage error.
    """
    if cfg.min_area > 0:
        return detection.box.area >= cfg.min_area
    if cfg.min_area_fraction > 0:
        if frame_area is None:
            raise ValueError("min_area_fraction requires the frame area")
        return detection.box.area >= cfg.min_area_fraction * frame_area
    return True


class GalleryIndex:
    """Flattened view of a gallery for fast repeated matching.

    Prototypes are stacked into one matrix, grouped by sorted label, so a
    query is one matrix-vector product plus per-label segment minima.
    """

    def __init__(self, gallery: Gallery):
        if not gallery.entries:
            raise EmptyGallery("gallery has no prototypes")
        self.labels = list(gallery.labels)  # sorted
        rows = []
        starts = []
        offset = 0
        for label in self.labels:
            protos = gallery.entries[label]
            starts.append(offset)
            for p in protos:
                rows.append(np.asarray(p.vector, dtype=np.float64))
            offset += len(protos)
        dims = {r.shape[0] for r in rows}
        if len(dims) != 1:
            raise DimensionMismatch(f"gallery mixes embedding dims: {sorted(dims)}")
        self.matrix = np.ascontiguousarray(np.stack(rows))
        self.starts = np.asarray(starts, dtype=np.intp)
        self.dim = self.matrix.shape[1]

    @classmethod
    def from_label_matrices(cls, label_matrices):
        """Build directly from {label: (n_i, d) array} without a Gallery."""
        self = cls.__new__(cls)
        if not label_matrices:
            raise EmptyGallery("no prototypes given")
        self.labels = sorted(label_matrices)
        mats = [np.asarray(label_matrices[l], dtype=np.float64) for l in self.labels]
        dims = {m.shape[1] for m in mats}
        if len(dims) != 1:
            raise DimensionMismatch(f"label matrices mix dims: {sorted(dims)}")
        counts = [m.shape[0] for m in mats]
        self.starts = np.asarray([0] + list(np.cumsum(counts[:-1])), dtype=np.intp)
        self.matrix = np.ascontiguousarray(np.vstack(mats))
        self.dim = self.matrix.shape[1]
        return self

    def classify_batch(self, embeddings, cfg: RecognizerConfig):
        """Classify a (m, d) batch; returns a list of Classification."""
        q = np.asarray(embeddings, dtype=np.float64)
        if q.ndim == 1:
            q = q.reshape(1, -1)
        if q.shape[1] != self.dim:
            raise DimensionMismatch(
                f"query dim {q.shape[1]} vs gallery dim {self.dim}")
        dists = 1.0 - q @ self.matrix.T
        np.clip(dists, 0.0, 2.0, out=dists)
        # best distance within each label's contiguous segment
        per_label = np.minimum.reduceat(dists, self.starts, axis=1)
        best = np.argmin(per_label, axis=1)  # ties -> lowest = lexicographically smallest label
        out = []
        for i, b in enumerate(best):
            b = int(b)
            d = float(per_label[i, b])
            runner = None
            if len(self.labels) > 1:
                row = per_label[i].copy()
                row[b] = np.inf
                r = int(np.argmin(row))
                runner = (self.labels[r], float(row[r]))
            label = self.labels[b] if d <= cfg.unknown_threshold else UNKNOWN
            out.append(Classification(label, d, runner))
        return out


def classify(embedding, gallery, cfg: RecognizerConfig) -> Classification:
    """Match one embedding against every prototype of every participant.

    The winning label is the one holding the globally smallest cosine
    distance (ties -> lexicographically smallest label); if that distance
    exceeds cfg.unknown_threshold the result is labeled Unknown but keeps
    the measured distance. Accepts a Gallery or a prebuilt GalleryIndex.
    """
    index = gallery if isinstance(gallery, GalleryIndex) else GalleryIndex(gallery)
    return index.classify_batch(embedding, cfg)[0]
