"""Prototype gallery construction from labeled training tracks.

A gallery holds a handful of representative embeddings ("prototypes") per
participant instead of every training sample. Two builders are provided:
K-means cluster medoids, and plain once-per-second temporal sampling.
Both are deterministic for a fixed seed and input.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateLabel, EmptyInput
from .types import UNKNOWN, l2_normalize

METHOD_KMEANS = "kmeans"
METHOD_SAMPLING = "sampling"


@dataclass(frozen=True, eq=False)
class TrainingTrack:
    """Time-ordered labeled embedding samples from one participant.

    samples is a list of (frame index, unit embedding) pairs with strictly
    increasing frame indices; fps ties frame counts back to wall-clock time.
    """

    label: str
    samples: list
    fps: float

    def __post_init__(self):
        if not self.label or self.label == UNKNOWN:
            raise ValueError(f"invalid track label: {self.label!r}")
        if not self.samples:
            raise EmptyInput(f"track {self.label!r} has no samples")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive: {self.fps}")
        frames = [f for f, _ in self.samples]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"track {self.label!r} frames must strictly increase")

    def matrix(self) -> np.ndarray:
        return np.stack([np.asarray(e, dtype=np.float64) for _, e in self.samples])


@dataclass(frozen=True, eq=False)
class Prototype:
    """A gallery embedding plus the training frame it came from."""

    vector: np.ndarray
    source_frame: int


@dataclass(frozen=True, eq=False)
class Gallery:
    """Per-participant prototype lists, keyed by label.

    The Unknown label is never a key, and any label that is present has at
    least one prototype. An empty entries dict is representable (so writers
    can refuse it explicitly) but most consumers reject it.
    """

    entries: dict = field(default_factory=dict)
    method: str = METHOD_KMEANS
    k: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if UNKNOWN in self.entries:
            raise ValueError("gallery must not contain the Unknown label")
        for label, protos in self.entries.items():
            if not protos:
                raise ValueError(f"gallery entry {label!r} has no prototypes")

    @property
    def labels(self) -> tuple:
        return tuple(sorted(self.entries))

    @property
    def dim(self) -> int | None:
        for protos in self.entries.values():
            return int(np.asarray(protos[0].vector).shape[0])
        return None

    def size(self) -> int:
        return sum(len(p) for p in self.entries.values())


def kmeans(points, k, seed, max_iters=100):
    """Lloyd's algorithm with seeded k-means++ initialization.

    Args:
        points: (n, d) array-like of samples.
        k: requested cluster count; clamped to n when larger.
        seed: RNG seed (int or sequence accepted by numpy's default_rng).
        max_iters: iteration budget; the loop also stops early once
            assignments are stable.

    Returns:
        (centroids, assignment): a (k, d) float64 array and a length-n int
        array mapping each point to its cluster. Every cluster is non-empty;
        an empty cluster is repaired by stealing the point currently
        farthest from its own centroid.
    """
    centroids, assignment, _ = kmeans_trace(points, k, seed, max_iters)
    return centroids, assignment


def kmeans_trace(points, k, seed, max_iters=100):
    """kmeans plus the per-iteration SSE trail (for convergence checks)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.size == 0:
        raise EmptyInput("kmeans needs at least one point")
    if k < 1:
        raise ValueError(f"k must be positive: {k}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be positive: {max_iters}")
    n = len(pts)
    k = min(k, n)

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_seed(pts, k, rng)

    assignment = None
    history = []
    for _ in range(max_iters):
        d2 = _sq_distances(pts, centroids)
        new_assignment = np.argmin(d2, axis=1)
        _repair_empty_clusters(d2, new_assignment, k)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        centroids = _cluster_means(pts, assignment, k)
        history.append(float(np.sum((pts - centroids[assignment]) ** 2)))
    return centroids, assignment, history


def _plus_plus_seed(pts, k, rng):
    n = len(pts)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((pts - pts[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all mass sits on already-chosen points (duplicates)
            idx = int(rng.integers(n))
        chosen.append(idx)
        np.minimum(d2, np.sum((pts - pts[idx]) ** 2, axis=1), out=d2)
    return pts[chosen].copy()


def _sq_distances(pts, centroids):
    # |p|^2 + |c|^2 - 2 p.c, computed via one GEMM to keep memory at n*k
    p2 = np.einsum("ij,ij->i", pts, pts)
    c2 = np.einsum("ij,ij->i", centroids, centroids)
    d2 = p2[:, None] + c2[None, :] - 2.0 * (pts @ centroids.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _repair_empty_clusters(d2, assignment, k):
    n = len(assignment)
    counts = np.bincount(assignment, minlength=k)
    for c in np.flatnonzero(counts == 0):
        own = d2[np.arange(n), assignment]
        # only steal from clusters that keep at least one member
        own = np.where(counts[assignment] > 1, own, -1.0)
        idx = int(np.argmax(own))  # ties resolve to the lowest index
        counts[assignment[idx]] -= 1
        assignment[idx] = c
        counts[c] = 1


def _cluster_means(pts, assignment, k):
    sums = np.zeros((k, pts.shape[1]), dtype=np.float64)
    np.add.at(sums, assignment, pts)
    counts = np.bincount(assignment, minlength=k).astype(np.float64)
    return sums / counts[:, None]


def snap_to_medoids(centroids, points):
    """Replace each centroid by the index of its nearest actual sample.

    Nearest is Euclidean; ties resolve to the lowest sample index, and
    repeated winners are deduplicated (order preserved), so the result may
    be shorter than the centroid list.
    """
    cents = np.asarray(centroids, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64)
    if cents.size == 0 or pts.size == 0:
        raise EmptyInput("snap_to_medoids needs centroids and points")
    if cents.ndim == 1:
        cents = cents.reshape(-1, 1)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d2 = _sq_distances(cents, pts)
    nearest = np.argmin(d2, axis=1)  # first (lowest) index wins ties
    out = []
    seen = set()
    for i in nearest:
        i = int(i)
        if i not in seen:
            seen.add(i)
            out.append(i)
    return out


def _checked_tracks(tracks):
    tracks = list(tracks)
    if not tracks:
        raise EmptyInput("no training tracks given")
    seen = set()
    for t in tracks:
        if t.label in seen:
            raise DuplicateLabel(f"duplicate training label: {t.label!r}")
        seen.add(t.label)
    return sorted(tracks, key=lambda t: t.label)


def build_gallery_kmeans(tracks, k, seed, k_is_total=False):
    """Build a medoid gallery: cluster each participant's samples, then snap
    each centroid to its nearest real sample.

    k is the per-participant prototype budget. With k_is_total=True it is
    instead split evenly across participants (floor division, minimum one
    each) so sweeps can compare global budgets. Re-running with the same
    inputs and seed reproduces the gallery bit for bit.
    """
    tracks = _checked_tracks(tracks)
    if k < 1:
        raise ValueError(f"k must be positive: {k}")
    per_k = max(1, k // len(tracks)) if k_is_total else k
    entries = {}
    for i, track in enumerate(tracks):
        pts = track.matrix()
        centroids, _ = kmeans(pts, min(per_k, len(pts)), seed=[seed, i])
        protos = []
        for j in snap_to_medoids(centroids, pts):
            frame, emb = track.samples[j]
            protos.append(Prototype(l2_normalize(emb), int(frame)))
        entries[track.label] = protos
    return Gallery(entries=entries, method=METHOD_KMEANS, k=k, seed=seed)


def build_gallery_sampling(tracks):
    """Build a gallery by keeping the first sample at or after each whole
    second of a track, anchored at the track's first frame.

    Boundary frames are first + ceil(j * fps) for j = 0, 1, 2, ... up to the
    last sample frame; sparse tracks that map several boundaries onto the
    same sample keep it once. Every track yields at least one prototype.
    """
    tracks = _checked_tracks(tracks)
    entries = {}
    for track in tracks:
        frames = [f for f, _ in track.samples]
        first, last = frames[0], frames[-1]
        picked = []
        seen = set()
        j = 0
        while True:
            boundary = first + math.ceil(j * track.fps)
            if boundary > last:
                break
            idx = bisect_left(frames, boundary)
            if idx < len(frames) and idx not in seen:
                seen.add(idx)
                picked.append(idx)
            j += 1
        protos = []
        for idx in picked:
            frame, emb = track.samples[idx]
            protos.append(Prototype(l2_normalize(emb), int(frame)))
        entries[track.label] = protos
    return Gallery(entries=entries, method=METHOD_SAMPLING, k=None, seed=None)
