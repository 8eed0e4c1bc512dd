"""File formats: detection streams, galleries, tracks, truth, results.

Detection streams are JSONL: one header object on the first line, then one
record per frame. Galleries, training tracks, and ground truth are single
JSON documents. All writers are deterministic byte streams for fixed
inputs: keys are emitted in a fixed order and every real number is
canonicalized to 9 significant digits, which round-trips the 32-bit values
the files store. In-memory arithmetic stays 64-bit; vectors are narrowed to
32-bit on write and re-normalized on read.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyGallery,
    OutOfOrderFrame,
    ParseError,
    UnsupportedVersion,
)
from .gallery import Gallery, Prototype, TrainingTrack
from .types import (
    ENTRY_SOURCES,
    BoundingBox,
    Detection,
    FrameEntry,
    FrameResult,
    Landmarks,
    l2_normalize,
)

STREAM_VERSION = 1
GALLERY_VERSION = 1
TRACKS_VERSION = 1
TRUTH_VERSION = 1

# norm drift beyond this on load earns a warning before re-normalization
DRIFT_TOL = 1e-3


def canonical_float(x) -> float:
    """Round to 9 significant digits — the canonical on-disk precision."""
    return float(format(float(x), ".9g"))


def _vec32(values) -> list:
    arr = np.asarray(values, dtype=np.float32)
    return [canonical_float(v) for v in arr]


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


@dataclass(frozen=True)
class StreamHeader:
    fps: float
    frame_width: int
    frame_height: int
    embedding_dim: int
    version: int = STREAM_VERSION

    @property
    def frame_area(self) -> float:
        return float(self.frame_width * self.frame_height)


def _detection_record(d: Detection) -> dict:
    rec = {"box": _vec32([d.box.x, d.box.y, d.box.w, d.box.h])}
    if d.landmarks is not None:
        rec["landmarks"] = [_vec32(p) for p in d.landmarks.points]
    rec["embedding"] = _vec32(d.embedding)
    if d.gt_label is not None:
        rec["gt_label"] = d.gt_label
    return rec


def write_stream(path, header: StreamHeader, frames) -> None:
    """Write a detection stream as JSONL (header line, then frame records)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump({
            "version": header.version,
            "fps": canonical_float(header.fps),
            "frame_width": header.frame_width,
            "frame_height": header.frame_height,
            "embedding_dim": header.embedding_dim,
        }) + "\n")
        for frame_index, detections in frames:
            fh.write(_dump({
                "frame": int(frame_index),
                "detections": [_detection_record(d) for d in detections],
            }) + "\n")


def _parse_detection(rec, frame_index, dim, lineno) -> Detection:
    try:
        bx = rec["box"]
        box = BoundingBox(float(bx[0]), float(bx[1]), float(bx[2]), float(bx[3]))
        landmarks = None
        if "landmarks" in rec:
            landmarks = Landmarks(tuple(
                (float(p[0]), float(p[1])) for p in rec["landmarks"]))
        emb = np.asarray(rec["embedding"], dtype=np.float64)
        gt = rec.get("gt_label")
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ParseError(f"bad detection record: {exc}", lineno)
    if emb.ndim != 1 or emb.shape[0] != dim:
        raise ParseError(
            f"embedding has dim {emb.shape}, header says {dim}", lineno)
    norm = float(np.linalg.norm(emb))
    if norm == 0.0:
        raise ParseError("zero embedding", lineno)
    if abs(norm - 1.0) > DRIFT_TOL:
        warnings.warn(
            f"line {lineno}: embedding norm drifted to {norm:.6f}; re-normalizing",
            stacklevel=3)
    return Detection(frame=frame_index, box=box, embedding=emb / norm,
                     landmarks=landmarks, gt_label=gt)


def read_stream(path):
    """Read a JSONL detection stream.

    Returns (StreamHeader, frames) where frames is a list of
    (frame index, [Detection...]). Malformed lines raise ParseError with
    their line number, out-of-order frames raise OutOfOrderFrame — except
    that a truncated final line (no trailing newline, e.g. a writer caught
    mid-append) is silently dropped.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty stream file", 1)

    def parse_line(i):
        raw = lines[i]
        is_last = i == len(lines) - 1
        truncated_tail = is_last and not raw.endswith("\n")
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            if truncated_tail:
                return None
            raise ParseError(f"bad JSON: {exc.msg}", i + 1)

    head = parse_line(0)
    if head is None:
        raise ParseError("header line is truncated", 1)
    if not isinstance(head, dict) or "version" not in head:
        raise ParseError("first line must be the stream header", 1)
    if head["version"] != STREAM_VERSION:
        raise UnsupportedVersion(f"stream version {head['version']}")
    try:
        header = StreamHeader(
            fps=float(head["fps"]),
            frame_width=int(head["frame_width"]),
            frame_height=int(head["frame_height"]),
            embedding_dim=int(head["embedding_dim"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad stream header: {exc}", 1)

    frames = []
    last = None
    for i in range(1, len(lines)):
        rec = parse_line(i)
        if rec is None:
            break  # truncated tail
        try:
            frame_index = int(rec["frame"])
            raw_dets = rec["detections"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad frame record: {exc}", i + 1)
        if last is not None and frame_index <= last:
            raise OutOfOrderFrame(
                f"line {i + 1}: frame {frame_index} after {last}")
        last = frame_index
        detections = [
            _parse_detection(r, frame_index, header.embedding_dim, i + 1)
            for r in raw_dets
        ]
        frames.append((frame_index, detections))
    return header, frames


def write_gallery(gallery: Gallery, path) -> None:
    """Write a gallery as a single JSON document (labels sorted)."""
    if not gallery.entries:
        raise EmptyGallery("refusing to write a gallery with no prototypes")
    doc = {
        "version": GALLERY_VERSION,
        "method": gallery.method,
        "k": gallery.k,
        "seed": gallery.seed,
        "embedding_dim": gallery.dim,
        "entries": [
            {
                "label": label,
                "frames": [p.source_frame for p in gallery.entries[label]],
                "prototypes": [_vec32(p.vector) for p in gallery.entries[label]],
            }
            for label in gallery.labels
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(doc) + "\n")


def read_gallery(path) -> Gallery:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad gallery JSON: {exc.msg}", exc.lineno)
    if doc.get("version") != GALLERY_VERSION:
        raise UnsupportedVersion(f"gallery version {doc.get('version')}")
    entries = {}
    try:
        for ent in doc["entries"]:
            protos = [
                Prototype(l2_normalize(np.asarray(vec, dtype=np.float64)), int(f))
                for vec, f in zip(ent["prototypes"], ent["frames"])
            ]
            entries[ent["label"]] = protos
        return Gallery(entries=entries, method=doc["method"],
                       k=doc.get("k"), seed=doc.get("seed"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad gallery document: {exc}")


def write_tracks(tracks, path, fps=None) -> None:
    """Write training tracks as a single JSON document (labels sorted)."""
    tracks = sorted(tracks, key=lambda t: t.label)
    doc = {
        "version": TRACKS_VERSION,
        "tracks": [
            {
                "label": t.label,
                "fps": canonical_float(t.fps),
                "frames": [int(f) for f, _ in t.samples],
                "embeddings": [_vec32(e) for _, e in t.samples],
            }
            for t in tracks
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(doc) + "\n")


def read_tracks(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad tracks JSON: {exc.msg}", exc.lineno)
    if doc.get("version") != TRACKS_VERSION:
        raise UnsupportedVersion(f"tracks version {doc.get('version')}")
    out = []
    try:
        for t in doc["tracks"]:
            samples = [
                (int(f), l2_normalize(np.asarray(vec, dtype=np.float64)))
                for f, vec in zip(t["frames"], t["embeddings"])
            ]
            out.append(TrainingTrack(t["label"], samples, float(t["fps"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad tracks document: {exc}")
    return out


def write_truth(stream, path) -> None:
    """Write ground-truth presence (plus stream metadata) as JSON."""
    doc = {
        "version": TRUTH_VERSION,
        "fps": canonical_float(stream.fps),
        "frame_width": stream.frame_width,
        "frame_height": stream.frame_height,
        "embedding_dim": stream.embedding_dim,
        "missing_in_training": list(stream.missing_in_training),
        "presence": {str(f): list(stream.presence[f])
                     for f in sorted(stream.presence)},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(doc) + "\n")


def read_truth(path):
    """Read a truth file back into a detection-free GroundTruthStream."""
    from .synth import GroundTruthStream

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad truth JSON: {exc.msg}", exc.lineno)
    if doc.get("version") != TRUTH_VERSION:
        raise UnsupportedVersion(f"truth version {doc.get('version')}")
    try:
        presence = {int(f): tuple(labels)
                    for f, labels in doc["presence"].items()}
        return GroundTruthStream(
            fps=float(doc["fps"]),
            frame_width=int(doc["frame_width"]),
            frame_height=int(doc["frame_height"]),
            embedding_dim=int(doc["embedding_dim"]),
            frames=[],
            presence=presence,
            missing_in_training=tuple(doc.get("missing_in_training", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad truth document: {exc}")


def write_results(results, path) -> None:
    """Write FrameResults as JSONL, one frame per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in results:
            fh.write(_dump({
                "frame": int(r.frame),
                "entries": [
                    {
                        "label": e.label,
                        "box": _vec32([e.box.x, e.box.y, e.box.w, e.box.h]),
                        "distance": canonical_float(e.distance),
                        "source": e.source,
                    }
                    for e in r.entries
                ],
            }) + "\n")


def read_results(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    out = []
    last = None
    for i, raw in enumerate(lines):
        truncated_tail = i == len(lines) - 1 and not raw.endswith("\n")
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            if truncated_tail:
                break
            raise ParseError(f"bad JSON: {exc.msg}", i + 1)
        try:
            entries = tuple(
                FrameEntry(
                    label=e["label"],
                    box=BoundingBox(*[float(v) for v in e["box"]]),
                    distance=float(e["distance"]),
                    source=e["source"],
                )
                for e in rec["entries"]
            )
            frame_index = int(rec["frame"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad result record: {exc}", i + 1)
        if any(e.source not in ENTRY_SOURCES for e in entries):
            raise ParseError("unknown entry source", i + 1)
        if last is not None and frame_index <= last:
            raise OutOfOrderFrame(f"line {i + 1}: frame {frame_index} after {last}")
        last = frame_index
        out.append(FrameResult(frame_index, entries))
    return out


# ---------------------------------------------------------------------------
# CSV report writers (deterministic: fixed headers, 9-significant-digit reals)


def _fmt(x) -> str:
    return format(float(x), ".9g")


def write_score_csv(report, path) -> None:
    """Per-person accuracy rows plus an unweighted Average row."""
    lines = ["label,present_frames_accuracy"]
    for label, acc in report.per_person.items():
        lines.append(f"{label},{_fmt(acc)}")
    lines.append(f"Average,{_fmt(report.average)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_score_json(report, path) -> None:
    doc = {
        "per_person": {l: canonical_float(a)
                       for l, a in report.per_person.items()},
        "average": canonical_float(report.average),
        "unknown_rate": canonical_float(report.unknown_rate),
        "false_label_rate": canonical_float(report.false_label_rate),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(doc) + "\n")


def write_summary_csv(results, path) -> None:
    """Per-label emission counts for a tracker run."""
    stats = {}
    for r in results:
        for e in r.entries:
            st = stats.setdefault(e.label, {s: 0 for s in ENTRY_SOURCES})
            st[e.source] += 1
    lines = ["label,frames,classified,reused,occluded"]
    for label in sorted(stats):
        st = stats[label]
        total = sum(st.values())
        lines.append(
            f"{label},{total},{st['classified']},{st['reused']},{st['occluded']}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_timing_csv(rows, path) -> None:
    """Table of timing comparisons.

    rows: iterables of (name, duration_seconds, faces, baseline_spf,
    ours_spf, speedup_factor).
    """
    lines = ["video,duration_seconds,faces,baseline_seconds_per_frame,"
             "ours_seconds_per_frame,speedup_factor"]
    for name, duration, faces, base_spf, ours_spf, speedup in rows:
        lines.append(f"{name},{_fmt(duration)},{faces},{_fmt(base_spf)},"
                     f"{_fmt(ours_spf)},{_fmt(speedup)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sweep_csv(points, path) -> None:
    lines = ["k,accuracy,seconds_per_frame"]
    for p in points:
        lines.append(f"{p.k},{_fmt(p.accuracy)},{_fmt(p.seconds_per_frame)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
