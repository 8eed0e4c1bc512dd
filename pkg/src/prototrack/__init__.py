"""Prototype-gallery face recognition and tracking over detection streams.

The pipeline sits downstream of any face detector/embedder: build a compact
per-person prototype gallery from training tracks, classify detections by
minimum cosine distance with Unknown rejection, and smooth per-frame labels
through a temporal tracker that bridges occlusions and suppresses duplicate
identities. A seeded synthetic benchmark and an accuracy/latency evaluation
harness (including exhaustive-baseline comparison, gallery-size sweeps, and
Pareto-front extraction) round out the toolkit.
"""

from .errors import (
    DimensionMismatch,
    DuplicateLabel,
    EmptyGallery,
    EmptyInput,
    EmptyStream,
    InfeasibleSpec,
    InvalidEmbedding,
    InvalidSplit,
    MisalignedStreams,
    OutOfOrderFrame,
    ParseError,
    PipelineError,
    UnsupportedVersion,
)
from .evaluate import (
    AccuracyReport,
    SweepPoint,
    TimingReport,
    measure_tracker,
    pareto_front,
    run_baseline,
    score,
    sweep,
    with_speedup,
)
from .gallery import (
    METHOD_KMEANS,
    METHOD_SAMPLING,
    Gallery,
    Prototype,
    TrainingTrack,
    build_gallery_kmeans,
    build_gallery_sampling,
    kmeans,
    snap_to_medoids,
)
from .recognizer import (
    Classification,
    GalleryIndex,
    RecognizerConfig,
    area_filter,
    classify,
)
from .stream_io import (
    StreamHeader,
    read_gallery,
    read_results,
    read_stream,
    read_tracks,
    read_truth,
    write_gallery,
    write_results,
    write_stream,
    write_tracks,
    write_truth,
)
from .synth import (
    Event,
    GroundTruthStream,
    ScenarioSpec,
    generate,
    load_scenario,
    parse_scenario,
    split_train_test,
)
from .tracker import (
    TrackedFace,
    TrackerConfig,
    TrackerState,
    run,
    step,
)
from .types import (
    SOURCE_CLASSIFIED,
    SOURCE_OCCLUDED,
    SOURCE_REUSED,
    UNKNOWN,
    BoundingBox,
    Detection,
    FrameEntry,
    FrameResult,
    Landmarks,
    cosine_distance,
    iou,
    l2_normalize,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "BoundingBox",
    "Classification",
    "Detection",
    "DimensionMismatch",
    "DuplicateLabel",
    "EmptyGallery",
    "EmptyInput",
    "EmptyStream",
    "Event",
    "FrameEntry",
    "FrameResult",
    "Gallery",
    "GalleryIndex",
    "GroundTruthStream",
    "InfeasibleSpec",
    "InvalidEmbedding",
    "InvalidSplit",
    "Landmarks",
    "METHOD_KMEANS",
    "METHOD_SAMPLING",
    "MisalignedStreams",
    "OutOfOrderFrame",
    "ParseError",
    "PipelineError",
    "Prototype",
    "RecognizerConfig",
    "SOURCE_CLASSIFIED",
    "SOURCE_OCCLUDED",
    "SOURCE_REUSED",
    "ScenarioSpec",
    "StreamHeader",
    "SweepPoint",
    "TimingReport",
    "TrackedFace",
    "TrackerConfig",
    "TrackerState",
    "TrainingTrack",
    "UNKNOWN",
    "UnsupportedVersion",
    "area_filter",
    "build_gallery_kmeans",
    "build_gallery_sampling",
    "classify",
    "cosine_distance",
    "generate",
    "iou",
    "kmeans",
    "l2_normalize",
    "load_scenario",
    "measure_tracker",
    "pareto_front",
    "parse_scenario",
    "read_gallery",
    "read_results",
    "read_stream",
    "read_tracks",
    "read_truth",
    "run",
    "run_baseline",
    "score",
    "snap_to_medoids",
    "split_train_test",
    "step",
    "sweep",
    "with_speedup",
    "write_gallery",
    "write_results",
    "write_stream",
    "write_tracks",
    "write_truth",
]
