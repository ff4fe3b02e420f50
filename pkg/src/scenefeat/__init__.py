"""Semantic scene features from segmentation masks and object detections.

Four feature families per image: per-category Hu shape invariants (SHMF),
per-category coverage and layout statistics (SSF), object occurrence
counts (SFV), and inter-object distance histograms (SFM); plus a fusion
classifier, a seeded synthetic scene generator, bit-exact file formats,
an HTTP service, and a CLI.
"""

__version__ = "0.1.0"

from .types import (
    ClippingError,
    ConfigError,
    Detection,
    DetectionSet,
    ExtractionParams,
    FeatureBundle,
    LabelMap,
    MaskValidationError,
    SceneFeatError,
    SchemaError,
    SegmentationMask,
    ToleranceError,
    TrainingError,
    validate_mask,
)

__all__ = [
    "__version__",
    "ClippingError",
    "ConfigError",
    "Detection",
    "DetectionSet",
    "ExtractionParams",
    "FeatureBundle",
    "LabelMap",
    "MaskValidationError",
    "SceneFeatError",
    "SchemaError",
    "SegmentationMask",
    "ToleranceError",
    "TrainingError",
    "validate_mask",
]
