"""Shared domain types: masks, detections, label vocabularies, feature bundles.

Conventions used throughout the package:

- Mask pixel values are segmentation-category indices in [0, L]; 0 means
  void/unlabeled and never contributes to any feature row.
- Pixel coordinates are 1-based when moments are accumulated: row index
  i in [1, h], column index j in [1, w]. The x axis is the column axis.
- Bounding boxes live in continuous pixel coordinates with origin at the
  top-left image corner: pixel (row r, col c) covers [c, c+1] x [r, r+1],
  so boxes satisfy 0 <= x_min <= x_max <= w and 0 <= y_min <= y_max <= h.
- All types are immutable after construction and safe to share across
  threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class SceneFeatError(Exception):
    """Base class for all errors raised by this package."""


class MaskValidationError(SceneFeatError):
    """A segmentation mask violates its declared category range."""


class ConfigError(SceneFeatError):
    """Inconsistent shapes or invalid extraction/training parameters."""


class SchemaError(SceneFeatError):
    """A persisted document is malformed or self-inconsistent."""


class ClippingError(SceneFeatError):
    """A geometric transform would move labeled pixels out of frame."""


class TrainingError(SceneFeatError):
    """The training set is unusable (empty, single class, shape drift)."""


class ToleranceError(SceneFeatError):
    """A measured quantity violated a declared tolerance or floor."""


@dataclass(frozen=True)
class SegmentationMask:
    """Dense grid of per-pixel segmentation-category indices.

    ``pixels`` is a (height, width) integer array; ``seg_categories`` is L,
    the number of non-void categories.
    """

    pixels: np.ndarray
    seg_categories: int

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise MaskValidationError(f"mask must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise MaskValidationError(f"mask dimensions must be >= 1, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise MaskValidationError(f"mask dtype must be integer, got {arr.dtype}")
        if self.seg_categories < 1:
            raise MaskValidationError(
                f"seg_categories must be >= 1, got {self.seg_categories}"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def validate_mask(mask: SegmentationMask, seg_categories: Optional[int] = None) -> SegmentationMask:
    """Check every pixel value lies in [0, L]; return the mask unchanged.

    Raises MaskValidationError naming the first offending (row, col) and
    value. Idempotent: validating a validated mask changes nothing.
    """
    L = mask.seg_categories if seg_categories is None else seg_categories
    bad = (mask.pixels < 0) | (mask.pixels > L)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MaskValidationError(
            f"pixel value {int(mask.pixels[r, c])} at ({int(r)}, {int(c)}) "
            f"outside [0, {L}]"
        )
    return mask


@dataclass(frozen=True)
class Detection:
    """One detected object: category index in [1, N], xyxy box, confidence."""

    category: int
    bbox: tuple[float, float, float, float]
    confidence: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if self.category < 1:
            raise ConfigError(f"detection category must be >= 1, got {self.category}")
        if x0 > x1 or y0 > y1:
            raise ConfigError(f"degenerate bbox {self.bbox}: min exceeds max")
        if not 0.0 <= self.confidence <= 1.0:
            raise ConfigError(f"confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "bbox", (float(x0), float(y0), float(x1), float(y1)))

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


@dataclass(frozen=True)
class DetectionSet:
    """All detections for one image plus the image frame and vocabulary size."""

    detections: tuple[Detection, ...]
    image_width: int
    image_height: int
    obj_categories: int

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.image_width < 1 or self.image_height < 1:
            raise ConfigError(
                f"image dimensions must be >= 1, got "
                f"{self.image_width}x{self.image_height}"
            )
        if self.obj_categories < 1:
            raise ConfigError(f"obj_categories must be >= 1, got {self.obj_categories}")
        for k, det in enumerate(self.detections):
            if det.category > self.obj_categories:
                raise ConfigError(
                    f"detection {k} has category {det.category} > "
                    f"vocabulary size {self.obj_categories}"
                )

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class LabelMap:
    """Category names: seg_names for indices 1..L, obj_names for 1..N."""

    seg_names: tuple[str, ...]
    obj_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "seg_names", tuple(self.seg_names))
        object.__setattr__(self, "obj_names", tuple(self.obj_names))
        for kind, names in (("seg", self.seg_names), ("obj", self.obj_names)):
            if len(set(names)) != len(names):
                dupes = sorted({n for n in names if names.count(n) > 1})
                raise ConfigError(f"duplicate {kind} category names: {dupes}")

    def seg_index(self, name: str) -> int:
        try:
            return self.seg_names.index(name) + 1
        except ValueError:
            raise ConfigError(f"unknown segmentation category name {name!r}") from None

    def obj_index(self, name: str) -> int:
        try:
            return self.obj_names.index(name) + 1
        except ValueError:
            raise ConfigError(f"unknown object category name {name!r}") from None


@dataclass(frozen=True)
class ExtractionParams:
    """Knobs that change extracted feature values, echoed into every artifact."""

    bins: int = 3
    rho: float = 3.0
    confidence_threshold: float = 0.2

    def __post_init__(self):
        if self.bins < 1:
            raise ConfigError(f"bins must be >= 1, got {self.bins}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be > 0, got {self.rho}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError(
                f"confidence threshold {self.confidence_threshold} outside [0, 1]"
            )


# Canonical flattening order for fused feature vectors.
PART_ORDER = ("shmf", "ssf", "sfv", "sfm", "global")


@dataclass(frozen=True)
class FeatureBundle:
    """Per-image feature blocks, any subset of which may be present.

    Shapes for a configuration (L, N, K, G): shmf (L, 7) float, ssf (L, 5)
    float, sfv (N,) int, sfm (N, N, K) int, global_vec (G,) float.
    ``standardized`` is a provenance flag: it marks vectors that already had
    per-dimension standardization applied, which must happen at most once.
    """

    shmf: Optional[np.ndarray] = None
    ssf: Optional[np.ndarray] = None
    sfv: Optional[np.ndarray] = None
    sfm: Optional[np.ndarray] = None
    global_vec: Optional[np.ndarray] = None
    standardized: bool = False

    def __post_init__(self):
        for name, arr, ndim, dtype in (
            ("shmf", self.shmf, 2, np.float64),
            ("ssf", self.ssf, 2, np.float64),
            ("sfv", self.sfv, 1, np.int64),
            ("sfm", self.sfm, 3, np.int64),
            ("global", self.global_vec, 1, np.float64),
        ):
            if arr is None:
                continue
            arr = np.ascontiguousarray(np.asarray(arr, dtype=dtype))
            if arr.ndim != ndim:
                raise ConfigError(f"{name} block must be {ndim}D, got {arr.ndim}D")
            arr.setflags(write=False)
            field_name = "global_vec" if name == "global" else name
            object.__setattr__(self, field_name, arr)
        if self.shmf is not None and self.shmf.shape[1] != 7:
            raise ConfigError(f"shmf block must have 7 columns, got {self.shmf.shape[1]}")
        if self.ssf is not None and self.ssf.shape[1] != 5:
            raise ConfigError(f"ssf block must have 5 columns, got {self.ssf.shape[1]}")
        if self.sfm is not None and self.sfm.shape[0] != self.sfm.shape[1]:
            raise ConfigError(f"sfm block must be square in categories, got {self.sfm.shape}")
        if self.shmf is not None and self.ssf is not None:
            if self.shmf.shape[0] != self.ssf.shape[0]:
                raise ConfigError(
                    f"shmf has {self.shmf.shape[0]} rows but ssf has "
                    f"{self.ssf.shape[0]}"
                )
        if self.sfv is not None and self.sfm is not None:
            if self.sfv.shape[0] != self.sfm.shape[0]:
                raise ConfigError(
                    f"sfv has {self.sfv.shape[0]} categories but sfm has "
                    f"{self.sfm.shape[0]}"
                )

    def block(self, part: str) -> Optional[np.ndarray]:
        if part not in PART_ORDER:
            raise ConfigError(f"unknown feature part {part!r}")
        return self.global_vec if part == "global" else getattr(self, part)

    @property
    def parts(self) -> tuple[str, ...]:
        return tuple(p for p in PART_ORDER if self.block(p) is not None)

    def flatten(self, parts: Optional[Sequence[str]] = None) -> np.ndarray:
        """Concatenate the requested blocks into one float64 vector.

        Order is fixed: shmf row-major, ssf row-major, sfv, sfm in (i, j, k)
        lexicographic order, then the global vector.
        """
        use = self.parts if parts is None else tuple(parts)
        use = tuple(p for p in PART_ORDER if p in use)
        if parts is not None:
            missing = [p for p in parts if self.block(p) is None]
            if missing:
                raise ConfigError(f"bundle is missing requested blocks: {missing}")
        chunks = [self.block(p).ravel().astype(np.float64) for p in use]
        if not chunks:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate(chunks)

    @staticmethod
    def block_length(part: str, L: int, N: int, K: int, G: int) -> int:
        return {"shmf": 7 * L, "ssf": 5 * L, "sfv": N, "sfm": N * N * K, "global": G}[part]

    @classmethod
    def unflatten(
        cls,
        vec: np.ndarray,
        L: int,
        N: int,
        K: int,
        G: int = 0,
        parts: Sequence[str] = PART_ORDER,
    ) -> "FeatureBundle":
        """Inverse of flatten for the given configuration; bit-exact."""
        vec = np.asarray(vec, dtype=np.float64).ravel()
        use = tuple(p for p in PART_ORDER if p in parts and (p != "global" or G > 0))
        expected = sum(cls.block_length(p, L, N, K, G) for p in use)
        if vec.size != expected:
            raise ConfigError(
                f"vector of length {vec.size} does not match expected {expected} "
                f"for parts {use} with L={L} N={N} K={K} G={G}"
            )
        blocks: dict[str, np.ndarray] = {}
        offset = 0
        for p in use:
            n = cls.block_length(p, L, N, K, G)
            chunk = vec[offset : offset + n]
            offset += n
            if p == "shmf":
                blocks["shmf"] = chunk.reshape(L, 7)
            elif p == "ssf":
                blocks["ssf"] = chunk.reshape(L, 5)
            elif p == "sfv":
                blocks["sfv"] = chunk.astype(np.int64)
            elif p == "sfm":
                blocks["sfm"] = chunk.astype(np.int64).reshape(N, N, K)
            else:
                blocks["global_vec"] = chunk
        return cls(**blocks)
