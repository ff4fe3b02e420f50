"""Object-based features from detection sets.

SFV counts detections per object category. SFM histograms the pairwise
distances between detections into K bins per category pair: every ordered
pair of distinct detections contributes one count, so the tensor is
symmetric in its category axes and same-category pairs are counted twice
(once per orientation) with self-pairs excluded.

Distance is measured between bounding-box centers and normalized by the
image diagonal; bin index is ceil(rho * d / d_max) clamped into [1, K], so
with rho = K the bins tile (0, d_max] evenly and coincident centers land
in bin 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import ConfigError, DetectionSet


@dataclass(frozen=True)
class SFV:
    """Occurrence counts per object category (length N)."""

    counts: np.ndarray

    def count(self, category: int) -> int:
        return int(self.counts[category - 1])


@dataclass(frozen=True)
class SFM:
    """N x N x K tensor of inter-object distance-bin counts."""

    bins: np.ndarray
    rho: float
    d_max: float


def sfv(detections: DetectionSet) -> SFV:
    counts = np.zeros(detections.obj_categories, dtype=np.int64)
    for det in detections.detections:
        counts[det.category - 1] += 1
    counts.setflags(write=False)
    return SFV(counts=counts)


def sfm(detections: DetectionSet, bins: int = 3, rho: float = 3.0) -> SFM:
    """Distance-bin tensor over all ordered pairs of distinct detections.

    With no detections (or a single one) every bin stays zero.
    """
    if bins < 1:
        raise ConfigError(f"bin count must be >= 1, got {bins}")
    if not rho > 0:
        raise ConfigError(f"distance scale factor must be > 0, got {rho}")
    n_cat = detections.obj_categories
    d_max = math.hypot(detections.image_width, detections.image_height)
    tensor = np.zeros((n_cat, n_cat, bins), dtype=np.int64)
    dets = detections.detections
    centers = [d.center for d in dets]
    for a in range(len(dets)):
        xa, ya = centers[a]
        for b in range(len(dets)):
            if a == b:
                continue
            xb, yb = centers[b]
            d = math.hypot(xa - xb, ya - yb)
            k = min(max(math.ceil(rho * d / d_max), 1), bins)
            tensor[dets[a].category - 1, dets[b].category - 1, k - 1] += 1
    tensor.setflags(write=False)
    return SFM(bins=tensor, rho=float(rho), d_max=d_max)
