"""Segmentation-based semantic features: per-category coverage and layout.

Each category row is (P'_C, I'_mux, I'_muy, I'_sigx, I'_sigy): normalized
pixel count, normalized mean position, and normalized positional spread.
The values are closed forms over the shared moment accumulator --
mean = M10/M00, spread = sqrt(mu20/M00) -- which equal the direct
per-pixel sums; the reference oracle enforces the equivalence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .moments import MomentSet, moment_set
from .types import SegmentationMask


@dataclass(frozen=True)
class SSFMatrix:
    """L x 5 rows of per-category coverage/position/spread features."""

    rows: np.ndarray

    def row(self, category: int) -> np.ndarray:
        return self.rows[category - 1]


def ssf_row_from_moments(momentset: MomentSet, category: int) -> np.ndarray:
    """One category's SSF row; absent categories yield a zero row."""
    if not momentset.derived:
        raise ValueError("moment set has no derived moments; call derive_moments first")
    if not momentset.present[category]:
        return np.zeros(5)
    w = momentset.width
    h = momentset.height
    m00, m10, m01 = (int(v) for v in momentset.raw[category, :3])
    # Spread via the same exact integer numerators used for central moments:
    # sigma_x^2 = mu20 / M00 = (M20*M00 - M10^2) / M00^2.
    m20 = int(momentset.raw[category, 3])
    m02 = int(momentset.raw[category, 5])
    var_x = (m20 * m00 - m10 * m10) / (m00 * m00)
    var_y = (m02 * m00 - m01 * m01) / (m00 * m00)
    return np.array(
        [
            m00 / (h * w),
            (m10 / m00) / w,
            (m01 / m00) / h,
            math.sqrt(var_x) / w,
            math.sqrt(var_y) / h,
        ]
    )


def ssf_from_moments(momentset: MomentSet) -> SSFMatrix:
    L = momentset.seg_categories
    rows = np.zeros((L, 5))
    for n in range(1, L + 1):
        if momentset.present[n]:
            rows[n - 1] = ssf_row_from_moments(momentset, n)
    rows.setflags(write=False)
    return SSFMatrix(rows=rows)


def ssf(mask: SegmentationMask) -> SSFMatrix:
    """Per-category SSF rows; shares the single moment pass with SHMF."""
    return ssf_from_moments(moment_set(mask))
