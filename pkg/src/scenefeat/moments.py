"""Per-category image moments and Hu shape invariants.

Raw moments are accumulated in ONE pass over the mask: every pixel updates
only its own category's ten accumulators (all orders p+q <= 3). Because
pixel coordinates are small integers, every raw moment is an exact integer,
and central moments are then derived in exact integer arithmetic (binomial
shift to the centroid), rounding to float64 only once per value. This makes
the derived values bit-identical under exact content-preserving transforms
(integer translation, axis reflection, 90-degree rotation) instead of merely
close, and it is algebraically equivalent to summing directly about the
centroid, which the reference oracle verifies.

Coordinates are 1-based: column j in [1, w] is the x axis, row i in [1, h]
is the y axis, and M_pq sums j^p * i^q over the category's pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .types import SegmentationMask

# |h_k| below this is treated as exactly zero in the log rescale.
HU_LOG_EPSILON = 1e-30

# Raw-moment column layout: index -> (p, q) with M_pq = sum j^p i^q.
MOMENT_POWERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))

# Float64 accumulation of integer weights is exact while every partial sum
# stays below 2**53; beyond that an int64 scatter-add path takes over.
_EXACT_SUM_LIMIT = 2**53


@dataclass(frozen=True)
class MomentSet:
    """Raw and derived moments for every category of one mask.

    Row n of each array belongs to category n; row 0 is the void row and is
    always zero. ``mu`` and ``eta`` columns are ordered
    (20, 11, 02, 30, 21, 12, 03).
    """

    seg_categories: int
    width: int
    height: int
    raw: np.ndarray  # (L+1, 10) int64
    present: np.ndarray  # (L+1,) bool
    centroid: np.ndarray | None = None  # (L+1, 2) float64, columns (x, y)
    mu: np.ndarray | None = None  # (L+1, 7) float64
    eta: np.ndarray | None = None  # (L+1, 7) float64

    @property
    def derived(self) -> bool:
        return self.eta is not None

    def pixel_count(self, category: int) -> int:
        return int(self.raw[category, 0])


@dataclass(frozen=True)
class HuVector:
    """Seven Hu invariants for one category, raw and log-rescaled."""

    raw: np.ndarray  # (7,) float64
    rescaled: np.ndarray  # (7,) float64


@dataclass(frozen=True)
class SHMFMatrix:
    """Log-rescaled Hu vectors, one row per segmentation category (L x 7)."""

    rows: np.ndarray

    def row(self, category: int) -> np.ndarray:
        return self.rows[category - 1]


@lru_cache(maxsize=8)
def _flat_coordinates(width: int, height: int):
    """Cached per-pixel coordinate arrays for one mask shape."""
    row = np.repeat(np.arange(height, dtype=np.int32), width)
    col = np.tile(np.arange(width, dtype=np.int32), height)
    j1 = np.tile(np.arange(1, width + 1, dtype=np.float64), height)
    j2 = j1 * j1
    for arr in (row, col, j1, j2):
        arr.setflags(write=False)
    return row, col, j1, j2


def accumulate_raw_moments(mask: SegmentationMask) -> MomentSet:
    """Single-pass raw-moment accumulation for all categories at once.

    The pass histograms pixels into (category, row) cells with weights
    1, j, j^2 and into (category, column) cells unweighted; every raw
    moment then falls out of small matrix-vector products against row and
    column powers. All intermediate sums are integer-valued and stay below
    2**53, so the float64 arithmetic is exact. Returns a MomentSet with
    exact integer raw moments; derived quantities are not yet populated.
    """
    L = mask.seg_categories
    h, w = mask.pixels.shape
    flat = mask.pixels.ravel()
    raw = np.zeros((L + 1, 10), dtype=np.int64)
    if max(w, h) ** 3 * w * h < _EXACT_SUM_LIMIT and (L + 1) * max(w, h) < 2**31:
        row, col, j1, j2 = _flat_coordinates(w, h)
        idx = flat.astype(np.int32, copy=False)
        cat_row = idx * np.int32(h) + row
        cells = (L + 1) * h
        counts = np.bincount(cat_row, minlength=cells)[:cells].reshape(L + 1, h)
        sum_j = np.bincount(cat_row, weights=j1, minlength=cells)[:cells].reshape(L + 1, h)
        sum_j2 = np.bincount(cat_row, weights=j2, minlength=cells)[:cells].reshape(L + 1, h)
        cat_col = idx * np.int32(w) + col
        ccells = (L + 1) * w
        col_counts = np.bincount(cat_col, minlength=ccells)[:ccells].reshape(L + 1, w)
        i1 = np.arange(1, h + 1, dtype=np.float64)
        jc = np.arange(1, w + 1, dtype=np.float64)
        counts_f = counts.astype(np.float64)
        col_counts_f = col_counts.astype(np.float64)
        raw[:, 0] = counts.sum(axis=1)
        raw[:, 1] = sum_j.sum(axis=1)
        raw[:, 2] = counts_f @ i1
        raw[:, 3] = sum_j2.sum(axis=1)
        raw[:, 4] = sum_j @ i1
        raw[:, 5] = counts_f @ (i1 * i1)
        raw[:, 6] = col_counts_f @ (jc * jc * jc)
        raw[:, 7] = sum_j2 @ i1
        raw[:, 8] = sum_j @ (i1 * i1)
        raw[:, 9] = counts_f @ (i1 * i1 * i1)
    else:
        j = np.tile(np.arange(1, w + 1, dtype=np.int64), h)
        i = np.repeat(np.arange(1, h + 1, dtype=np.int64), w)
        ones = np.ones(w * h, dtype=np.int64)
        for k, weight in enumerate((ones, j, i, j * j, j * i, i * i,
                                    j * j * j, j * j * i, j * i * i, i * i * i)):
            np.add.at(raw[:, k], flat, weight)
    raw[0] = 0
    present = raw[:, 0] > 0
    raw.setflags(write=False)
    present.setflags(write=False)
    return MomentSet(seg_categories=L, width=w, height=h, raw=raw, present=present)


def derive_moments(momentset: MomentSet) -> MomentSet:
    """Populate centroid, central, and normalized central moments.

    Central moments come from the exact integer identities
        mu20*A   = M20*A - M10^2
        mu11*A   = M11*A - M10*M01
        mu30*A^2 = M30*A^2 - 3*M20*M10*A + 2*M10^3
        mu21*A^2 = M21*A^2 - M20*M01*A - 2*M11*M10*A + 2*M10^2*M01
    (and their x/y mirrors), with A = M00. Normalization divides by
    A^((p+q)/2 + 1). Absent categories yield all-zero rows.
    """
    L = momentset.seg_categories
    centroid = np.zeros((L + 1, 2))
    mu = np.zeros((L + 1, 7))
    eta = np.zeros((L + 1, 7))
    for n in range(1, L + 1):
        if not momentset.present[n]:
            continue
        m00, m10, m01, m20, m11, m02, m30, m21, m12, m03 = momentset.raw[n].tolist()
        a = m00
        a2 = a * a
        centroid[n, 0] = m10 / a
        centroid[n, 1] = m01 / a
        n20 = m20 * a - m10 * m10
        n11 = m11 * a - m10 * m01
        n02 = m02 * a - m01 * m01
        n30 = m30 * a2 - 3 * m20 * m10 * a + 2 * m10**3
        n21 = m21 * a2 - m20 * m01 * a - 2 * m11 * m10 * a + 2 * m10 * m10 * m01
        n12 = m12 * a2 - m02 * m10 * a - 2 * m11 * m01 * a + 2 * m01 * m01 * m10
        n03 = m03 * a2 - 3 * m02 * m01 * a + 2 * m01**3
        mu[n] = (n20 / a, n11 / a, n02 / a,
                 n30 / a2, n21 / a2, n12 / a2, n03 / a2)
        # eta_pq = mu_pq / A^r with r = (p+q)/2 + 1: r=2 is rational in the
        # raw moments, r=2.5 needs one extra rounding through sqrt(A).
        a3 = a2 * a
        a4 = a2 * a2
        sqrt_a = math.sqrt(a)
        eta[n] = (n20 / a3, n11 / a3, n02 / a3,
                  (n30 / a4) / sqrt_a, (n21 / a4) / sqrt_a,
                  (n12 / a4) / sqrt_a, (n03 / a4) / sqrt_a)
    for arr in (centroid, mu, eta):
        arr.setflags(write=False)
    return MomentSet(
        seg_categories=L,
        width=momentset.width,
        height=momentset.height,
        raw=momentset.raw,
        present=momentset.present,
        centroid=centroid,
        mu=mu,
        eta=eta,
    )


def moment_set(mask: SegmentationMask) -> MomentSet:
    """Accumulate and derive in one call; the shared substrate of SHMF and SSF."""
    return derive_moments(accumulate_raw_moments(mask))


def hu_from_normalized(eta: np.ndarray) -> np.ndarray:
    """Seven Hu invariants from normalized central moments (20,11,02,30,21,12,03).

    Accepts one row (7,) or a stack (..., 7) and applies elementwise.
    """
    eta = np.asarray(eta, dtype=np.float64)
    e20, e11, e02 = eta[..., 0], eta[..., 1], eta[..., 2]
    e30, e21, e12, e03 = eta[..., 3], eta[..., 4], eta[..., 5], eta[..., 6]
    s30 = e30 + e12  # x-odd combination
    s03 = e21 + e03  # y-odd combination
    d30 = e30 - 3.0 * e12
    d03 = 3.0 * e21 - e03
    h1 = e20 + e02
    h2 = (e20 - e02) ** 2 + 4.0 * e11 * e11
    h3 = d30 * d30 + d03 * d03
    h4 = s30 * s30 + s03 * s03
    # Factor grouping is deliberate: each binary product pairs quantities
    # that swap or flip sign together under reflections and 90-degree
    # rotations, so those transforms reproduce h1..h7 bit-exactly (up to the
    # h7 sign flip) rather than merely to rounding error.
    h5 = (d30 * s30) * (s30 * s30 - 3.0 * s03 * s03) + (d03 * s03) * (3.0 * s30 * s30 - s03 * s03)
    h6 = (e20 - e02) * (s30 * s30 - s03 * s03) + 4.0 * e11 * (s30 * s03)
    h7 = (d03 * s30) * (s30 * s30 - 3.0 * s03 * s03) - (d30 * s03) * (3.0 * s30 * s30 - s03 * s03)
    return np.stack([h1, h2, h3, h4, h5, h6, h7], axis=-1)


def log_rescale(h: np.ndarray) -> np.ndarray:
    """Map each invariant to -sign(h) * ln|h|, with |h| < 1e-30 pinned to 0.

    The natural-log rescale makes moments of very different magnitudes
    comparable; the guard keeps sign(0) * log(0) out of the features.
    """
    h = np.asarray(h, dtype=np.float64)
    out = np.zeros_like(h)
    big = np.abs(h) >= HU_LOG_EPSILON
    out[big] = -np.sign(h[big]) * np.log(np.abs(h[big]))
    return out


def hu_invariants(momentset: MomentSet, category: int) -> HuVector:
    """Hu vector of one category; absent categories yield all zeros."""
    if not momentset.derived:
        raise ValueError("moment set has no derived moments; call derive_moments first")
    if not momentset.present[category]:
        zeros = np.zeros(7)
        return HuVector(raw=zeros, rescaled=zeros.copy())
    raw = hu_from_normalized(momentset.eta[category])
    return HuVector(raw=raw, rescaled=log_rescale(raw))


def shmf_from_moments(momentset: MomentSet) -> SHMFMatrix:
    if not momentset.derived:
        raise ValueError("moment set has no derived moments; call derive_moments first")
    # absent categories have all-zero eta rows, which map to all-zero Hu rows
    rows = log_rescale(hu_from_normalized(momentset.eta[1:]))
    rows.setflags(write=False)
    return SHMFMatrix(rows=rows)


def shmf(mask: SegmentationMask) -> SHMFMatrix:
    """Per-category log-rescaled Hu vectors from one accumulation pass."""
    return shmf_from_moments(moment_set(mask))
