"""Independent reference implementations used for cross-checks and benchmarks.

Everything here recomputes features from first principles -- one full pass
over the mask per category, sums taken literally as written in the moment
definitions -- and deliberately shares no accumulation code with the
single-pass path. Tests compare the two routes; the benchmark measures the
throughput gap.
"""

from __future__ import annotations

import math

import numpy as np

from .moments import hu_from_normalized, log_rescale
from .types import Detection, DetectionSet, SegmentationMask


def naive_raw_moments(mask: SegmentationMask) -> np.ndarray:
    """Raw moments via one full selection pass per category ((L+1, 10) float)."""
    L = mask.seg_categories
    h, w = mask.pixels.shape
    cols, rows_ = np.meshgrid(np.arange(1, w + 1, dtype=np.float64),
                              np.arange(1, h + 1, dtype=np.float64))
    out = np.zeros((L + 1, 10))
    for n in range(1, L + 1):
        sel = mask.pixels == n
        if not sel.any():
            continue
        j = cols[sel]
        i = rows_[sel]
        out[n] = [
            j.size,
            j.sum(), i.sum(),
            (j * j).sum(), (j * i).sum(), (i * i).sum(),
            (j ** 3).sum(), (j * j * i).sum(), (j * i * i).sum(), (i ** 3).sum(),
        ]
    return out


def literal_central_moments(mask: SegmentationMask) -> np.ndarray:
    """Central moments summed directly about each category's centroid.

    Returns (L+1, 7) float columns (20, 11, 02, 30, 21, 12, 03).
    """
    L = mask.seg_categories
    h, w = mask.pixels.shape
    cols, rows_ = np.meshgrid(np.arange(1, w + 1, dtype=np.float64),
                              np.arange(1, h + 1, dtype=np.float64))
    out = np.zeros((L + 1, 7))
    for n in range(1, L + 1):
        sel = mask.pixels == n
        if not sel.any():
            continue
        j = cols[sel]
        i = rows_[sel]
        dx = j - j.sum() / j.size
        dy = i - i.sum() / i.size
        out[n] = [
            (dx * dx).sum(), (dx * dy).sum(), (dy * dy).sum(),
            (dx ** 3).sum(), (dx * dx * dy).sum(), (dx * dy * dy).sum(), (dy ** 3).sum(),
        ]
    return out


def literal_ssf_rows(mask: SegmentationMask) -> np.ndarray:
    """SSF rows computed as the literal per-pixel sums ((L, 5) float)."""
    L = mask.seg_categories
    h, w = mask.pixels.shape
    cols, rows_ = np.meshgrid(np.arange(1, w + 1, dtype=np.float64),
                              np.arange(1, h + 1, dtype=np.float64))
    out = np.zeros((L, 5))
    for n in range(1, L + 1):
        sel = mask.pixels == n
        if not sel.any():
            continue
        j = cols[sel]
        i = rows_[sel]
        p_c = float(j.size)
        mu_x = j.sum() / p_c
        mu_y = i.sum() / p_c
        sig_x = math.sqrt(((j - mu_x) ** 2).sum() / p_c)
        sig_y = math.sqrt(((i - mu_y) ** 2).sum() / p_c)
        out[n - 1] = [p_c / (h * w), mu_x / w, mu_y / h, sig_x / w, sig_y / h]
    return out


def naive_shmf_ssf(mask: SegmentationMask) -> tuple[np.ndarray, np.ndarray]:
    """Full SHMF+SSF extraction with one pass per category (the benchmark baseline).

    The Hu polynomial and log rescale are shared pure functions of the
    normalized moments; everything upstream of them is recomputed here.
    """
    L = mask.seg_categories
    h, w = mask.pixels.shape
    cols, rows_ = np.meshgrid(np.arange(1, w + 1, dtype=np.float64),
                              np.arange(1, h + 1, dtype=np.float64))
    shmf_rows = np.zeros((L, 7))
    ssf_rows = np.zeros((L, 5))
    for n in range(1, L + 1):
        sel = mask.pixels == n
        if not sel.any():
            continue
        j = cols[sel]
        i = rows_[sel]
        count = float(j.size)
        mu_x = j.sum() / count
        mu_y = i.sum() / count
        dx = j - mu_x
        dy = i - mu_y
        mu = np.array([
            (dx * dx).sum(), (dx * dy).sum(), (dy * dy).sum(),
            (dx ** 3).sum(), (dx * dx * dy).sum(), (dx * dy * dy).sum(), (dy ** 3).sum(),
        ])
        eta = mu / np.array([count**2, count**2, count**2,
                             count**2.5, count**2.5, count**2.5, count**2.5])
        shmf_rows[n - 1] = log_rescale(hu_from_normalized(eta))
        ssf_rows[n - 1] = [
            count / (h * w), mu_x / w, mu_y / h,
            math.sqrt((dx * dx).sum() / count) / w,
            math.sqrt((dy * dy).sum() / count) / h,
        ]
    return shmf_rows, ssf_rows


def brute_force_sfm(detections: DetectionSet, bins: int, rho: float) -> np.ndarray:
    """Distance-bin tensor recomputed by independent pair enumeration."""
    n_cat = detections.obj_categories
    d_max = math.sqrt(detections.image_width**2 + detections.image_height**2)
    tensor = np.zeros((n_cat, n_cat, bins), dtype=np.int64)
    dets = list(detections.detections)
    for a, det_a in enumerate(dets):
        for b, det_b in enumerate(dets):
            if a == b:
                continue
            ax = (det_a.bbox[0] + det_a.bbox[2]) / 2.0
            ay = (det_a.bbox[1] + det_a.bbox[3]) / 2.0
            bx = (det_b.bbox[0] + det_b.bbox[2]) / 2.0
            by = (det_b.bbox[1] + det_b.bbox[3]) / 2.0
            ratio = rho * math.sqrt((ax - bx) ** 2 + (ay - by) ** 2) / d_max
            k = math.ceil(ratio)
            if k < 1:
                k = 1
            if k > bins:
                k = bins
            tensor[det_a.category - 1, det_b.category - 1, k - 1] += 1
    return tensor


def python_raw_moments(mask: SegmentationMask) -> list[list[int]]:
    """Scalar double-loop raw moments, for anchoring the vectorized oracles.

    Intended for tiny masks only; returns exact integers per category.
    """
    L = mask.seg_categories
    h, w = mask.pixels.shape
    out = [[0] * 10 for _ in range(L + 1)]
    for r in range(h):
        for c in range(w):
            n = int(mask.pixels[r, c])
            if n == 0:
                continue
            i = r + 1
            j = c + 1
            acc = out[n]
            acc[0] += 1
            acc[1] += j
            acc[2] += i
            acc[3] += j * j
            acc[4] += j * i
            acc[5] += i * i
            acc[6] += j * j * j
            acc[7] += j * j * i
            acc[8] += j * i * i
            acc[9] += i * i * i
    return out
