"""Throughput benchmark: single-pass extraction vs the per-category oracle.

Both sides compute the full SHMF+SSF feature set for every mask in a seeded
corpus; the single-pass accumulator visits the mask a constant number of
times while the naive baseline makes one selection pass per category, so
the gap widens with the vocabulary size.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import reference
from .moments import moment_set, shmf_from_moments
from .rng import Rng
from .ssf import ssf_from_moments
from .types import ConfigError, SegmentationMask, ToleranceError

# Below this vocabulary size the per-category baseline makes too few passes
# for the comparison to mean anything, so the speedup floor is not enforced.
ASSERT_MIN_CATEGORIES = 8
SPEEDUP_FLOOR = 3.0


@dataclass(frozen=True)
class BenchReport:
    seg_categories: int
    width: int
    height: int
    masks: int
    repeats: int
    megapixels: float
    single_pass_mpix_per_s: float
    naive_mpix_per_s: float
    speedup: float
    floor_enforced: bool
    passed: bool


def random_mask_corpus(seg_categories: int, width: int, height: int,
                       masks: int, seed: int) -> list[SegmentationMask]:
    """Dense uniform-category masks (including void) from the portable stream."""
    if masks < 1:
        raise ConfigError(f"corpus must hold at least one mask, got {masks}")
    rng = Rng(seed)
    corpus = []
    for _ in range(masks):
        u = rng.uniform_array(width * height)
        pixels = np.minimum((u * (seg_categories + 1)).astype(np.int64), seg_categories)
        corpus.append(SegmentationMask(pixels.reshape(height, width), seg_categories))
    return corpus


def _single_pass_once(corpus) -> float:
    start = time.perf_counter()
    for mask in corpus:
        ms = moment_set(mask)
        shmf_from_moments(ms)
        ssf_from_moments(ms)
    return time.perf_counter() - start


def _naive_once(corpus) -> float:
    start = time.perf_counter()
    for mask in corpus:
        reference.naive_shmf_ssf(mask)
    return time.perf_counter() - start


def run_benchmark(
    seg_categories: int = 37,
    width: int = 224,
    height: int = 224,
    masks: int = 8,
    repeats: int = 3,
    seed: int = 0,
) -> BenchReport:
    """Measure both paths on the same corpus; raises on floor violation.

    Repeats are interleaved (single, naive, single, naive, ...) and each
    side's time is the median over repeats, so machine-wide slowdowns hit
    both paths rather than skewing the ratio. The floor (single-pass at
    least 3x the oracle) is enforced only for vocabularies of
    ASSERT_MIN_CATEGORIES or more.
    """
    corpus = random_mask_corpus(seg_categories, width, height, masks, seed)
    megapixels = width * height * masks * repeats / 1e6
    # warm both paths once so allocation and cache effects drop out
    _single_pass_once(corpus[:1])
    _naive_once(corpus[:1])
    single_times = []
    naive_times = []
    for _ in range(repeats):
        single_times.append(_single_pass_once(corpus))
        naive_times.append(_naive_once(corpus))
    single_s = sorted(single_times)[len(single_times) // 2] * repeats
    naive_s = sorted(naive_times)[len(naive_times) // 2] * repeats
    speedup = (megapixels / single_s) / (megapixels / naive_s)
    enforced = seg_categories >= ASSERT_MIN_CATEGORIES
    passed = (not enforced) or speedup >= SPEEDUP_FLOOR
    report = BenchReport(
        seg_categories=seg_categories,
        width=width,
        height=height,
        masks=masks,
        repeats=repeats,
        megapixels=megapixels,
        single_pass_mpix_per_s=megapixels / single_s,
        naive_mpix_per_s=megapixels / naive_s,
        speedup=speedup,
        floor_enforced=enforced,
        passed=passed,
    )
    return report


def format_bench_report(report: BenchReport) -> str:
    lines = [
        f"corpus: {report.masks} masks of {report.width}x{report.height}, "
        f"L={report.seg_categories}, {report.repeats} repeats "
        f"({report.megapixels:.1f} Mpx total)",
        f"single-pass extraction: {report.single_pass_mpix_per_s:.1f} Mpx/s",
        f"per-category oracle:    {report.naive_mpix_per_s:.1f} Mpx/s",
        f"speedup: {report.speedup:.2f}x"
        + ("" if report.floor_enforced else f"  (floor not enforced below L={ASSERT_MIN_CATEGORIES})"),
        f"status: {'pass' if report.passed else 'FAIL'}",
    ]
    return "\n".join(lines) + "\n"


def assert_benchmark(report: BenchReport) -> None:
    if not report.passed:
        raise ToleranceError(
            f"single-pass speedup {report.speedup:.2f}x is below the "
            f"{SPEEDUP_FLOOR}x floor at L={report.seg_categories}"
        )
