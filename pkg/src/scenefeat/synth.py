"""Seeded synthetic scene generation and categorical mask transforms.

Scenes are rendered from templates: each template lists shape groups with a
presence probability, instance count range, shape family, size range as a
fraction of the short image side, and a placement region in the unit
square. Later shapes overwrite earlier ones (occlusion); detections record
the tight bounding box of each shape's pre-occlusion footprint.

All randomness flows through the package's portable SplitMix64 stream, so a
(template, seed) pair renders the same scene everywhere. Per-instance draw
order is fixed: width fraction, height fraction, center x, center y, apex
skew (triangles only), confidence (detected shapes only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import fileio
from .rng import Rng, derive_seed
from .types import (
    ClippingError,
    ConfigError,
    Detection,
    DetectionSet,
    SegmentationMask,
)

SHAPE_FAMILIES = ("rectangle", "ellipse", "triangle")


@dataclass(frozen=True)
class ShapeSpec:
    """One shape group of a scene template.

    ``obj_category`` 0 means the shapes are mask-only (no detection emitted).
    """

    seg_category: int
    shape: str
    obj_category: int = 0
    presence: float = 1.0
    count: tuple[int, int] = (1, 1)
    size: tuple[float, float] = (0.1, 0.2)
    size_y: tuple[float, float] | None = None  # height range; defaults to `size`
    region: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        if self.shape not in SHAPE_FAMILIES:
            raise ConfigError(f"unknown shape family {self.shape!r}")
        if not 0.0 <= self.presence <= 1.0:
            raise ConfigError(f"presence probability {self.presence} outside [0, 1]")
        for rng_pair in (self.size,) if self.size_y is None else (self.size, self.size_y):
            lo, hi = rng_pair
            if not (0.0 < lo <= hi <= 1.0):
                raise ConfigError(f"size fractions {rng_pair} outside (0, 1]")
        x0, y0, x1, y1 = self.region
        if not (0.0 <= x0 <= x1 <= 1.0 and 0.0 <= y0 <= y1 <= 1.0):
            raise ConfigError(f"placement region {self.region} outside the unit square")
        if self.count[0] < 0 or self.count[0] > self.count[1]:
            raise ConfigError(f"bad count range {self.count}")
        if self.seg_category < 1:
            raise ConfigError(f"seg_category must be >= 1, got {self.seg_category}")
        if self.obj_category < 0:
            raise ConfigError(f"obj_category must be >= 0, got {self.obj_category}")


@dataclass(frozen=True)
class SceneTemplate:
    label: str
    shapes: tuple[ShapeSpec, ...]


@dataclass(frozen=True)
class GeneratedScene:
    mask: SegmentationMask
    detections: DetectionSet
    label: str
    occluded: int  # detections whose category is fully painted over


def _rasterize(shape: str, cx: float, cy: float, w0: float, h0: float,
               apex: float, width: int, height: int):
    """Footprint of one shape instance: (row0, col0, bool block) or None."""
    if shape == "rectangle":
        ncols = max(1, int(round(w0)))
        nrows = max(1, int(round(h0)))
        left = int(round(cx - w0 / 2.0))
        top = int(round(cy - h0 / 2.0))
        c0, r0 = max(left, 0), max(top, 0)
        c1 = min(left + ncols, width)
        r1 = min(top + nrows, height)
        if c0 >= c1 or r0 >= r1:
            return None
        return r0, c0, np.ones((r1 - r0, c1 - c0), dtype=bool)
    c0 = max(int(math.floor(cx - w0 / 2.0)), 0)
    c1 = min(int(math.ceil(cx + w0 / 2.0)) + 1, width)
    r0 = max(int(math.floor(cy - h0 / 2.0)), 0)
    r1 = min(int(math.ceil(cy + h0 / 2.0)) + 1, height)
    if c0 >= c1 or r0 >= r1:
        return None
    xs = np.arange(c0, c1, dtype=np.float64) + 0.5
    ys = np.arange(r0, r1, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    if shape == "ellipse":
        rx = max(w0 / 2.0, 1e-9)
        ry = max(h0 / 2.0, 1e-9)
        block = ((gx - cx) / rx) ** 2 + ((gy - cy) / ry) ** 2 <= 1.0
    else:  # triangle: base at the bottom, apex skewed by `apex`
        v0 = (cx - w0 / 2.0, cy + h0 / 2.0)
        v1 = (cx + w0 / 2.0, cy + h0 / 2.0)
        v2 = (cx + apex * w0 / 2.0, cy - h0 / 2.0)
        def edge(ax, ay, bx, by):
            return (gx - ax) * (by - ay) - (gy - ay) * (bx - ax)
        e0 = edge(*v0, *v1)
        e1 = edge(*v1, *v2)
        e2 = edge(*v2, *v0)
        block = ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))
    if not block.any():
        return None
    return r0, c0, block


def generate_scene(
    template: SceneTemplate,
    seed: int,
    width: int = 96,
    height: int = 96,
    seg_categories: int = 6,
    obj_categories: int = 5,
) -> GeneratedScene:
    """Render one scene deterministically from (template, seed)."""
    rng = Rng(seed)
    canvas = np.zeros((height, width), dtype=np.int64)
    short = min(width, height)
    pending: list[tuple[int, tuple[float, float, float, float], float, int]] = []
    for spec in template.shapes:
        if spec.seg_category > seg_categories:
            raise ConfigError(
                f"template {template.label!r} uses seg category {spec.seg_category} "
                f"> configured {seg_categories}"
            )
        if spec.obj_category > obj_categories:
            raise ConfigError(
                f"template {template.label!r} uses obj category {spec.obj_category} "
                f"> configured {obj_categories}"
            )
        if spec.presence <= 0.0 or rng.random() >= spec.presence:
            continue
        for _ in range(rng.randint(*spec.count)):
            w0 = rng.uniform(*spec.size) * short
            h0 = rng.uniform(*(spec.size_y or spec.size)) * short
            rx0, ry0, rx1, ry1 = spec.region
            cx = rng.uniform(rx0 * width, rx1 * width)
            cy = rng.uniform(ry0 * height, ry1 * height)
            apex = rng.uniform(-0.8, 0.8) if spec.shape == "triangle" else 0.0
            footprint = _rasterize(spec.shape, cx, cy, w0, h0, apex, width, height)
            if footprint is None:
                # degenerate raster: keep a single pixel so the instance exists
                r = min(max(int(cy), 0), height - 1)
                c = min(max(int(cx), 0), width - 1)
                footprint = r, c, np.ones((1, 1), dtype=bool)
            r0, c0, block = footprint
            canvas[r0 : r0 + block.shape[0], c0 : c0 + block.shape[1]][block] = spec.seg_category
            if spec.obj_category > 0:
                rows, cols = np.nonzero(block)
                bbox = (
                    float(c0 + cols.min()),
                    float(r0 + rows.min()),
                    float(c0 + cols.max() + 1),
                    float(r0 + rows.max() + 1),
                )
                confidence = rng.uniform(0.5, 1.0)
                pending.append((spec.obj_category, bbox, confidence, spec.seg_category))
    detections = []
    occluded = 0
    for obj_cat, bbox, confidence, seg_cat in pending:
        x0, y0, x1, y1 = (int(v) for v in bbox)
        visible = bool((canvas[y0:y1, x0:x1] == seg_cat).any())
        if not visible:
            occluded += 1
        detections.append(Detection(category=obj_cat, bbox=bbox, confidence=confidence))
    mask = SegmentationMask(canvas, seg_categories)
    dets = DetectionSet(
        detections=tuple(detections),
        image_width=width,
        image_height=height,
        obj_categories=obj_categories,
    )
    return GeneratedScene(mask=mask, detections=dets, label=template.label, occluded=occluded)


# ---------------------------------------------------------------------------
# Categorical mask transforms


@dataclass(frozen=True)
class Translate:
    dx: int
    dy: int


@dataclass(frozen=True)
class Reflect:
    axis: str  # "x" flips columns (left/right), "y" flips rows (top/bottom)


@dataclass(frozen=True)
class Rotate90:
    turns: int = 1  # counter-clockwise quarter turns


@dataclass(frozen=True)
class Scale:
    factor: int  # integer pixel replication


@dataclass(frozen=True)
class Rotate:
    angle: float  # radians, counter-clockwise about the image center


MaskTransform = Union[Translate, Reflect, Rotate90, Scale, Rotate]


def transform_mask(mask: SegmentationMask, transform: MaskTransform) -> SegmentationMask:
    """Apply a content-preserving transform; raise ClippingError on content loss.

    Translation, reflection, and quarter turns are exact pixel permutations;
    scaling replicates pixels; arbitrary rotation resamples category indices
    with nearest-neighbor lookup (indices are categorical, never blended).
    """
    arr = mask.pixels
    h, w = arr.shape
    if isinstance(transform, Translate):
        dx, dy = int(transform.dx), int(transform.dy)
        rows, cols = np.nonzero(arr)
        if rows.size:
            if cols.min() + dx < 0 or cols.max() + dx >= w or rows.min() + dy < 0 or rows.max() + dy >= h:
                raise ClippingError(
                    f"translation by ({dx}, {dy}) would clip labeled pixels"
                )
        out = np.zeros_like(arr)
        src = arr[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
        out[max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx)] = src
        return SegmentationMask(out, mask.seg_categories)
    if isinstance(transform, Reflect):
        if transform.axis == "x":
            return SegmentationMask(arr[:, ::-1].copy(), mask.seg_categories)
        if transform.axis == "y":
            return SegmentationMask(arr[::-1, :].copy(), mask.seg_categories)
        raise ConfigError(f"reflection axis must be 'x' or 'y', got {transform.axis!r}")
    if isinstance(transform, Rotate90):
        return SegmentationMask(np.rot90(arr, transform.turns).copy(), mask.seg_categories)
    if isinstance(transform, Scale):
        s = transform.factor
        if not isinstance(s, int) or s < 1:
            raise ConfigError(f"scale factor must be a positive integer, got {s!r}")
        return SegmentationMask(arr.repeat(s, axis=0).repeat(s, axis=1), mask.seg_categories)
    if isinstance(transform, Rotate):
        theta = float(transform.angle)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        ctr_x, ctr_y = w / 2.0, h / 2.0
        rows, cols = np.nonzero(arr)
        if rows.size:
            px = cols + 0.5 - ctr_x
            py = rows + 0.5 - ctr_y
            fx = cos_t * px - sin_t * py + ctr_x
            fy = sin_t * px + cos_t * py + ctr_y
            if fx.min() < 0 or fx.max() > w or fy.min() < 0 or fy.max() > h:
                raise ClippingError(
                    f"rotation by {theta:.4f} rad would clip labeled pixels"
                )
        dst_x, dst_y = np.meshgrid(np.arange(w) + 0.5 - ctr_x, np.arange(h) + 0.5 - ctr_y)
        src_x = cos_t * dst_x + sin_t * dst_y + ctr_x
        src_y = -sin_t * dst_x + cos_t * dst_y + ctr_y
        sc = np.floor(src_x).astype(np.int64)
        sr = np.floor(src_y).astype(np.int64)
        valid = (sc >= 0) & (sc < w) & (sr >= 0) & (sr < h)
        out = np.zeros_like(arr)
        out[valid] = arr[sr[valid], sc[valid]]
        return SegmentationMask(out, mask.seg_categories)
    raise ConfigError(f"unknown transform {transform!r}")


def random_shape_mask(seed: int, size: int = 128, margin: int = 36,
                      min_area: int = 400) -> SegmentationMask:
    """Single-category chiral blob with guaranteed frame margin.

    Used by the invariance suite: the margin leaves room for the transform
    battery and the union of primitives is generically asymmetric.
    """
    for attempt in range(16):
        rng = Rng(derive_seed(seed, attempt))
        canvas = np.zeros((size, size), dtype=np.int64)
        lo, hi = margin, size - margin
        span = hi - lo
        for _ in range(rng.randint(3, 6)):
            shape = rng.choice(SHAPE_FAMILIES)
            w0 = rng.uniform(0.15, 0.5) * span
            h0 = rng.uniform(0.15, 0.5) * span
            cx = rng.uniform(lo + w0 / 2.0, hi - w0 / 2.0)
            cy = rng.uniform(lo + h0 / 2.0, hi - h0 / 2.0)
            apex = rng.uniform(-0.8, 0.8)
            footprint = _rasterize(shape, cx, cy, w0, h0, apex, size, size)
            if footprint is not None:
                r0, c0, block = footprint
                canvas[r0 : r0 + block.shape[0], c0 : c0 + block.shape[1]][block] = 1
        if int((canvas == 1).sum()) >= min_area:
            return SegmentationMask(canvas, 1)
    raise ConfigError(f"could not draw a blob of {min_area}+ pixels for seed {seed}")


# ---------------------------------------------------------------------------
# Dataset generation


@dataclass(frozen=True)
class DatasetConfig:
    templates: tuple[SceneTemplate, ...]
    samples: int
    seed: int
    width: int = 96
    height: int = 96
    seg_categories: int = 6
    obj_categories: int = 5

    def __post_init__(self):
        if len(self.templates) < 2:
            raise ConfigError("dataset generation needs at least 2 templates")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")


def generate_dataset(config: DatasetConfig, out_dir) -> Path:
    """Write masks, detection files, and a manifest; returns the manifest path.

    Sample k uses template k mod T (class-balanced round robin) and the
    derived seed of the master seed at index k. Paths inside the manifest
    are relative to the manifest file.
    """
    out_dir = Path(out_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    (out_dir / "detections").mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(config.samples):
        template = config.templates[k % len(config.templates)]
        sample_seed = derive_seed(config.seed, k)
        scene = generate_scene(
            template,
            sample_seed,
            width=config.width,
            height=config.height,
            seg_categories=config.seg_categories,
            obj_categories=config.obj_categories,
        )
        sample_id = f"s{k:05d}"
        mask_rel = f"masks/{sample_id}.pgm"
        det_rel = f"detections/{sample_id}.json"
        fileio.write_mask(scene.mask, out_dir / mask_rel)
        fileio.write_detections(scene.detections, out_dir / det_rel)
        rows.append(
            fileio.ManifestRow(
                sample_id=sample_id,
                label=scene.label,
                seed=sample_seed,
                mask_path=mask_rel,
                detections_path=det_rel,
                occluded=scene.occluded,
            )
        )
    manifest_config = {
        "classes": [t.label for t in config.templates],
        "samples": config.samples,
        "seed": config.seed,
        "width": config.width,
        "height": config.height,
        "seg_categories": config.seg_categories,
        "obj_categories": config.obj_categories,
    }
    manifest_path = out_dir / "manifest.tsv"
    fileio.write_manifest(rows, manifest_config, manifest_path)
    return manifest_path


# ---------------------------------------------------------------------------
# Default desk-scale benchmark: six room classes over a shared vocabulary

SEG_LABELS = ("floor", "table", "seat", "bed", "appliance", "screen")
OBJ_LABELS = ("table", "seat", "bed", "appliance", "screen")

_FLOOR = ShapeSpec(seg_category=1, shape="rectangle", size=(0.98, 1.0),
                   size_y=(0.12, 0.2), region=(0.5, 0.92, 0.5, 0.92))


def default_templates() -> tuple[SceneTemplate, ...]:
    """Six room templates sharing object categories with overlapping counts.

    The classes are deliberately ambiguous for object-based features alone:
    office/classroom, kitchen/bathroom, and bedroom/lounge pairs have
    overlapping occurrence profiles, so counts and distances separate them
    only partially. Shape families (triangle vs ellipse seats, wide vs
    small screens) and placement regions carry the stronger signal, so the
    segmentation-based features dominate and the fused set does best.
    """
    # office and classroom are built as near-twins for the segmentation
    # features (similar total table coverage, same seat/screen families and
    # regions): what separates them reliably is the table instance count
    # and the resulting inter-object distances, which masks cannot see once
    # nearby instances merge -- only the object-based features resolve it.
    office = SceneTemplate(
        label="office",
        shapes=(
            _FLOOR,
            ShapeSpec(2, "rectangle", obj_category=1, count=(1, 1), size=(0.2, 0.3),
                      region=(0.35, 0.45, 0.65, 0.7)),
            ShapeSpec(3, "triangle", obj_category=2, count=(2, 4), size=(0.09, 0.14),
                      region=(0.15, 0.55, 0.85, 0.85)),
            ShapeSpec(6, "rectangle", obj_category=5, count=(1, 2), size=(0.09, 0.14),
                      region=(0.3, 0.15, 0.7, 0.3)),
            ShapeSpec(5, "rectangle", obj_category=4, presence=0.3, count=(1, 1),
                      size=(0.08, 0.12), region=(0.8, 0.2, 0.92, 0.35)),
        ),
    )
    classroom = SceneTemplate(
        label="classroom",
        shapes=(
            _FLOOR,
            ShapeSpec(2, "rectangle", obj_category=1, count=(3, 4), size=(0.1, 0.15),
                      region=(0.32, 0.45, 0.68, 0.7)),
            ShapeSpec(3, "triangle", obj_category=2, count=(2, 4), size=(0.09, 0.14),
                      region=(0.15, 0.55, 0.85, 0.85)),
            ShapeSpec(6, "rectangle", obj_category=5, count=(1, 2), size=(0.09, 0.14),
                      region=(0.3, 0.15, 0.7, 0.3)),
            ShapeSpec(5, "rectangle", obj_category=4, presence=0.25, count=(1, 1),
                      size=(0.08, 0.12), region=(0.08, 0.2, 0.2, 0.35)),
        ),
    )
    kitchen = SceneTemplate(
        label="kitchen",
        shapes=(
            _FLOOR,
            ShapeSpec(5, "rectangle", obj_category=4, count=(1, 3), size=(0.13, 0.2),
                      region=(0.1, 0.12, 0.9, 0.28)),
            ShapeSpec(2, "rectangle", obj_category=1, count=(1, 1), size=(0.18, 0.26),
                      region=(0.35, 0.5, 0.65, 0.75)),
            ShapeSpec(3, "triangle", obj_category=2, presence=0.7, count=(1, 3),
                      size=(0.08, 0.13), region=(0.2, 0.6, 0.8, 0.85)),
            ShapeSpec(6, "rectangle", obj_category=5, presence=0.25, count=(1, 1),
                      size=(0.07, 0.11), region=(0.75, 0.15, 0.9, 0.3)),
        ),
    )
    bathroom = SceneTemplate(
        label="bathroom",
        shapes=(
            _FLOOR,
            ShapeSpec(5, "ellipse", obj_category=4, count=(1, 3), size=(0.18, 0.32),
                      region=(0.25, 0.45, 0.6, 0.75)),
            ShapeSpec(5, "ellipse", obj_category=4, presence=0.8, count=(1, 2),
                      size=(0.08, 0.13), region=(0.6, 0.2, 0.9, 0.4)),
            ShapeSpec(3, "ellipse", obj_category=2, presence=0.5, count=(1, 2),
                      size=(0.07, 0.11), region=(0.1, 0.3, 0.3, 0.55)),
            ShapeSpec(2, "rectangle", obj_category=1, presence=0.3, count=(1, 1),
                      size=(0.08, 0.13), region=(0.1, 0.6, 0.25, 0.75)),
        ),
    )
    bedroom = SceneTemplate(
        label="bedroom",
        shapes=(
            _FLOOR,
            ShapeSpec(4, "rectangle", obj_category=3, count=(1, 1), size=(0.32, 0.46),
                      region=(0.25, 0.45, 0.5, 0.7)),
            ShapeSpec(2, "rectangle", obj_category=1, presence=0.7, count=(1, 2),
                      size=(0.08, 0.14), region=(0.7, 0.5, 0.9, 0.75)),
            ShapeSpec(3, "ellipse", obj_category=2, presence=0.6, count=(1, 2),
                      size=(0.09, 0.14), region=(0.6, 0.25, 0.9, 0.45)),
            ShapeSpec(6, "rectangle", obj_category=5, presence=0.5, count=(1, 1),
                      size=(0.08, 0.12), region=(0.1, 0.12, 0.35, 0.25)),
        ),
    )
    lounge = SceneTemplate(
        label="lounge",
        shapes=(
            _FLOOR,
            ShapeSpec(3, "ellipse", obj_category=2, count=(1, 3), size=(0.16, 0.26),
                      region=(0.2, 0.45, 0.8, 0.8)),
            ShapeSpec(2, "ellipse", obj_category=1, count=(1, 2), size=(0.1, 0.16),
                      region=(0.35, 0.5, 0.65, 0.7)),
            ShapeSpec(6, "rectangle", obj_category=5, presence=0.6, count=(1, 1),
                      size=(0.11, 0.18), region=(0.35, 0.12, 0.65, 0.25)),
            ShapeSpec(4, "rectangle", obj_category=3, presence=0.35, count=(1, 1),
                      size=(0.2, 0.3), size_y=(0.12, 0.2), region=(0.75, 0.3, 0.9, 0.5)),
        ),
    )
    return office, bedroom, kitchen, bathroom, classroom, lounge


def default_dataset_config(samples: int, seed: int, width: int = 96, height: int = 96) -> DatasetConfig:
    return DatasetConfig(
        templates=default_templates(),
        samples=samples,
        seed=seed,
        width=width,
        height=height,
        seg_categories=len(SEG_LABELS),
        obj_categories=len(OBJ_LABELS),
    )
