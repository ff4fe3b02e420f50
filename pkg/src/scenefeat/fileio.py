"""Bit-exact file formats: PGM masks, JSON detections/features/labels, manifests.

Real-valued numbers are stored as C99 hexadecimal float literals
(``float.hex`` form), which round-trip float64 exactly on every platform.
Every JSON document carries a ``schema`` version field, and readers reject
inconsistent metadata instead of repairing it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .types import (
    Detection,
    DetectionSet,
    ExtractionParams,
    FeatureBundle,
    LabelMap,
    MaskValidationError,
    SchemaError,
    SegmentationMask,
    validate_mask,
)

logger = logging.getLogger("scenefeat")

DETECTIONS_SCHEMA = "scenefeat.detections/1"
FEATURES_SCHEMA = "scenefeat.features/1"
LABELS_SCHEMA = "scenefeat.labels/1"
MANIFEST_SCHEMA = "scenefeat.manifest/1"

PathLike = Union[str, Path]


def encode_float(x: float) -> str:
    return float(x).hex()


def decode_float(s: str, where: str = "value") -> float:
    try:
        return float.fromhex(s)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{where}: not a hexadecimal float literal: {s!r}") from exc


def encode_float_array(arr: np.ndarray) -> list[str]:
    return [float(v).hex() for v in np.asarray(arr, dtype=np.float64).ravel()]


def decode_float_array(values: Sequence[str], where: str = "values") -> np.ndarray:
    return np.array([decode_float(v, where) for v in values], dtype=np.float64)


# ---------------------------------------------------------------------------
# PGM segmentation masks


def write_mask(mask: SegmentationMask, path: PathLike, plain: bool = False) -> None:
    """Write a mask as PGM: binary P5 by default, plain P2 on request.

    maxval is max(L, 1) so any category index fits; two bytes per pixel
    (big-endian) when maxval exceeds 255.
    """
    path = Path(path)
    maxval = max(mask.seg_categories, 1)
    if maxval > 65535:
        raise SchemaError(f"maxval {maxval} exceeds the PGM limit of 65535")
    header = f"{'P2' if plain else 'P5'}\n{mask.width} {mask.height}\n{maxval}\n"
    if plain:
        rows = "\n".join(" ".join(str(int(v)) for v in row) for row in mask.pixels)
        path.write_text(header + rows + "\n")
        return
    if maxval < 256:
        payload = mask.pixels.astype(">u1").tobytes()
    else:
        payload = mask.pixels.astype(">u2").tobytes()
    path.write_bytes(header.encode("ascii") + payload)


def _pgm_header_tokens(data: bytes, path: Path):
    """Yield (token, next_offset) skipping whitespace and # comments."""
    pos = 0
    n = len(data)
    while True:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise SchemaError(f"{path}: truncated PGM header")
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        yield data[start:pos].decode("ascii", "replace"), pos


def load_mask(path: PathLike, seg_categories: Optional[int] = None) -> SegmentationMask:
    """Load a P5 or P2 PGM mask; values are validated against seg_categories.

    When seg_categories is omitted, the header maxval declares L. P2 and P5
    encodings of the same content load to equal masks.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise SchemaError(f"{path}: not a P2/P5 PGM file")
    magic = data[:2].decode("ascii")
    tokens = _pgm_header_tokens(data[2:], path)
    fields = []
    offset = 0
    for _ in range(3):
        tok, offset = next(tokens)
        fields.append(tok)
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise SchemaError(f"{path}: non-numeric PGM header fields {fields}") from None
    if width < 1 or height < 1:
        raise SchemaError(f"{path}: invalid dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise SchemaError(f"{path}: maxval {maxval} outside [1, 65535]")
    if magic == "P5":
        payload = data[2 + offset + 1 :]  # header ends with one whitespace byte
        dtype = ">u1" if maxval < 256 else ">u2"
        expected = width * height * (1 if maxval < 256 else 2)
        if len(payload) != expected:
            raise SchemaError(
                f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
            )
        pixels = np.frombuffer(payload, dtype=dtype).astype(np.int64).reshape(height, width)
    else:
        text = data[2 + offset :].decode("ascii", "replace")
        values = []
        for tok in text.split():
            if tok.startswith("#"):
                break
            try:
                values.append(int(tok))
            except ValueError:
                raise SchemaError(f"{path}: non-numeric P2 sample {tok!r}") from None
        if len(values) != width * height:
            raise SchemaError(
                f"{path}: payload holds {len(values)} samples, header implies {width * height}"
            )
        pixels = np.array(values, dtype=np.int64).reshape(height, width)
    if pixels.max(initial=0) > maxval:
        raise SchemaError(f"{path}: sample {int(pixels.max())} exceeds maxval {maxval}")
    L = maxval if seg_categories is None else seg_categories
    try:
        return validate_mask(SegmentationMask(pixels, L))
    except MaskValidationError as exc:
        raise MaskValidationError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Detection documents


@dataclass(frozen=True)
class LoadedDetections:
    """A loaded detection set plus what the loader had to do to the records."""

    detections: DetectionSet
    dropped_low_confidence: int
    clamped: int


def write_detections(detections: DetectionSet, path: PathLike) -> None:
    doc = {
        "schema": DETECTIONS_SCHEMA,
        "image_width": detections.image_width,
        "image_height": detections.image_height,
        "obj_categories": detections.obj_categories,
        "detections": [
            {
                "category": det.category,
                "bbox": [encode_float(v) for v in det.bbox],
                "confidence": encode_float(det.confidence),
            }
            for det in detections.detections
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise SchemaError(f"{where}: field {key!r} has type {type(value).__name__}")
    return value


def _load_json(path: Path, expected_schema: str) -> dict:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: document root must be an object")
    schema = doc.get("schema")
    if schema != expected_schema:
        raise SchemaError(f"{path}: schema {schema!r}, expected {expected_schema!r}")
    return doc


def _number(value, where: str) -> float:
    if isinstance(value, str):
        return decode_float(value, where)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise SchemaError(f"{where}: expected a number, got {type(value).__name__}")


def build_detection_set(
    records: Sequence[dict],
    image_width: int,
    image_height: int,
    obj_categories: int,
    confidence_threshold: float = 0.2,
    labels: Optional[LabelMap] = None,
    where: str = "detections",
) -> LoadedDetections:
    """Validate raw detection records into a DetectionSet.

    Records below the confidence threshold are dropped; category names are
    resolved through the label map; boxes reaching past the image frame are
    clamped with a warning. Violations name the offending record index.
    Numeric fields accept plain numbers or hexadecimal float literals.
    """
    kept: list[Detection] = []
    dropped = 0
    clamped = 0
    for idx, rec in enumerate(records):
        rec_where = f"{where}[{idx}]"
        if not isinstance(rec, dict):
            raise SchemaError(f"{rec_where}: record must be an object")
        cat = rec.get("category")
        if isinstance(cat, str):
            if labels is None:
                raise SchemaError(f"{rec_where}: category name {cat!r} without a label map")
            cat = labels.obj_index(cat)
        elif isinstance(cat, int) and not isinstance(cat, bool):
            pass
        else:
            raise SchemaError(f"{rec_where}: category must be an index or name")
        if not 1 <= cat <= obj_categories:
            raise SchemaError(f"{rec_where}: category {cat} outside [1, {obj_categories}]")
        bbox = rec.get("bbox")
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise SchemaError(f"{rec_where}: bbox must be [x_min, y_min, x_max, y_max]")
        x0, y0, x1, y1 = (_number(v, f"{rec_where}.bbox") for v in bbox)
        if x0 > x1 or y0 > y1:
            raise SchemaError(f"{rec_where}: degenerate bbox ({x0}, {y0}, {x1}, {y1})")
        confidence = _number(rec.get("confidence"), f"{rec_where}.confidence")
        if not 0.0 <= confidence <= 1.0:
            raise SchemaError(f"{rec_where}: confidence {confidence} outside [0, 1]")
        cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
        cx1, cy1 = min(x1, float(image_width)), min(y1, float(image_height))
        if (cx0, cy0, cx1, cy1) != (x0, y0, x1, y1):
            clamped += 1
            logger.warning("%s: bbox %s clamped to image frame", rec_where, bbox)
        if confidence < confidence_threshold:
            dropped += 1
            continue
        kept.append(Detection(category=cat, bbox=(cx0, cy0, cx1, cy1), confidence=confidence))
    detections = DetectionSet(
        detections=tuple(kept),
        image_width=image_width,
        image_height=image_height,
        obj_categories=obj_categories,
    )
    return LoadedDetections(detections=detections, dropped_low_confidence=dropped, clamped=clamped)


def load_detections(
    path: PathLike,
    confidence_threshold: float = 0.2,
    labels: Optional[LabelMap] = None,
) -> LoadedDetections:
    """Load a detection document, dropping records below the threshold."""
    path = Path(path)
    doc = _load_json(path, DETECTIONS_SCHEMA)
    width = _require(doc, "image_width", int, str(path))
    height = _require(doc, "image_height", int, str(path))
    n_cat = _require(doc, "obj_categories", int, str(path))
    records = _require(doc, "detections", list, str(path))
    return build_detection_set(
        records,
        image_width=width,
        image_height=height,
        obj_categories=n_cat,
        confidence_threshold=confidence_threshold,
        labels=labels,
        where=f"{path}: detections",
    )


# ---------------------------------------------------------------------------
# Label maps


def write_labels(labels: LabelMap, path: PathLike) -> None:
    doc = {
        "schema": LABELS_SCHEMA,
        "seg": list(labels.seg_names),
        "obj": list(labels.obj_names),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_labels(path: PathLike) -> LabelMap:
    path = Path(path)
    doc = _load_json(path, LABELS_SCHEMA)
    seg = _require(doc, "seg", list, str(path))
    obj = _require(doc, "obj", list, str(path))
    if not all(isinstance(n, str) for n in seg + obj):
        raise SchemaError(f"{path}: label names must be strings")
    return LabelMap(seg_names=tuple(seg), obj_names=tuple(obj))


# ---------------------------------------------------------------------------
# Feature documents


_BLOCK_KEYS = ("shmf", "ssf", "sfv", "sfm", "global")
_INT_BLOCKS = ("sfv", "sfm")


def features_document(bundle: FeatureBundle, params: ExtractionParams,
                      obj_categories: Optional[int] = None) -> dict:
    """Self-describing JSON document for any subset of feature blocks."""
    L = bundle.shmf.shape[0] if bundle.shmf is not None else (
        bundle.ssf.shape[0] if bundle.ssf is not None else 0)
    if bundle.sfv is not None:
        n_cat = int(bundle.sfv.shape[0])
    elif bundle.sfm is not None:
        n_cat = int(bundle.sfm.shape[0])
    else:
        n_cat = 0 if obj_categories is None else obj_categories
    k_bins = int(bundle.sfm.shape[2]) if bundle.sfm is not None else params.bins
    g_dim = int(bundle.global_vec.shape[0]) if bundle.global_vec is not None else 0
    blocks: dict[str, Optional[dict]] = {}
    for key in _BLOCK_KEYS:
        arr = bundle.block(key)
        if arr is None:
            blocks[key] = None
        elif key in _INT_BLOCKS:
            blocks[key] = {"shape": list(arr.shape), "values": [int(v) for v in arr.ravel()]}
        else:
            blocks[key] = {"shape": list(arr.shape), "values": encode_float_array(arr)}
    return {
        "schema": FEATURES_SCHEMA,
        "seg_categories": int(L),
        "obj_categories": n_cat,
        "bins": k_bins,
        "global_dim": g_dim,
        "params": {
            "rho": encode_float(params.rho),
            "confidence_threshold": encode_float(params.confidence_threshold),
            "log_base": "e",
        },
        "standardized": bundle.standardized,
        "blocks": blocks,
    }


def write_features(bundle: FeatureBundle, params: ExtractionParams, path: PathLike,
                   obj_categories: Optional[int] = None) -> None:
    doc = features_document(bundle, params, obj_categories)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def bundle_from_document(doc: dict, where: str = "features") -> tuple[FeatureBundle, ExtractionParams]:
    """Rebuild (bundle, params) from a feature document, checking all shapes."""
    L = _require(doc, "seg_categories", int, where)
    n_cat = _require(doc, "obj_categories", int, where)
    k_bins = _require(doc, "bins", int, where)
    g_dim = _require(doc, "global_dim", int, where)
    params_doc = _require(doc, "params", dict, where)
    params = ExtractionParams(
        bins=k_bins,
        rho=_number(params_doc.get("rho", 3.0), f"{where}.params.rho"),
        confidence_threshold=_number(
            params_doc.get("confidence_threshold", 0.2),
            f"{where}.params.confidence_threshold",
        ),
    )
    blocks = _require(doc, "blocks", dict, where)
    expected_shapes = {
        "shmf": (L, 7),
        "ssf": (L, 5),
        "sfv": (n_cat,),
        "sfm": (n_cat, n_cat, k_bins),
        "global": (g_dim,),
    }
    arrays: dict[str, np.ndarray] = {}
    for key in _BLOCK_KEYS:
        block = blocks.get(key)
        if block is None:
            continue
        if not isinstance(block, dict):
            raise SchemaError(f"{where}: blocks.{key} must be an object or null")
        shape = block.get("shape")
        values = block.get("values")
        if not isinstance(shape, list) or not all(isinstance(v, int) for v in shape):
            raise SchemaError(f"{where}: blocks.{key}.shape must be an integer list")
        if tuple(shape) != expected_shapes[key]:
            raise SchemaError(
                f"{where}: blocks.{key}.shape is {shape}, metadata implies "
                f"{list(expected_shapes[key])}"
            )
        if not isinstance(values, list):
            raise SchemaError(f"{where}: blocks.{key}.values must be a list")
        size = int(np.prod(shape)) if shape else 0
        if len(values) != size:
            raise SchemaError(
                f"{where}: blocks.{key}.values holds {len(values)} entries, "
                f"shape implies {size}"
            )
        if key in _INT_BLOCKS:
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
                raise SchemaError(f"{where}: blocks.{key}.values must be integers")
            arrays[key] = np.array(values, dtype=np.int64).reshape(shape)
        else:
            arr = decode_float_array(values, f"{where}: blocks.{key}.values")
            arrays[key] = arr.reshape(shape)
    bundle = FeatureBundle(
        shmf=arrays.get("shmf"),
        ssf=arrays.get("ssf"),
        sfv=arrays.get("sfv"),
        sfm=arrays.get("sfm"),
        global_vec=arrays.get("global"),
        standardized=bool(doc.get("standardized", False)),
    )
    return bundle, params


def read_features(path: PathLike) -> tuple[FeatureBundle, ExtractionParams]:
    path = Path(path)
    doc = _load_json(path, FEATURES_SCHEMA)
    return bundle_from_document(doc, where=str(path))


# ---------------------------------------------------------------------------
# Dataset manifests


@dataclass(frozen=True)
class ManifestRow:
    """One dataset sample. Paths are stored relative to the manifest file."""

    sample_id: str
    label: str
    seed: int
    mask_path: str
    detections_path: str
    occluded: int


MANIFEST_COLUMNS = ("id", "label", "seed", "mask", "detections", "occluded")


def write_manifest(rows: Sequence[ManifestRow], config: dict, path: PathLike) -> None:
    """Tab-separated manifest: comment line with config echo, header, then rows."""
    lines = [
        f"# {MANIFEST_SCHEMA} " + json.dumps(config, sort_keys=True, separators=(",", ":")),
        "\t".join(MANIFEST_COLUMNS),
    ]
    for row in rows:
        lines.append(
            "\t".join(
                (
                    row.sample_id,
                    row.label,
                    str(row.seed),
                    row.mask_path,
                    row.detections_path,
                    str(row.occluded),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: PathLike) -> tuple[list[ManifestRow], dict]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith(f"# {MANIFEST_SCHEMA}"):
        raise SchemaError(f"{path}: missing manifest schema line")
    config = json.loads(lines[0][len(MANIFEST_SCHEMA) + 3 :] or "{}")
    if len(lines) < 2 or lines[1].split("\t") != list(MANIFEST_COLUMNS):
        raise SchemaError(f"{path}: manifest header must be {MANIFEST_COLUMNS}")
    rows = []
    for ln, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(MANIFEST_COLUMNS):
            raise SchemaError(f"{path}:{ln}: expected {len(MANIFEST_COLUMNS)} columns")
        rows.append(
            ManifestRow(
                sample_id=parts[0],
                label=parts[1],
                seed=int(parts[2]),
                mask_path=parts[3],
                detections_path=parts[4],
                occluded=int(parts[5]),
            )
        )
    return rows, config
