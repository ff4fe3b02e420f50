"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field


class MaskPayload(BaseModel):
    width: int
    height: int
    seg_categories: int
    pixels: list[int] = Field(description="row-major category indices, 0 = void")


class DetectionRecord(BaseModel):
    category: Union[int, str]
    bbox: tuple[float, float, float, float]
    confidence: float


class DetectionsPayload(BaseModel):
    image_width: int
    image_height: int
    obj_categories: int
    detections: list[DetectionRecord] = []


class ParamsPayload(BaseModel):
    bins: int = 3
    rho: float = 3.0
    confidence_threshold: float = 0.2


class ExtractRequest(BaseModel):
    mask: Optional[MaskPayload] = None
    mask_path: Optional[str] = None
    detections: Optional[DetectionsPayload] = None
    detections_path: Optional[str] = None
    labels_path: Optional[str] = None
    seg_categories: Optional[int] = None
    params: ParamsPayload = ParamsPayload()


class ExtractResponse(BaseModel):
    features: dict
    dropped_low_confidence: int = 0
    clamped: int = 0


class BatchExtractRequest(BaseModel):
    manifest_path: str
    out_dir: str
    params: ParamsPayload = ParamsPayload()
    threads: int = 1


class BatchExtractResponse(BaseModel):
    written: list[str]
    count: int


class InvarianceRequest(BaseModel):
    mask: Optional[MaskPayload] = None
    mask_path: Optional[str] = None
    seg_categories: Optional[int] = None


class TransformCheckModel(BaseModel):
    name: str
    kind: str
    max_hu_delta: float
    ssf_delta: float
    pixel_counts_conserved: Optional[bool]
    h7_sign_flipped: Optional[bool]
    tolerance: float
    passed: bool
    note: str = ""


class InvarianceResponse(BaseModel):
    checks: list[TransformCheckModel]
    passed: bool
    text: str


class BenchRequest(BaseModel):
    seg_categories: int = 37
    width: int = 224
    height: int = 224
    masks: int = 8
    repeats: int = 3
    seed: int = 0


class BenchResponse(BaseModel):
    seg_categories: int
    megapixels: float
    single_pass_mpix_per_s: float
    naive_mpix_per_s: float
    speedup: float
    floor_enforced: bool
    passed: bool
    text: str


class SynthRequest(BaseModel):
    out_dir: str
    samples: int
    seed: int
    width: int = 96
    height: int = 96


class SynthResponse(BaseModel):
    manifest_path: str
    samples: int
    classes: list[str]


FeatureSet = Literal["sb", "ob", "sb+ob"]

FEATURE_SET_PARTS: dict[str, tuple[str, ...]] = {
    "sb": ("shmf", "ssf"),
    "ob": ("sfv", "sfm"),
    "sb+ob": ("shmf", "ssf", "sfv", "sfm"),
}


class TrainRequest(BaseModel):
    manifest_path: str
    features_dir: str
    out_path: str
    feature_set: FeatureSet = "sb+ob"
    include_global: bool = False
    learning_rate: float = 0.05
    epochs: int = 150
    batch_size: int = 32
    seed: int = 0
    hidden1: int = 256
    hidden2: int = 64
    two_step: bool = False


class TrainResponse(BaseModel):
    model_path: str
    classes: list[str]
    train_accuracy: float


class EvalRequest(BaseModel):
    model_path: str
    manifest_path: str
    features_dir: str


class EvalResponse(BaseModel):
    accuracy: float
    samples: int
    confusion: list[list[int]]
    per_class_recall: list[float]
    classes: list[str]
    text: str


class PredictRequest(BaseModel):
    model_path: str
    features: Optional[dict] = None
    features_path: Optional[str] = None


class PredictResponse(BaseModel):
    label_index: int
    label: Optional[str]
    probabilities: list[float]


class HealthResponse(BaseModel):
    status: str
    version: str
    schemas: dict[str, str]


class ErrorBody(BaseModel):
    type: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody
