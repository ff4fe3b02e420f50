"""FastAPI service wrapping the extraction, synthesis, and training pipeline.

All feature values cross the wire exactly: real-valued blocks as
hexadecimal float literals inside the features document, count blocks as
integers. Paths in requests refer to the server's filesystem (the service
is a local tool; the CLI talks to it in-process by default).
"""

from __future__ import annotations

import dataclasses

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, bench, classifier, fileio, pipeline, synth
from ..classifier import build_bundle
from ..objfeat import sfm, sfv
from ..types import (
    ClippingError,
    ConfigError,
    ExtractionParams,
    MaskValidationError,
    SchemaError,
    SegmentationMask,
    TrainingError,
    validate_mask,
)
from . import schemas

_ERROR_STATUS = {
    MaskValidationError: 400,
    SchemaError: 400,
    ConfigError: 400,
    ClippingError: 400,
    TrainingError: 400,
    FileNotFoundError: 400,
}


def _params(p: schemas.ParamsPayload) -> ExtractionParams:
    return ExtractionParams(bins=p.bins, rho=p.rho, confidence_threshold=p.confidence_threshold)


def _mask_from_payload(payload: schemas.MaskPayload) -> SegmentationMask:
    if len(payload.pixels) != payload.width * payload.height:
        raise MaskValidationError(
            f"mask payload holds {len(payload.pixels)} pixels, dimensions imply "
            f"{payload.width * payload.height}"
        )
    pixels = np.array(payload.pixels, dtype=np.int64).reshape(payload.height, payload.width)
    return validate_mask(SegmentationMask(pixels, payload.seg_categories))


def _resolve_mask(mask, mask_path, seg_categories, required: bool = True):
    if mask is not None and mask_path is not None:
        raise ConfigError("pass an inline mask or mask_path, not both")
    if mask is None and mask_path is None:
        if required:
            raise ConfigError("a mask (inline or mask_path) is required")
        return None
    if mask is not None:
        return _mask_from_payload(mask)
    return fileio.load_mask(mask_path, seg_categories)


def create_app() -> FastAPI:
    app = FastAPI(title="scenefeat", version=__version__)

    def _error_response(status: int):
        async def handler(request, exc):
            return JSONResponse(
                status_code=status,
                content={"error": {"type": type(exc).__name__, "message": str(exc)}},
            )

        return handler

    for klass, status in _ERROR_STATUS.items():
        app.add_exception_handler(klass, _error_response(status))

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(
            status="ok",
            version=__version__,
            schemas={
                "detections": fileio.DETECTIONS_SCHEMA,
                "features": fileio.FEATURES_SCHEMA,
                "labels": fileio.LABELS_SCHEMA,
                "manifest": fileio.MANIFEST_SCHEMA,
                "model": classifier.MODEL_SCHEMA,
            },
        )

    @app.post("/v1/extract", response_model=schemas.ExtractResponse)
    def extract(req: schemas.ExtractRequest):
        params = _params(req.params)
        mask = _resolve_mask(req.mask, req.mask_path, req.seg_categories, required=False)
        labels = fileio.load_labels(req.labels_path) if req.labels_path else None
        detections = None
        dropped = clamped = 0
        if req.detections is not None and req.detections_path is not None:
            raise ConfigError("pass inline detections or detections_path, not both")
        if req.detections is not None:
            loaded = fileio.build_detection_set(
                [r.model_dump() for r in req.detections.detections],
                image_width=req.detections.image_width,
                image_height=req.detections.image_height,
                obj_categories=req.detections.obj_categories,
                confidence_threshold=params.confidence_threshold,
                labels=labels,
            )
            detections, dropped, clamped = (
                loaded.detections, loaded.dropped_low_confidence, loaded.clamped)
        elif req.detections_path is not None:
            loaded = fileio.load_detections(
                req.detections_path, confidence_threshold=params.confidence_threshold,
                labels=labels)
            detections, dropped, clamped = (
                loaded.detections, loaded.dropped_low_confidence, loaded.clamped)
        if mask is None and detections is None:
            raise ConfigError("a mask, detections, or both are required")
        if mask is not None:
            bundle = pipeline.extract_bundle(mask, detections, params)
        else:
            bundle = build_bundle(
                sfv=sfv(detections), sfm=sfm(detections, bins=params.bins, rho=params.rho))
        return schemas.ExtractResponse(
            features=fileio.features_document(bundle, params),
            dropped_low_confidence=dropped,
            clamped=clamped,
        )

    @app.post("/v1/extract/batch", response_model=schemas.BatchExtractResponse)
    def extract_batch(req: schemas.BatchExtractRequest):
        written = pipeline.batch_extract(
            req.manifest_path, req.out_dir, params=_params(req.params), threads=req.threads
        )
        return schemas.BatchExtractResponse(written=written, count=len(written))

    @app.post("/v1/invariance", response_model=schemas.InvarianceResponse)
    def invariance(req: schemas.InvarianceRequest):
        mask = _resolve_mask(req.mask, req.mask_path, req.seg_categories)
        report = pipeline.invariance_battery(mask)
        return schemas.InvarianceResponse(
            checks=[schemas.TransformCheckModel(**dataclasses.asdict(c)) for c in report.checks],
            passed=report.passed,
            text=pipeline.format_invariance_report(report),
        )

    @app.post("/v1/bench", response_model=schemas.BenchResponse)
    def run_bench(req: schemas.BenchRequest):
        report = bench.run_benchmark(
            seg_categories=req.seg_categories,
            width=req.width,
            height=req.height,
            masks=req.masks,
            repeats=req.repeats,
            seed=req.seed,
        )
        return schemas.BenchResponse(
            seg_categories=report.seg_categories,
            megapixels=report.megapixels,
            single_pass_mpix_per_s=report.single_pass_mpix_per_s,
            naive_mpix_per_s=report.naive_mpix_per_s,
            speedup=report.speedup,
            floor_enforced=report.floor_enforced,
            passed=report.passed,
            text=bench.format_bench_report(report),
        )

    @app.post("/v1/synth", response_model=schemas.SynthResponse)
    def synthesize(req: schemas.SynthRequest):
        config = synth.default_dataset_config(
            samples=req.samples, seed=req.seed, width=req.width, height=req.height
        )
        manifest_path = synth.generate_dataset(config, req.out_dir)
        return schemas.SynthResponse(
            manifest_path=str(manifest_path),
            samples=req.samples,
            classes=[t.label for t in config.templates],
        )

    @app.post("/v1/train", response_model=schemas.TrainResponse)
    def train_model(req: schemas.TrainRequest):
        dataset, classes = pipeline.load_feature_dataset(req.manifest_path, req.features_dir)
        parts = schemas.FEATURE_SET_PARTS[req.feature_set]
        if req.include_global:
            parts = parts + ("global",)
        config = classifier.TrainConfig(
            learning_rate=req.learning_rate,
            epochs=req.epochs,
            batch_size=req.batch_size,
            seed=req.seed,
            hidden1=req.hidden1,
            hidden2=req.hidden2,
            two_step=req.two_step,
            feature_parts=parts,
        )
        model = classifier.train(dataset, config, class_names=classes)
        classifier.write_model(model, req.out_path)
        report = classifier.evaluate(model, dataset)
        return schemas.TrainResponse(
            model_path=req.out_path, classes=classes, train_accuracy=report.accuracy
        )

    @app.post("/v1/eval", response_model=schemas.EvalResponse)
    def eval_model(req: schemas.EvalRequest):
        model = classifier.read_model(req.model_path)
        dataset, classes = pipeline.load_feature_dataset(req.manifest_path, req.features_dir)
        report = classifier.evaluate(model, dataset)
        names = list(model.class_names) if model.class_names else classes
        return schemas.EvalResponse(
            accuracy=report.accuracy,
            samples=report.samples,
            confusion=[[int(v) for v in row] for row in report.confusion],
            per_class_recall=[float(v) for v in report.per_class_recall],
            classes=names,
            text=classifier.format_eval_report(report, names),
        )

    @app.post("/v1/predict", response_model=schemas.PredictResponse)
    def predict_one(req: schemas.PredictRequest):
        model = classifier.read_model(req.model_path)
        if (req.features is None) == (req.features_path is None):
            raise ConfigError("exactly one of features or features_path is required")
        if req.features is not None:
            if req.features.get("schema") != fileio.FEATURES_SCHEMA:
                raise SchemaError(
                    f"features document schema must be {fileio.FEATURES_SCHEMA!r}"
                )
            bundle, _ = fileio.bundle_from_document(req.features)
        else:
            bundle, _ = fileio.read_features(req.features_path)
        label_index, probs = classifier.predict(model, bundle)
        label = None
        if model.class_names and label_index < len(model.class_names):
            label = model.class_names[label_index]
        return schemas.PredictResponse(
            label_index=label_index, label=label, probabilities=[float(p) for p in probs]
        )

    return app


app = create_app()
