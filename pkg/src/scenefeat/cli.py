"""Command-line client for the scenefeat service.

Every subcommand builds a request, sends it to the service, and formats
the response: by default against an in-process instance of the app, or
against a running server via --server. Exit codes: 0 success, 1 validation
or configuration error, 2 tolerance or assertion failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TOLERANCE = 2


def make_client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _fail(resp) -> int:
    try:
        body = resp.json()
    except Exception:
        body = {}
    if "error" in body:
        message = f"{body['error'].get('type', 'Error')}: {body['error'].get('message', '')}"
    elif "detail" in body:
        message = f"InvalidRequest: {body['detail']}"
    else:
        message = f"HTTP {resp.status_code}"
    print(message, file=sys.stderr)
    return EXIT_ERROR


def _post(client, path: str, payload: dict):
    return client.post(path, json=payload)


def _params_payload(args) -> dict:
    return {
        "bins": args.bins,
        "rho": args.rho,
        "confidence_threshold": args.conf_threshold,
    }


def cmd_extract(args) -> int:
    with make_client(args.server) as client:
        if args.manifest:
            payload = {
                "manifest_path": args.manifest,
                "out_dir": args.out_dir or str(Path(args.manifest).parent / "features"),
                "params": _params_payload(args),
                "threads": args.threads,
            }
            resp = _post(client, "/v1/extract/batch", payload)
            if resp.status_code != 200:
                return _fail(resp)
            body = resp.json()
            print(f"extracted {body['count']} samples into {payload['out_dir']}")
            return EXIT_OK
        payload = {
            "mask_path": args.mask,
            "detections_path": args.detections,
            "labels_path": args.labels,
            "seg_categories": args.seg_categories,
            "params": _params_payload(args),
        }
        resp = _post(client, "/v1/extract", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        doc = body["features"]
        if args.obj_categories is not None and doc["obj_categories"] not in (0, args.obj_categories):
            print(
                f"ConfigError: detections declare {doc['obj_categories']} object "
                f"categories, expected {args.obj_categories}",
                file=sys.stderr,
            )
            return EXIT_ERROR
        out = Path(args.out) if args.out else Path(args.mask).with_suffix(".features.json")
        out.write_text(json.dumps(doc, indent=1) + "\n")
        notes = []
        if body.get("dropped_low_confidence"):
            notes.append(f"{body['dropped_low_confidence']} below confidence threshold")
        if body.get("clamped"):
            notes.append(f"{body['clamped']} boxes clamped")
        print(f"wrote {out}" + (f" ({'; '.join(notes)})" if notes else ""))
        return EXIT_OK


def cmd_invariance(args) -> int:
    with make_client(args.server) as client:
        payload = {"mask_path": args.mask, "seg_categories": args.seg_categories}
        resp = _post(client, "/v1/invariance", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        print(body["text"], end="")
        if args.out:
            Path(args.out).write_text(body["text"])
        return EXIT_OK if body["passed"] else EXIT_TOLERANCE


def cmd_bench(args) -> int:
    with make_client(args.server) as client:
        payload = {
            "seg_categories": args.seg_categories,
            "width": args.width,
            "height": args.height,
            "masks": args.masks,
            "repeats": args.repeats,
            "seed": args.seed,
        }
        resp = _post(client, "/v1/bench", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        print(body["text"], end="")
        return EXIT_OK if body["passed"] else EXIT_TOLERANCE


def cmd_synth(args) -> int:
    with make_client(args.server) as client:
        payload = {
            "out_dir": args.out_dir,
            "samples": args.samples,
            "seed": args.seed,
            "width": args.width,
            "height": args.height,
        }
        resp = _post(client, "/v1/synth", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        print(f"wrote {body['samples']} samples, manifest {body['manifest_path']}")
        return EXIT_OK


def cmd_train(args) -> int:
    with make_client(args.server) as client:
        payload = {
            "manifest_path": args.manifest,
            "features_dir": args.features_dir,
            "out_path": args.out,
            "feature_set": args.feature_set,
            "include_global": args.include_global,
            "learning_rate": args.learning_rate,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "seed": args.seed,
            "hidden1": args.hidden1,
            "hidden2": args.hidden2,
            "two_step": args.two_step,
        }
        resp = _post(client, "/v1/train", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        print(
            f"wrote model {body['model_path']} "
            f"(train accuracy {body['train_accuracy']:.4f}, "
            f"classes: {', '.join(body['classes'])})"
        )
        return EXIT_OK


def cmd_eval(args) -> int:
    with make_client(args.server) as client:
        payload = {
            "model_path": args.model,
            "manifest_path": args.manifest,
            "features_dir": args.features_dir,
        }
        resp = _post(client, "/v1/eval", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        print(body["text"], end="")
        if args.out:
            Path(args.out).write_text(body["text"])
        return EXIT_OK


def cmd_predict(args) -> int:
    with make_client(args.server) as client:
        payload = {"model_path": args.model, "features_path": args.features}
        resp = _post(client, "/v1/predict", payload)
        if resp.status_code != 200:
            return _fail(resp)
        body = resp.json()
        label = body["label"] if body["label"] is not None else f"class_{body['label_index']}"
        probs = " ".join(f"{p:.4f}" for p in body["probabilities"])
        print(f"{label} (index {body['label_index']})")
        print(f"probabilities: {probs}")
        return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("scenefeat.service:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _default_threads() -> int:
    return int(os.environ.get("SCENEFEAT_THREADS", "1"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenefeat",
        description="Semantic scene-feature extraction, synthesis, and classification",
    )
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract features from a mask (+ detections) or a manifest")
    p.add_argument("--mask", help="PGM segmentation mask")
    p.add_argument("--detections", help="detections JSON document")
    p.add_argument("--labels", help="label map JSON for detection category names")
    p.add_argument("--manifest", help="dataset manifest for batch extraction")
    p.add_argument("--out", help="output features file (single mode)")
    p.add_argument("--out-dir", help="output directory (batch mode)")
    p.add_argument("--seg-categories", type=int, default=None, metavar="L")
    p.add_argument("--obj-categories", type=int, default=None, metavar="N")
    p.add_argument("--bins", type=int, default=3, metavar="K")
    p.add_argument("--rho", type=float, default=3.0)
    p.add_argument("--conf-threshold", type=float, default=0.2)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("invariance", help="run the geometric-invariance battery on a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--seg-categories", type=int, default=None, metavar="L")
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_invariance)

    p = sub.add_parser("bench", help="single-pass vs per-category extraction throughput")
    p.add_argument("--seg-categories", type=int, default=37, metavar="L")
    p.add_argument("--width", type=int, default=224)
    p.add_argument("--height", type=int, default=224)
    p.add_argument("--masks", type=int, default=8)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic six-class dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=96)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the fusion classifier on extracted features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--feature-set", choices=["sb", "ob", "sb+ob"], default="sb+ob")
    p.add_argument("--include-global", action="store_true")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden1", type=int, default=256)
    p.add_argument("--hidden2", type=int, default=64)
    p.add_argument("--two-step", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model over a manifest's features")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict the scene class of one features file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"TransportError: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
