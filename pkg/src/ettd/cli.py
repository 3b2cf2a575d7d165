"""Command-line entry point: ``ettd <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 partial batch failure (the
failing ids are listed in the JSON written to ``--out``).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from ettd import __version__
from ettd.config import load_config
from ettd.errors import EttdError

log = logging.getLogger("ettd")

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


def _write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_jsonl(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise EttdError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    return rows


def _write_jsonl(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _pair(text, sep, cast=int):
    parts = [cast(p) for p in text.replace(" ", "").split(sep)]
    return parts


def cmd_forge(args, cfg):
    from ettd.forge import forge_corpus, load_sources, synthesize_sources, write_sources

    if args.sources:
        sources = load_sources(args.sources)
    else:
        sources = synthesize_sources(args.synthetic, seed=args.seed)
        write_sources(sources, Path(args.out) / "sources")
    ratios = tuple(_pair(args.ratios, ",", float))
    records, summary = forge_corpus(
        sources, args.out, args.count, args.authentic, args.method, args.blend,
        seed=args.seed, ratios=ratios, tol=cfg.solver_tol, workers=args.workers,
        iters_per_unknown=cfg.iters_per_unknown,
    )
    _write_json(Path(args.out) / "forge_summary.json", summary.to_dict())
    print(f"forged {summary.tampered} tampered + {summary.authentic} authentic records into {args.out}")
    if summary.blend_fallbacks:
        print(f"{len(summary.blend_fallbacks)} blend(s) fell back to hard paste: {summary.blend_fallbacks}")
    return EXIT_OK


def cmd_render_prompt(args, cfg):
    from ettd import prompts

    if args.kind == "annotation":
        text = prompts.build_annotation_query().text
    elif args.kind == "inference":
        text = prompts.build_inference_query(args.mode)
    elif args.kind == "grounding" and args.manifest is None:
        if not (args.box and args.size):
            raise EttdError("grounding needs --box x0,y0,x1,y1 and --size WxH (or --manifest)")
        from ettd.imaging import BBox

        box = BBox(*_pair(args.box, ","))
        w, h = _pair(args.size.lower(), "x")
        text = prompts.build_grounding_prompt(box, w, h).text
    else:
        return _render_batch(args)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


def _render_batch(args):
    """Grounding prompts or fused-mask images for every tampered record of a manifest."""
    from ettd import prompts
    from ettd.dataset import read_manifest
    from ettd.imaging import load_image, load_mask, render_fused_mask, save_image

    if not args.manifest or not args.out:
        raise EttdError(f"{args.kind} over a corpus needs --manifest and --out")
    manifest = Path(args.manifest)
    root = manifest.parent
    records = [r for r in read_manifest(manifest) if r.is_tampered]
    if args.kind == "grounding":
        rows = []
        for r in records:
            h, w = load_image(root / r.image_path).shape[:2]
            gp = [prompts.build_grounding_prompt(b, w, h) for b in r.boxes]
            rows.append({"id": r.id, "prompts": [g.text for g in gp], "nboxes": [list(g.nbox) for g in gp],
                         "question": prompts.compose_grounded_question(gp[0]) if gp else None})
        _write_jsonl(args.out, rows)
    else:
        out = Path(args.out)
        for r in records:
            fused = render_fused_mask(load_image(root / r.image_path), load_mask(root / r.mask_path))
            save_image(fused, out / f"{r.id}.png")
    print(f"rendered {args.kind} prompts for {len(records)} tampered records")
    return EXIT_OK


def _make_client(args, cfg):
    from ettd.annotator import MockAnnotatorClient, OpenAIChatClient

    if args.mock_fixtures:
        return MockAnnotatorClient(args.mock_fixtures)
    endpoint = args.endpoint or cfg.endpoint
    if not endpoint:
        raise EttdError("no annotator endpoint: pass --endpoint, set it in the config, or use --mock-fixtures")
    return OpenAIChatClient(endpoint, args.model or cfg.model_id, cfg.api_key_env, concurrency=cfg.concurrency)


def cmd_annotate(args, cfg):
    from ettd.annotator import annotate_batch, request_for_record
    from ettd.dataset import read_manifest

    manifest = Path(args.manifest)
    records = read_manifest(manifest)
    client = _make_client(args, cfg)
    model = args.model or cfg.model_id
    responses, failures = annotate_batch(
        records, client, manifest.parent, concurrency=cfg.concurrency,
        max_retries=cfg.max_retries, backoff=cfg.backoff, model_id=model, temperature=cfg.temperature,
    )
    rows = []
    for r in records:
        if r.id in responses:
            req = request_for_record(r, manifest.parent, model_id=model, temperature=cfg.temperature)
            rows.append({"id": r.id, "request_hash": req.content_hash(), **responses[r.id].to_dict()})
    _write_jsonl(args.out, rows)
    if failures:
        _write_json(Path(args.out).with_suffix(".failures.json"), {"failed": failures})
    print(f"annotated {len(rows)} records, {len(failures)} failed")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_filter(args, cfg):
    from dataclasses import replace

    from ettd.annotator import filter_response, parse_response
    from ettd.dataset import read_manifest, rebase, write_manifest

    manifest = Path(args.manifest)
    records = read_manifest(manifest)
    responses = {row["id"]: parse_response(row["raw_text"]) for row in _read_jsonl(args.responses)}
    threshold = args.threshold if args.threshold is not None else cfg.filter_threshold
    kept, rejected, missing = [], [], []
    decisions = []
    for r in records:
        if not r.is_tampered:
            kept.append(r)
            continue
        if r.id not in responses:
            missing.append({"id": r.id, "error": "no annotator response"})
            continue
        d = filter_response(responses[r.id], r.gt_ocr, threshold)
        decisions.append({"id": r.id, "ocr_accuracy": d.ocr_accuracy, "kept": d.kept})
        if d.kept:
            kept.append(replace(r, description=d.final_description))
        else:
            rejected.append(r.id)
    out = Path(args.out)
    write_manifest(rebase(kept, manifest.parent, out.parent), out)
    summary = {"kept": len(kept), "rejected": rejected, "failed": missing, "threshold": threshold,
               "decisions": decisions}
    _write_json(out.with_suffix(".summary.json"), summary)
    print(f"kept {len(kept)} records, rejected {len(rejected)}, missing responses {len(missing)}")
    return EXIT_PARTIAL if missing else EXIT_OK


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_table(args, cfg):
    from ettd.metrics import DEFAULT_STOPWORDS, DEFAULT_VECTORS, WordVectorTable, _data_path

    vectors = args.vectors or cfg.vectors
    stopwords = args.stopwords or cfg.stopwords
    table = WordVectorTable.load(vectors, stopwords)
    meta = {
        "vectors_sha256": _file_digest(vectors or _data_path(DEFAULT_VECTORS)),
        "stopwords_sha256": _file_digest(stopwords or _data_path(DEFAULT_STOPWORDS)),
        "dimension": table.dimension,
    }
    return table, meta


def cmd_score(args, cfg):
    from ettd.dataset import read_manifest
    from ettd.metrics import aggregate, score_sample

    records = {r.id: r for r in read_manifest(args.manifest)}
    preds = {}
    for row in _read_jsonl(args.pred):
        preds[str(row["id"])] = row["output_text"]
    table, meta = _load_table(args, cfg)
    scores, failures = [], []
    for rid, rec in records.items():
        if rid not in preds:
            failures.append({"id": rid, "error": "no prediction"})
            continue
        try:
            scores.append(score_sample(preds[rid], rec, table, max_ed=cfg.classify_max_ed))
        except EttdError as exc:
            failures.append({"id": rid, "error": f"{type(exc).__name__}: {exc}"})
    unknown = sorted(set(preds) - set(records))
    failures.extend({"id": rid, "error": "prediction for unknown id"} for rid in unknown)
    report = {
        "samples": [s.to_dict() for s in scores],
        "aggregate": aggregate(scores).to_dict() if scores else None,
        "failures": failures,
        "settings": {**meta, "classify_max_ed": cfg.classify_max_ed},
    }
    _write_json(args.out, report)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            fieldnames = ["id", "acc_ocr", "sim_para", "final", "classified_tampered", "gt_tampered", "degenerate"]
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            for s in scores:
                writer.writerow({k: getattr(s, k) for k in fieldnames})
    if report["aggregate"]:
        agg = report["aggregate"]
        print(f"scored {agg['count']} samples: final {agg['final']:.2f}, OCR {agg['acc_ocr']:.2f}, "
              f"para {agg['sim_para']:.2f}, cls acc {agg['classification_accuracy']:.2f}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_perturb(args, cfg):
    from ettd.dataset import MANIFEST_NAME
    from ettd.robustness import Distortion, perturb_corpus

    d = Distortion.parse(args.distortion)
    out_manifest = Path(args.out) / MANIFEST_NAME
    summary = perturb_corpus(args.manifest, out_manifest, d, workers=args.workers)
    _write_json(Path(args.out) / "perturb_summary.json", summary)
    print(f"{d.label}: {summary['records_out']}/{summary['records_in']} records written to {args.out}")
    return EXIT_PARTIAL if summary["failed"] else EXIT_OK


def cmd_stats(args, cfg):
    from ettd.dataset import compute_stats, read_manifest

    manifest = Path(args.manifest)
    stats = compute_stats(read_manifest(manifest), manifest.parent)
    _write_json(args.out, stats.to_dict())
    area = "n/a" if stats.forged_area is None else f"{stats.forged_area:.4f}"
    print(f"{stats.tampered} tampered, {stats.authentic} authentic, forged area {area}")
    for w in stats.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def cmd_detect_eval(args, cfg):
    from ettd.dataset import read_manifest
    from ettd.metrics import detection_prf, detection_prf_corpus

    records = {r.id: r for r in read_manifest(args.manifest, check_files=False)}
    preds = {str(row["id"]): [tuple(b) for b in row.get("boxes", [])] for row in _read_jsonl(args.pred)}
    thresh = args.iou if args.iou is not None else cfg.iou_threshold
    pairs, rows = [], []
    for rid, rec in records.items():
        p, g = preds.get(rid, []), list(rec.boxes)
        pairs.append((p, g))
        pr, rc, f1 = detection_prf(p, g, thresh)
        rows.append({"id": rid, "precision": pr, "recall": rc, "f1": f1})
    precision, recall, f1 = detection_prf_corpus(pairs, thresh)
    unknown = sorted(set(preds) - set(records))
    report = {"iou_threshold": thresh, "precision": precision, "recall": recall, "f1": f1,
              "per_image": rows, "failures": [{"id": i, "error": "prediction for unknown id"} for i in unknown]}
    _write_json(args.out, report)
    print(f"P {precision:.3f} R {recall:.3f} F1 {f1:.3f} at IoU {thresh}")
    return EXIT_PARTIAL if unknown else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ettd", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forge", help="synthesize a tampered-text corpus")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--sources", help="directory of source images with JSON text sidecars")
    src.add_argument("--synthetic", type=int, help="generate this many synthetic text cards as sources")
    f.add_argument("--count", type=int, required=True, help="number of tampered images")
    f.add_argument("--authentic", type=int, default=0)
    f.add_argument("--method", choices=("copy-move", "splicing", "mixed"), default="mixed")
    f.add_argument("--blend", action=argparse.BooleanOptionalAction, default=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--ratios", default="0.8,0.1,0.1", help="Train,Test,CD fractions")
    f.add_argument("--workers", type=int, default=4)
    f.add_argument("--out", required=True, help="corpus directory")
    f.set_defaults(func=cmd_forge)

    r = sub.add_parser("render-prompt", help="print or render prompts")
    r.add_argument("kind", choices=("annotation", "inference", "grounding", "fused"))
    r.add_argument("--mode", choices=("fine-tuned", "zero-shot"), default="fine-tuned")
    r.add_argument("--box", help="x0,y0,x1,y1 in pixels")
    r.add_argument("--size", help="WxH of the image")
    r.add_argument("--manifest", help="render for every tampered record of this manifest")
    r.add_argument("--out")
    r.set_defaults(func=cmd_render_prompt)

    a = sub.add_parser("annotate", help="collect anomaly descriptions from a vision-chat annotator")
    a.add_argument("--manifest", required=True)
    a.add_argument("--out", required=True, help="responses JSONL")
    a.add_argument("--mock-fixtures", help="replay responses from this fixtures directory")
    a.add_argument("--endpoint")
    a.add_argument("--model")
    a.set_defaults(func=cmd_annotate)

    fl = sub.add_parser("filter", help="gate responses by OCR accuracy and write the annotated manifest")
    fl.add_argument("--manifest", required=True)
    fl.add_argument("--responses", required=True)
    fl.add_argument("--threshold", type=float)
    fl.add_argument("--out", required=True, help="output manifest path")
    fl.set_defaults(func=cmd_filter)

    s = sub.add_parser("score", help="score model outputs against a manifest")
    s.add_argument("--pred", required=True, help="JSONL of {id, output_text}")
    s.add_argument("--manifest", required=True)
    s.add_argument("--vectors")
    s.add_argument("--stopwords")
    s.add_argument("--csv")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    pt = sub.add_parser("perturb", help="apply a distortion to a corpus")
    pt.add_argument("--manifest", required=True)
    pt.add_argument("--distortion", required=True, help="identity | jpeg:Q | resize:F")
    pt.add_argument("--workers", type=int, default=4)
    pt.add_argument("--out", required=True, help="output corpus directory")
    pt.set_defaults(func=cmd_perturb)

    st = sub.add_parser("stats", help="corpus statistics")
    st.add_argument("--manifest", required=True)
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_stats)

    d = sub.add_parser("detect-eval", help="box precision/recall/F1 against manifest boxes")
    d.add_argument("--pred", required=True, help="JSONL of {id, boxes: [[x0,y0,x1,y1], ...]}")
    d.add_argument("--manifest", required=True)
    d.add_argument("--iou", type=float)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_detect_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (EttdError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
