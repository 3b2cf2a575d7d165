"""Corpus forging: source ingestion, synthetic text cards and batch tampering.

Sources are images with known text regions. A directory source pairs every
``name.png``/``name.jpg`` with an optional ``name.json`` sidecar of the form
``{"language": "EN", "texts": [{"box": [x0, y0, x1, y1], "text": "..."}]}``.
Images without a sidecar can only become authentic records.
"""
from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ettd.dataset import MANIFEST_NAME, TamperRecord, split_assign, write_manifest
from ettd.errors import NonConvergence
from ettd.imaging import BBox, load_image, mask_to_boxes, save_image, save_mask
from ettd.metrics import AUTHENTIC_SENTENCE
from ettd.tamper import DEFAULT_TOL, ITERS_PER_UNKNOWN, Method, TamperOp, apply_op

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
WORDS = (
    "INVOICE", "TOTAL", "AMOUNT", "DATE", "NAME", "PAID", "CASH", "CHANGE", "ITEM", "PRICE",
    "RECEIPT", "ORDER", "STORE", "OPEN", "CLOSED", "SALE", "TAX", "NET", "DUE", "CARD",
    "12.50", "48.00", "2024", "0731", "1999", "$7.25", "No.18", "ID4402", "VOID", "EXIT",
)


@dataclass
class SourceImage:
    id: str
    image: np.ndarray
    texts: list = field(default_factory=list)  # [(BBox, str)]
    language: str = "EN"


def load_sources(directory) -> list:
    sources = []
    for path in sorted(Path(directory).iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        texts, language = [], "EN"
        sidecar = path.with_suffix(".json")
        if sidecar.is_file():
            meta = json.loads(sidecar.read_text("utf-8"))
            language = meta.get("language", "EN")
            texts = [(BBox.from_seq(t["box"]), str(t["text"])) for t in meta.get("texts", [])]
        sources.append(SourceImage(path.stem, load_image(path), texts, language))
    return sources


def synthesize_sources(n, seed=0, cols=4, rows=5, cell=(80, 28), font_size=14) -> list:
    """Plain text cards: one word per grid cell, text boxes equal to the cells."""
    rng = random.Random(seed)
    font = ImageFont.load_default(size=font_size)
    cw, ch = cell
    w, h = cols * cw, rows * ch
    out = []
    for k in range(n):
        bg = np.array([rng.randint(215, 250) for _ in range(3)], dtype=np.float64)
        ramp = np.linspace(-8, 8, w)[None, :, None]
        base = np.clip(bg[None, None, :] + ramp + np.zeros((h, 1, 1)), 0, 255).astype(np.uint8)
        im = Image.fromarray(base)
        draw = ImageDraw.Draw(im)
        ink = tuple(rng.randint(10, 70) for _ in range(3))
        texts = []
        for r in range(rows):
            for c in range(cols):
                word = rng.choice(WORDS)
                x0, y0 = c * cw, r * ch
                draw.text((x0 + 6, y0 + 4), word, fill=ink, font=font)
                texts.append((BBox(x0, y0, x0 + cw, y0 + ch), word))
        out.append(SourceImage(f"synth_{k:04d}", np.asarray(im, dtype=np.uint8).copy(), texts))
    return out


def write_sources(sources, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for src in sources:
        save_image(src.image, directory / f"{src.id}.png")
        meta = {"language": src.language, "texts": [{"box": b.to_list(), "text": t} for b, t in src.texts]}
        (directory / f"{src.id}.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def _fit_origin(box: BBox, size, width, height):
    pw, ph = size
    x = min(max(box.x_min, 0), width - pw)
    y = min(max(box.y_min, 0), height - ph)
    return x, y


def _pick_regions(rng, texts, donor_texts):
    src_box, src_text = rng.choice(donor_texts)
    others = [t for t in texts if t[1] != src_text and t[0] != src_box] or [t for t in texts if t[0] != src_box]
    if not others:
        return src_box, src_text, None
    return src_box, src_text, rng.choice(others)[0]


def _plan(rng, method, acceptor, donor, blend):
    """Choose a TamperOp and the gt OCR; returns None when the sources cannot host one."""
    h, w = acceptor.image.shape[:2]
    src_box, text, dest = _pick_regions(rng, acceptor.texts, donor.texts)
    size = (src_box.width, src_box.height)
    if size[0] > w or size[1] > h:
        return None
    if dest is None:
        origin = (rng.randrange(0, w - size[0] + 1), rng.randrange(0, h - size[1] + 1))
    else:
        origin = _fit_origin(dest, size, w, h)
    donor_id = donor.id if method is Method.SPLICING else None
    if method is Method.COPY_MOVE and origin == (src_box.x_min, src_box.y_min):
        return None
    return TamperOp(method, src_box, origin, donor_id, blend), text


@dataclass
class ForgeSummary:
    tampered: int = 0
    authentic: int = 0
    blend_fallbacks: list = field(default_factory=list)
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "tampered": self.tampered,
            "authentic": self.authentic,
            "blend_fallbacks": self.blend_fallbacks,
            "skipped": self.skipped,
        }


_METHOD_NAMES = {"copy-move": Method.COPY_MOVE, "splicing": Method.SPLICING}


def _methods(method, n):
    if method in ("mixed", None):
        return [Method.COPY_MOVE if i % 2 == 0 else Method.SPLICING for i in range(n)]
    m = _METHOD_NAMES.get(method, method)
    return [Method(m)] * n


def forge_corpus(sources, out_dir, n_tampered, n_authentic=0, method="mixed", blend=True,
                 seed=0, ratios=(0.8, 0.1, 0.1), tol=DEFAULT_TOL, workers=4, iters_per_unknown=ITERS_PER_UNKNOWN):
    """Forge ``n_tampered`` images plus ``n_authentic`` untouched ones into ``out_dir``.

    Returns ``(records, summary)``. A blend that fails to converge falls back
    to a hard paste; the record gets ``blend_fallback: true`` and the id is
    listed in the summary.
    """
    out_dir = Path(out_dir)
    rng = random.Random(seed)
    by_id = {s.id: s for s in sources}
    hosts = [s for s in sources if s.texts]
    if n_tampered and not hosts:
        raise ValueError("no source image carries text annotations; cannot forge")
    summary = ForgeSummary()
    plans = []
    methods = _methods(method, n_tampered)
    attempts = 0
    while len(plans) < n_tampered:
        attempts += 1
        if attempts > 50 * max(n_tampered, 1):
            raise ValueError("could not place the requested number of forgeries in these sources")
        m = methods[len(plans)]
        acceptor = rng.choice(hosts)
        donor = acceptor
        if m is Method.SPLICING:
            pool = [s for s in hosts if s.id != acceptor.id] or hosts
            donor = rng.choice(pool)
        planned = _plan(rng, m, acceptor, donor, blend)
        if planned is None:
            summary.skipped += 1
            continue
        prefix = "cm" if m is Method.COPY_MOVE else "sp"
        plans.append((f"{prefix}_{len(plans):05d}", acceptor, planned[0], planned[1]))

    def run(plan):
        rid, acceptor, op, text = plan
        donor = by_id[op.donor_id].image if op.donor_id else None
        fallback = False
        try:
            unknowns = max(op.source_box.width - 2, 1) * max(op.source_box.height - 2, 1)
            image, mask = apply_op(op, acceptor.image, donor, tol=tol, max_iters=iters_per_unknown * unknowns)
        except NonConvergence as exc:
            log.warning("%s: Poisson blend did not converge (%s); using hard paste", rid, exc)
            image, mask = apply_op(TamperOp(op.method, op.source_box, op.dest_origin, op.donor_id, False),
                                   acceptor.image, donor)
            fallback = True
        img_rel, mask_rel = f"images/{rid}.png", f"masks/{rid}.png"
        save_image(image, out_dir / img_rel)
        save_mask(mask, out_dir / mask_rel)
        extra = {
            "source_id": acceptor.id,
            "source_box": op.source_box.to_list(),
            "dest_origin": list(op.dest_origin),
        }
        if op.donor_id:
            extra["donor_id"] = op.donor_id
        if fallback:
            extra["blend_fallback"] = True
        rec = TamperRecord(
            id=rid, image_path=img_rel, method=op.method, mask_path=mask_rel, blend=op.blend and not fallback,
            language_tags=(acceptor.language,), gt_ocr=text, boxes=tuple(mask_to_boxes(mask)), extra=extra,
        )
        return rec, fallback

    records = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for rec, fallback in pool.map(run, plans):
            records.append(rec)
            if fallback:
                summary.blend_fallbacks.append(rec.id)
    summary.tampered = len(records)

    for i in range(n_authentic):
        src = sources[i % len(sources)]
        rid = f"au_{i:05d}"
        save_image(src.image, out_dir / f"images/{rid}.png")
        records.append(TamperRecord(
            id=rid, image_path=f"images/{rid}.png", method=Method.AUTHENTIC,
            language_tags=(src.language,), description=AUTHENTIC_SENTENCE, extra={"source_id": src.id},
        ))
    summary.authentic = n_authentic
    records = split_assign(records, ratios, seed)
    write_manifest(records, out_dir / MANIFEST_NAME)
    return records, summary
