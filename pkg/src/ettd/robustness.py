"""Distortion suite for robustness runs: JPEG recompression and downscaling."""
from __future__ import annotations

import io
import math
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import PIL
from PIL import Image, features

from ettd.dataset import read_manifest, write_manifest
from ettd.errors import CodecError
from ettd.imaging import check_image, check_mask, load_image, load_mask, mask_to_boxes, save_image, save_mask

JPEG_SUBSAMPLING = "4:2:0"


def codec_identity() -> str:
    return f"Pillow {PIL.__version__}; libjpeg {features.version('jpg')}"


@dataclass(frozen=True)
class Distortion:
    kind: str  # "identity" | "jpeg" | "resize"
    parameter: float = 1.0

    def __post_init__(self):
        if self.kind == "jpeg":
            if not (1 <= self.parameter <= 100) or self.parameter != int(self.parameter):
                raise ValueError(f"JPEG quality must be an integer in [1, 100], got {self.parameter}")
        elif self.kind == "resize":
            if not (0.0 < self.parameter <= 1.0):
                raise ValueError(f"resize factor must lie in (0, 1], got {self.parameter}")
        elif self.kind != "identity":
            raise ValueError(f"unknown distortion kind {self.kind!r}")

    @classmethod
    def parse(cls, spec: str) -> "Distortion":
        """``identity``, ``jpeg:75`` or ``resize:0.5``."""
        kind, _, value = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "identity":
            return cls("identity")
        if not value:
            raise ValueError(f"distortion {spec!r} needs a parameter")
        return cls(kind, int(value) if kind == "jpeg" else float(value))

    @property
    def label(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "jpeg":
            return f"jpeg{int(self.parameter)}"
        return f"resize{self.parameter:g}"

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "codec": codec_identity()}
        if self.kind == "jpeg":
            d.update(quality=int(self.parameter), subsampling=JPEG_SUBSAMPLING, progressive=False)
        elif self.kind == "resize":
            d.update(factor=self.parameter, image_filter="bilinear", mask_filter="nearest")
        return d


PAPER_GRID = (
    Distortion("jpeg", 75),
    Distortion("jpeg", 50),
    Distortion("resize", 0.75),
    Distortion("resize", 0.5),
)


def scaled_size(width, height, factor):
    def r(v):
        return max(1, math.floor(v * factor + 0.5))

    return r(width), r(height)


def jpeg_roundtrip(image, quality):
    buf = io.BytesIO()
    try:
        Image.fromarray(image).save(buf, format="JPEG", quality=int(quality), subsampling=2,
                                    progressive=False, optimize=False)
        buf.seek(0)
        with Image.open(buf) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except (OSError, ValueError) as exc:
        raise CodecError(f"JPEG round trip failed: {exc}") from exc


def apply(image, d: Distortion):
    check_image(image)
    if d.kind == "identity":
        return image.copy()
    if d.kind == "jpeg":
        return jpeg_roundtrip(image, d.parameter)
    h, w = image.shape[:2]
    size = scaled_size(w, h, d.parameter)
    resized = Image.fromarray(image).resize(size, Image.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.uint8).copy()


def resize_mask(mask, factor):
    check_mask(mask)
    h, w = mask.shape
    size = scaled_size(w, h, factor)
    return np.asarray(Image.fromarray(mask).resize(size, Image.Resampling.NEAREST), dtype=np.uint8).copy()


def _perturb_record(rec, src_root, dst_root, d):
    img_rel = f"images/{rec.id}.png"
    if d.kind == "identity" and Path(rec.image_path).suffix.lower() == ".png":
        (dst_root / "images").mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src_root / rec.image_path, dst_root / img_rel)
    else:
        save_image(apply(load_image(src_root / rec.image_path), d), dst_root / img_rel)
    changes = {"image_path": img_rel, "distortion": d.to_dict()}
    if rec.mask_path is not None:
        mask_rel = f"masks/{rec.id}.png"
        if d.kind == "resize":
            mask = resize_mask(load_mask(src_root / rec.mask_path), d.parameter)
            save_mask(mask, dst_root / mask_rel)
            changes["boxes"] = tuple(mask_to_boxes(mask))
        else:
            (dst_root / "masks").mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src_root / rec.mask_path, dst_root / mask_rel)
        changes["mask_path"] = mask_rel
    out = replace(rec, **changes)
    out.validate()
    return out


def perturb_corpus(manifest_in, manifest_out, d: Distortion, workers=4) -> dict:
    """Distort every record of a corpus into the directory of ``manifest_out``.

    Per-record failures are collected, not raised; failed records are left
    out of the new manifest.
    """
    manifest_in, manifest_out = Path(manifest_in), Path(manifest_out)
    src_root, dst_root = manifest_in.parent, manifest_out.parent
    records = read_manifest(manifest_in)

    def work(rec):
        try:
            return _perturb_record(rec, src_root, dst_root, d), None
        except (OSError, CodecError, ValueError) as exc:
            return rec, f"{type(exc).__name__}: {exc}"

    out, failed = [], []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for rec, err in pool.map(work, records):
            if err is None:
                out.append(rec)
            else:
                failed.append({"id": rec.id, "error": err})
    write_manifest(out, manifest_out)
    return {
        "distortion": d.to_dict(),
        "records_in": len(records),
        "records_out": len(out),
        "failed": failed,
    }
