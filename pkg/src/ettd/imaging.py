"""Raster primitives: RGB buffers, binary masks, boxes and the fused-mask render.

Images are ``uint8`` numpy arrays of shape (H, W, 3); masks are ``uint8``
arrays of shape (H, W) holding only 0 and 255 (255 = tampered).
"""
from __future__ import annotations

import io
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from ettd.errors import BoundsError, DimensionError

TAMPERED = 255
_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class BBox(NamedTuple):
    """Half-open pixel box ``[x_min, x_max) x [y_min, y_max)``."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    def is_valid(self, width: int | None = None, height: int | None = None) -> bool:
        if not (0 <= self.x_min < self.x_max and 0 <= self.y_min < self.y_max):
            return False
        if width is not None and self.x_max > width:
            return False
        if height is not None and self.y_max > height:
            return False
        return True

    def to_list(self) -> list[int]:
        return [int(v) for v in self]

    @classmethod
    def from_seq(cls, seq) -> "BBox":
        x0, y0, x1, y1 = (int(v) for v in seq)
        return cls(x0, y0, x1, y1)


def check_image(image: np.ndarray) -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8:
        raise DimensionError("image must be a uint8 numpy array")
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f"image must have shape (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise DimensionError("image must be at least 1x1")
    return image


def check_mask(mask: np.ndarray, like: np.ndarray | None = None) -> np.ndarray:
    if not isinstance(mask, np.ndarray) or mask.dtype != np.uint8 or mask.ndim != 2:
        raise DimensionError("mask must be a 2-D uint8 numpy array")
    if not np.isin(mask, (0, TAMPERED)).all():
        raise ValueError("mask values must be exactly 0 or 255")
    if like is not None and mask.shape != like.shape[:2]:
        raise DimensionError(f"mask {mask.shape} does not match image {like.shape[:2]}")
    return mask


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # round half away from zero; callers only pass non-negative values
    return np.floor(np.abs(x) + 0.5) * np.sign(x)


def render_fused_mask(image, mask, lambda1=0.5, lambda2=0.5):
    """Blend an image with its tamper mask: ``lambda1 * I + lambda2 * M``.

    The single-channel mask is broadcast over the three colour channels and
    the result is rounded half away from zero, then clamped to bytes.
    """
    check_image(image)
    check_mask(mask, like=image)
    if not (0.0 <= lambda1 <= 1.0 and 0.0 <= lambda2 <= 1.0):
        raise ValueError("lambda1 and lambda2 must lie in [0, 1]")
    fused = lambda1 * image.astype(np.float64) + lambda2 * mask.astype(np.float64)[:, :, None]
    return np.clip(_round_half_up(fused), 0, 255).astype(np.uint8)


def mask_to_boxes(mask, min_area=4):
    """Bounding boxes of the 4-connected tampered components, sorted by (y, x)."""
    check_mask(mask)
    labels, count = ndimage.label(mask == TAMPERED, structure=_FOUR_CONNECTED)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    boxes = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or areas[idx] < min_area:
            continue
        ys, xs = sl
        boxes.append(BBox(xs.start, ys.start, xs.stop, ys.stop))
    boxes.sort(key=lambda b: (b.y_min, b.x_min))
    return boxes


def boxes_to_mask(boxes, width, height):
    mask = np.zeros((height, width), dtype=np.uint8)
    for b in boxes:
        mask[b.y_min:b.y_max, b.x_min:b.x_max] = TAMPERED
    return mask


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def crop(image, box: BBox):
    check_image(image)
    h, w = image.shape[:2]
    if not box.is_valid(w, h):
        raise BoundsError(f"box {tuple(box)} outside {w}x{h} image")
    return image[box.y_min:box.y_max, box.x_min:box.x_max].copy()


def paste(dst, patch, at):
    """Return a copy of ``dst`` with ``patch`` written at ``at = (x, y)``."""
    check_image(dst)
    check_image(patch)
    x, y = at
    ph, pw = patch.shape[:2]
    h, w = dst.shape[:2]
    if x < 0 or y < 0 or x + pw > w or y + ph > h:
        raise BoundsError(f"{pw}x{ph} patch at ({x}, {y}) exceeds {w}x{h} image")
    out = dst.copy()
    out[y:y + ph, x:x + pw] = patch
    return out


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def save_image(image, path) -> None:
    check_image(image)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        mask = np.asarray(im.convert("L"), dtype=np.uint8).copy()
    return check_mask(mask)


def save_mask(mask, path) -> None:
    check_mask(mask)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask).save(path, format="PNG")


def encode_png(array) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()
