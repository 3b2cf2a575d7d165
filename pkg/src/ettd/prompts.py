"""Prompt builders: the annotation query, inference queries and grounding prompt."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources

from ettd.errors import BoundsError
from ettd.imaging import BBox

ANNOTATION_QUERY_RESOURCE = "annotation_query_v1.txt"
PERSPECTIVES = (
    "Edge artifacts",
    "Unnatural texture appearance",
    "Inconsistent font",
    "Inconsistent alignment",
    "Text incoherence",
    "Lack of integration",
)
FINE_TUNED_QUERY = "What is the tampered text in this image, why?"
ZERO_SHOT_QUERY = (
    'Does this image have tampered text on it? Please start your answer with "Yes" or "No". '
    'If "Yes", then recognize the tampered text and describe the anomaly of the tampered region.'
)
GROUNDING_TEMPLATE = "The suspected tampered text <box>[[{}, {}, {}, {}]]</box>"
NORM_SCALE = 1000


class QueryMode(str, enum.Enum):
    FINE_TUNED = "fine-tuned"
    ZERO_SHOT = "zero-shot"


@dataclass(frozen=True)
class AnnotationQuery:
    text: str
    perspectives: tuple[str, ...] = PERSPECTIVES


@dataclass(frozen=True)
class GroundingPrompt:
    text: str
    nbox: tuple[int, int, int, int]


@lru_cache(maxsize=1)
def _annotation_text() -> str:
    return resources.files("ettd").joinpath("data", ANNOTATION_QUERY_RESOURCE).read_text("utf-8")


def build_annotation_query() -> AnnotationQuery:
    return AnnotationQuery(_annotation_text())


def build_inference_query(mode=QueryMode.FINE_TUNED) -> str:
    mode = QueryMode(mode)
    return FINE_TUNED_QUERY if mode is QueryMode.FINE_TUNED else ZERO_SHOT_QUERY


def _normalize(coord: int, extent: int) -> int:
    value = math.floor(Fraction(coord * NORM_SCALE, extent) + Fraction(1, 2))
    return min(max(value, 0), NORM_SCALE)


def normalize_box(box: BBox, image_w: int, image_h: int) -> tuple[int, int, int, int]:
    """Map pixel coordinates onto the 0-1000 grid, rounding half away from zero."""
    if image_w < 1 or image_h < 1 or not box.is_valid(image_w, image_h):
        raise BoundsError(f"box {tuple(box)} invalid for a {image_w}x{image_h} image")
    return (
        _normalize(box.x_min, image_w),
        _normalize(box.y_min, image_h),
        _normalize(box.x_max, image_w),
        _normalize(box.y_max, image_h),
    )


def build_grounding_prompt(box: BBox, image_w: int, image_h: int) -> GroundingPrompt:
    nbox = normalize_box(box, image_w, image_h)
    return GroundingPrompt(GROUNDING_TEMPLATE.format(*nbox), nbox)


def compose_grounded_question(grounding: GroundingPrompt | str, question: str | None = None) -> str:
    """Chat-turn text with the auxiliary prompt placed before the question."""
    aux = grounding.text if isinstance(grounding, GroundingPrompt) else grounding
    return f"{aux}\n{question or FINE_TUNED_QUERY}"
