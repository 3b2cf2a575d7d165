import hashlib
import re
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ettd.errors import BoundsError
from ettd.imaging import BBox
from ettd.prompts import (
    PERSPECTIVES, QueryMode, build_annotation_query, build_grounding_prompt, build_inference_query,
    compose_grounded_question,
)

ANNOTATION_SHA256 = "7d8096408e74d09444f7d5066d5030f65d1ed9dee2614e2426921c1a48c03c54"


def exact_norm(v, extent):
    q = Fraction(v * 1000, extent)
    n = q.numerator // q.denominator
    if q - n >= Fraction(1, 2):
        n += 1
    return min(max(n, 0), 1000)


def test_annotation_query_pinned():
    text = build_annotation_query().text
    assert hashlib.sha256(text.encode("utf-8")).hexdigest() == ANNOTATION_SHA256
    assert build_annotation_query() == build_annotation_query()


def test_annotation_query_contents():
    q = build_annotation_query()
    assert "Edge artifacts" in q.text
    assert re.findall(r"^(\d)\. ", q.text, flags=re.M) == ["1", "2", "3", "4", "5", "6"]
    assert "First, recognize the tampered text and output its OCR result." in q.text
    assert q.text.rstrip().endswith("always assume that you are only observing the input image A.")
    assert "Don't mention the image B" in q.text
    assert q.perspectives == PERSPECTIVES
    for i, label in enumerate(PERSPECTIVES, 1):
        assert f"{i}. {label}." in q.text


def test_inference_queries():
    assert build_inference_query(QueryMode.FINE_TUNED) == "What is the tampered text in this image, why?"
    zs = build_inference_query("zero-shot")
    assert zs.startswith("Does this image have tampered text on it?")
    assert zs.endswith("describe the anomaly of the tampered region.")
    assert zs != build_inference_query("fine-tuned")


@pytest.mark.parametrize("box,w,h,expected", [
    ((500, 250, 1500, 750), 2000, 1000, (250, 250, 750, 750)),
    ((0, 0, 1000, 1000), 1000, 1000, (0, 0, 1000, 1000)),
    ((123, 45, 381, 222), 640, 480, (192, 94, 595, 463)),
])
def test_grounding_golden(box, w, h, expected):
    gp = build_grounding_prompt(BBox(*box), w, h)
    assert gp.nbox == expected
    assert gp.text == "The suspected tampered text <box>[[{}, {}, {}, {}]]</box>".format(*expected)
    assert gp.nbox == tuple(exact_norm(v, e) for v, e in zip(box, (w, h, w, h)))


def test_grounding_rejects_bad_box():
    with pytest.raises(BoundsError):
        build_grounding_prompt(BBox(10, 10, 700, 20), 640, 480)
    with pytest.raises(BoundsError):
        build_grounding_prompt(BBox(10, 10, 5, 20), 640, 480)


@given(
    st.integers(1, 3000), st.integers(1, 3000), st.integers(1, 8),
    st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
)
def test_grounding_scale_invariance(w, h, k, a, b, c, d):
    x0 = min(int(a * (w - 1)), w - 1)
    y0 = min(int(b * (h - 1)), h - 1)
    x1 = x0 + 1 + int(c * (w - x0 - 1))
    y1 = y0 + 1 + int(d * (h - y0 - 1))
    base = build_grounding_prompt(BBox(x0, y0, x1, y1), w, h).nbox
    scaled = build_grounding_prompt(BBox(k * x0, k * y0, k * x1, k * y1), k * w, k * h).nbox
    assert all(abs(p - q) <= 1 for p, q in zip(base, scaled))
    assert 0 <= base[0] <= base[2] <= 1000 and 0 <= base[1] <= base[3] <= 1000


def test_grounded_question_order():
    gp = build_grounding_prompt(BBox(0, 0, 10, 10), 100, 100)
    text = compose_grounded_question(gp)
    assert text.index("<box>") < text.index("What is the tampered text")
