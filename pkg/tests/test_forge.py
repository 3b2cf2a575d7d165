import json

import numpy as np
import pytest

from ettd.dataset import read_manifest, verify_boxes
from ettd.forge import forge_corpus, load_sources, synthesize_sources, write_sources
from ettd.imaging import load_image, load_mask
from ettd.tamper import Method


def test_corpus_records_are_consistent(forged_corpus):
    root, records, summary = forged_corpus
    assert summary.tampered == 20 and summary.authentic == 6
    assert read_manifest(root / "manifest.jsonl") == records
    assert verify_boxes(records, root) == []
    tampered = [r for r in records if r.is_tampered]
    assert {r.method for r in tampered} == {Method.COPY_MOVE, Method.SPLICING}
    for r in tampered:
        assert r.gt_ocr and r.extra["source_id"]
        assert (r.method is Method.SPLICING) == ("donor_id" in r.extra)
        mask = load_mask(root / r.mask_path)
        assert np.count_nonzero(mask) == sum(b.area for b in r.boxes)


def test_only_pasted_pixels_change(forged_corpus):
    root, records, _ = forged_corpus
    sources = {s.id: s for s in synthesize_sources(6, seed=3)}
    for r in records:
        img = load_image(root / r.image_path)
        original = sources[r.extra["source_id"]].image
        if not r.is_tampered:
            np.testing.assert_array_equal(img, original)
            continue
        outside = load_mask(root / r.mask_path) == 0
        np.testing.assert_array_equal(img[outside], original[outside])


def test_forge_is_deterministic(tmp_path):
    sources = synthesize_sources(3, seed=1)
    a, _ = forge_corpus(sources, tmp_path / "a", 4, 2, seed=5, workers=1)
    b, _ = forge_corpus(sources, tmp_path / "b", 4, 2, seed=5, workers=3)
    assert a == b
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()
    for r in a:
        assert (tmp_path / "a" / r.image_path).read_bytes() == (tmp_path / "b" / r.image_path).read_bytes()


@pytest.mark.parametrize("method,expected", [("copy-move", Method.COPY_MOVE), ("splicing", Method.SPLICING)])
def test_single_method(tmp_path, method, expected):
    recs, _ = forge_corpus(synthesize_sources(3, seed=2), tmp_path, 3, 0, method, blend=False, seed=1)
    assert {r.method for r in recs} == {expected}
    assert not any(r.blend for r in recs)


def test_sources_roundtrip(tmp_path):
    sources = synthesize_sources(2, seed=9)
    write_sources(sources, tmp_path)
    loaded = load_sources(tmp_path)
    assert [s.id for s in loaded] == [s.id for s in sources]
    for a, b in zip(sources, loaded):
        np.testing.assert_array_equal(a.image, b.image)
        assert a.texts == b.texts
    sidecar = json.loads(next(tmp_path.glob("*.json")).read_text("utf-8"))
    assert set(sidecar) >= {"language", "texts"}


def test_no_text_sources_rejected(tmp_path):
    s = synthesize_sources(1)[0]
    bare = type(s)(s.id, s.image, [], s.language)
    with pytest.raises(ValueError):
        forge_corpus([bare], tmp_path, 1)


def test_iteration_cap_forces_hard_paste_fallback(tmp_path):
    recs, summary = forge_corpus(synthesize_sources(2, seed=4), tmp_path, 2, 0, "copy-move", blend=True,
                                 seed=3, iters_per_unknown=1e-9)
    assert summary.blend_fallbacks == [r.id for r in recs]
    assert all(r.extra["blend_fallback"] and not r.blend for r in recs)
