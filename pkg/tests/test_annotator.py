import base64
import io
import json

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from ettd.annotator import (
    AnnotatorRequest, AnnotatorResponse, MockAnnotatorClient, OpenAIChatClient, annotate, annotate_batch,
    authentic_annotation, build_request, chat_body, extract_content, filter_response, parse_response,
    send_with_retries,
)
from ettd.dataset import TamperRecord
from ettd.errors import EmptyGroundTruth, MalformedResponse, TransportError
from ettd.imaging import render_fused_mask, save_image, save_mask
from ettd.prompts import build_annotation_query

from conftest import gradient_image
from test_kernels import recursive_levenshtein

GT100 = ("ABCDEFGHIJ" * 10)


def with_errors(gt, k):
    return "#" * k + gt[k:]


def reply(ocr, tail="has blurred edges and a slightly different font."):
    return f'The tampered text is "{ocr}". Its region {tail}'


@pytest.fixture
def record_on_disk(tmp_path):
    img = gradient_image(32, 24)
    mask = np.zeros((24, 32), np.uint8)
    mask[4:12, 6:20] = 255
    save_image(img, tmp_path / "images" / "t1.png")
    save_mask(mask, tmp_path / "masks" / "t1.png")
    rec = TamperRecord(id="t1", image_path="images/t1.png", method="CopyMove", split="Train",
                       mask_path="masks/t1.png", gt_ocr="HELLO", description="x", boxes=((6, 4, 20, 12),))
    return tmp_path, rec, img, mask


@pytest.mark.parametrize("raw,ocr", [
    (reply("HELLO"), "HELLO"),
    ("No quotes here. But \"later\" there are.", ""),
    ("The text “Café” looks pasted.", "Café"),
    ('Text "A.B" is odd. Then "C".', "A.B"),
    ('Unclosed "quote. And "x".', "quote. And "),
    ("", ""),
])
def test_parse_cases(raw, ocr):
    resp = parse_response(raw)
    assert resp.parsed_ocr == ocr
    assert resp.reassemble() == raw


def test_parse_description_excludes_quote():
    resp = parse_response(reply("HELLO"))
    assert "HELLO" not in resp.parsed_description
    assert resp.parsed_description.startswith("The tampered text is")


def test_parse_rejects_non_text():
    with pytest.raises(MalformedResponse):
        parse_response(None)


@given(st.text(max_size=80))
def test_parse_reassemble_lossless(raw):
    assert parse_response(raw).reassemble() == raw


def test_response_dict_roundtrip():
    resp = parse_response(reply("HELLO"))
    assert AnnotatorResponse.from_dict(json.loads(json.dumps(resp.to_dict()))) == resp


def test_extract_content():
    assert extract_content(chat_body("hi")) == "hi"
    assert extract_content({"choices": [{"message": {"content": [{"type": "text", "text": "a"}, {"text": "b"}]}}]}) == "ab"
    for bad in ({}, {"choices": []}, {"choices": [{"message": {"content": 3}}]}, []):
        with pytest.raises(MalformedResponse):
            extract_content(bad)


@pytest.mark.parametrize("ocr,gt,acc,kept", [
    ("INVOICE", "INVOICE", 1.0, True),
    ("", "INVOICE", 0.0, False),
    ("INV0ICE", "INVOICE", 6 / 7, True),
])
def test_filter_examples(ocr, gt, acc, kept):
    d = filter_response(parse_response(reply(ocr)), gt)
    assert d.ocr_accuracy == pytest.approx(acc, abs=1e-15)
    assert d.kept is kept


@pytest.mark.parametrize("k,acc,kept", [(21, 0.79, False), (20, 0.80, True), (19, 0.81, True)])
def test_filter_threshold_boundary(k, acc, kept):
    ocr = with_errors(GT100, k)
    assert recursive_levenshtein(ocr, GT100) == k
    d = filter_response(parse_response(reply(ocr)), GT100)
    assert d.ocr_accuracy == pytest.approx(acc, abs=1e-12)
    assert d.kept is kept
    if kept:
        assert GT100 in d.final_description and ocr not in d.final_description


def test_filter_empty_gt():
    with pytest.raises(EmptyGroundTruth):
        filter_response(parse_response(reply("X")), "")


def test_substitution_replaces_repeated_quotes():
    raw = 'The text "INV0ICE" is forged. The word "INV0ICE" has sharper edges than INV0ICE nearby.'
    d = filter_response(parse_response(raw), "INVOICE")
    assert d.kept
    assert d.final_description == (
        'The text "INVOICE" is forged. The word "INVOICE" has sharper edges than INV0ICE nearby.')


@given(st.text(alphabet="ABCDEFG", min_size=1, max_size=10), st.text(alphabet="ABCDEFG0", min_size=1, max_size=10))
def test_kept_never_contains_divergent_quote(gt, ocr):
    d = filter_response(parse_response(reply(ocr) + f' Again "{ocr}".'), gt)
    if d.kept:
        assert f'"{gt}"' in d.final_description
        if ocr != gt:
            assert f'"{ocr}"' not in d.final_description


@given(st.integers(0, 10), st.integers(0, 10))
def test_filter_monotone(ka, kb):
    a = filter_response(parse_response(reply(with_errors(GT100[:10], ka))), GT100[:10])
    b = filter_response(parse_response(reply(with_errors(GT100[:10], kb))), GT100[:10])
    if ka <= kb and b.kept:
        assert a.kept


def test_authentic_annotation():
    text = authentic_annotation()
    assert text == "There is no tampered text in this image."
    assert len(text) == 40
    assert text.startswith("There is no") and text == authentic_annotation()


def test_request_shape_and_payload():
    img = gradient_image(8, 6)
    mask = np.zeros((6, 8), np.uint8)
    mask[1:3, 2:5] = 255
    req = build_request(img, mask)
    assert req.query == build_annotation_query().text
    np.testing.assert_array_equal(req.images[0], img)
    np.testing.assert_array_equal(req.images[1], render_fused_mask(img, mask))
    payload = req.to_payload()
    parts = payload["messages"][0]["content"]
    assert [p["type"] for p in parts] == ["text", "image_url", "image_url"]
    assert payload["temperature"] == 0.0
    png = base64.b64decode(parts[1]["image_url"]["url"].split(",", 1)[1])
    np.testing.assert_array_equal(np.asarray(Image.open(io.BytesIO(png))), img)
    with pytest.raises(ValueError):
        AnnotatorRequest("q", (img,))


def test_content_hash_depends_on_pixels():
    img = gradient_image(8, 6)
    mask = np.zeros((6, 8), np.uint8)
    a = build_request(img, mask).content_hash()
    assert a == build_request(img.copy(), mask.copy()).content_hash()
    mask[0, 0] = 255
    assert a != build_request(img, mask).content_hash()


def test_mock_client_annotate(record_on_disk):
    root, rec, img, mask = record_on_disk
    key = build_request(img, mask).content_hash()
    MockAnnotatorClient.write_fixtures(root / "fx" / "a.json", {key: chat_body(reply("HELLO"))})
    client = MockAnnotatorClient(root / "fx")
    resp = annotate(rec, client, root)
    assert resp.parsed_ocr == "HELLO" and client.calls == 1
    other = MockAnnotatorClient(fixtures={})
    with pytest.raises(TransportError) as info:
        annotate(rec, other, root, sleep=lambda s: None)
    assert not info.value.retryable and other.calls == 1


def test_annotate_batch_skips_authentic_and_collects_failures(record_on_disk):
    root, rec, img, mask = record_on_disk
    auth = TamperRecord(id="a1", image_path="images/t1.png", method="Authentic", split="Train",
                        description=authentic_annotation())
    key = build_request(img, mask).content_hash()
    ok, failures = annotate_batch([rec, auth], MockAnnotatorClient(fixtures={key: chat_body(reply("HELLO"))}), root)
    assert list(ok) == ["t1"] and failures == []
    ok, failures = annotate_batch([rec], MockAnnotatorClient(fixtures={}), root)
    assert ok == {} and failures[0]["id"] == "t1"


class Flaky:
    def __init__(self, failures, retryable=True):
        self.failures, self.retryable, self.calls = failures, retryable, 0

    def complete(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise TransportError("boom", retryable=self.retryable)
        return chat_body("ok")


def test_retries_with_exponential_backoff():
    waits = []
    client = Flaky(2)
    assert send_with_retries(client, None, max_retries=3, backoff=0.5, sleep=waits.append) == chat_body("ok")
    assert waits == [0.5, 1.0] and client.calls == 3


def test_retries_exhausted_and_non_retryable():
    waits = []
    with pytest.raises(TransportError):
        send_with_retries(Flaky(10), None, max_retries=2, backoff=1, sleep=waits.append)
    assert waits == [1, 2]
    client = Flaky(1, retryable=False)
    with pytest.raises(TransportError):
        send_with_retries(client, None, sleep=waits.append)
    assert client.calls == 1


def test_http_client_against_mock_transport(monkeypatch):
    seen = []

    def handler(request):
        seen.append(request)
        body = json.loads(request.content)
        assert body["model"] == "m1" and len(body["messages"][0]["content"]) == 3
        return httpx.Response(200, json=chat_body(reply("HELLO")))

    monkeypatch.setenv("ETTD_TEST_KEY", "secret")
    client = OpenAIChatClient("http://annotator.test/v1/", "m1", "ETTD_TEST_KEY", transport=httpx.MockTransport(handler))
    req = build_request(gradient_image(6, 4), np.zeros((4, 6), np.uint8), model_id="m1")
    assert parse_response(extract_content(client.complete(req))).parsed_ocr == "HELLO"
    assert str(seen[0].url) == "http://annotator.test/v1/chat/completions"
    assert seen[0].headers["authorization"] == "Bearer secret"
    client.close()


@pytest.mark.parametrize("status,retryable", [(429, True), (503, True), (400, False)])
def test_http_client_errors(status, retryable):
    client = OpenAIChatClient("http://x", transport=httpx.MockTransport(lambda r: httpx.Response(status, text="no")))
    req = build_request(gradient_image(6, 4), np.zeros((4, 6), np.uint8))
    with pytest.raises(TransportError) as info:
        client.complete(req)
    assert info.value.retryable is retryable


def test_http_client_bad_json_and_network_error():
    req = build_request(gradient_image(6, 4), np.zeros((4, 6), np.uint8))
    client = OpenAIChatClient("http://x", transport=httpx.MockTransport(lambda r: httpx.Response(200, text="{nope")))
    with pytest.raises(MalformedResponse):
        client.complete(req)

    def down(request):
        raise httpx.ConnectError("refused", request=request)

    client = OpenAIChatClient("http://x", transport=httpx.MockTransport(down))
    with pytest.raises(TransportError) as info:
        client.complete(req)
    assert info.value.retryable
