"""Vision-chat annotation: request building, clients, response parsing and filtering.

The annotator sees two images in fixed order, the tampered image (A) and its
fused-mask rendering (B), together with the six-perspective query. Replies
are kept only when the quoted OCR in their first sentence reaches the
accuracy threshold, and the kept replies get the ground-truth OCR swapped in.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import httpx
import numpy as np

from ettd.errors import EmptyGroundTruth, MalformedResponse, TransportError
from ettd.imaging import encode_png, load_image, load_mask, render_fused_mask
from ettd.metrics import AUTHENTIC_SENTENCE, acc_ocr
from ettd.prompts import build_annotation_query
from ettd.quoting import first_quote_span

log = logging.getLogger(__name__)

FILTER_THRESHOLD = 0.8
DEFAULT_MODEL = "gpt-4o"
DEFAULT_CONCURRENCY = 4
_EPS = 1e-12


@dataclass(frozen=True)
class AnnotatorRequest:
    query: str
    images: tuple  # (tampered RGB array, fused-mask RGB array)
    model_id: str = DEFAULT_MODEL
    temperature: float = 0.0

    def __post_init__(self):
        if len(self.images) != 2:
            raise ValueError("an annotator request carries exactly two images: [tampered, fused mask]")

    def content_hash(self) -> str:
        """sha256 over the pixel content of both images, in order."""
        h = hashlib.sha256()
        for img in self.images:
            arr = np.ascontiguousarray(img, dtype=np.uint8)
            h.update(repr(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()

    def to_payload(self) -> dict:
        parts = [{"type": "text", "text": self.query}]
        for img in self.images:
            b64 = base64.b64encode(encode_png(img)).decode("ascii")
            parts.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}})
        return {
            "model": self.model_id,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": parts}],
        }


@dataclass(frozen=True)
class AnnotatorResponse:
    raw_text: str
    parsed_ocr: str
    parsed_description: str
    ocr_span: Optional[tuple] = None

    def reassemble(self) -> str:
        if self.ocr_span is None:
            return self.raw_text
        s, e = self.ocr_span
        return self.raw_text[:s] + self.parsed_ocr + self.raw_text[e:]

    def to_dict(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "parsed_ocr": self.parsed_ocr,
            "parsed_description": self.parsed_description,
            "ocr_span": list(self.ocr_span) if self.ocr_span else None,
        }

    @classmethod
    def from_dict(cls, d) -> "AnnotatorResponse":
        return parse_response(d["raw_text"])


def parse_response(raw_text: str) -> AnnotatorResponse:
    if not isinstance(raw_text, str):
        raise MalformedResponse(f"expected reply text, got {type(raw_text).__name__}")
    span = first_quote_span(raw_text)
    ocr = "" if span is None else raw_text[span[0]:span[1]]
    description = raw_text
    if span is not None:
        description = (raw_text[:span[0] - 1] + raw_text[span[1] + 1:]).strip()
    return AnnotatorResponse(raw_text, ocr, description, span)


def extract_content(body) -> str:
    """Pull the assistant text out of a chat-completions response body."""
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no choices[0].message.content in response: {exc!r}") from None
    if isinstance(content, list):
        content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if not isinstance(content, str):
        raise MalformedResponse("message content is not text")
    return content


class AnnotatorClient(Protocol):
    def complete(self, request: AnnotatorRequest) -> dict:
        """Send one request, return the decoded chat-completions body."""


class OpenAIChatClient:
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(self, base_url, model_id=DEFAULT_MODEL, api_key_env="OPENAI_API_KEY",
                 timeout=60.0, concurrency=DEFAULT_CONCURRENCY, transport=None):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.api_key_env = api_key_env
        self._slots = threading.BoundedSemaphore(concurrency)
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, request: AnnotatorRequest) -> dict:
        with self._slots:
            try:
                resp = self._http.post(f"{self.base_url}/chat/completions", json=request.to_payload())
            except httpx.HTTPError as exc:
                raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}", retryable=False)
        try:
            return resp.json()
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"response is not JSON: {exc}") from exc

    def close(self):
        self._http.close()


class MockAnnotatorClient:
    """Replays canned response bodies keyed by request content hash.

    Fixtures are JSON files mapping ``request_hash -> response body``; every
    ``*.json`` file in the directory is merged.
    """

    def __init__(self, fixtures_dir=None, fixtures=None):
        self.fixtures = dict(fixtures or {})
        if fixtures_dir is not None:
            for path in sorted(Path(fixtures_dir).glob("*.json")):
                self.fixtures.update(json.loads(path.read_text("utf-8")))
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: AnnotatorRequest) -> dict:
        with self._lock:
            self.calls += 1
        key = request.content_hash()
        if key not in self.fixtures:
            raise TransportError(f"no fixture for request {key[:12]}", retryable=False)
        return self.fixtures[key]

    @staticmethod
    def write_fixtures(path, mapping) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(mapping, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def chat_body(text: str) -> dict:
    """Minimal chat-completions body wrapping ``text``; used for fixtures."""
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}


def build_request(image, mask, model_id=DEFAULT_MODEL, temperature=0.0, lambda1=0.5, lambda2=0.5):
    fused = render_fused_mask(image, mask, lambda1, lambda2)
    return AnnotatorRequest(build_annotation_query().text, (image, fused), model_id, temperature)


def request_for_record(record, root=".", **kwargs) -> AnnotatorRequest:
    root = Path(root)
    image = load_image(root / record.image_path)
    mask = load_mask(root / record.mask_path)
    return build_request(image, mask, **kwargs)


def send_with_retries(client, request, max_retries=3, backoff=0.5, sleep=time.sleep) -> dict:
    """Call ``client.complete``, retrying retryable transport failures with exponential backoff."""
    attempt = 0
    while True:
        try:
            return client.complete(request)
        except TransportError as exc:
            if not exc.retryable or attempt >= max_retries:
                raise
            delay = backoff * (2 ** attempt)
            log.warning("annotator transport failure (%s); retry %d in %.2fs", exc, attempt + 1, delay)
            sleep(delay)
            attempt += 1


def annotate(record, client, root=".", *, max_retries=3, backoff=0.5, sleep=time.sleep, **request_kw) -> AnnotatorResponse:
    request = request_for_record(record, root, **request_kw)
    body = send_with_retries(client, request, max_retries, backoff, sleep)
    return parse_response(extract_content(body))


def annotate_batch(records, client, root=".", concurrency=DEFAULT_CONCURRENCY, **kw):
    """Annotate tampered records concurrently; returns (responses by id, failures)."""
    records = [r for r in records if r.is_tampered]
    responses, failures = {}, []

    def work(rec):
        try:
            return rec.id, annotate(rec, client, root, **kw), None
        except (TransportError, MalformedResponse, OSError) as exc:
            return rec.id, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for rid, resp, err in pool.map(work, records):
            if err is None:
                responses[rid] = resp
            else:
                failures.append({"id": rid, "error": err})
    return responses, failures


@dataclass(frozen=True)
class FilterDecision:
    ocr_accuracy: float
    kept: bool
    final_description: str


def substitute_ocr(response: AnnotatorResponse, gt_ocr: str) -> str:
    """Replace the annotator's quoted OCR with the ground truth everywhere it is quoted."""
    text = response.raw_text
    if response.ocr_span is not None:
        s, e = response.ocr_span
        head, tail = text[:s] + gt_ocr, text[e:]
    else:
        head, tail = "", text
    ocr = response.parsed_ocr
    if ocr and ocr != gt_ocr:
        quoted = re.compile(r'["“”]' + re.escape(ocr) + r'["“”]')
        tail = quoted.sub(lambda m: '"' + gt_ocr + '"', tail)
    return head + tail


def filter_response(response: AnnotatorResponse, gt_ocr: str, threshold=FILTER_THRESHOLD) -> FilterDecision:
    if not gt_ocr:
        raise EmptyGroundTruth("tampered record has no ground-truth OCR")
    acc = acc_ocr(response.parsed_ocr, gt_ocr)
    kept = acc >= threshold - _EPS
    final = substitute_ocr(response, gt_ocr) if kept else response.raw_text
    return FilterDecision(acc, kept, final)


def authentic_annotation() -> str:
    return AUTHENTIC_SENTENCE
