"""Scoring for explainable tampered-text detection.

OCR accuracy (1 - normalized edit distance), paragraph cosine similarity over
averaged word vectors, the weighted final score, classification accuracy and
box-level precision/recall/F1.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ettd import kernels
from ettd.errors import DimensionError, EmptyInput, MissingGroundTruth
from ettd.imaging import BBox, iou
from ettd.quoting import extract_first_quote, strip_quoted

AUTHENTIC_SENTENCE = "There is no tampered text in this image."
OCR_WEIGHT = 0.3
PARA_WEIGHT = 0.7
CLASSIFY_MAX_ED = 3
DEFAULT_VECTORS = "vectors_toy.txt"
DEFAULT_STOPWORDS = "stopwords_en.txt"

_TOKEN = re.compile(r"[^\W_]+")


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over Unicode code points, unit costs."""
    return int(kernels.levenshtein(list(map(ord, a)), list(map(ord, b))))


def acc_ocr(pred: str, gt: str) -> float:
    longest = max(len(pred), len(gt))
    if longest == 0:
        return 1.0
    return min(max(1.0 - edit_distance(pred, gt) / longest, 0.0), 1.0)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


def _data_path(name: str) -> Path:
    return Path(str(resources.files("ettd").joinpath("data", name)))


def load_stopwords(path=None) -> frozenset:
    path = Path(path) if path else _data_path(DEFAULT_STOPWORDS)
    words = (line.strip().casefold() for line in path.read_text("utf-8").splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


@dataclass(frozen=True)
class WordVectorTable:
    dimension: int
    entries: dict
    stopwords: frozenset = frozenset()

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError("word vectors need dimension >= 1")
        for word, vec in self.entries.items():
            if vec.shape != (self.dimension,):
                raise DimensionError(f"vector for {word!r} has shape {vec.shape}")
            vec.setflags(write=False)

    def __contains__(self, word):
        return word.casefold() in self.entries

    def __getitem__(self, word):
        return self.entries[word.casefold()]

    @classmethod
    def load(cls, path=None, stopwords_path=None) -> "WordVectorTable":
        """Read ``word v1 ... vd`` lines; a leading ``count dim`` header is skipped."""
        path = Path(path) if path else _data_path(DEFAULT_VECTORS)
        entries = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                vec = np.asarray(parts[1:], dtype=np.float64)
                if dim is None:
                    dim = vec.size
                elif vec.size != dim:
                    raise DimensionError(f"{path}:{lineno}: expected {dim} components, got {vec.size}")
                entries.setdefault(parts[0].casefold(), vec)
        if dim is None:
            raise DimensionError(f"{path}: no vectors found")
        return cls(dim, entries, load_stopwords(stopwords_path))


@dataclass(frozen=True)
class ParagraphVector:
    components: np.ndarray
    contributing_words: int

    @property
    def degenerate(self) -> bool:
        return self.contributing_words == 0


def paragraph_vector(text: str, table: WordVectorTable, strip_quoted_spans: bool = True) -> ParagraphVector:
    if strip_quoted_spans:
        text = strip_quoted(text)
    vecs = [table.entries[t] for t in tokenize(text) if t not in table.stopwords and t in table.entries]
    if not vecs:
        return ParagraphVector(np.zeros(table.dimension), 0)
    return ParagraphVector(np.mean(vecs, axis=0), len(vecs))


def cosine(a: ParagraphVector, b: ParagraphVector) -> float:
    """Cosine similarity; 0 when either side is degenerate or has zero norm."""
    if a.components.shape != b.components.shape:
        raise DimensionError(f"dimension mismatch {a.components.shape} vs {b.components.shape}")
    if a.degenerate or b.degenerate:
        return 0.0
    na = float(np.linalg.norm(a.components))
    nb = float(np.linalg.norm(b.components))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.components, b.components)) / (na * nb)


def classify(output: str, max_ed: int = CLASSIFY_MAX_ED) -> bool:
    """True (tampered) when the output is more than ``max_ed`` edits from the authentic sentence."""
    return edit_distance(output, AUTHENTIC_SENTENCE) > max_ed


def classify_zero_shot(output: str) -> bool:
    return output.lstrip().startswith("Yes")


def ocr_score(pred_text: str, record) -> float:
    return acc_ocr(extract_first_quote(pred_text), record.gt_ocr)


def paragraph_similarity(pred_text: str, record, table: WordVectorTable) -> tuple[float, bool]:
    """(similarity, degenerate) for quote-stripped prediction vs ground-truth paragraphs."""
    vp = paragraph_vector(pred_text, table)
    vg = paragraph_vector(record.description, table)
    return cosine(vp, vg), vp.degenerate or vg.degenerate


@dataclass
class SampleScore:
    acc_ocr: float
    sim_para: float
    final: float
    classified_tampered: bool
    gt_tampered: bool
    id: Optional[str] = None
    degenerate: bool = False

    @property
    def correct(self) -> bool:
        return self.classified_tampered == self.gt_tampered

    def to_dict(self) -> dict:
        return asdict(self)


def final_score(acc: float, sim: float) -> float:
    return OCR_WEIGHT * acc + PARA_WEIGHT * sim


def score_sample(
    pred_text: str,
    gt,
    table: WordVectorTable,
    *,
    max_ed: int = CLASSIFY_MAX_ED,
    ocr_fn: Callable = ocr_score,
    para_fn: Callable = paragraph_similarity,
) -> SampleScore:
    """Score one prediction against its ground-truth record.

    ``gt`` needs ``is_tampered``, ``gt_ocr`` and ``description``. Misclassified
    samples score zero on both parts; correctly classified authentic samples
    score one on both.
    """
    tampered = bool(gt.is_tampered)
    if tampered and (not gt.gt_ocr or not gt.description):
        raise MissingGroundTruth(f"record {getattr(gt, 'id', '?')} lacks gt_ocr or description")
    predicted = classify(pred_text, max_ed)
    rid = getattr(gt, "id", None)
    if predicted != tampered:
        return SampleScore(0.0, 0.0, 0.0, predicted, tampered, rid)
    if not tampered:
        return SampleScore(1.0, 1.0, final_score(1.0, 1.0), predicted, tampered, rid)
    acc = float(ocr_fn(pred_text, gt))
    sim, degenerate = para_fn(pred_text, gt, table)
    return SampleScore(acc, float(sim), final_score(acc, float(sim)), predicted, tampered, rid, bool(degenerate))


@dataclass
class AggregateReport:
    count: int
    acc_ocr: float
    sim_para: float
    final: float
    classification_accuracy: float
    degenerate: int = 0
    tampered_only: Optional[dict] = field(default=None)

    def to_dict(self) -> dict:
        return asdict(self)


def _means(scores):
    n = len(scores)
    return (
        100.0 * sum(s.acc_ocr for s in scores) / n,
        100.0 * sum(s.sim_para for s in scores) / n,
        100.0 * sum(s.final for s in scores) / n,
    )


def aggregate(scores) -> AggregateReport:
    """Means on the 0-100 scale, over all samples and over tampered ones only."""
    scores = list(scores)
    if not scores:
        raise EmptyInput("cannot aggregate an empty score list")
    acc, sim, fin = _means(scores)
    cls_acc = 100.0 * sum(s.correct for s in scores) / len(scores)
    tampered = [s for s in scores if s.gt_tampered]
    t_block = None
    if tampered:
        t_acc, t_sim, t_fin = _means(tampered)
        t_block = {"count": len(tampered), "acc_ocr": t_acc, "sim_para": t_sim, "final": t_fin}
    return AggregateReport(len(scores), acc, sim, fin, cls_acc, sum(s.degenerate for s in scores), t_block)


def match_boxes(preds, gts, iou_thresh: float = 0.5) -> int:
    """Greedy one-to-one matching in descending IoU order; returns true positives."""
    pairs = []
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            v = iou(p, g)
            if v >= iou_thresh:
                pairs.append((-v, i, j))
    pairs.sort()
    used_p, used_g = set(), set()
    tp = 0
    for _, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        tp += 1
    return tp


def _prf(tp, n_pred, n_gt):
    if n_pred == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def detection_prf(preds, gts, iou_thresh: float = 0.5):
    if not 0.0 < iou_thresh <= 1.0:
        raise ValueError("iou_thresh must lie in (0, 1]")
    preds = [BBox(*p) for p in preds]
    gts = [BBox(*g) for g in gts]
    return _prf(match_boxes(preds, gts, iou_thresh), len(preds), len(gts))


def detection_prf_corpus(pairs, iou_thresh: float = 0.5):
    """Micro-averaged P/R/F1 over ``(preds, gts)`` pairs, one pair per image."""
    if not 0.0 < iou_thresh <= 1.0:
        raise ValueError("iou_thresh must lie in (0, 1]")
    tp = n_pred = n_gt = 0
    for preds, gts in pairs:
        preds = [BBox(*p) for p in preds]
        gts = [BBox(*g) for g in gts]
        tp += match_boxes(preds, gts, iou_thresh)
        n_pred += len(preds)
        n_gt += len(gts)
    return _prf(tp, n_pred, n_gt)
