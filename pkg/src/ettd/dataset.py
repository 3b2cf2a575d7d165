"""Dataset records, JSONL manifests, split assignment and corpus statistics.

A corpus directory holds ``manifest.jsonl`` plus ``images/`` and ``masks/``;
paths inside the manifest are relative to the manifest's directory.
"""
from __future__ import annotations

import enum
import json
import math
import os
import random
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ettd.errors import SchemaError
from ettd.imaging import TAMPERED, BBox, load_mask, mask_to_boxes
from ettd.metrics import AUTHENTIC_SENTENCE
from ettd.tamper import Method

MANIFEST_NAME = "manifest.jsonl"
LANGUAGES = ("EN", "CH")
CD_METHODS = (Method.COPY_MOVE, Method.SPLICING, Method.AUTHENTIC)


class Split(str, enum.Enum):
    TRAIN = "Train"
    TEST = "Test"
    CD = "CD"


SPLIT_ORDER = (Split.TRAIN, Split.TEST, Split.CD)
_KNOWN = {
    "id", "image_path", "mask_path", "split", "method", "blend", "language_tags",
    "gt_ocr", "description", "boxes", "distortion",
}


@dataclass(frozen=True)
class TamperRecord:
    id: str
    image_path: str
    method: Method
    split: Split = Split.TRAIN
    mask_path: Optional[str] = None
    blend: bool = False
    language_tags: tuple = ("EN",)
    gt_ocr: Optional[str] = None
    description: str = ""
    boxes: tuple = ()
    distortion: Optional[dict] = None
    extra: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "split", Split(self.split))

    @property
    def is_tampered(self) -> bool:
        return self.method is not Method.AUTHENTIC

    def validate(self) -> None:
        if not self.id:
            raise SchemaError("record id must be non-empty")
        bad_tags = set(self.language_tags) - set(LANGUAGES)
        if bad_tags:
            raise SchemaError(f"{self.id}: unknown language tags {sorted(bad_tags)}")
        if self.is_tampered:
            if not self.mask_path:
                raise SchemaError(f"{self.id}: tampered record without mask_path")
            if not self.gt_ocr:
                raise SchemaError(f"{self.id}: tampered record without gt_ocr")
            if not self.boxes:
                raise SchemaError(f"{self.id}: tampered record without boxes")
        else:
            if self.mask_path is not None or self.gt_ocr is not None:
                raise SchemaError(f"{self.id}: authentic record must not carry mask_path or gt_ocr")
            if self.description != AUTHENTIC_SENTENCE:
                raise SchemaError(f"{self.id}: authentic description must be {AUTHENTIC_SENTENCE!r}")
            if self.boxes:
                raise SchemaError(f"{self.id}: authentic record must not carry boxes")
        for b in self.boxes:
            if not BBox(*b).is_valid():
                raise SchemaError(f"{self.id}: invalid box {list(b)}")

    def to_dict(self) -> dict:
        d = dict(self.extra)
        d.update(
            id=self.id,
            image_path=self.image_path,
            method=self.method.value,
            split=self.split.value,
            blend=self.blend,
            language_tags=list(self.language_tags),
            description=self.description,
            boxes=[list(b) for b in self.boxes],
        )
        if self.mask_path is not None:
            d["mask_path"] = self.mask_path
        if self.gt_ocr is not None:
            d["gt_ocr"] = self.gt_ocr
        if self.distortion is not None:
            d["distortion"] = self.distortion
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TamperRecord":
        try:
            rec = cls(
                id=str(d["id"]),
                image_path=d["image_path"],
                method=Method(d["method"]),
                split=Split(d.get("split", Split.TRAIN.value)),
                mask_path=d.get("mask_path"),
                blend=bool(d.get("blend", False)),
                language_tags=tuple(d.get("language_tags", ("EN",))),
                gt_ocr=d.get("gt_ocr"),
                description=d.get("description", ""),
                boxes=tuple(BBox.from_seq(b) for b in d.get("boxes", ())),
                distortion=d.get("distortion"),
                extra={k: v for k, v in d.items() if k not in _KNOWN},
            )
        except KeyError as exc:
            raise SchemaError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc)) from None
        rec.validate()
        return rec


def _dumps(d) -> str:
    return json.dumps(d, sort_keys=True, ensure_ascii=False)


def _check_files(rec: TamperRecord, root: Path, line=None):
    if not (root / rec.image_path).is_file():
        raise SchemaError(f"{rec.id}: image file {rec.image_path} not found", line)
    if rec.mask_path is not None and not (root / rec.mask_path).is_file():
        raise SchemaError(f"{rec.id}: mask file {rec.mask_path} not found", line)


def write_manifest(records, path, check_files=True) -> None:
    path = Path(path)
    root = path.parent
    ids = Counter(r.id for r in records)
    dupes = [i for i, n in ids.items() if n > 1]
    if dupes:
        raise SchemaError(f"duplicate record ids: {sorted(dupes)[:5]}")
    root.mkdir(parents=True, exist_ok=True)
    for rec in records:
        rec.validate()
        if check_files:
            _check_files(rec, root)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dumps(rec.to_dict()) + "\n")
    os.replace(tmp, path)


def read_manifest(path, check_files=True) -> list:
    path = Path(path)
    root = path.parent
    records, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(d, dict):
                raise SchemaError("manifest line is not an object", lineno)
            try:
                rec = TamperRecord.from_dict(d)
            except SchemaError as exc:
                raise SchemaError(str(exc), lineno) from None
            if rec.id in seen:
                raise SchemaError(f"duplicate id {rec.id}", lineno)
            seen.add(rec.id)
            if check_files:
                _check_files(rec, root, lineno)
            records.append(rec)
    return records


def rebase(records, old_root, new_root) -> list:
    """Rewrite manifest-relative paths so they resolve from ``new_root``."""
    old_root, new_root = Path(old_root).resolve(), Path(new_root).resolve()
    if old_root == new_root:
        return list(records)

    def move(p):
        return None if p is None else os.path.relpath(old_root / p, new_root)

    return [replace(r, image_path=move(r.image_path), mask_path=move(r.mask_path)) for r in records]


def verify_boxes(records, root) -> list:
    """Ids of tampered records whose boxes disagree with their mask's components."""
    root = Path(root)
    bad = []
    for r in records:
        if r.is_tampered and list(r.boxes) != mask_to_boxes(load_mask(root / r.mask_path)):
            bad.append(r.id)
    return bad


@dataclass
class CorpusStats:
    counts: dict                  # method -> split -> n
    per_split: dict               # split -> {"tampered": n, "authentic": n}
    tampered: int
    authentic: int
    forged_area: Optional[float]  # mean foreground fraction over tampered images
    forged_area_by_split: dict
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "per_split": self.per_split,
            "tampered": self.tampered,
            "authentic": self.authentic,
            "forged_area": self.forged_area,
            "forged_area_by_split": self.forged_area_by_split,
            "warnings": self.warnings,
        }


def forged_fraction(mask) -> float:
    return float(np.count_nonzero(mask == TAMPERED)) / mask.size


def compute_stats(records, root=".", workers=4) -> CorpusStats:
    root = Path(root)
    records = list(records)
    counts = {m.value: {s.value: 0 for s in SPLIT_ORDER} for m in Method}
    per_split = {s.value: {"tampered": 0, "authentic": 0} for s in SPLIT_ORDER}
    warnings = []
    for r in records:
        counts[r.method.value][r.split.value] += 1
        per_split[r.split.value]["tampered" if r.is_tampered else "authentic"] += 1
        if r.split is Split.CD and r.method not in CD_METHODS:
            warnings.append(f"{r.id}: {r.method.value} record in the CD split")
    tampered = [r for r in records if r.is_tampered]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        fractions = list(pool.map(lambda r: forged_fraction(load_mask(root / r.mask_path)), tampered))
    by_split = defaultdict(list)
    for r, f in zip(tampered, fractions):
        by_split[r.split.value].append(f)
    mean = math.fsum(fractions) / len(fractions) if fractions else None
    area_by_split = {
        s.value: (math.fsum(by_split[s.value]) / len(by_split[s.value]) if by_split[s.value] else None)
        for s in SPLIT_ORDER
    }
    by_method = sum(sum(v.values()) for k, v in counts.items() if k != Method.AUTHENTIC.value)
    by_split_total = sum(v["tampered"] for v in per_split.values())
    if by_method != by_split_total:
        warnings.append(f"tampered total by method ({by_method}) != by split ({by_split_total})")
    return CorpusStats(
        counts, per_split, len(tampered), len(records) - len(tampered), mean, area_by_split, warnings
    )


def _apportion(n, ratios) -> list:
    """Integer counts summing to ``n``, by largest remainder."""
    raw = [n * r for r in ratios]
    counts = [math.floor(x) for x in raw]
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_assign(records, ratios=(0.8, 0.1, 0.1), seed=0) -> list:
    """Seeded, method-stratified assignment into Train/Test/CD.

    DiffUTE records never land in CD; their CD share is spread over Train and
    Test. Output order follows input order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    groups = defaultdict(list)
    for r in records:
        groups[r.method].append(r)
    assigned = {}
    for method in sorted(groups, key=lambda m: m.value):
        members = sorted(groups[method], key=lambda r: r.id)
        rng = random.Random(f"{seed}:{method.value}")
        rng.shuffle(members)
        rs = ratios
        if method not in CD_METHODS:
            head = ratios[0] + ratios[1]
            rs = (ratios[0] / head, ratios[1] / head, 0.0) if head > 0 else (1.0, 0.0, 0.0)
        start = 0
        for split, n in zip(SPLIT_ORDER, _apportion(len(members), rs)):
            for r in members[start:start + n]:
                assigned[r.id] = split
            start += n
    return [replace(r, split=assigned[r.id]) for r in records]
