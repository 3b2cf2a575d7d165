"""Regenerate src/ettd/data/vectors_toy.txt.

Words in the same group share a base direction plus small noise, so
paraphrases score high and unrelated descriptions score low.
"""
import sys
from pathlib import Path

import numpy as np

DIM = 32
SEED = 20240521
NOISE = 0.35

GROUPS = [
    "edge edges boundary boundaries border borders outline contour contours",
    "background backdrop surroundings surrounding area region regions areas patch",
    "inconsistent mismatched different differs differ discontinuous irregular uneven abnormal unnatural anomaly anomalies",
    "blurred blurry hazy fuzzy jagged distorted distortion sharp clarity sharper smeared",
    "texture textures appearance noise grain pattern smooth",
    "font fonts typeface style stroke strokes thickness thick thin bold weight size larger smaller",
    "color colour colors brightness bright darker lighter tone shade contrast",
    "alignment aligned misaligned spacing offset baseline line position positioned shifted gap",
    "text word words characters character letters letter string digits number numbers sentence coherence incoherent meaning content",
    "integration integrated blend blends blended seamlessly overlaid pasted pasting copied inserted placed artificial artificially",
    "tampered tampering forged forgery manipulated edited altered modified fake",
    "image picture photo document scene card receipt invoice",
    "appears appear seems visible shows observed suggests indicates evidence noticeable slightly clearly",
    "authentic original genuine real natural",
]


def main(out):
    rng = np.random.default_rng(SEED)
    seen = set()
    lines = []
    for group in GROUPS:
        base = rng.normal(size=DIM)
        base /= np.linalg.norm(base)
        for word in group.split():
            if word in seen:
                continue
            seen.add(word)
            vec = base + NOISE * rng.normal(size=DIM) / np.sqrt(DIM)
            lines.append(word + " " + " ".join(f"{v:.6f}" for v in vec))
    Path(out).write_text(f"{len(lines)} {DIM}\n" + "\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/ettd/data/vectors_toy.txt")
