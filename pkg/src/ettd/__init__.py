"""Tampered-text image synthesis, annotation gating and explainable-detection scoring."""
__version__ = "0.1.0"

from ettd.imaging import BBox, iou, mask_to_boxes, render_fused_mask  # noqa: E402
from ettd.kernels import BACKEND  # noqa: E402

__all__ = ["BBox", "iou", "mask_to_boxes", "render_fused_mask", "BACKEND", "__version__"]
