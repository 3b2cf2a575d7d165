"""Copy-move and splicing forgeries with optional Poisson blending.

Blending solves, per channel, the discrete Poisson equation on the interior
of the paste rectangle. The rectangle's outermost ring keeps the target's
pixels and acts as the Dirichlet boundary; the guidance field is the forward
difference gradient of the pasted patch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ettd import kernels
from ettd.errors import BoundsError, DimensionError, NonConvergence
from ettd.imaging import TAMPERED, BBox, check_image, crop, paste

DEFAULT_TOL = 1e-3
ITERS_PER_UNKNOWN = 10


class Method(str, enum.Enum):
    COPY_MOVE = "CopyMove"
    SPLICING = "Splicing"
    DIFFUTE = "DiffUTE"
    AUTHENTIC = "Authentic"


@dataclass(frozen=True)
class TamperOp:
    method: Method
    source_box: BBox
    dest_origin: tuple[int, int]
    donor_id: Optional[str] = None
    blend: bool = False

    def __post_init__(self):
        if self.method not in (Method.COPY_MOVE, Method.SPLICING):
            raise ValueError(f"{self.method} is not a synthesizable tamper method")
        if self.method is Method.COPY_MOVE and self.donor_id is not None:
            raise ValueError("copy-move takes no donor image")
        if self.method is Method.SPLICING and self.donor_id is None:
            raise ValueError("splicing requires a donor image")

    @property
    def dest_box(self) -> BBox:
        x, y = self.dest_origin
        return BBox(x, y, x + self.source_box.width, y + self.source_box.height)


@dataclass(frozen=True)
class GuidanceField:
    """Forward-difference gradients of a patch, shape (h, w, channels)."""

    gx: np.ndarray
    gy: np.ndarray

    @classmethod
    def from_patch(cls, patch):
        s = patch.astype(np.float64)
        gx = np.zeros_like(s)
        gy = np.zeros_like(s)
        gx[:, :-1] = s[:, 1:] - s[:, :-1]
        gy[:-1, :] = s[1:, :] - s[:-1, :]
        return cls(gx, gy)

    def divergence(self):
        """Backward-difference divergence on the interior, shape (h-2, w-2, c)."""
        gx, gy = self.gx, self.gy
        return (gx[1:-1, 1:-1] - gx[1:-1, :-2]) + (gy[1:-1, 1:-1] - gy[:-2, 1:-1])


@dataclass
class PoissonSolution:
    values: np.ndarray  # float64 (h, w, 3), whole paste rectangle, pre-rounding
    iterations: int
    residual: float
    converged: bool


def poisson_system(target_region, patch):
    """Right-hand side of the interior system, shape (3, h-2, w-2).

    ``4 f(p) - sum f(q) = -div g(p)`` with the border ring's target values
    moved to the right-hand side.
    """
    t = target_region.astype(np.float64)
    rhs = -GuidanceField.from_patch(patch).divergence()
    rhs[0, :] += t[0, 1:-1]
    rhs[-1, :] += t[-1, 1:-1]
    rhs[:, 0] += t[1:-1, 0]
    rhs[:, -1] += t[1:-1, -1]
    return np.ascontiguousarray(np.moveaxis(rhs, 2, 0))


def solve_poisson(target, patch, dest_origin, tol=DEFAULT_TOL, max_iters=None):
    check_image(target)
    check_image(patch)
    ph, pw = patch.shape[:2]
    if ph < 3 or pw < 3:
        raise DimensionError("Poisson blending needs a patch of at least 3x3")
    x, y = dest_origin
    region = crop(target, BBox(x, y, x + pw, y + ph))
    rhs = poisson_system(region, patch)
    n_unknowns = rhs.shape[1] * rhs.shape[2]
    if max_iters is None:
        max_iters = ITERS_PER_UNKNOWN * n_unknowns
    x0 = np.moveaxis(patch[1:-1, 1:-1].astype(np.float64), 2, 0)
    sol, iters, resid = kernels.cg_poisson(rhs, x0, float(tol), int(max_iters))
    values = region.astype(np.float64)
    values[1:-1, 1:-1] = np.moveaxis(sol, 0, 2)
    return PoissonSolution(values, int(iters), float(resid), resid <= tol)


def poisson_blend(target, patch, dest_origin, tol=DEFAULT_TOL, max_iters=None):
    """Composite ``patch`` into ``target`` at ``dest_origin = (x, y)`` in the gradient domain.

    Raises NonConvergence when the residual is still above ``tol`` after
    ``max_iters`` CG steps (default: 10 per unknown).
    """
    sol = solve_poisson(target, patch, dest_origin, tol, max_iters)
    if not sol.converged:
        raise NonConvergence(
            f"residual {sol.residual:.3g} > {tol} after {sol.iterations} iterations",
            residual=sol.residual,
            iterations=sol.iterations,
        )
    out_patch = np.clip(np.floor(sol.values + 0.5), 0, 255).astype(np.uint8)
    return paste(target, out_patch, dest_origin)


def _dest_mask(shape, box: BBox):
    mask = np.zeros(shape[:2], dtype=np.uint8)
    mask[box.y_min:box.y_max, box.x_min:box.x_max] = TAMPERED
    return mask


def _check_dest(image, source_box, dest_origin):
    x, y = dest_origin
    dest = BBox(x, y, x + source_box.width, y + source_box.height)
    h, w = image.shape[:2]
    if not dest.is_valid(w, h):
        raise BoundsError(f"destination {tuple(dest)} outside {w}x{h} image")
    return dest


def _place(target, patch, dest_origin, blend, tol, max_iters):
    if blend:
        return poisson_blend(target, patch, dest_origin, tol, max_iters)
    return paste(target, patch, dest_origin)


def copy_move(image, source_box, dest_origin, blend=False, tol=DEFAULT_TOL, max_iters=None):
    """Duplicate ``source_box`` of ``image`` at ``dest_origin``; returns (image, mask)."""
    check_image(image)
    patch = crop(image, source_box)
    dest = _check_dest(image, source_box, dest_origin)
    out = _place(image, patch, dest_origin, blend, tol, max_iters)
    return out, _dest_mask(image.shape, dest)


def splice(acceptor, donor, source_box, dest_origin, blend=False, tol=DEFAULT_TOL, max_iters=None):
    """Paste ``source_box`` of ``donor`` into ``acceptor``; returns (image, mask)."""
    check_image(acceptor)
    if not isinstance(donor, np.ndarray) or donor.ndim != 3 or donor.shape[2] != acceptor.shape[2]:
        raise DimensionError("donor must have the acceptor's channel count")
    check_image(donor)
    patch = crop(donor, source_box)
    dest = _check_dest(acceptor, source_box, dest_origin)
    out = _place(acceptor, patch, dest_origin, blend, tol, max_iters)
    return out, _dest_mask(acceptor.shape, dest)


def apply_op(op: TamperOp, image, donor=None, tol=DEFAULT_TOL, max_iters=None):
    if op.method is Method.COPY_MOVE:
        return copy_move(image, op.source_box, op.dest_origin, op.blend, tol, max_iters)
    if donor is None:
        raise ValueError(f"splicing op needs the donor image {op.donor_id!r}")
    return splice(image, donor, op.source_box, op.dest_origin, op.blend, tol, max_iters)
