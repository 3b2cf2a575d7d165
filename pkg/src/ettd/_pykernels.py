"""Pure-Python/numpy implementations of the hot kernels.

Mirrors ``_ckernels.pyx`` signature for signature; used when the compiled
extension is missing or ``ETTD_PURE_PYTHON`` is set.
"""
import numpy as np


def levenshtein(a, b):
    """Unit-cost edit distance between two sequences of code points."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def _laplace(x):
    # 5-point Dirichlet Laplacian, zero outside the grid
    out = 4.0 * x
    out[1:, :] -= x[:-1, :]
    out[:-1, :] -= x[1:, :]
    out[:, 1:] -= x[:, :-1]
    out[:, :-1] -= x[:, 1:]
    return out


def _cg_channel(b, x, tol, max_iters):
    r = b - _laplace(x)
    p = r.copy()
    rr = float(np.vdot(r, r))
    iters = 0
    while iters < max_iters:
        if np.abs(r).max() <= tol:
            # recursive residual drifts; confirm against the true one
            r = b - _laplace(x)
            if np.abs(r).max() <= tol:
                break
            p = r.copy()
            rr = float(np.vdot(r, r))
        ap = _laplace(p)
        alpha = rr / float(np.vdot(p, ap))
        x += alpha * p
        r -= alpha * ap
        rr_new = float(np.vdot(r, r))
        p *= rr_new / rr
        p += r
        rr = rr_new
        iters += 1
    resid = float(np.abs(b - _laplace(x)).max())
    return iters, resid


def cg_poisson(rhs, x0, tol, max_iters):
    """Solve ``L x = rhs`` per channel, ``L`` the 5-point Dirichlet Laplacian.

    ``rhs`` and ``x0`` are float64 arrays of shape (channels, h, w). Returns
    ``(x, iterations, max_residual)``; iterations is the maximum over channels.
    """
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True, order="C")
    worst_iters, worst_resid = 0, 0.0
    for c in range(rhs.shape[0]):
        iters, resid = _cg_channel(rhs[c], x[c], tol, max_iters)
        worst_iters = max(worst_iters, iters)
        worst_resid = max(worst_resid, resid)
    return x, worst_iters, worst_resid
