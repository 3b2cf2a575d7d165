from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ettd import kernels


def recursive_levenshtein(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def codes(s):
    return [ord(c) for c in s]


def dense_laplacian(h, w):
    n = h * w
    A = np.zeros((n, n))
    for i in range(h):
        for j in range(w):
            k = i * w + j
            A[k, k] = 4
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < h and 0 <= jj < w:
                    A[k, ii * w + jj] = -1
    return A


def test_backend_selected():
    assert kernels.BACKEND in kernels.available_backends()


@pytest.mark.parametrize("a,b,expected", [("", "abc", 3), ("kitten", "sitting", 3), ("flaw", "lawn", 2), ("same", "same", 0)])
def test_levenshtein_examples(backend, a, b, expected):
    assert backend.levenshtein(codes(a), codes(b)) == expected
    assert recursive_levenshtein(a, b) == expected


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=12), st.text(max_size=12))
def test_levenshtein_matches_recursive_oracle(a, b):
    expected = recursive_levenshtein(a, b)
    for mod in kernels.available_backends().values():
        assert mod.levenshtein(codes(a), codes(b)) == expected


def test_levenshtein_astral_code_points(backend):
    assert backend.levenshtein(codes("a\U0001F600b"), codes("ab")) == 1


@pytest.mark.parametrize("h,w", [(1, 1), (3, 3), (4, 7), (10, 10)])
def test_cg_matches_dense_solve(backend, rng, h, w):
    rhs = rng.normal(scale=40, size=(3, h, w))
    x, iters, resid = backend.cg_poisson(rhs, np.zeros_like(rhs), 1e-9, 10 * h * w)
    A = dense_laplacian(h, w)
    for c in range(3):
        ref = np.linalg.solve(A, rhs[c].ravel()).reshape(h, w)
        np.testing.assert_allclose(x[c], ref, atol=1e-7)
    assert resid <= 1e-9


def test_cg_respects_max_iters(backend, rng):
    rhs = rng.normal(scale=100, size=(1, 30, 30))
    x, iters, resid = backend.cg_poisson(rhs, np.zeros_like(rhs), 1e-12, 2)
    assert iters == 2
    assert resid > 1e-12


def test_cg_does_not_modify_inputs(backend, rng):
    rhs = rng.normal(size=(2, 5, 6))
    x0 = rng.normal(size=(2, 5, 6))
    rhs_copy, x0_copy = rhs.copy(), x0.copy()
    backend.cg_poisson(rhs, x0, 1e-6, 500)
    np.testing.assert_array_equal(rhs, rhs_copy)
    np.testing.assert_array_equal(x0, x0_copy)


def test_backends_agree(rng):
    mods = kernels.available_backends()
    if len(mods) < 2:
        pytest.skip("compiled extension not built")
    rhs = rng.normal(scale=60, size=(3, 20, 35))
    x_py, it_py, r_py = mods["python"].cg_poisson(rhs, np.zeros_like(rhs), 1e-3, 7000)
    x_c, it_c, r_c = mods["cython"].cg_poisson(rhs, np.zeros_like(rhs), 1e-3, 7000)
    np.testing.assert_allclose(x_py, x_c, atol=1e-6)
    assert it_py == it_c
