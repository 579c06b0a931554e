import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streambayes import _kernels

pytestmark = pytest.mark.skipif(_kernels.numba_kernels is None, reason="numba not installed")
NP, NB = _kernels.numpy_kernels, _kernels.numba_kernels


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 200), st.integers(2, 6), st.integers(1, 5))
def test_categorical_sample(seed, n, k, rows):
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(rng.dirichlet(np.ones(k), size=rows), axis=1)
    r = rng.integers(0, rows, n)
    u = rng.random(n)
    np.testing.assert_array_equal(NP.categorical_sample(cdf, r, u), NB.categorical_sample(cdf, r, u))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 50), st.integers(1, 6))
def test_normalize_log_rows(seed, n, k):
    logits = np.random.default_rng(seed).normal(0, 30, (n, k))
    p1, z1 = NP.normalize_log_rows(logits)
    p2, z2 = NB.normalize_log_rows(logits)
    np.testing.assert_allclose(p1, p2, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(z1, z2, rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 300))
def test_scatter_counts(seed, n):
    rng = np.random.default_rng(seed)
    rows, cols = rng.integers(0, 3, n), rng.integers(0, 4, n)
    w = rng.integers(0, 5, n).astype(float)  # integer weights: exact in any order
    np.testing.assert_array_equal(NP.scatter_counts(rows, cols, w, 3, 4), NB.scatter_counts(rows, cols, w, 3, 4))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 100), st.lists(st.integers(2, 4), min_size=1, max_size=4))
def test_config_index(seed, n, cards):
    rng = np.random.default_rng(seed)
    values = np.column_stack([rng.integers(0, c, n) for c in cards]).astype(np.int64)
    cards = np.array(cards, dtype=np.int64)
    got = NB.config_index(values, cards)
    np.testing.assert_array_equal(NP.config_index(values, cards), got)
    np.testing.assert_array_equal(got, np.ravel_multi_index(values.T, cards))


@pytest.mark.parametrize("flag, backend", [("1", "numpy"), ("", "numba")])
def test_env_flag_selects_backend(flag, backend):
    env = dict(os.environ, STREAMBAYES_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import streambayes; print(streambayes.BACKEND)"],
                         env=env, capture_output=True, text=True)
    assert out.stdout.strip() == backend
