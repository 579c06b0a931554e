"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with identical semantics.  The numba
versions are used unless numba is missing or ``STREAMBAYES_DISABLE_NUMBA``
is set to a truthy value before import.  Both variants stay importable as
``numpy_kernels`` / ``numba_kernels`` so tests and the benchmark can compare
them directly.
"""

import os
from types import SimpleNamespace

import numpy as np


def _np_categorical_sample(cdf, rows, u):
    """Inverse-CDF draw from row ``rows[i]`` of ``cdf`` using uniform ``u[i]``."""
    c = cdf[rows]
    out = (c <= u[:, None]).sum(axis=1)
    return np.minimum(out, cdf.shape[1] - 1).astype(np.int64)


def _np_normalize_log_rows(logits):
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    s = e.sum(axis=1, keepdims=True)
    return e / s, (m + np.log(s))[:, 0]


def _np_scatter_counts(rows, cols, weights, n_rows, n_cols):
    out = np.zeros((n_rows, n_cols))
    np.add.at(out, (rows, cols), weights)
    return out


def _np_config_index(values, cards):
    idx = np.zeros(values.shape[0], dtype=np.int64)
    for j in range(values.shape[1]):
        idx = idx * cards[j] + values[:, j]
    return idx


numpy_kernels = SimpleNamespace(
    categorical_sample=_np_categorical_sample,
    normalize_log_rows=_np_normalize_log_rows,
    scatter_counts=_np_scatter_counts,
    config_index=_np_config_index,
    name="numpy",
)


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def categorical_sample(cdf, rows, u):
        n = rows.shape[0]
        k = cdf.shape[1]
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            r = rows[i]
            j = 0
            while j < k - 1 and cdf[r, j] <= u[i]:
                j += 1
            out[i] = j
        return out

    @njit(cache=True)
    def normalize_log_rows(logits):
        n, k = logits.shape
        probs = np.empty((n, k))
        lse = np.empty(n)
        for i in range(n):
            m = logits[i, 0]
            for j in range(1, k):
                if logits[i, j] > m:
                    m = logits[i, j]
            s = 0.0
            for j in range(k):
                probs[i, j] = np.exp(logits[i, j] - m)
                s += probs[i, j]
            for j in range(k):
                probs[i, j] /= s
            lse[i] = m + np.log(s)
        return probs, lse

    @njit(cache=True)
    def scatter_counts(rows, cols, weights, n_rows, n_cols):
        out = np.zeros((n_rows, n_cols))
        for i in range(rows.shape[0]):
            out[rows[i], cols[i]] += weights[i]
        return out

    @njit(cache=True)
    def config_index(values, cards):
        n, m = values.shape
        idx = np.zeros(n, dtype=np.int64)
        for i in range(n):
            acc = 0
            for j in range(m):
                acc = acc * cards[j] + values[i, j]
            idx[i] = acc
        return idx

    return SimpleNamespace(
        categorical_sample=categorical_sample,
        normalize_log_rows=normalize_log_rows,
        scatter_counts=scatter_counts,
        config_index=config_index,
        name="numba",
    )


def _flag_set(name):
    return os.environ.get(name, "").strip().lower() not in ("", "0", "false", "no")


try:
    numba_kernels = _build_numba_kernels()
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_kernels = None

if numba_kernels is None or _flag_set("STREAMBAYES_DISABLE_NUMBA"):
    active = numpy_kernels
else:
    active = numba_kernels

BACKEND = active.name


def categorical_sample(cdf, rows, u):
    return active.categorical_sample(
        np.ascontiguousarray(cdf, dtype=np.float64),
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(u, dtype=np.float64),
    )


def normalize_log_rows(logits):
    """Row-wise softmax; returns ``(probs, log_normalizer)``."""
    return active.normalize_log_rows(np.ascontiguousarray(logits, dtype=np.float64))


def scatter_counts(rows, cols, weights, n_rows, n_cols):
    """Dense ``(n_rows, n_cols)`` table of summed ``weights`` at ``(rows, cols)``."""
    return active.scatter_counts(
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
        np.ascontiguousarray(weights, dtype=np.float64),
        int(n_rows),
        int(n_cols),
    )


def config_index(values, cards):
    """Row-major configuration index of integer parent values ``(n, m)``."""
    values = np.ascontiguousarray(values, dtype=np.int64)
    if values.ndim != 2 or values.shape[1] == 0:
        return np.zeros(values.shape[0], dtype=np.int64)
    return active.config_index(values, np.asarray(cards, dtype=np.int64))
