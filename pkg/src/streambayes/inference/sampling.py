"""Parallel likelihood-weighting importance sampling."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import _kernels, expfam
from ..core import BayesianNetwork, sample_rows
from ..errors import DegenerateEvidence
from .vmp import InferenceConfig, InferenceReport, PointMass

# Shards have a fixed size so that the set of shard seeds depends only on
# the sample count, never on the number of workers.
SHARD_SIZE = 8192


def _shard_sizes(n):
    full, rest = divmod(n, SHARD_SIZE)
    return [SHARD_SIZE] * full + ([rest] if rest else [])


def _run_shard(bn, ev, targets, size, seed):
    """Per-shard sums rescaled by the shard's max log weight."""
    rng = np.random.default_rng(seed)
    X, logw = sample_rows(bn, size, rng, evidence=ev)
    top = logw.max()
    if not np.isfinite(top):
        return -np.inf, 0.0, 0.0, {}
    w = np.exp(logw - top)
    sums = {}
    for t in targets:
        var = bn.variable(t)
        col = X[:, var.id]
        if var.is_discrete:
            sums[t] = _kernels.scatter_counts(
                np.zeros(size, dtype=np.int64), col.astype(np.int64), w, 1, var.cardinality
            )[0]
        else:
            sums[t] = np.array([w @ col, w @ (col * col)])
    return top, w.sum(), (w * w).sum(), sums


def importance_sampling_infer(bn: BayesianNetwork, evidence=None, targets=None, cfg: InferenceConfig | None = None):
    """Likelihood-weighted posterior estimates.

    Non-evidence variables are sampled ancestrally; each sample is weighted
    by the likelihood of the evidence.  Shard ``i`` uses seed ``cfg.seed + i``
    and shard results are reduced in shard order, so the output is identical
    for any ``worker_count``.
    """
    cfg = cfg or InferenceConfig()
    bn.check()
    ev = bn.encode(evidence or {})
    if targets is None:
        targets = [v.name for v in bn.variables if np.isnan(ev[v.id])]
    for t in targets:
        bn.index(t)
    free = [t for t in targets if np.isnan(ev[bn.index(t)])]
    sizes = _shard_sizes(cfg.sample_count)
    jobs = [(bn, ev, free, s, cfg.seed + i) for i, s in enumerate(sizes)]
    if cfg.worker_count > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.worker_count) as pool:
            results = list(pool.map(lambda a: _run_shard(*a), jobs))
    else:
        results = [_run_shard(*a) for a in jobs]

    top = max(r[0] for r in results)
    if not np.isfinite(top):
        raise DegenerateEvidence("all importance weights are zero; the evidence is impossible")
    total_w = total_w2 = 0.0
    acc = {t: 0.0 for t in free}
    for shard_top, sw, sw2, sums in results:
        if not np.isfinite(shard_top):
            continue
        scale = np.exp(shard_top - top)
        total_w += scale * sw
        total_w2 += scale * scale * sw2
        for t in free:
            acc[t] = acc[t] + scale * sums[t]
    ess = total_w * total_w / total_w2

    posteriors = {}
    decoded = bn.decode(ev)
    for t in targets:
        var = bn.variable(t)
        if t not in acc:
            posteriors[t] = PointMass(decoded[t], var.cardinality)
        elif var.is_discrete:
            posteriors[t] = expfam.Multinomial.from_probs(acc[t] / acc[t].sum())
        else:
            mean = acc[t][0] / total_w
            var_ = max(acc[t][1] / total_w - mean * mean, 1e-300)
            posteriors[t] = expfam.Gaussian.from_moments(mean, var_)
    return InferenceReport(posteriors, [], float(ess), True, 0)
