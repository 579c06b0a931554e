"""Brute-force posterior marginals for small all-discrete networks."""

import numpy as np
from scipy.special import logsumexp

from ..core import BayesianNetwork
from ..errors import DegenerateEvidence, TooLarge

MAX_STATES = 10**7


def joint_log_table(bn: BayesianNetwork) -> np.ndarray:
    """Log joint over every variable, axes in registry order."""
    if any(not v.is_discrete for v in bn.variables):
        raise TypeError("enumeration needs an all-discrete network")
    cards = [v.cardinality for v in bn.variables]
    size = int(np.prod(cards, dtype=np.float64))
    if size > MAX_STATES:
        raise TooLarge(f"joint state space has {size} states (limit {MAX_STATES})")
    V = len(cards)
    total = np.zeros(cards)
    for v in bn.variables:
        plist = bn.parents(v.name)
        axes = [bn.index(p) for p in plist] + [v.id]
        table = bn.cpds[v.name].table.reshape([cards[a] for a in axes])
        with np.errstate(divide="ignore"):
            logt = np.log(table)
        # move factor axes into registry positions
        order = np.argsort(axes)
        logt = np.transpose(logt, order)
        shape = [1] * V
        for a in sorted(axes):
            shape[a] = cards[a]
        total = total + logt.reshape(shape)
    return total


def exact_enumeration_oracle(bn: BayesianNetwork, evidence=None, targets=None):
    """Exact posterior marginals (dict name -> probability vector)."""
    logj = joint_log_table(bn)
    ev = bn.encode(evidence or {})
    index = []
    for v in bn.variables:
        index.append(slice(None) if np.isnan(ev[v.id]) else slice(int(ev[v.id]), int(ev[v.id]) + 1))
    cond = logj[tuple(index)]
    logz = logsumexp(cond)
    if not np.isfinite(logz):
        raise DegenerateEvidence("evidence has probability zero")
    post = np.exp(cond - logz)
    if targets is None:
        targets = [v.name for v in bn.variables]
    out = {}
    for t in targets:
        i = bn.index(t)
        axes = tuple(a for a in range(post.ndim) if a != i)
        m = post.sum(axis=axes).reshape(-1)
        if m.size == 1:
            full = np.zeros(bn.variable(t).cardinality)
            full[int(ev[i])] = 1.0
            m = full
        out[t] = m
    return out


def log_evidence(bn: BayesianNetwork, evidence=None) -> float:
    logj = joint_log_table(bn)
    ev = bn.encode(evidence or {})
    index = tuple(
        slice(None) if np.isnan(ev[v.id]) else int(ev[v.id]) for v in bn.variables
    )
    return float(logsumexp(logj[index]))
