"""Variational message passing on a fixed-parameter network."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import expfam
from ..core import BayesianNetwork
from ..errors import ConfigError, NumericalError
from .engine import LOG_FLOOR, MeanField, terms_from_network


@dataclass(frozen=True)
class InferenceConfig:
    max_iterations: int = 100
    elbo_rel_tol: float = 1e-4
    seed: int = 0
    sample_count: int = 10_000
    worker_count: int = 1
    # seed-jittered initialisation; off means uniform / prior-mean start
    jitter: bool = False

    def __post_init__(self):
        if self.max_iterations < 1 or self.sample_count < 1 or self.worker_count < 1:
            raise ConfigError("iteration, sample and worker counts must be positive")
        if not 0.0 < self.elbo_rel_tol < 1.0:
            raise ConfigError("elbo_rel_tol must lie in (0, 1)")


class PointMass:
    """Posterior of an observed variable."""

    def __init__(self, value, cardinality=0):
        self.value = value
        self.cardinality = cardinality

    @property
    def probs(self):
        if not self.cardinality:
            raise AttributeError("continuous point mass has no probability vector")
        p = np.zeros(self.cardinality)
        p[int(self.value)] = 1.0
        return p

    @property
    def mean(self):
        return float(self.value)

    @property
    def variance(self):
        return 0.0

    def __eq__(self, other):
        return isinstance(other, PointMass) and self.value == other.value

    def __repr__(self):
        if self.cardinality:
            return "Multinomial [ " + ", ".join(repr(float(x)) for x in self.probs) + " ]"
        return f"PointMass [ value = {float(self.value)!r} ]"


@dataclass
class InferenceReport:
    posteriors: dict
    elbo_trace: list = field(default_factory=list)
    effective_sample_size: float | None = None
    converged: bool = True
    iterations_used: int = 0

    def __getitem__(self, name):
        return self.posteriors[name]


def relevant_variables(bn: BayesianNetwork, evidence_vec) -> set:
    """Evidence variables and all their ancestors.

    Everything else is barren: summing it out leaves the posterior of the
    relevant part untouched, so it can be dropped before message passing.
    """
    keep = set()
    stack = [v.name for v in bn.variables if not np.isnan(evidence_vec[v.id])]
    while stack:
        n = stack.pop()
        if n in keep:
            continue
        keep.add(n)
        stack.extend(bn.parents(n))
    return keep


def _marginal_dist(mf: MeanField, bn, name):
    var = bn.variable(name)
    if var.is_discrete:
        p = mf.P[var.id][0]
        return expfam.Multinomial.from_probs(p / p.sum())
    return expfam.Gaussian.from_moments(float(mf.M[var.id][0]), float(mf.V[var.id][0]))


def forward_moments(bn: BayesianNetwork, known: dict, names):
    """Push marginals through barren variables in topological order.

    ``known`` maps names to (probs) or (mean, E[x^2]) moment tuples; parents
    are treated as independent, matching the factorised posterior.  Gaussian
    results are moment matched.
    """
    out = dict(known)
    for name in bn.topological_order():
        if name in out or name not in names:
            continue
        var = bn.variable(name)
        cpd = bn.cpds[name]
        dp = bn.dag.discrete_parents(name)
        W = np.ones(1)
        for p in dp:
            W = np.outer(W, out[p]).reshape(-1)
        if var.is_discrete:
            probs = W @ cpd.table
            out[name] = probs / probs.sum()
            continue
        cp = bn.dag.continuous_parents(name)
        mx = np.array([out[p][0] for p in cp])
        sxx = np.outer(mx, mx)
        if cp:
            sxx[np.diag_indices(len(cp))] = [out[p][1] for p in cp]
        a, b, s = cpd.intercepts, cpd.coeffs, cpd.variances
        mu = a + b @ mx if cp else a.copy()
        second = s + a * a + (2 * a * (b @ mx) + np.einsum("cj,jk,ck->c", b, sxx, b) if cp else 0.0)
        out[name] = (float(W @ mu), float(W @ second))
    return out


def vmp_infer(bn: BayesianNetwork, evidence=None, targets=None, cfg: InferenceConfig | None = None):
    """Mean-field VMP posterior marginals for ``targets`` given ``evidence``.

    Evidence is a mapping ``name -> value`` (missing/None entries are
    unobserved).  Barren variables are summed out exactly before the
    coordinate-ascent sweeps and their marginals are recovered afterwards by
    forward propagation.
    """
    cfg = cfg or InferenceConfig()
    bn.check()
    ev = bn.encode(evidence or {})
    if targets is None:
        targets = [v.name for v in bn.variables if np.isnan(ev[v.id])]
    for t in targets:
        bn.index(t)
    keep = relevant_variables(bn, ev)
    rng = np.random.default_rng(cfg.seed) if cfg.jitter else None
    mf = MeanField(
        bn.dag, terms_from_network(bn), ev[None, :], include=keep, init="random" if cfg.jitter else "prior", rng=rng
    )
    trace, converged, iters = mf.run(cfg.max_iterations, cfg.elbo_rel_tol)
    if not all(math.isfinite(x) for x in trace) or trace[-1] <= LOG_FLOOR / 10:
        raise NumericalError("ELBO is not finite (impossible evidence or degenerate parameters)")

    posteriors = {}
    moments = {}
    for name in keep:
        var = bn.variable(name)
        if var.is_discrete:
            moments[name] = mf.P[var.id][0]
        else:
            moments[name] = (float(mf.M[var.id][0]), float(mf.S[var.id][0]))
    barren_needed = set()
    for t in targets:
        if t not in keep:
            barren_needed.add(t)
            stack = list(bn.parents(t))
            while stack:
                p = stack.pop()
                if p not in keep and p not in barren_needed:
                    barren_needed.add(p)
                    stack.extend(bn.parents(p))
    if barren_needed:
        moments = forward_moments(bn, moments, barren_needed | keep)
    for t in targets:
        var = bn.variable(t)
        if not np.isnan(ev[var.id]):
            posteriors[t] = PointMass(bn.decode(ev)[t], var.cardinality)
        elif t in keep:
            posteriors[t] = _marginal_dist(mf, bn, t)
        elif var.is_discrete:
            posteriors[t] = expfam.Multinomial.from_probs(moments[t])
        else:
            m, s = moments[t]
            posteriors[t] = expfam.Gaussian.from_moments(m, max(s - m * m, 0.0) or 1e-300)
    return InferenceReport(posteriors, trace, None, converged, iters)


def compute_elbo(bn: BayesianNetwork, q: dict, evidence=None) -> float:
    """``E_q[log p(x, evidence)] + H(q)`` for a factorised ``q`` over all
    unobserved variables (no pruning)."""
    ev = bn.encode(evidence or {})
    mf = MeanField(bn.dag, terms_from_network(bn), ev[None, :])
    for v in bn.variables:
        if not np.isnan(ev[v.id]):
            continue
        if v.name not in q:
            raise KeyError(f"q is missing a factor for unobserved variable {v.name!r}")
        d = q[v.name]
        if v.is_discrete:
            mf.set_discrete(v.name, d.probs)
        else:
            mf.set_gaussian(v.name, float(d.mean), float(d.variance))
    return float(mf.elbo_rows()[0])


def posterior_line(target, evidence: dict, dist) -> str:
    ev = ", ".join(f"{k}={v}" for k, v in evidence.items())
    head = f"P({target}|{ev})" if ev else f"P({target})"
    return f"{head} = {dist!r}"

