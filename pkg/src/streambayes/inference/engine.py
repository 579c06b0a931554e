"""Vectorised mean-field variational message passing over CLG networks.

The engine works on ``N`` independent instances of the same network at
once (one row per instance).  Each row may observe a different subset of
variables.  Conditional distributions enter only through their *expected*
parameter statistics, so the same code serves fixed-parameter inference
(expectations are the parameters themselves) and Bayesian learning
(expectations under the current parameter posterior).

Expected statistics for a discrete CPD are ``E[log theta]`` per table cell.
For a Gaussian CPD with precision ``l``, intercept ``a`` and coefficients
``b`` they are, per discrete-parent configuration::

    el = E[l]   ela = E[l a]   ela2 = E[l a^2]   elogl = E[log l]
    eb = E[b]   ebb = E[b b^T]

Every term array carries a leading axis of length 1 (shared by all rows) or
``N`` (row-specific, used for belief priors in dynamic models).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..core import DAG, CLGaussian, Multinomial

LOG_2PI = math.log(2.0 * math.pi)
# stands in for log(0) so that 0 * log(0) stays 0 in the contractions
LOG_FLOOR = -1e12


@dataclass
class DiscreteTerms:
    elog: np.ndarray  # (L, C, K)

    @classmethod
    def from_table(cls, table):
        with np.errstate(divide="ignore"):
            elog = np.log(np.asarray(table, dtype=np.float64))
        return cls(np.maximum(elog, LOG_FLOOR)[None] if elog.ndim == 2 else np.maximum(elog, LOG_FLOOR))


@dataclass
class GaussianTerms:
    el: np.ndarray  # (L, C)
    ela: np.ndarray
    ela2: np.ndarray
    elogl: np.ndarray
    eb: np.ndarray  # (L, C, p)
    ebb: np.ndarray  # (L, C, p, p)

    @classmethod
    def from_params(cls, intercepts, coeffs, variances):
        a = np.atleast_1d(np.asarray(intercepts, dtype=np.float64))
        v = np.atleast_1d(np.asarray(variances, dtype=np.float64))
        b = np.asarray(coeffs, dtype=np.float64).reshape(a.shape[0], -1)
        lam = 1.0 / v
        return cls(
            (lam)[None],
            (lam * a)[None],
            (lam * a * a)[None],
            (-np.log(v))[None],
            b[None],
            np.einsum("cj,ck->cjk", b, b)[None],
        )

    @property
    def n_coeffs(self):
        return self.eb.shape[-1]


def terms_from_cpd(cpd):
    if isinstance(cpd, Multinomial):
        return DiscreteTerms.from_table(cpd.table)
    if isinstance(cpd, CLGaussian):
        return GaussianTerms.from_params(cpd.intercepts, cpd.coeffs, cpd.variances)
    raise TypeError(f"unsupported distribution {type(cpd).__name__}")


def terms_from_network(bn):
    return {name: terms_from_cpd(cpd) for name, cpd in bn.cpds.items()}


class _Node:
    __slots__ = ("id", "name", "discrete", "card", "dparents", "cparents", "dcards", "children")

    def __init__(self, dag: DAG, name):
        var = dag.variable(name)
        self.id = var.id
        self.name = name
        self.discrete = var.is_discrete
        self.card = var.cardinality
        self.dparents = [dag.index(p) for p in dag.discrete_parents(name)]
        self.cparents = [dag.index(p) for p in dag.continuous_parents(name)]
        self.dcards = dag.parent_cards(name)
        self.children = []


class MeanField:
    """Fully factorised posterior over the unobserved cells of ``data``.

    Parameters
    ----------
    dag : DAG
        Network structure.
    terms : dict
        Expected parameter statistics per variable name.
    data : ndarray, shape (N, V)
        Observed values in registry order, NaN where unobserved.
    include : iterable of str, optional
        Restrict the model to these variables (used to drop barren nodes).
        Every included variable's parents must be included too.
    """

    def __init__(self, dag: DAG, terms, data, include=None, init="prior", rng=None):
        self.dag = dag
        self.terms = terms
        data = np.atleast_2d(np.asarray(data, dtype=np.float64))
        self.N = data.shape[0]
        order = dag.topological_order()
        names = order if include is None else [n for n in order if n in set(include)]
        self.nodes = {}
        for n in names:
            self.nodes[dag.index(n)] = _Node(dag, n)
        for node in self.nodes.values():
            for p in node.dparents + node.cparents:
                self.nodes[p].children.append(node.id)
        self.order = [dag.index(n) for n in names]
        self.observed = ~np.isnan(data)
        self.data = data
        self.P, self.M, self.S, self.V = {}, {}, {}, {}
        self.latent = [v for v in self.order if not self.observed[:, v].all()]
        self._init(init, rng)

    # -- state -------------------------------------------------------------
    def _set_observed(self, node):
        obs = self.observed[:, node.id]
        col = self.data[:, node.id]
        if node.discrete:
            P = self.P[node.id]
            idx = np.flatnonzero(obs)
            P[idx] = 0.0
            P[idx, col[idx].astype(np.int64)] = 1.0
        else:
            self.M[node.id] = np.where(obs, col, self.M[node.id])
            self.V[node.id] = np.where(obs, 0.0, self.V[node.id])
            self.S[node.id] = self.M[node.id] ** 2 + self.V[node.id]

    def _init(self, init, rng):
        N = self.N
        for v in self.order:
            node = self.nodes[v]
            if node.discrete:
                if init == "random":
                    self.P[v] = rng.dirichlet(np.ones(node.card), size=N)
                else:
                    self.P[v] = np.full((N, node.card), 1.0 / node.card)
            else:
                if init == "random":
                    self.M[v] = rng.standard_normal(N)
                else:
                    self.M[v] = self._prior_mean(node)
                self.V[v] = np.ones(N)
                self.S[v] = self.M[v] ** 2 + 1.0
            self._set_observed(node)

    def _prior_mean(self, node):
        t = self.terms[node.name]
        W = self.weights(node)
        mb = self._mb(node, t)
        el = np.broadcast_to(t.el, W.shape)
        mu = np.where(el > 0, np.broadcast_to(t.ela, W.shape) / np.where(el > 0, el, 1.0), 0.0) + mb
        return (W * mu).sum(axis=1)

    def set_discrete(self, name, probs):
        v = self.dag.index(name)
        self.P[v] = np.array(np.broadcast_to(probs, self.P[v].shape), dtype=np.float64)
        self._set_observed(self.nodes[v])

    def set_gaussian(self, name, mean, var):
        v = self.dag.index(name)
        self.M[v] = np.array(np.broadcast_to(mean, (self.N,)), dtype=np.float64)
        self.V[v] = np.array(np.broadcast_to(var, (self.N,)), dtype=np.float64)
        self.S[v] = self.M[v] ** 2 + self.V[v]
        self._set_observed(self.nodes[v])

    # -- expectations --------------------------------------------------------
    def weights(self, node):
        """Probability of each discrete-parent configuration, ``(N, C)``."""
        W = np.ones((self.N, 1))
        for p in node.dparents:
            P = self.P[p]
            W = (W[:, :, None] * P[:, None, :]).reshape(self.N, -1)
        return W

    def _cmoments(self, node):
        if not node.cparents:
            return np.zeros((self.N, 0)), np.zeros((self.N, 0, 0))
        mx = np.stack([self.M[p] for p in node.cparents], axis=1)
        sxx = mx[:, :, None] * mx[:, None, :]
        d = np.arange(len(node.cparents))
        sxx[:, d, d] = np.stack([self.S[p] for p in node.cparents], axis=1)
        return mx, sxx

    def _mb(self, node, t):
        if not node.cparents:
            return np.zeros((self.N, 1))
        mx, _ = self._cmoments(node)
        return (mx[:, None, :] * t.eb).sum(axis=-1)

    def expected_loglik(self, node):
        """``E[log p(x | pa)]`` per row and discrete-parent configuration."""
        t = self.terms[node.name]
        if node.discrete:
            return (self.P[node.id][:, None, :] * t.elog).sum(axis=-1) * np.ones((self.N, 1))
        mz, sz = self.M[node.id][:, None], self.S[node.id][:, None]
        mx, sxx = self._cmoments(node)
        if node.cparents:
            mb = (mx[:, None, :] * t.eb).sum(axis=-1)
            tr = (t.ebb * sxx[:, None, :, :]).sum(axis=(-1, -2))
        else:
            mb = tr = 0.0
        q = t.el * (sz - 2.0 * mz * mb + tr) - 2.0 * t.ela * (mz - mb) + t.ela2
        return (0.5 * t.elogl - 0.5 * LOG_2PI - 0.5 * q) * np.ones((self.N, 1))

    def _to_discrete_parent(self, node, f, k):
        """Marginalise config-indexed ``f`` onto discrete parent ``k``."""
        shape = (self.N,) + tuple(node.dcards)
        T = f.reshape(shape)
        for i, p in enumerate(node.dparents):
            if i == k:
                continue
            bshape = [self.N] + [1] * len(node.dcards)
            bshape[i + 1] = node.dcards[i]
            T = T * self.P[p].reshape(bshape)
        axes = tuple(i + 1 for i in range(len(node.dcards)) if i != k)
        return T.sum(axis=axes) if axes else T

    # -- updates -------------------------------------------------------------
    def _discrete_logits(self, node):
        t = self.terms[node.name]
        W = self.weights(node)
        logits = (W[:, :, None] * t.elog).sum(axis=1)
        for c in node.children:
            child = self.nodes[c]
            k = child.dparents.index(node.id)
            f = self.expected_loglik(child)
            logits = logits + self._to_discrete_parent(child, f, k)
        return logits

    def _gaussian_natural(self, node):
        t = self.terms[node.name]
        W = self.weights(node)
        mb = self._mb(node, t)
        eta1 = (W * (t.el * mb + t.ela)).sum(axis=1)
        eta2 = -0.5 * (W * t.el).sum(axis=1)
        for c in node.children:
            child = self.nodes[c]
            ct = self.terms[child.name]
            j = child.cparents.index(node.id)
            Wc = self.weights(child)
            mx, _ = self._cmoments(child)
            mz = self.M[child.id][:, None]
            ebj = ct.eb[..., j]
            ebbjj = ct.ebb[..., j, j]
            cross = (ct.ebb[..., j, :] * mx[:, None, :]).sum(axis=-1) - ebbjj * mx[:, j][:, None]
            eta1 = eta1 + (Wc * (ct.el * (mz * ebj - cross) - ct.ela * ebj)).sum(axis=1)
            eta2 = eta2 - 0.5 * (Wc * ct.el * ebbjj).sum(axis=1)
        return eta1, eta2

    def update(self, v, rows=None):
        node = self.nodes[v]
        free = ~self.observed[:, v]
        if rows is not None:
            free &= rows
        if not free.any():
            return
        if node.discrete:
            probs, _ = _kernels.normalize_log_rows(self._discrete_logits(node))
            self.P[v] = np.where(free[:, None], probs, self.P[v])
        else:
            eta1, eta2 = self._gaussian_natural(node)
            with np.errstate(divide="ignore", invalid="ignore"):
                var = -0.5 / eta2
                mean = eta1 * var
            self.M[v] = np.where(free, mean, self.M[v])
            self.V[v] = np.where(free, var, self.V[v])
            self.S[v] = self.M[v] ** 2 + self.V[v]

    def sweep(self, rows=None):
        for v in self.latent:
            self.update(v, rows)

    # -- objective -----------------------------------------------------------
    def energy_rows(self):
        """``E_q[log p(x, h)]`` per row."""
        total = np.zeros(self.N)
        for v in self.order:
            node = self.nodes[v]
            total += (self.weights(node) * self.expected_loglik(node)).sum(axis=1)
        return total

    def entropy_rows(self):
        total = np.zeros(self.N)
        for v in self.latent:
            node = self.nodes[v]
            free = ~self.observed[:, v]
            if node.discrete:
                P = self.P[v]
                with np.errstate(divide="ignore", invalid="ignore"):
                    h = -np.where(P > 0, P * np.log(P), 0.0).sum(axis=1)
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    h = 0.5 * (LOG_2PI + 1.0 + np.log(self.V[v]))
            total += np.where(free, h, 0.0)
        return total

    def elbo_rows(self):
        return self.energy_rows() + self.entropy_rows()

    def run(self, max_iterations=100, rel_tol=1e-4):
        """Sweep until every row's ELBO changes by less than ``rel_tol`` (relative).

        Rows freeze individually once converged, so results do not depend on
        which other rows share the call.  Returns ``(trace, converged, iters)``
        where ``trace`` holds the summed ELBO after each sweep.
        """
        prev = self.elbo_rows()
        if not self.latent:
            return [float(prev.sum())], True, 0
        active = np.ones(self.N, dtype=bool)
        trace = []
        it = 0
        for it in range(1, max_iterations + 1):
            self.sweep(active)
            cur = self.elbo_rows()
            trace.append(float(cur.sum()))
            done = np.abs(cur - prev) <= rel_tol * np.abs(prev) + 1e-300
            active &= ~done
            prev = cur
            if not active.any():
                return trace, True, it
        return trace, False, it

    # -- read-out --------------------------------------------------------------
    def marginal(self, name):
        v = self.dag.index(name)
        if self.nodes[v].discrete:
            return self.P[v]
        return self.M[v], self.V[v]
