"""Bayesian parameter learning by streaming variational Bayes.

Parameters of every conditional distribution are random variables with
conjugate priors, one block per (variable, discrete-parent configuration):

* discrete variables: a Dirichlet over each table row;
* Gaussian variables: a NormalGamma over (intercept, precision) plus an
  independent Gaussian over each regression coefficient.

Each batch is absorbed with the previous posterior acting as the prior.
Inside a batch the local latent posteriors q(H_i) and the global q(theta)
are refined by coordinate ascent until the batch ELBO settles.  Local work
is a function of a frozen q(theta) snapshot and is reduced to additive raw
moments, which is what makes :meth:`LearnableModel.update_parallel`
equivalent to the sequential update.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from . import expfam
from .core import (
    DAG,
    LATENT,
    BayesianNetwork,
    CLGaussian,
    Multinomial,
    validate_network,
)
from .errors import (
    ConfigError,
    ConjugacyError,
    EmptyModel,
    SchemaError,
    StructureError,
    UndefinedVarianceMean,
)
from .inference.engine import LOG_2PI, DiscreteTerms, GaussianTerms, MeanField, terms_from_cpd
from .inference.vmp import InferenceConfig

DEFAULT_DIRICHLET = 1.0
DEFAULT_NORMAL_GAMMA = dict(mu=0.0, kappa=1.0, shape=1.0, rate=1.0)
DEFAULT_COEFF = dict(coeff_mean=0.0, coeff_variance=1.0)


@dataclass(frozen=True)
class SVIConfig:
    kappa: float = 0.75
    tau: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.kappa <= 1.0:
            raise ConfigError("SVI kappa must lie in (0.5, 1]")
        if self.tau < 0:
            raise ConfigError("SVI tau must be non-negative")

    def step_size(self, t):
        return (t + self.tau) ** (-self.kappa)


@dataclass(frozen=True)
class LearningConfig:
    batch_size: int = 1000
    worker_count: int = 1
    local_vmp: InferenceConfig = field(default_factory=InferenceConfig)
    svi: SVIConfig | None = None
    seed: int = 0
    # SVI stream scale when the stream length is unknown; None -> 10 * batch_size
    total_n: int | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.worker_count < 1:
            raise ConfigError("batch_size and worker_count must be positive")


# -- parameter blocks ---------------------------------------------------------


class DirichletBlock:
    """Dirichlet rows for one discrete variable, natural params ``(C, K)``."""

    def __init__(self, eta):
        self.eta = np.array(eta, dtype=np.float64)

    @classmethod
    def prior(cls, n_configs, card, alpha=DEFAULT_DIRICHLET):
        a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (n_configs, card))
        if np.any(a <= 0):
            raise ConfigError("Dirichlet concentrations must be positive")
        return cls(a - 1.0)

    def copy(self):
        return DirichletBlock(self.eta.copy())

    @property
    def concentration(self):
        return self.eta + 1.0

    def terms(self):
        a = self.concentration
        return DiscreteTerms((digamma(a) - digamma(a.sum(axis=1, keepdims=True)))[None])

    def distributions(self, config):
        return [expfam.Dirichlet(self.eta[config])]

    def kl(self, other):
        return sum(
            expfam.kl_divergence(expfam.Dirichlet(q), expfam.Dirichlet(p)) for q, p in zip(self.eta, other.eta)
        )

    def point(self):
        a = self.concentration
        return Multinomial(a / a.sum(axis=1, keepdims=True))

    def to_dict(self):
        return {"kind": "Dirichlet", "concentration": self.concentration.tolist()}


def _ng_moments(ng):
    kappa = -2.0 * ng[:, 1]
    mu = ng[:, 0] / kappa
    a = ng[:, 3] + 0.5
    b = -ng[:, 2] - 0.5 * kappa * mu * mu
    return mu, kappa, a, b


class GaussianBlock:
    """NormalGamma ``(C, 4)`` plus coefficient Gaussians ``(C, p, 2)``."""

    def __init__(self, ng, beta):
        self.ng = np.array(ng, dtype=np.float64)
        self.beta = np.array(beta, dtype=np.float64).reshape(self.ng.shape[0], -1, 2)

    @classmethod
    def prior(cls, n_configs, n_coeffs, **hyper):
        h = {**DEFAULT_NORMAL_GAMMA, **DEFAULT_COEFF, **hyper}
        mu, kappa, shape, rate = h["mu"], h["kappa"], h["shape"], h["rate"]
        coeff_mean, coeff_variance = h["coeff_mean"], h["coeff_variance"]
        ng = expfam.NormalGamma.from_moments(mu, kappa, shape, rate).natural
        b = expfam.Gaussian.from_moments(coeff_mean, coeff_variance).natural
        return cls(np.tile(ng, (n_configs, 1)), np.tile(b, (n_configs, n_coeffs, 1)))

    def copy(self):
        return GaussianBlock(self.ng.copy(), self.beta.copy())

    @property
    def n_coeffs(self):
        return self.beta.shape[1]

    def moments(self):
        return _ng_moments(self.ng)

    def coeff_moments(self):
        var = -0.5 / self.beta[..., 1]
        return self.beta[..., 0] * var, var

    def terms(self):
        mu, kappa, a, b = self.moments()
        el = a / b
        bm, bv = self.coeff_moments()
        ebb = bm[:, :, None] * bm[:, None, :]
        d = np.arange(self.n_coeffs)
        ebb[:, d, d] += bv
        return GaussianTerms(
            el[None],
            (mu * el)[None],
            (1.0 / kappa + mu * mu * el)[None],
            (digamma(a) - np.log(b))[None],
            bm[None],
            ebb[None],
        )

    def distributions(self, config):
        return [expfam.NormalGamma(self.ng[config])] + [expfam.Gaussian(b) for b in self.beta[config]]

    def kl(self, other):
        total = 0.0
        for c in range(self.ng.shape[0]):
            total += expfam.kl_divergence(expfam.NormalGamma(self.ng[c]), expfam.NormalGamma(other.ng[c]))
            for j in range(self.n_coeffs):
                total += expfam.kl_divergence(expfam.Gaussian(self.beta[c, j]), expfam.Gaussian(other.beta[c, j]))
        return total

    def point(self, name="?"):
        mu, kappa, a, b = self.moments()
        if np.any(a <= 1.0):
            raise UndefinedVarianceMean(
                f"posterior mean of the variance of {name!r} needs shape > 1 (got {a.min():g})"
            )
        bm, _ = self.coeff_moments()
        return CLGaussian(mu, b / (a - 1.0), bm)

    def to_dict(self):
        mu, kappa, a, b = self.moments()
        bm, bv = self.coeff_moments()
        configs = [
            {
                "mu": float(mu[c]),
                "kappa": float(kappa[c]),
                "shape": float(a[c]),
                "rate": float(b[c]),
                "coeff_means": bm[c].tolist(),
                "coeff_variances": bv[c].tolist(),
            }
            for c in range(len(mu))
        ]
        return {"kind": "NormalGamma", "configurations": configs}


# -- raw moments ---------------------------------------------------------------


def _moments_from(mf: MeanField, names):
    """Additive expected statistics for every learned variable in ``names``."""
    out = {}
    for name in names:
        node = mf.nodes[mf.dag.index(name)]
        W = mf.weights(node)
        if node.discrete:
            out[name] = W.T @ mf.P[node.id]
            continue
        m, s = mf.M[node.id], mf.S[node.id]
        mx, sxx = mf._cmoments(node)
        out[name] = (
            W.sum(axis=0),
            W.T @ m,
            W.T @ s,
            W.T @ mx,
            W.T @ (mx * m[:, None]),
            np.einsum("nc,njk->cjk", W, sxx),
        )
    return out


def local_pieces(mf: MeanField, learned, fixed):
    """Raw moments of the learned CPDs plus the ELBO part they do not cover.

    The remainder is the entropy of the local posteriors and the expected
    log density of the fixed (not learned) CPDs.
    """
    rm = _moments_from(mf, learned)
    extra = float(mf.entropy_rows().sum())
    for name in fixed:
        node = mf.nodes[mf.dag.index(name)]
        extra += float((mf.weights(node) * mf.expected_loglik(node)).sum())
    return rm, extra


def _add_moments(acc, new):
    if acc is None:
        return new
    out = {}
    for k, v in acc.items():
        if isinstance(v, tuple):
            out[k] = tuple(a + b for a, b in zip(v, new[k]))
        else:
            out[k] = v + new[k]
    return out


def _gaussian_energy(t: GaussianTerms, rm):
    n, sz, szz, sx, sxz, sxx = rm
    eb, ebb = t.eb[0], t.ebb[0]
    quad = t.el[0] * (szz - 2.0 * (eb * sxz).sum(-1) + (ebb * sxx).sum(axis=(-1, -2)))
    lin = -2.0 * t.ela[0] * (sz - (eb * sx).sum(-1)) + t.ela2[0] * n
    return float((0.5 * n * t.elogl[0] - 0.5 * n * LOG_2PI - 0.5 * (quad + lin)).sum())


# -- parameter set -------------------------------------------------------------


class ParameterSet:
    """Conjugate parameter posteriors for the CPDs of one DAG."""

    def __init__(self, dag: DAG, prior: dict, fixed: dict | None = None):
        self.dag = dag
        self.fixed = dict(fixed or {})
        self.prior = prior
        self.posterior = {k: v.copy() for k, v in prior.items()}

    @property
    def learned(self):
        return list(self.prior)

    def terms(self, posterior=None):
        posterior = posterior or self.posterior
        out = {name: terms_from_cpd(cpd) for name, cpd in self.fixed.items()}
        for name, block in posterior.items():
            out[name] = block.terms()
        return out

    def has_coupling(self):
        return any(isinstance(b, GaussianBlock) and b.n_coeffs for b in self.prior.values())

    def m_step(self, base: dict, rm: dict, scale=1.0, current=None):
        """Posterior blocks ``base + scale * stats`` by one coordinate pass.

        Coefficient statistics depend on the precision, so each Gaussian
        block's NormalGamma is updated first and its coefficients are then
        refreshed one at a time against the newest expectations.
        """
        current = current or self.posterior
        new = {}
        for name, prior in base.items():
            stats = rm.get(name)
            if stats is None:
                new[name] = prior.copy()
                continue
            if isinstance(prior, DirichletBlock):
                new[name] = DirichletBlock(prior.eta + scale * stats)
                continue
            n, sz, szz, sx, sxz, sxx = stats
            bm, bv = current[name].coeff_moments()
            ebb = bm[:, :, None] * bm[:, None, :]
            d = np.arange(prior.n_coeffs)
            ebb[:, d, d] += bv
            s1 = sz - (sx * bm).sum(-1)
            s2 = szz - 2.0 * (sxz * bm).sum(-1) + (ebb * sxx).sum(axis=(-1, -2))
            ng = prior.ng + scale * np.stack([s1, -0.5 * n, -0.5 * s2, 0.5 * n], axis=1)
            block = GaussianBlock(ng, prior.beta.copy())
            if prior.n_coeffs:
                mu, kappa, a, b = block.moments()
                el = a / b
                ela = mu * el
                bm = bm.copy()
                for j in range(prior.n_coeffs):
                    cross = (sxx[:, j, :] * bm).sum(-1) - sxx[:, j, j] * bm[:, j]
                    e2 = prior.beta[:, j, 1] - scale * 0.5 * el * sxx[:, j, j]
                    e1 = prior.beta[:, j, 0] + scale * (el * (sxz[:, j] - cross) - ela * sx[:, j])
                    block.beta[:, j, 0] = e1
                    block.beta[:, j, 1] = e2
                    bm[:, j] = e1 * (-0.5 / e2)
            new[name] = block
        return new

    def energy(self, rm: dict, posterior=None):
        posterior = posterior or self.posterior
        total = 0.0
        for name, stats in rm.items():
            t = posterior[name].terms()
            if isinstance(t, DiscreteTerms):
                total += float((stats * t.elog[0]).sum())
            else:
                total += _gaussian_energy(t, stats)
        return total

    def kl(self, base: dict, posterior=None):
        posterior = posterior or self.posterior
        return sum(posterior[n].kl(base[n]) for n in base)

    def point_cpds(self):
        cpds = dict(self.fixed)
        for name, block in self.posterior.items():
            cpds[name] = block.point() if isinstance(block, DirichletBlock) else block.point(name)
        return cpds

    def blocks(self):
        """``(variable, config, [EFDistribution, ...])`` for every parameter block."""
        for name, block in self.posterior.items():
            C = block.eta.shape[0] if isinstance(block, DirichletBlock) else block.ng.shape[0]
            for c in range(C):
                yield name, c, block.distributions(c)

    def posterior_dict(self):
        return {name: block.to_dict() for name, block in self.posterior.items()}

    def load_posterior(self, doc):
        for name, entry in doc.items():
            if entry["kind"] == "Dirichlet":
                self.posterior[name] = DirichletBlock(np.array(entry["concentration"]) - 1.0)
            else:
                cfgs = entry["configurations"]
                ng = [expfam.NormalGamma.from_moments(c["mu"], c["kappa"], c["shape"], c["rate"]).natural for c in cfgs]
                beta = [
                    [expfam.Gaussian.from_moments(m, v).natural for m, v in zip(c["coeff_means"], c["coeff_variances"])]
                    for c in cfgs
                ]
                self.posterior[name] = GaussianBlock(
                    np.array(ng), np.array(beta, dtype=np.float64).reshape(len(cfgs), -1, 2)
                )


def default_priors(dag: DAG, names, overrides=None):
    overrides = dict(overrides or {})
    prior = {}
    for name in names:
        var = dag.variable(name)
        C = dag.n_configs(name)
        ov = overrides.pop(name, None)
        if var.is_discrete:
            prior[name] = _dirichlet_prior(name, C, var.cardinality, ov)
        else:
            prior[name] = _gaussian_prior(name, C, len(dag.continuous_parents(name)), ov)
    if overrides:
        raise SchemaError(f"priors given for unknown or fixed variables: {sorted(overrides)}")
    return prior


def _dirichlet_prior(name, C, K, ov):
    if ov is None:
        return DirichletBlock.prior(C, K)
    if isinstance(ov, expfam.EFDistribution):
        if not isinstance(ov, expfam.Dirichlet):
            raise ConjugacyError(f"{name!r} is discrete: its prior must be Dirichlet, not {ov.family}")
        if ov.dim != K:
            raise ConjugacyError(f"Dirichlet prior for {name!r} must have dimension {K}")
        return DirichletBlock.prior(C, K, ov.concentration)
    if isinstance(ov, dict):
        extra = set(ov) - {"alpha"}
        if extra:
            raise ConjugacyError(f"{name!r} is discrete: unexpected prior keys {sorted(extra)}")
        return DirichletBlock.prior(C, K, ov.get("alpha", DEFAULT_DIRICHLET))
    return DirichletBlock.prior(C, K, ov)


def _gaussian_prior(name, C, p, ov):
    if ov is None:
        return GaussianBlock.prior(C, p)
    if isinstance(ov, expfam.EFDistribution):
        if not isinstance(ov, expfam.NormalGamma):
            raise ConjugacyError(f"{name!r} is Gaussian: its prior must be NormalGamma, not {ov.family}")
        mu, kappa, a, b = ov.moments()
        return GaussianBlock.prior(C, p, mu=mu, kappa=kappa, shape=a, rate=b)
    if isinstance(ov, dict):
        allowed = {"mu", "kappa", "shape", "rate", "coeff_mean", "coeff_variance"}
        extra = set(ov) - allowed
        if extra:
            raise ConjugacyError(f"{name!r} is Gaussian: unexpected prior keys {sorted(extra)}")
        return GaussianBlock.prior(C, p, **ov)
    raise ConjugacyError(f"unsupported prior specification for {name!r}")


# -- the learner ---------------------------------------------------------------


def data_driven_start(dag: DAG, X: np.ndarray, rng) -> dict:
    """Seeded, data-dependent starting point for the local posteriors.

    Responsibilities drawn independently of the data leave every mixture
    component at the global mean, so the start is tied to the data.  A
    discrete latent with K states picks K seed rows (each new seed drawn
    with probability proportional to its squared distance from the
    seeds so far) and assigns every row to its nearest seed.  A Gaussian
    latent starts at a random projection of the standardised observed
    columns.
    """
    N = X.shape[0]
    F = X.copy()
    F = F[:, ~np.isnan(F).all(axis=0)]
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(F, axis=0)
        sd = np.nanstd(F, axis=0)
    F = np.nan_to_num((F - mean) / np.where(sd > 0, sd, 1.0))
    draws = {}
    for var in dag.variables:
        name = var.name
        if not np.isnan(X[:, var.id]).any():
            continue
        if var.is_discrete:
            K = var.cardinality
            seeds = [int(rng.integers(N))]
            d2 = ((F - F[seeds[0]]) ** 2).sum(axis=1)
            for _ in range(1, K):
                tot = d2.sum()
                nxt = int(rng.choice(N, p=d2 / tot)) if tot > 0 else int(rng.integers(N))
                seeds.append(nxt)
                d2 = np.minimum(d2, ((F - F[nxt]) ** 2).sum(axis=1))
            dist = ((F[:, None, :] - F[seeds][None, :, :]) ** 2).sum(axis=-1)
            dist += 1e-9 * rng.random((N, K))
            draws[name] = np.eye(K)[dist.argmin(axis=1)]
        else:
            proj = F @ rng.standard_normal(F.shape[1])
            sd = proj.std()
            draws[name] = proj / sd if sd > 0 else rng.standard_normal(N)
    return draws


@dataclass
class BatchRecord:
    batch_index: int
    instance_count: int
    elbo: float


class LearnableModel:
    """A network template whose parameters carry conjugate posteriors.

    Observable variables map to data attributes by name; latent variables
    are local (one copy per instance, inside the plate) and are inferred per
    instance, then discarded.
    """

    def __init__(self, dag: DAG, priors=None, fixed=None, config: LearningConfig | None = None, name="custom"):
        self.name = name
        self.dag = dag
        self.config = config or LearningConfig()
        fixed = dict(fixed or {})
        learned = [v.name for v in dag.variables if v.name not in fixed]
        self.params = ParameterSet(dag, default_priors(dag, learned, priors), fixed)
        self.observables = [v.name for v in dag.variables if v.role != LATENT]
        self.latents = [v.name for v in dag.variables if v.role == LATENT]
        self.records: list[BatchRecord] = []
        self.instances_seen = 0
        self.svi_steps = 0
        self._initialised = False

    # convenient aliases
    @property
    def prior(self):
        return self.params.prior

    @property
    def posterior(self):
        return self.params.posterior

    def parameter_blocks(self):
        return list(self.params.blocks())

    # -- data ------------------------------------------------------------------
    def data_matrix(self, data) -> np.ndarray:
        """Map a Batch / instances / ``(N, n_observables)`` array onto the registry."""
        from .datastream import Batch, DataInstance

        if isinstance(data, np.ndarray):
            arr = np.atleast_2d(np.asarray(data, dtype=np.float64))
            if arr.shape[1] != len(self.observables):
                raise SchemaError(f"expected {len(self.observables)} columns, got {arr.shape[1]}")
            cols = {n: arr[:, i] for i, n in enumerate(self.observables)}
            N = arr.shape[0]
        else:
            if not isinstance(data, Batch):
                data = Batch(tuple(data), 0) if data else None
            if data is None or len(data) == 0:
                return np.zeros((0, len(self.dag)))
            if not isinstance(data.instances[0], DataInstance):
                raise SchemaError("batches must hold DataInstance objects")
            attrs = data.attributes
            arr = data.to_array()
            cols = {}
            for n in self.observables:
                a = attrs.get(n)
                if a is None:
                    raise SchemaError(f"data has no attribute {n!r}")
                if a.space.kind != self.dag.variable(n).space.kind or (
                    a.is_discrete and a.space.cardinality != self.dag.variable(n).cardinality
                ):
                    raise SchemaError(f"attribute {n!r} does not match the model's state space")
                cols[n] = arr[:, a.index]
            N = arr.shape[0]
        X = np.full((N, len(self.dag)), np.nan)
        for n, col in cols.items():
            X[:, self.dag.index(n)] = col
        return X

    # -- local step ------------------------------------------------------------
    def _new_fields(self, X, parts, terms):
        return [MeanField(self.dag, terms, X[lo:hi]) for lo, hi in parts]

    def _random_start(self, fields, X, parts):
        draws = data_driven_start(self.dag, X, np.random.default_rng(self.config.seed))
        for mf, (lo, hi) in zip(fields, parts):
            for name, d in draws.items():
                if self.dag.variable(name).is_discrete:
                    mf.set_discrete(name, d[lo:hi])
                else:
                    mf.set_gaussian(name, d[lo:hi], 1.0)

    def _local(self, fields, terms, run=True):
        """Run local VMP on each part; return ordered-sum moments and ELBO pieces."""
        cfg = self.config.local_vmp
        learned = self.params.learned
        fixed = list(self.params.fixed)

        def work(mf):
            mf.terms = terms
            if run:
                mf.run(cfg.max_iterations, cfg.elbo_rel_tol)
            return local_pieces(mf, learned, fixed)

        if len(fields) > 1:
            with ThreadPoolExecutor(max_workers=len(fields)) as pool:
                results = list(pool.map(work, fields))
        else:
            results = [work(mf) for mf in fields]
        rm, extra = None, 0.0
        for r, e in results:
            rm = _add_moments(rm, r)
            extra += e
        return rm, extra

    @staticmethod
    def _partition(N, workers):
        workers = max(1, min(workers, N))
        bounds = np.linspace(0, N, workers + 1).round().astype(int)
        return [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)]

    # -- streaming variational Bayes -----------------------------------------
    def update_parallel(self, data, worker_count: int | None = None):
        """Absorb one batch; the posterior afterwards is the next batch's prior."""
        X = self.data_matrix(data)
        N = X.shape[0]
        if N == 0:
            return self
        workers = worker_count or self.config.worker_count
        parts = self._partition(N, workers)
        base = {k: v.copy() for k, v in self.params.posterior.items()}
        has_hidden = np.isnan(X).any()
        cfg = self.config.local_vmp
        fields = self._new_fields(X, parts, self.params.terms())

        if not has_hidden and not self.params.has_coupling():
            rm, extra = self._local(fields, self.params.terms(), run=False)
            self.params.posterior = self.params.m_step(base, rm)
            elbo = extra + self.params.energy(rm) - self.params.kl(base)
        else:
            if has_hidden and not self._initialised:
                self._random_start(fields, X, parts)
                rm, _ = self._local(fields, self.params.terms(), run=False)
                self.params.posterior = self.params.m_step(base, rm)
            elbo = -math.inf
            for _ in range(cfg.max_iterations):
                rm, extra = self._local(fields, self.params.terms(), run=has_hidden)
                self.params.posterior = self.params.m_step(base, rm)
                new = extra + self.params.energy(rm) - self.params.kl(base)
                done = abs(new - elbo) <= cfg.elbo_rel_tol * abs(new)
                elbo = new
                if done:
                    break
        self._initialised = True
        index = len(self.records)
        self.records.append(BatchRecord(index, N, float(elbo)))
        self.instances_seen += N
        return self

    def update(self, data):
        return self.update_parallel(data, 1)

    def learn(self, batches, worker_count: int | None = None):
        for b in batches:
            self.update_parallel(b, worker_count)
        return self

    # -- stochastic variational inference ----------------------------------------
    def svi_update(self, data, t: int, total_n: int | None = None):
        svi = self.config.svi
        if svi is None:
            raise ConfigError("svi_update needs LearningConfig.svi")
        X = self.data_matrix(data)
        N = X.shape[0]
        if N == 0:
            return self
        total_n = total_n or self.config.total_n or 10 * self.config.batch_size
        rho = svi.step_size(t)
        parts = self._partition(N, self.config.worker_count)
        fields = self._new_fields(X, parts, self.params.terms())
        has_hidden = np.isnan(X).any()
        if has_hidden and not self._initialised:
            self._random_start(fields, X, parts)
            rm, extra = self._local(fields, self.params.terms(), run=False)
        else:
            rm, extra = self._local(fields, self.params.terms(), run=has_hidden)
        target = self.params.m_step(self.params.prior, rm, scale=total_n / N)
        blended = {}
        for name, cur in self.params.posterior.items():
            tgt = target[name]
            if isinstance(cur, DirichletBlock):
                blended[name] = DirichletBlock((1 - rho) * cur.eta + rho * tgt.eta)
            else:
                blended[name] = GaussianBlock((1 - rho) * cur.ng + rho * tgt.ng, (1 - rho) * cur.beta + rho * tgt.beta)
        self.params.posterior = blended
        elbo = extra + self.params.energy(rm) - self.params.kl(self.params.prior) * N / total_n
        self._initialised = True
        self.records.append(BatchRecord(len(self.records), N, float(elbo)))
        self.instances_seen += N
        self.svi_steps += 1
        return self

    # -- read-out --------------------------------------------------------------
    def point_estimate(self) -> BayesianNetwork:
        bn = BayesianNetwork(self.dag, self.params.point_cpds())
        report = validate_network(bn)
        if not report.ok:
            raise StructureError(str(report), report)
        return bn

    def elbo_trace(self):
        return [r.elbo for r in self.records]

    def log_lines(self, sep="\t"):
        return [f"{r.batch_index}{sep}{r.instance_count}{sep}{r.elbo!r}" for r in self.records]


def build_learner(template, priors=None, fixed=None, config=None, name="custom") -> LearnableModel:
    """Create a learner whose posterior starts at the priors.

    ``template`` is a :class:`DAG` (latent variables carry role ``latent``)
    or a :class:`BayesianNetwork` whose structure is reused.
    """
    dag = template.dag if isinstance(template, BayesianNetwork) else template
    if not any(v.role != LATENT for v in dag.variables):
        raise EmptyModel("the template has no observable variables")
    probe = BayesianNetwork(dag, {})
    report = validate_network(probe)
    if not report.ok and report.rule != "missing distribution":
        raise StructureError(str(report), report)
    for v in dag.variables:
        if v.is_discrete and dag.continuous_parents(v.name):
            raise StructureError(f"CLG restriction violated at {v.name!r}")
    return LearnableModel(dag, priors, fixed, config, name)


def update_model(m: LearnableModel, batch) -> LearnableModel:
    return m.update(batch)


def update_model_parallel(m: LearnableModel, batch, worker_count: int) -> LearnableModel:
    return m.update_parallel(batch, worker_count)


def svi_update(m: LearnableModel, minibatch, t: int, total_n: int | None = None) -> LearnableModel:
    return m.svi_update(minibatch, t, total_n)


def extract_point_estimate(m: LearnableModel) -> BayesianNetwork:
    return m.point_estimate()


def evidence_lower_bound_trace(m: LearnableModel):
    return m.elbo_trace()
