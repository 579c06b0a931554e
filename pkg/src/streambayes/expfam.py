"""Exponential-family distributions in natural parameterization.

Each family stores its natural parameter vector ``eta``.  ``log_normalizer``
is ``A(eta)``; its gradient equals :meth:`expected_stats`.  Conjugate updates
are additions in natural coordinates, and KL divergences use the Bregman form

    KL(q || p) = A(eta_p) - A(eta_q) - (eta_p - eta_q) . grad A(eta_q)

Sufficient statistics per family:

===========  ===================================  ==========================
family       t(x)                                 eta
===========  ===================================  ==========================
Multinomial  one-hot(x)                           log p
Dirichlet    log p                                alpha - 1
Gaussian     (x, x^2)                             (mu/s2, -1/(2 s2))
Gamma        (log x, x)                           (shape - 1, -rate)
NormalGamma  (l*m, l*m^2, l, log l)               (k*mu, -k/2, -(b + k*mu^2/2), a - 1/2)
===========  ===================================  ==========================

``NormalGamma`` is the joint prior over a Gaussian mean ``m`` and precision
``l``: ``m | l ~ N(mu, 1/(k l))``, ``l ~ Gamma(a, b)`` (rate ``b``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .errors import ConjugacyError, DomainError

MULTINOMIAL = "Multinomial"
DIRICHLET = "Dirichlet"
GAUSSIAN = "Gaussian"
GAMMA = "Gamma"
NORMAL_GAMMA = "NormalGamma"

LOG_2PI = math.log(2.0 * math.pi)


class EFDistribution:
    family = None

    def __init__(self, natural):
        eta = np.array(natural, dtype=np.float64).reshape(-1)
        self._check(eta)
        eta.setflags(write=False)
        self.natural = eta

    def _check(self, eta):
        pass

    @property
    def dim(self):
        return self.natural.shape[0]

    def log_normalizer(self) -> float:
        return float(type(self).log_normalizer_of(self.natural))

    def expected_stats(self) -> np.ndarray:
        raise NotImplementedError

    def moments(self):
        raise NotImplementedError

    def with_natural(self, eta):
        return type(self)(eta)

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.natural, other.natural)

    def __repr__(self):
        return f"{self.family}{self.moments()}"


class Multinomial(EFDistribution):
    family = MULTINOMIAL

    @classmethod
    def from_probs(cls, probs):
        p = np.asarray(probs, dtype=np.float64)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise DomainError("multinomial probabilities must form a simplex")
        with np.errstate(divide="ignore"):
            return cls(np.log(p))

    def _check(self, eta):
        if eta.size < 1 or np.any(np.isnan(eta)) or np.any(eta == np.inf):
            raise DomainError("invalid multinomial natural parameters")

    @staticmethod
    def log_normalizer_of(eta):
        return logsumexp(eta)

    @property
    def probs(self):
        eta = self.natural
        e = np.exp(eta - eta.max())
        return e / e.sum()

    def expected_stats(self):
        return self.probs

    def moments(self):
        return (self.probs,)

    def __repr__(self):
        return "Multinomial [ " + ", ".join(repr(float(x)) for x in self.probs) + " ]"


class Dirichlet(EFDistribution):
    family = DIRICHLET

    @classmethod
    def from_concentration(cls, alpha):
        a = np.asarray(alpha, dtype=np.float64)
        if np.any(a <= 0):
            raise DomainError("Dirichlet concentrations must be positive")
        return cls(a - 1.0)

    def _check(self, eta):
        if eta.size < 2 or not np.all(eta > -1.0):
            raise DomainError("Dirichlet concentrations must be positive")

    @property
    def concentration(self):
        return self.natural + 1.0

    @staticmethod
    def log_normalizer_of(eta):
        a = eta + 1.0
        return gammaln(a).sum() - gammaln(a.sum())

    def expected_stats(self):
        a = self.concentration
        return digamma(a) - digamma(a.sum())

    @property
    def mean(self):
        a = self.concentration
        return a / a.sum()

    def moments(self):
        return (self.concentration,)


class Gaussian(EFDistribution):
    family = GAUSSIAN

    @classmethod
    def from_moments(cls, mean, variance):
        if not variance > 0:
            raise DomainError("Gaussian variance must be positive")
        return cls([mean / variance, -0.5 / variance])

    def _check(self, eta):
        if eta.size != 2 or not np.all(np.isfinite(eta)) or not eta[1] < 0:
            raise DomainError("Gaussian natural parameter eta2 must be negative")

    @staticmethod
    def log_normalizer_of(eta):
        return -eta[0] ** 2 / (4.0 * eta[1]) - 0.5 * np.log(-2.0 * eta[1])

    @property
    def variance(self):
        return -0.5 / self.natural[1]

    @property
    def mean(self):
        return self.natural[0] * self.variance

    def expected_stats(self):
        m, v = self.mean, self.variance
        return np.array([m, m * m + v])

    def moments(self):
        return (float(self.mean), float(self.variance))

    def __repr__(self):
        return f"Normal [ mu = {float(self.mean)!r}, var = {float(self.variance)!r} ]"


class Gamma(EFDistribution):
    family = GAMMA

    @classmethod
    def from_moments(cls, shape, rate):
        if not (shape > 0 and rate > 0):
            raise DomainError("Gamma shape and rate must be positive")
        return cls([shape - 1.0, -rate])

    def _check(self, eta):
        if eta.size != 2 or not (eta[0] > -1.0 and eta[1] < 0):
            raise DomainError("Gamma shape and rate must be positive")

    @staticmethod
    def log_normalizer_of(eta):
        a = eta[0] + 1.0
        return gammaln(a) - a * np.log(-eta[1])

    @property
    def shape(self):
        return self.natural[0] + 1.0

    @property
    def rate(self):
        return -self.natural[1]

    def expected_stats(self):
        a, b = self.shape, self.rate
        return np.array([digamma(a) - np.log(b), a / b])

    def moments(self):
        return (float(self.shape), float(self.rate))


class NormalGamma(EFDistribution):
    family = NORMAL_GAMMA

    @classmethod
    def from_moments(cls, mu, kappa, shape, rate):
        if not (kappa > 0 and shape > 0 and rate > 0):
            raise DomainError("NormalGamma kappa, shape and rate must be positive")
        return cls([kappa * mu, -0.5 * kappa, -(rate + 0.5 * kappa * mu * mu), shape - 0.5])

    def _check(self, eta):
        if eta.size != 4 or not np.all(np.isfinite(eta)):
            raise DomainError("NormalGamma needs four finite natural parameters")
        mu, kappa, a, b = _ng_moments(eta)
        if not (kappa > 0 and a > 0 and b > 0):
            raise DomainError("NormalGamma kappa, shape and rate must be positive")

    @staticmethod
    def log_normalizer_of(eta):
        mu, kappa, a, b = _ng_moments(eta)
        return gammaln(a) - a * np.log(b) + 0.5 * LOG_2PI - 0.5 * np.log(kappa)

    def moments(self):
        return tuple(float(x) for x in _ng_moments(self.natural))

    def expected_stats(self):
        mu, kappa, a, b = _ng_moments(self.natural)
        el = a / b
        return np.array([mu * el, 1.0 / kappa + mu * mu * el, el, digamma(a) - np.log(b)])


def _ng_moments(eta):
    kappa = -2.0 * eta[1]
    mu = eta[0] / kappa
    a = eta[3] + 0.5
    b = -eta[2] - 0.5 * kappa * mu * mu
    return mu, kappa, a, b


FAMILIES = {
    MULTINOMIAL: Multinomial,
    DIRICHLET: Dirichlet,
    GAUSSIAN: Gaussian,
    GAMMA: Gamma,
    NORMAL_GAMMA: NormalGamma,
}


def _family_class(family):
    if isinstance(family, type) and issubclass(family, EFDistribution):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise DomainError(f"unknown family {family!r}") from None


def to_natural(family, *moment) -> np.ndarray:
    """Natural parameters from moment parameters.

    Multinomial takes ``probs``; Dirichlet ``alpha``; Gaussian ``(mean,
    variance)``; Gamma ``(shape, rate)``; NormalGamma ``(mu, kappa, shape, rate)``.
    """
    cls = _family_class(family)
    if cls is Multinomial:
        return Multinomial.from_probs(*moment).natural.copy()
    if cls is Dirichlet:
        return Dirichlet.from_concentration(*moment).natural.copy()
    return cls.from_moments(*moment).natural.copy()


def to_moment(family, natural):
    cls = _family_class(family)
    d = cls(natural)
    if cls is Multinomial:
        return d.probs
    if cls is Dirichlet:
        return d.concentration
    return d.moments()


def expected_sufficient_statistics(d: EFDistribution) -> np.ndarray:
    return d.expected_stats()


class SufficientStatistics:
    """Data summary in the natural coordinates of a conjugate prior family.

    ``vector`` is added to the prior's natural parameters; ``count`` is the
    (possibly fractional) number of observations it summarises.
    """

    def __init__(self, family, vector, count=0.0):
        self.family = _family_class(family).family
        self.vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        self.count = float(count)
        if self.count < 0:
            raise DomainError("count must be non-negative")

    def __add__(self, other):
        if other.family != self.family:
            raise ConjugacyError(f"cannot add {self.family} and {other.family} statistics")
        return SufficientStatistics(self.family, self.vector + other.vector, self.count + other.count)

    @classmethod
    def zeros(cls, prior: EFDistribution):
        return cls(prior.family, np.zeros(prior.dim), 0.0)

    @classmethod
    def counts(cls, counts):
        c = np.asarray(counts, dtype=np.float64)
        return cls(DIRICHLET, c, c.sum())

    @classmethod
    def gaussian_mean(cls, xs, variance):
        """Observations with known ``variance`` for a Gaussian prior on the mean."""
        xs = np.asarray(xs, dtype=np.float64).reshape(-1)
        return cls(GAUSSIAN, [xs.sum() / variance, -0.5 * xs.size / variance], xs.size)

    @classmethod
    def gamma_precision(cls, xs, mean):
        """Observations with known ``mean`` for a Gamma prior on the precision."""
        xs = np.asarray(xs, dtype=np.float64).reshape(-1)
        return cls(GAMMA, [0.5 * xs.size, -0.5 * ((xs - mean) ** 2).sum()], xs.size)

    @classmethod
    def normal_gamma(cls, n, s1, s2):
        """Count, sum and sum of squares for a NormalGamma prior."""
        return cls(NORMAL_GAMMA, [s1, -0.5 * n, -0.5 * s2, 0.5 * n], n)

    @classmethod
    def normal_gamma_data(cls, xs):
        xs = np.asarray(xs, dtype=np.float64).reshape(-1)
        return cls.normal_gamma(xs.size, xs.sum(), (xs * xs).sum())


def conjugate_posterior_update(prior: EFDistribution, stats: SufficientStatistics) -> EFDistribution:
    if stats.family != prior.family:
        raise ConjugacyError(f"{stats.family} statistics do not update a {prior.family} prior")
    if stats.vector.shape != prior.natural.shape:
        raise ConjugacyError("statistics dimension does not match the prior")
    return prior.with_natural(prior.natural + stats.vector)


def kl_divergence(q: EFDistribution, p: EFDistribution) -> float:
    if type(q) is not type(p) or q.dim != p.dim:
        raise DomainError("KL divergence needs two distributions of the same family and dimension")
    if isinstance(q, Multinomial):
        pq, pp = q.probs, p.probs
        mask = pq > 0
        if np.any(pp[mask] == 0):
            return math.inf
        return float(np.sum(pq[mask] * (np.log(pq[mask]) - np.log(pp[mask]))))
    cls = type(q)
    val = (
        cls.log_normalizer_of(p.natural)
        - cls.log_normalizer_of(q.natural)
        - np.dot(p.natural - q.natural, q.expected_stats())
    )
    return max(float(val), 0.0)


def entropy(d: EFDistribution) -> float:
    """Differential (or Shannon) entropy with respect to the base measure."""
    if isinstance(d, Multinomial):
        p = d.probs
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())
    if isinstance(d, Gaussian):
        return 0.5 * (LOG_2PI + 1.0 + math.log(d.variance))
    cls = type(d)
    return float(cls.log_normalizer_of(d.natural) - np.dot(d.natural, d.expected_stats()))
