"""Static conditional linear Gaussian (CLG) Bayesian networks.

A network is a :class:`DAG` over :class:`Variable` objects plus one
conditional distribution per variable.  Discrete variables carry a
:class:`Multinomial` table with one row per configuration of their (discrete)
parents.  Continuous variables carry a :class:`CLGaussian`: for every
configuration of the discrete parents an intercept, a coefficient vector over
the continuous parents and a variance.

Configurations of discrete parents are enumerated in row-major order over the
parents as listed in the DAG.  Values of finite-state variables are 0-based
state indices everywhere; labels only matter for presentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import (
    AttributeTypeError,
    InvalidParameter,
    MissingValue,
    UnknownVariable,
    ValidationError,
)

FINITE_SET = "FINITE_SET"
REAL = "REAL"
OBSERVABLE = "observable"
LATENT = "latent"

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class StateSpace:
    kind: str
    labels: tuple = ()

    @classmethod
    def finite(cls, labels):
        if isinstance(labels, int):
            labels = [str(i) for i in range(labels)]
        return cls(FINITE_SET, tuple(str(x) for x in labels))

    @classmethod
    def real(cls):
        return cls(REAL)

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE_SET

    @property
    def cardinality(self) -> int:
        return len(self.labels) if self.is_finite else 0

    def problems(self):
        if self.kind == FINITE_SET:
            if len(self.labels) < 2:
                return "finite state space needs at least 2 labels"
            if len(set(self.labels)) != len(self.labels):
                return "duplicate state labels"
        elif self.kind == REAL:
            if self.labels:
                return "real state space cannot carry labels"
        else:
            return f"unknown state-space kind {self.kind!r}"
        return None


@dataclass(frozen=True)
class Variable:
    name: str
    space: StateSpace
    role: str = OBSERVABLE
    id: int = -1

    @classmethod
    def finite(cls, name, labels=2, role=OBSERVABLE):
        return cls(name, StateSpace.finite(labels), role)

    @classmethod
    def real(cls, name, role=OBSERVABLE):
        return cls(name, StateSpace.real(), role)

    @property
    def is_discrete(self) -> bool:
        return self.space.is_finite

    @property
    def cardinality(self) -> int:
        return self.space.cardinality


class DAG:
    """Variable registry plus an ordered parent list per variable."""

    def __init__(self, variables: Sequence[Variable], parents: Mapping[str, Sequence[str]] | None = None):
        self.variables = tuple(replace(v, id=i) for i, v in enumerate(variables))
        self._index = {}
        for v in self.variables:
            # duplicates are reported by validation, first occurrence wins here
            self._index.setdefault(v.name, v.id)
        parents = dict(parents or {})
        for child in parents:
            if child not in self._index:
                raise UnknownVariable(child)
        self.parents = {}
        for v in self.variables:
            plist = tuple(parents.get(v.name, ()))
            for p in plist:
                if p not in self._index:
                    raise UnknownVariable(p)
            self.parents[v.name] = plist
        self._order = None

    def __len__(self):
        return len(self.variables)

    @property
    def names(self):
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def variable(self, name_or_id) -> Variable:
        if isinstance(name_or_id, (int, np.integer)):
            return self.variables[int(name_or_id)]
        return self.variables[self.index(name_or_id)]

    def children(self, name: str):
        return [v.name for v in self.variables if name in self.parents[v.name]]

    def discrete_parents(self, name):
        return [p for p in self.parents[name] if self.variable(p).is_discrete]

    def continuous_parents(self, name):
        return [p for p in self.parents[name] if not self.variable(p).is_discrete]

    def parent_cards(self, name):
        return tuple(self.variable(p).cardinality for p in self.discrete_parents(name))

    def n_configs(self, name) -> int:
        return int(np.prod(self.parent_cards(name), dtype=np.int64))

    def topological_order(self):
        """Variable names in a topological order, or ``None`` if cyclic."""
        if self._order is not None:
            return list(self._order)
        indeg = {v.name: len(set(self.parents[v.name])) for v in self.variables}
        kids = {v.name: [] for v in self.variables}
        for child, plist in self.parents.items():
            for p in set(plist):
                kids[p].append(child)
        ready = [v.name for v in self.variables if indeg[v.name] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in kids[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.variables):
            return None
        self._order = tuple(order)
        return list(order)


class Multinomial:
    """Probability table, one simplex row per discrete-parent configuration."""

    kind_family = "Multinomial"

    def __init__(self, table):
        t = np.array(table, dtype=np.float64)
        if t.ndim == 1:
            t = t[None, :]
        t.setflags(write=False)
        self.table = t

    @property
    def n_configs(self):
        return self.table.shape[0]

    def __eq__(self, other):
        return isinstance(other, Multinomial) and np.array_equal(self.table, other.table)

    def __repr__(self):
        return f"Multinomial({self.table.tolist()})"


class CLGaussian:
    """Gaussian whose mean is linear in the continuous parents.

    ``variances`` are variances, not standard deviations.
    """

    kind_family = "Normal"

    def __init__(self, intercepts, variances, coeffs=None):
        a = np.atleast_1d(np.array(intercepts, dtype=np.float64))
        s = np.atleast_1d(np.array(variances, dtype=np.float64))
        if coeffs is None:
            b = np.zeros((a.shape[0], 0))
        else:
            b = np.array(coeffs, dtype=np.float64)
            if b.ndim == 1:
                b = b[None, :] if a.shape[0] == 1 else b[:, None]
        for arr in (a, s, b):
            arr.setflags(write=False)
        self.intercepts, self.variances, self.coeffs = a, s, b

    @classmethod
    def normal(cls, mean, variance):
        return cls([mean], [variance])

    @property
    def n_configs(self):
        return self.intercepts.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, CLGaussian)
            and np.array_equal(self.intercepts, other.intercepts)
            and np.array_equal(self.variances, other.variances)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __repr__(self):
        return (
            f"CLGaussian(intercepts={self.intercepts.tolist()}, "
            f"coeffs={self.coeffs.tolist()}, variances={self.variances.tolist()})"
        )


def distribution_kind(dag: DAG, name: str) -> str:
    """Kind tag implied by a variable's space and its parents' spaces."""
    var = dag.variable(name)
    has_d = bool(dag.discrete_parents(name))
    has_c = bool(dag.continuous_parents(name))
    if var.is_discrete:
        return "Multinomial_Multinomial" if has_d else "Multinomial"
    if has_d and has_c:
        return "Normal_MultinomialNormal"
    if has_d:
        return "Normal_Multinomial"
    if has_c:
        return "Normal_Normal"
    return "Normal"


@dataclass
class ValidationReport:
    ok: bool
    variable: str | None = None
    rule: str | None = None
    message: str = ""

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        return f"{self.rule}: {self.message} (variable {self.variable!r})"


OK = ValidationReport(True)


class BayesianNetwork:
    """A DAG plus one conditional distribution per variable.

    Construction does not validate; call :func:`validate_network` or
    :meth:`check`.  Once checked, a network should be treated as immutable.
    """

    def __init__(self, dag: DAG, cpds: Mapping[str, Multinomial | CLGaussian]):
        self.dag = dag
        self.cpds = dict(cpds)
        for name in self.cpds:
            dag.index(name)

    @classmethod
    def build(cls, variables, parents=None, cpds=None):
        return cls(DAG(variables, parents), cpds or {})

    @property
    def variables(self):
        return self.dag.variables

    @property
    def names(self):
        return self.dag.names

    def __len__(self):
        return len(self.dag)

    def index(self, name):
        return self.dag.index(name)

    def variable(self, name_or_id):
        return self.dag.variable(name_or_id)

    def parents(self, name):
        return self.dag.parents[name]

    def cpd(self, name):
        return self.cpds[name]

    def topological_order(self):
        return self.dag.topological_order()

    def kind(self, name):
        return distribution_kind(self.dag, name)

    def check(self):
        report = validate_network(self)
        if not report.ok:
            raise ValidationError(report)
        return self

    def encode(self, assignment: Mapping, allow_missing=True) -> np.ndarray:
        """Dense float vector of an assignment in registry order, NaN = unset."""
        x = np.full(len(self.dag), np.nan)
        for key, value in assignment.items():
            var = self.dag.variable(key)
            if value is None:
                continue
            x[var.id] = check_value(var, value)
        if not allow_missing:
            missing = np.flatnonzero(np.isnan(x))
            if missing.size:
                raise MissingValue(self.dag.variables[missing[0]].name)
        return x

    def decode(self, x) -> dict:
        out = {}
        for v in self.dag.variables:
            val = x[v.id]
            if np.isnan(val):
                continue
            out[v.name] = int(val) if v.is_discrete else float(val)
        return out

    def __eq__(self, other):
        if not isinstance(other, BayesianNetwork):
            return NotImplemented
        return (
            self.dag.variables == other.dag.variables
            and self.dag.parents == other.dag.parents
            and self.cpds == other.cpds
        )

    def __repr__(self):
        return f"BayesianNetwork({self.names})"

    def __str__(self):
        from .serialization import render_network

        return render_network(self)


def check_value(var: Variable, value) -> float:
    if var.is_discrete:
        if isinstance(value, str):
            if value in var.space.labels:
                return float(var.space.labels.index(value))
            raise AttributeTypeError(f"{value!r} is not a state of {var.name!r}")
        fv = float(value)
        if fv != int(fv) or not 0 <= fv < var.cardinality:
            raise AttributeTypeError(f"value {value!r} outside the states of {var.name!r}")
        return fv
    fv = float(value)
    if not math.isfinite(fv):
        raise AttributeTypeError(f"non-finite value for {var.name!r}")
    return fv


def validate_network(bn: BayesianNetwork) -> ValidationReport:
    """Check every structural and parametric invariant; first failure wins."""
    dag = bn.dag
    seen = set()
    for v in dag.variables:
        if v.name in seen:
            return ValidationReport(False, v.name, "duplicate name", "variable names must be unique")
        seen.add(v.name)
        problem = v.space.problems()
        if problem:
            return ValidationReport(False, v.name, "state space", problem)
    for v in dag.variables:
        plist = dag.parents[v.name]
        if v.name in plist:
            return ValidationReport(False, v.name, "self-parent", "a variable cannot be its own parent")
        if len(set(plist)) != len(plist):
            return ValidationReport(False, v.name, "duplicate parent", "parent listed twice")
    if dag.topological_order() is None:
        bad = _cycle_member(dag)
        return ValidationReport(False, bad, "cycle", "the graph contains a directed cycle")
    for v in dag.variables:
        if v.is_discrete and dag.continuous_parents(v.name):
            return ValidationReport(
                False, v.name, "CLG restriction", "a discrete variable cannot have continuous parents"
            )
    for v in dag.variables:
        cpd = bn.cpds.get(v.name)
        if cpd is None:
            return ValidationReport(False, v.name, "missing distribution", "no conditional distribution")
        problem = _cpd_problem(dag, v, cpd)
        if problem:
            return ValidationReport(False, v.name, problem[0], problem[1])
    return OK


def _cycle_member(dag):
    order = []
    indeg = {v.name: len(set(dag.parents[v.name])) for v in dag.variables}
    ready = [n for n, d in indeg.items() if d == 0]
    while ready:
        n = ready.pop()
        order.append(n)
        for c in dag.children(n):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    for v in dag.variables:
        if v.name not in order:
            return v.name
    return None


def _cpd_problem(dag, var, cpd):
    n_cfg = dag.n_configs(var.name)
    if var.is_discrete:
        if not isinstance(cpd, Multinomial):
            return "distribution kind", f"expected {distribution_kind(dag, var.name)}, got a Gaussian"
        t = cpd.table
        if t.shape != (n_cfg, var.cardinality):
            return "table shape", f"expected {(n_cfg, var.cardinality)}, got {t.shape}"
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            return "probability row", "negative or non-finite probability"
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
            return "probability row", "row does not sum to 1"
        return None
    if not isinstance(cpd, CLGaussian):
        return "distribution kind", f"expected {distribution_kind(dag, var.name)}, got a Multinomial"
    p = len(dag.continuous_parents(var.name))
    if cpd.intercepts.shape != (n_cfg,) or cpd.variances.shape != (n_cfg,):
        return "configuration count", f"expected {n_cfg} parameter triples"
    if cpd.coeffs.shape != (n_cfg, p):
        return "coefficient length", f"expected {p} coefficients per configuration"
    if not (np.all(np.isfinite(cpd.intercepts)) and np.all(np.isfinite(cpd.coeffs))):
        return "parameter", "non-finite intercept or coefficient"
    if not np.all(np.isfinite(cpd.variances)) or np.any(cpd.variances <= 0):
        return "variance", "variance must be strictly positive"
    return None


def clg_log_density(dist: CLGaussian, z, x_d=0, x_c=(), cards=None):
    """``log N(z; a(x_d) + b(x_d)^T x_c, var(x_d))``.

    ``x_d`` is the row-major configuration index of the discrete parents, or a
    tuple of parent states together with ``cards``.
    """
    if isinstance(x_d, (tuple, list)):
        cfg = int(np.ravel_multi_index(tuple(int(v) for v in x_d), cards)) if x_d else 0
    else:
        cfg = int(x_d)
    var = float(dist.variances[cfg])
    if not var > 0:
        raise InvalidParameter(f"variance must be positive, got {var}")
    x_c = np.asarray(x_c, dtype=np.float64).reshape(-1)
    if x_c.shape[0] != dist.coeffs.shape[1]:
        raise InvalidParameter("continuous parent vector has the wrong length")
    mean = float(dist.intercepts[cfg]) + float(dist.coeffs[cfg] @ x_c)
    return -0.5 * (LOG_2PI + math.log(var) + (z - mean) ** 2 / var)


def config_indices(bn_or_dag, name, X):
    """Row-major configuration index of ``name``'s discrete parents per row of X."""
    dag = bn_or_dag.dag if isinstance(bn_or_dag, BayesianNetwork) else bn_or_dag
    dp = [dag.index(p) for p in dag.discrete_parents(name)]
    if not dp:
        return np.zeros(X.shape[0], dtype=np.int64)
    return _kernels.config_index(X[:, dp].astype(np.int64), dag.parent_cards(name))


def log_factor(bn: BayesianNetwork, name: str, X: np.ndarray) -> np.ndarray:
    """``log p(x_name | pa(x_name))`` for every row of a complete data matrix."""
    var = bn.variable(name)
    cpd = bn.cpds[name]
    cfg = config_indices(bn, name, X)
    col = X[:, var.id]
    if var.is_discrete:
        with np.errstate(divide="ignore"):
            return np.log(cpd.table[cfg, col.astype(np.int64)])
    cp = [bn.index(p) for p in bn.dag.continuous_parents(name)]
    mean = cpd.intercepts[cfg]
    if cp:
        mean = mean + np.einsum("nj,nj->n", cpd.coeffs[cfg], X[:, cp])
    var_ = cpd.variances[cfg]
    return -0.5 * (LOG_2PI + np.log(var_) + (col - mean) ** 2 / var_)


def log_probability_rows(bn: BayesianNetwork, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    total = np.zeros(X.shape[0])
    for v in bn.variables:
        total += log_factor(bn, v.name, X)
    return total


def log_probability(bn: BayesianNetwork, assignment) -> float:
    """Joint log density of a complete assignment (mapping name -> value)."""
    if isinstance(assignment, Mapping):
        x = bn.encode(assignment, allow_missing=False)
    else:
        x = np.asarray(assignment, dtype=np.float64)
        missing = np.flatnonzero(np.isnan(x))
        if missing.size:
            raise MissingValue(bn.variables[missing[0]].name)
    return float(log_probability_rows(bn, x[None, :])[0])


def sample_rows(bn: BayesianNetwork, n: int, rng: np.random.Generator, evidence=None):
    """Ancestral samples as an ``(n, V)`` matrix.

    With ``evidence`` (a dense vector, NaN = free) the observed columns are
    clamped instead of sampled and the per-row log likelihood weight of the
    evidence is returned as a second value.
    """
    order = bn.topological_order()
    X = np.empty((n, len(bn)))
    logw = np.zeros(n)
    for name in order:
        var = bn.variable(name)
        obs = None if evidence is None else evidence[var.id]
        if obs is not None and not np.isnan(obs):
            X[:, var.id] = obs
            logw += log_factor(bn, name, X)
            continue
        cpd = bn.cpds[name]
        cfg = config_indices(bn, name, X)
        if var.is_discrete:
            cdf = np.cumsum(cpd.table, axis=1)
            X[:, var.id] = _kernels.categorical_sample(cdf, cfg, rng.random(n))
        else:
            cp = [bn.index(p) for p in bn.dag.continuous_parents(name)]
            mean = cpd.intercepts[cfg].copy()
            if cp:
                mean += np.einsum("nj,nj->n", cpd.coeffs[cfg], X[:, cp])
            X[:, var.id] = mean + np.sqrt(cpd.variances[cfg]) * rng.standard_normal(n)
    if evidence is None:
        return X
    return X, logw


def ancestral_sample(bn: BayesianNetwork, seed: int) -> dict:
    """One complete assignment drawn in topological order; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    return bn.decode(sample_rows(bn, 1, rng)[0])


def ancestral_samples(bn: BayesianNetwork, n: int, seed: int) -> np.ndarray:
    return sample_rows(bn, n, np.random.default_rng(seed))


def network_from_rows(variables: Iterable[Variable], parents, cpds) -> BayesianNetwork:
    """Build and validate in one call."""
    return BayesianNetwork.build(list(variables), parents, cpds).check()
