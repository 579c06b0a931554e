"""Two-slice dynamic Bayesian networks: filtering, prediction and learning.

A DBN is a time-0 network over the slice variables plus a transition
network over the same slice variables and *interface copies*.  The copy
of slice variable ``X`` is named ``X_prev``; it is a root of the transition
network and stands for ``X`` at the previous time step.  Copies carry a
placeholder CPD that is never used: at run time it is replaced by the
belief about the previous slice.

Filtering follows the factored frontier: the belief about slice ``t - 1``
is a product of per-variable marginals, and each step folds those
marginals into a one-slice static network which is then handed to VMP or
importance sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expfam
from .core import (
    DAG,
    LATENT,
    BayesianNetwork,
    CLGaussian,
    Multinomial,
    validate_network,
)
from .errors import OrderError, SchemaError, StructureError, UnknownVariable
from .inference.engine import LOG_2PI, LOG_FLOOR, DiscreteTerms, GaussianTerms, MeanField
from .inference.sampling import importance_sampling_infer
from .inference.vmp import InferenceConfig, PointMass, vmp_infer
from .learning import (
    BatchRecord,
    LearningConfig,
    ParameterSet,
    _add_moments,
    data_driven_start,
    default_priors,
    local_pieces,
)

COPY_SUFFIX = "_prev"
VMP = "vmp"
IS = "is"


def copy_name(name: str) -> str:
    return name + COPY_SUFFIX


def transition_dag(slice_dag: DAG, temporal: dict, slice_parents: dict | None = None) -> DAG:
    """Transition structure from a slice structure plus temporal edges.

    ``temporal`` maps a slice variable to the slice variables whose previous
    values it depends on; those parents come first in its parent list.
    ``slice_parents`` overrides the intra-slice parents (default: as in
    ``slice_dag``).
    """
    slice_parents = slice_parents if slice_parents is not None else dict(slice_dag.parents)
    copies = []
    for child, bases in temporal.items():
        for b in bases:
            if b not in copies:
                copies.append(b)
    variables = list(slice_dag.variables) + [
        _copy_variable(slice_dag.variable(b)) for b in copies
    ]
    parents = {}
    for v in slice_dag.variables:
        parents[v.name] = [copy_name(b) for b in temporal.get(v.name, ())] + list(slice_parents.get(v.name, ()))
    return DAG(variables, parents)


def _copy_variable(var):
    from dataclasses import replace

    return replace(var, name=copy_name(var.name), role=LATENT)


def placeholder_cpd(var):
    if var.is_discrete:
        return Multinomial(np.full((1, var.cardinality), 1.0 / var.cardinality))
    return CLGaussian.normal(0.0, 1.0)


class DynamicBayesianNetwork:
    """Validated pair of time-0 and transition networks."""

    def __init__(self, time0: BayesianNetwork, transition: BayesianNetwork):
        self.time0 = time0
        self.transition = transition
        self.slice_names = list(time0.names)
        self.copies = {n: n[: -len(COPY_SUFFIX)] for n in transition.names if n not in set(self.slice_names)}
        self.interface = [b for b in self.copies.values()]

    @property
    def observables(self):
        return [v.name for v in self.time0.variables if v.role != LATENT]

    def slice_variable(self, name):
        return self.time0.variable(name)

    def __repr__(self):
        return f"DynamicBayesianNetwork(slice={self.slice_names}, interface={self.interface})"

    def __str__(self):
        return "Time 0:\n" + str(self.time0) + "\nTransition:\n" + str(self.transition)


def check_structure(time0_dag: DAG, trans_dag: DAG):
    """Structural rules shared by networks and learnable templates."""
    slice_names = list(time0_dag.names)
    sset = set(slice_names)
    tnames = set(trans_dag.names)
    missing = sset - tnames
    if missing:
        raise StructureError(f"transition lacks slice variables {sorted(missing)}")
    for name in tnames - sset:
        if not name.endswith(COPY_SUFFIX):
            raise StructureError(f"transition variable {name!r} is not declared in the time-0 slice")
        base = name[: -len(COPY_SUFFIX)]
        if base not in sset:
            raise StructureError(f"interface copy {name!r} refers to undeclared slice variable {base!r}")
        if trans_dag.variable(name).space != time0_dag.variable(base).space:
            raise StructureError(f"interface copy {name!r} has a different state space from {base!r}")
        if trans_dag.parents[name]:
            raise StructureError(f"temporal edge into {name!r} points backward in time")
    for name in slice_names:
        a, b = time0_dag.variable(name), trans_dag.variable(name)
        if a.space != b.space or a.role != b.role:
            raise StructureError(f"slice variable {name!r} differs between time 0 and the transition")
    for dag in (time0_dag, trans_dag):
        if dag.topological_order() is None:
            raise StructureError("intra-slice structure contains a cycle")
        for v in dag.variables:
            if v.is_discrete and dag.continuous_parents(v.name):
                raise StructureError(f"CLG restriction violated at {v.name!r}")


def define_dbn(time0: BayesianNetwork, transition: BayesianNetwork) -> DynamicBayesianNetwork:
    check_structure(time0.dag, transition.dag)
    cpds = dict(transition.cpds)
    for name in transition.names:
        if name not in time0.dag.names and name not in cpds:
            cpds[name] = placeholder_cpd(transition.variable(name))
    transition = BayesianNetwork(transition.dag, cpds)
    for part in (time0, transition):
        report = validate_network(part)
        if not report.ok:
            raise StructureError(str(report), report)
    return DynamicBayesianNetwork(time0, transition)


def unroll(dbn: DynamicBayesianNetwork, T: int) -> BayesianNetwork:
    """Static network over ``T`` slices; variable ``X`` at time t is ``X[t]``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    from dataclasses import replace

    variables, parents, cpds = [], {}, {}
    for t in range(T):
        src = dbn.time0 if t == 0 else dbn.transition
        for name in dbn.slice_names:
            var = src.variable(name)
            new = f"{name}[{t}]"
            variables.append(replace(var, name=new))
            plist = []
            for p in src.parents(name):
                if p in dbn.copies:
                    plist.append(f"{dbn.copies[p]}[{t - 1}]")
                else:
                    plist.append(f"{p}[{t}]")
            parents[new] = plist
            cpds[new] = src.cpds[name]
    return BayesianNetwork(DAG(variables, parents), cpds)


# -- belief states -------------------------------------------------------------


@dataclass
class BeliefState:
    """Factored marginals over the slice variables at ``time``.

    ``time == -1`` marks the state before any slice has been processed; its
    marginals are then the time-0 prior marginals.
    """

    time: int
    marginals: dict

    def copy(self):
        return BeliefState(self.time, dict(self.marginals))


@dataclass(frozen=True)
class DynamicEvidence:
    time_id: int
    assignment: dict = field(default_factory=dict)

    @classmethod
    def from_instance(cls, inst):
        values = {a.name: v for a, v in zip(inst.attributes, inst.values) if v == v}
        labelled = {}
        for a in inst.attributes:
            if a.name in values:
                v = values[a.name]
                labelled[a.name] = a.space.labels[int(v)] if a.is_discrete else v
        return cls(int(inst.time_id), labelled)


def _moments(dist):
    """``probs`` for discrete marginals, ``(mean, var)`` for Gaussian ones."""
    if isinstance(dist, PointMass):
        if dist.cardinality:
            return dist.probs
        return (float(dist.value), 0.0)
    if isinstance(dist, expfam.Multinomial):
        return dist.probs
    return (float(dist.mean), float(dist.variance))


def _is_point(m):
    if isinstance(m, tuple):
        return m[1] == 0.0
    return np.count_nonzero(m) == 1


def slice_network(dbn: DynamicBayesianNetwork, belief: dict):
    """One-slice static network conditioned on the previous belief.

    A copy whose only child has the same kind (discrete-discrete or
    Gaussian-Gaussian) is summed out analytically: this is exact under the
    factored belief and keeps the slice free of extra latent variables.  Any
    other copy stays in the network as a root carrying its belief (or as
    evidence when the belief is a point mass).

    Returns ``(network, extra_evidence)``.
    """
    tr = dbn.transition
    parents = {n: list(tr.parents(n)) for n in dbn.slice_names}
    cpds = {n: tr.cpds[n] for n in dbn.slice_names}
    kept, evidence = [], {}
    for copy, base in dbn.copies.items():
        var = tr.variable(copy)
        m = _moments(belief[base])
        kids = tr.dag.children(copy)
        child = kids[0] if len(kids) == 1 else None
        if child is not None and tr.variable(child).is_discrete == var.is_discrete:
            cpds[child] = _absorb(tr, parents[child], cpds[child], copy, m)
            parents[child].remove(copy)
        elif not kids:
            continue
        elif _is_point(m):
            kept.append(var)
            evidence[copy] = var.space.labels[int(np.argmax(m))] if var.is_discrete else m[0]
            cpds[copy] = placeholder_cpd(var)
        else:
            kept.append(var)
            if var.is_discrete:
                p = np.asarray(m, dtype=np.float64)
                cpds[copy] = Multinomial((p / p.sum())[None])
            else:
                cpds[copy] = CLGaussian.normal(m[0], m[1])
    variables = [tr.variable(n) for n in dbn.slice_names] + kept
    parents.update({v.name: [] for v in kept})
    return BayesianNetwork(DAG(variables, parents), cpds), evidence


def _absorb(tr, plist, cpd, copy, m):
    dag = tr.dag
    var = dag.variable(copy)
    if var.is_discrete:
        dp = [p for p in plist if dag.variable(p).is_discrete]
        cards = [dag.variable(p).cardinality for p in dp]
        k = dp.index(copy)
        T = cpd.table.reshape(cards + [cpd.table.shape[1]])
        T = np.moveaxis(np.tensordot(np.asarray(m), T, axes=([0], [k])), 0, 0)
        T = T.reshape(-1, cpd.table.shape[1])
        return Multinomial(T / T.sum(axis=1, keepdims=True))
    cp = [p for p in plist if not dag.variable(p).is_discrete]
    j = cp.index(copy)
    mean, v = m
    b = cpd.coeffs[:, j]
    return CLGaussian(cpd.intercepts + b * mean, cpd.variances + b * b * v, np.delete(cpd.coeffs, j, axis=1))


def _clean_evidence(assignment):
    """Drop unset (None / NaN) entries."""
    return {k: v for k, v in assignment.items() if v is not None and not (isinstance(v, float) and v != v)}


def _run_static(bn, evidence, targets, algo, cfg):
    if algo == VMP:
        return vmp_infer(bn, evidence, targets, cfg)
    if algo == IS:
        return importance_sampling_infer(bn, evidence, targets, cfg)
    raise ValueError(f"unknown algorithm {algo!r}")


def _slice_step(dbn, belief, assignment, algo, cfg, t):
    for k in assignment:
        if k not in dbn.slice_names:
            raise UnknownVariable(k)
    if belief is None:
        bn, extra = dbn.time0, {}
    else:
        bn, extra = slice_network(dbn, belief)
    ev = {**assignment, **extra}
    step_cfg = InferenceConfig(
        cfg.max_iterations, cfg.elbo_rel_tol, cfg.seed + t, cfg.sample_count, cfg.worker_count, cfg.jitter
    )
    report = _run_static(bn, ev, list(dbn.slice_names), algo, step_cfg)
    return {n: report.posteriors[n] for n in dbn.slice_names}


def initial_belief(dbn: DynamicBayesianNetwork, cfg: InferenceConfig | None = None) -> BeliefState:
    """State before the first slice: time-0 prior marginals."""
    cfg = cfg or InferenceConfig()
    report = vmp_infer(dbn.time0, {}, list(dbn.slice_names), cfg)
    return BeliefState(-1, dict(report.posteriors))


def _advance(dbn, state: BeliefState, t, assignment, algo, cfg):
    """Belief at time ``t``; intermediate slices are rolled without evidence."""
    if t <= state.time:
        raise OrderError(f"time {t} does not follow time {state.time}")
    if t < 0:
        raise OrderError("time ids must be non-negative")
    marg = None if state.time < 0 else state.marginals
    step = state.time + 1
    while step < t:
        marg = _slice_step(dbn, marg, {}, algo, cfg, step)
        step += 1
    marg = _slice_step(dbn, marg, assignment, algo, cfg, t)
    return BeliefState(t, marg)


def ff_filter_step(
    dbn: DynamicBayesianNetwork,
    belief: BeliefState | None,
    evidence,
    algo: str = VMP,
    cfg: InferenceConfig | None = None,
) -> BeliefState:
    """Factored-frontier filtering step.

    ``evidence`` is a :class:`DynamicEvidence` or a dynamic data instance.
    Time 0 uses the time-0 network; later times use the transition network
    with the previous belief folded in.  If ``evidence.time_id`` skips ahead,
    the skipped slices are filtered with no evidence.
    """
    cfg = cfg or InferenceConfig()
    if not isinstance(evidence, DynamicEvidence):
        evidence = DynamicEvidence.from_instance(evidence)
    belief = belief if belief is not None else BeliefState(-1, {})
    return _advance(dbn, belief, evidence.time_id, _clean_evidence(evidence.assignment), algo, cfg)


def filtered_posterior(state: BeliefState, target: str):
    try:
        return state.marginals[target]
    except KeyError:
        raise UnknownVariable(target) from None


def predictive_posterior(
    dbn: DynamicBayesianNetwork, state: BeliefState, target: str, horizon: int = 1, algo: str = VMP, cfg=None
):
    """Marginal of ``target`` ``horizon`` steps ahead, with no new evidence.

    ``state`` is left untouched.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if target not in dbn.slice_names:
        raise UnknownVariable(target)
    cfg = cfg or InferenceConfig()
    rolled = _advance(dbn, state, state.time + horizon, {}, algo, cfg)
    return rolled.marginals[target]


def filter_sequence(dbn, instances, algo=VMP, cfg=None):
    """Yield ``(time, BeliefState)`` after every instance of one sequence."""
    state = BeliefState(-1, {})
    for inst in instances:
        state = ff_filter_step(dbn, state, inst, algo, cfg)
        yield state.time, state


# -- learning ------------------------------------------------------------------


def _belief_terms(var, beliefs, observed):
    """Per-row root terms for an interface copy.

    Rows where the copy is observed get terms whose expected log density is
    zero, so point masses add nothing to the ELBO.
    """
    N = len(beliefs)
    if var.is_discrete:
        P = np.array(beliefs, dtype=np.float64).reshape(N, var.cardinality)
        with np.errstate(divide="ignore"):
            elog = np.maximum(np.log(P), LOG_FLOOR)
        return DiscreteTerms(elog[:, None, :])
    m = np.array([b[0] for b in beliefs])
    v = np.array([b[1] for b in beliefs])
    v_safe = np.where(observed, 1.0, v)
    el = np.where(observed, 0.0, 1.0 / v_safe)
    ela = el * m
    return GaussianTerms(
        el[:, None],
        ela[:, None],
        (ela * m)[:, None],
        np.where(observed, LOG_2PI, -np.log(v_safe))[:, None],
        np.zeros((N, 1, 0)),
        np.zeros((N, 1, 0, 0)),
    )


@dataclass
class _Group:
    """Rows of one lockstep step that share a network (time 0 or transition)."""

    dag: DAG
    seqs: list
    rows: np.ndarray
    mf: MeanField = None


class DynamicLearnableModel:
    """Conjugate parameter posteriors for a two-slice template.

    Time-0 and transition CPDs have separate parameters.  Learning runs the
    factored-frontier forward pass of every sequence in the batch against
    the current q(theta), sums the expected statistics per slice kind and
    applies the conjugate update, iterating within the batch like the
    static learner.  The final belief of each sequence is carried into the
    next batch.
    """

    def __init__(self, time0_dag: DAG, trans_dag: DAG, priors=None, fixed=None, config=None, name="dynamic"):
        check_structure(time0_dag, trans_dag)
        self.name = name
        self.config = config or LearningConfig()
        self.time0_dag = time0_dag
        self.trans_dag = trans_dag
        self.slice_names = list(time0_dag.names)
        self.copies = {n: n[: -len(COPY_SUFFIX)] for n in trans_dag.names if n not in set(self.slice_names)}
        priors = dict(priors or {})
        fixed = dict(fixed or {})
        f0 = fixed.get("time0", {})
        ft = fixed.get("transition", {})
        self.params0 = ParameterSet(
            time0_dag,
            default_priors(time0_dag, [n for n in self.slice_names if n not in f0], priors.get("time0")),
            f0,
        )
        self.params_tr = ParameterSet(
            trans_dag,
            default_priors(trans_dag, [n for n in self.slice_names if n not in ft], priors.get("transition")),
            ft,
        )
        self.observables = [v.name for v in time0_dag.variables if v.role != LATENT]
        self.beliefs: dict = {}
        self.records: list[BatchRecord] = []
        self.instances_seen = 0
        self._initialised = False

    # -- data layout -----------------------------------------------------------
    def _plan(self, batch):
        attrs = batch.attributes
        for n in self.observables:
            a = attrs.get(n)
            if a is None:
                raise SchemaError(f"data has no attribute {n!r}")
            var = self.time0_dag.variable(n)
            if a.space.kind != var.space.kind or (a.is_discrete and a.space.cardinality != var.cardinality):
                raise SchemaError(f"attribute {n!r} does not match the model's state space")
        arr = batch.to_array()
        cols = [(self.time0_dag.index(n), attrs.get(n).index) for n in self.observables]
        seqs = {}
        for inst, row in zip(batch.instances, arr):
            if not hasattr(inst, "sequence_id"):
                raise SchemaError("dynamic learning needs dynamic data instances")
            seqs.setdefault(inst.sequence_id, []).append((inst.time_id, row))
        steps = {}
        for s, items in seqs.items():
            last = self.beliefs[s][0] if s in self.beliefs else -1
            out = []
            for t, row in items:
                if t <= last:
                    raise OrderError(f"sequence {s}: time {t} does not follow time {last}")
                if t < 0:
                    raise OrderError("time ids must be non-negative")
                for _ in range(last + 1, t):
                    out.append(np.full(len(self.slice_names), np.nan))
                x = np.full(len(self.slice_names), np.nan)
                for vi, ai in cols:
                    x[vi] = row[ai]
                out.append(x)
                last = t
            steps[s] = (last, out)
        return steps

    def _groups(self, steps):
        order = list(steps)
        K = max(len(v[1]) for v in steps.values())
        plan = []
        for k in range(K):
            live = [s for s in order if k < len(steps[s][1])]
            first = [s for s in live if k == 0 and s not in self.beliefs]
            later = [s for s in live if not (k == 0 and s not in self.beliefs)]
            groups = []
            if first:
                groups.append(_Group(self.time0_dag, first, np.array([steps[s][1][k] for s in first])))
            if later:
                rows = np.full((len(later), len(self.trans_dag)), np.nan)
                rows[:, : len(self.slice_names)] = [steps[s][1][k] for s in later]
                groups.append(_Group(self.trans_dag, later, rows))
            plan.append(groups)
        return plan

    # -- forward pass ----------------------------------------------------------
    def _prepare_transition(self, g, current):
        """Set copy evidence / belief terms for a transition group."""
        extra = {}
        for copy, base in self.copies.items():
            var = self.trans_dag.variable(copy)
            beliefs = [current[s][base] for s in g.seqs]
            observed = np.array([_is_point(b) for b in beliefs])
            col = self.trans_dag.index(copy)
            for i, b in enumerate(beliefs):
                g.rows[i, col] = (float(np.argmax(b)) if var.is_discrete else b[0]) if observed[i] else np.nan
            extra[copy] = _belief_terms(var, beliefs, observed)
        return extra

    def _snapshot(self, g, mf):
        out = {}
        for i, s in enumerate(g.seqs):
            b = {}
            for name in self.slice_names:
                v = mf.dag.index(name)
                if mf.nodes[v].discrete:
                    b[name] = mf.P[v][i].copy()
                else:
                    b[name] = (float(mf.M[v][i]), float(mf.V[v][i]))
            out[s] = b
        return out

    def _forward(self, plan, init=None, run=True):
        """One forward pass; returns (moments0, moments_tr, extra, beliefs)."""
        cfg = self.config.local_vmp
        current = {s: b for s, (t, b) in self.beliefs.items()}
        rm0 = rmt = None
        extra_total = 0.0
        terms0 = self.params0.terms()
        terms_tr = self.params_tr.terms()
        for k, groups in enumerate(plan):
            updates = {}
            for g in groups:
                is_tr = g.dag is self.trans_dag
                terms = dict(terms_tr if is_tr else terms0)
                if is_tr:
                    terms.update(self._prepare_transition(g, current))
                if g.mf is None or is_tr:
                    old = g.mf
                    g.mf = MeanField(g.dag, terms, g.rows)
                    if old is not None:
                        _carry_state(old, g.mf)
                else:
                    g.mf.terms = terms
                if init is not None:
                    _apply_start(g, init, k, current)
                elif run:
                    g.mf.run(cfg.max_iterations, cfg.elbo_rel_tol)
                params = self.params_tr if is_tr else self.params0
                rm, extra = local_pieces(g.mf, params.learned, list(params.fixed) + (list(self.copies) if is_tr else []))
                extra_total += extra
                if is_tr:
                    rmt = _add_moments(rmt, rm)
                else:
                    rm0 = _add_moments(rm0, rm)
                updates.update(self._snapshot(g, g.mf))
            current.update(updates)
        return rm0 or {}, rmt or {}, extra_total, current

    def _m_step(self, base0, baset, rm0, rmt):
        self.params0.posterior = self.params0.m_step(base0, rm0)
        self.params_tr.posterior = self.params_tr.m_step(baset, rmt)

    def _elbo(self, base0, baset, rm0, rmt, extra):
        return (
            extra
            + self.params0.energy(rm0)
            + self.params_tr.energy(rmt)
            - self.params0.kl(base0)
            - self.params_tr.kl(baset)
        )

    def update(self, batch):
        """Absorb one batch of dynamic instances (streaming variational Bayes)."""
        from .datastream import Batch

        if not isinstance(batch, Batch):
            batch = Batch(tuple(batch), 0)
        if len(batch) == 0:
            return self
        steps = self._plan(batch)
        plan = self._groups(steps)
        cfg = self.config.local_vmp
        base0 = {k: v.copy() for k, v in self.params0.posterior.items()}
        baset = {k: v.copy() for k, v in self.params_tr.posterior.items()}
        all_rows = np.vstack([g.rows[:, : len(self.slice_names)] for gs in plan for g in gs])
        hidden = np.isnan(all_rows).any()
        if hidden and not self._initialised:
            draws = data_driven_start(self.time0_dag, all_rows, np.random.default_rng(self.config.seed))
            offsets, o = [], 0
            for gs in plan:
                for g in gs:
                    offsets.append(o)
                    o += len(g.seqs)
            init = _InitDraws(draws, plan, offsets)
            rm0, rmt, _, _ = self._forward(plan, init=init)
            self._m_step(base0, baset, rm0, rmt)
        elbo = -np.inf
        current = None
        for _ in range(cfg.max_iterations if hidden or self.params_tr.has_coupling() or self.params0.has_coupling() else 1):
            rm0, rmt, extra, current = self._forward(plan, run=hidden)
            self._m_step(base0, baset, rm0, rmt)
            new = self._elbo(base0, baset, rm0, rmt, extra)
            done = abs(new - elbo) <= cfg.elbo_rel_tol * abs(new)
            elbo = new
            if done:
                break
        for s, (last, _) in steps.items():
            self.beliefs[s] = (last, current[s])
        self._initialised = True
        self.records.append(BatchRecord(len(self.records), len(batch), float(elbo)))
        self.instances_seen += len(batch)
        return self

    def learn(self, batches):
        for b in batches:
            self.update(b)
        return self

    def elbo_trace(self):
        return [r.elbo for r in self.records]

    def log_lines(self, sep="\t"):
        return [f"{r.batch_index}{sep}{r.instance_count}{sep}{r.elbo!r}" for r in self.records]

    def point_estimate(self) -> DynamicBayesianNetwork:
        time0 = BayesianNetwork(self.time0_dag, self.params0.point_cpds())
        cpds = self.params_tr.point_cpds()
        for copy in self.copies:
            cpds[copy] = placeholder_cpd(self.trans_dag.variable(copy))
        return define_dbn(time0, BayesianNetwork(self.trans_dag, cpds))

    def posterior_dict(self):
        return {"time0": self.params0.posterior_dict(), "transition": self.params_tr.posterior_dict()}

    def load_posterior(self, doc):
        self.params0.load_posterior(doc.get("time0", {}))
        self.params_tr.load_posterior(doc.get("transition", {}))


class _InitDraws:
    def __init__(self, draws, plan, offsets):
        self.draws = draws
        self.where = {}
        i = 0
        for gs in plan:
            for g in gs:
                self.where[id(g)] = offsets[i]
                i += 1


def _apply_start(g, init, k, current):
    """Overwrite the local state of group ``g`` with the start draws.

    Copies take the start values of their base variable one step earlier
    (or the carried belief), so the first M-step sees consistent pairs.
    """
    mf = g.mf
    lo = init.where[id(g)]
    hi = lo + len(g.seqs)
    for name, d in init.draws.items():
        if name not in mf.dag.names:
            continue
        if mf.dag.variable(name).is_discrete:
            mf.set_discrete(name, d[lo:hi])
        else:
            mf.set_gaussian(name, d[lo:hi], 1.0)
    for v in mf.dag.variables:
        if not v.name.endswith(COPY_SUFFIX) or v.name[: -len(COPY_SUFFIX)] not in mf.dag.names:
            continue
        base = v.name[: -len(COPY_SUFFIX)]
        prev = [current[s][base] for s in g.seqs]
        if v.is_discrete:
            mf.set_discrete(v.name, np.array(prev))
        else:
            mf.set_gaussian(v.name, np.array([p[0] for p in prev]), np.array([p[1] for p in prev]))


def _carry_state(old: MeanField, new: MeanField):
    """Warm start ``new`` from ``old`` on rows the data leaves unobserved."""
    for v, node in new.nodes.items():
        if node.discrete:
            new.P[v] = np.where(new.observed[:, v][:, None], new.P[v], old.P[v])
        else:
            free = ~new.observed[:, v]
            new.M[v] = np.where(free, old.M[v], new.M[v])
            new.V[v] = np.where(free, old.V[v], new.V[v])
            new.S[v] = new.M[v] ** 2 + new.V[v]


def learn_dynamic(m: DynamicLearnableModel, batches) -> DynamicLearnableModel:
    return m.learn(batches)


# -- documents -----------------------------------------------------------------

DBN_FORMAT = "streambayes-dbn-1"


def dbn_to_dict(dbn: DynamicBayesianNetwork) -> dict:
    from .serialization import network_to_dict

    return {"format": DBN_FORMAT, "time0": network_to_dict(dbn.time0), "transition": network_to_dict(dbn.transition)}


def serialize_dbn(dbn: DynamicBayesianNetwork, extra: dict | None = None) -> bytes:
    import json

    doc = dbn_to_dict(dbn)
    if extra:
        doc.update(extra)
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def dbn_from_dict(doc: dict) -> DynamicBayesianNetwork:
    from .errors import ParseError
    from .serialization import network_from_dict

    if not isinstance(doc, dict) or doc.get("format") != DBN_FORMAT:
        raise ParseError(f"not a {DBN_FORMAT} document")
    for key in ("time0", "transition"):
        if key not in doc:
            raise ParseError(f"missing key {key!r} in document")
    return define_dbn(network_from_dict(doc["time0"]), network_from_dict(doc["transition"]))


def deserialize_dbn(data) -> DynamicBayesianNetwork:
    from .serialization import parse_document

    return dbn_from_dict(parse_document(data))
