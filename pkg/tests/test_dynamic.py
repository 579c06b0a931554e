import itertools
import math

import numpy as np
import pytest

import oracles
from streambayes import (
    DAG,
    LATENT,
    BayesianNetwork,
    CLGaussian,
    DynamicEvidence,
    DynamicLearnableModel,
    InferenceConfig,
    LearningConfig,
    Multinomial,
    Variable,
    define_dbn,
    ff_filter_step,
    filtered_posterior,
    learn_dynamic,
    predictive_posterior,
    transition_dag,
    unroll,
)
from streambayes.core import StateSpace, log_probability
from streambayes.datastream import Attributes, Batch, DynamicDataInstance
from streambayes.dynamic import (
    BeliefState,
    deserialize_dbn,
    filter_sequence,
    initial_belief,
    serialize_dbn,
)
from streambayes.errors import OrderError, StructureError, UnknownVariable
from streambayes.serialization import network_to_dict


def lds(a=1.0, q=1.0, r=1.0):
    X, Y = Variable.real("X", role=LATENT), Variable.real("Y")
    sd = DAG([X, Y], {"Y": ["X"]})
    emit = CLGaussian([0.0], [r], [[1.0]])
    time0 = BayesianNetwork(sd, {"X": CLGaussian.normal(0, 1), "Y": emit})
    trans = BayesianNetwork(transition_dag(sd, {"X": ["X"]}), {"X": CLGaussian([0.0], [q], [[a]]), "Y": emit})
    return define_dbn(time0, trans)


def binary_hmm(stay=0.7):
    H, O = Variable.finite("H", 2, role=LATENT), Variable.finite("O", 2)
    sd = DAG([H, O], {"O": ["H"]})
    emit = Multinomial([[0.9, 0.1], [0.3, 0.7]])
    time0 = BayesianNetwork(sd, {"H": Multinomial([0.5, 0.5]), "O": emit})
    trans = BayesianNetwork(
        transition_dag(sd, {"H": ["H"]}), {"H": Multinomial([[stay, 1 - stay], [1 - stay, stay]]), "O": emit}
    )
    return define_dbn(time0, trans)


class TestStructure:
    def test_lds_and_hmm_valid(self):
        assert lds().interface == ["X"]
        assert binary_hmm().interface == ["H"]

    def test_undeclared_variable(self):
        X = Variable.real("X")
        sd = DAG([X])
        Z = Variable.real("Z")
        tdag = DAG([X, Z], {"X": ["Z"]})
        with pytest.raises(StructureError):
            define_dbn(
                BayesianNetwork(sd, {"X": CLGaussian.normal(0, 1)}),
                BayesianNetwork(tdag, {"X": CLGaussian([0.0], [1.0], [[1.0]]), "Z": CLGaussian.normal(0, 1)}),
            )

    def test_intra_slice_cycle(self):
        A, B = Variable.finite("A", 2), Variable.finite("B", 2)
        sd = DAG([A, B], {"B": ["A"]})
        tdag = transition_dag(sd, {}, {"A": ["B"], "B": ["A"]})
        with pytest.raises(StructureError):
            DynamicLearnableModel(sd, tdag)

    def test_unroll_t1_is_time0(self):
        dbn = lds()
        u = unroll(dbn, 1)
        assert u.dag.parents == {"X[0]": (), "Y[0]": ("X[0]",)}
        assert [u.cpd(f"{n}[0]") for n in dbn.slice_names] == [dbn.time0.cpd(n) for n in dbn.slice_names]

    @pytest.mark.parametrize("T", [1, 2, 3, 4])
    def test_unrolled_mass_sums_to_one(self, T):
        u = unroll(binary_hmm(), T)
        total = sum(
            math.exp(log_probability(u, dict(zip(u.names, combo))))
            for combo in itertools.product(range(2), repeat=len(u))
        )
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_serialize_round_trip(self):
        dbn = binary_hmm()
        back = deserialize_dbn(serialize_dbn(dbn))
        assert network_to_dict(back.time0) == network_to_dict(dbn.time0)
        assert network_to_dict(back.transition) == network_to_dict(dbn.transition)


class TestFiltering:
    def test_first_kalman_step(self):
        # belief N(0,1), one transition, observe Y=1
        dbn = lds()
        s0 = ff_filter_step(dbn, None, DynamicEvidence(0, {}))
        s1 = ff_filter_step(dbn, s0, DynamicEvidence(1, {"Y": 1.0}))
        q = filtered_posterior(s1, "X")
        assert (q.mean, q.variance) == pytest.approx((2 / 3, 2 / 3), abs=1e-6)

    def test_prediction_adds_noise(self):
        dbn = lds()
        state = BeliefState(3, {"X": _gauss(0.5, 0.5), "Y": _gauss(0.5, 1.5)})
        q = predictive_posterior(dbn, state, "X", 1)
        assert (q.mean, q.variance) == pytest.approx((0.5, 1.5), abs=1e-12)
        assert state.marginals["X"].variance == 0.5 and state.time == 3

    def test_deterministic_transition_copies_belief(self):
        dbn = binary_hmm(stay=1.0)
        s = ff_filter_step(dbn, None, DynamicEvidence(0, {"O": 1}))
        p = predictive_posterior(dbn, s, "H", 1)
        np.testing.assert_allclose(p.probs, s.marginals["H"].probs, atol=1e-12)

    def test_no_evidence_is_prediction(self):
        dbn = lds()
        s = ff_filter_step(dbn, None, DynamicEvidence(0, {"Y": 0.3}))
        pred = predictive_posterior(dbn, s, "X", 1)
        s1 = ff_filter_step(dbn, s, DynamicEvidence(1, {}))
        assert (s1.marginals["X"].mean, s1.marginals["X"].variance) == pytest.approx((pred.mean, pred.variance), abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_kalman_oracle_general(self, seed):
        rng = np.random.default_rng(seed)
        a, q, r = rng.uniform(0.5, 1.2), rng.uniform(0.3, 2), rng.uniform(0.3, 2)
        dbn = lds(a, q, r)
        ys = list(rng.normal(0, 2, 10))
        expect = oracles.kalman_1d(ys, a=a, q=q, r=r)
        state = None
        for t, y in enumerate(ys):
            state = ff_filter_step(dbn, state, DynamicEvidence(t, {"Y": y}))
            assert state.marginals["X"].mean == pytest.approx(expect[t][0], abs=1e-6)
            assert state.marginals["X"].variance == pytest.approx(expect[t][1], abs=1e-6)
        for h in (1, 3):
            m, v = oracles.kalman_predict(*expect[-1], h, a=a, q=q)
            p = predictive_posterior(dbn, state, "X", h)
            assert (p.mean, p.variance) == pytest.approx((m, v), abs=1e-9)

    def test_gap_rolls_forward(self):
        dbn = lds()
        ys = [0.5, None, None, 1.2]
        expect = oracles.kalman_1d(ys)
        s = ff_filter_step(dbn, None, DynamicEvidence(0, {"Y": 0.5}))
        s = ff_filter_step(dbn, s, DynamicEvidence(3, {"Y": 1.2}))
        assert s.marginals["X"].mean == pytest.approx(expect[3][0], abs=1e-9)

    def test_out_of_order(self):
        dbn = lds()
        s = ff_filter_step(dbn, None, DynamicEvidence(2, {"Y": 0.0}))
        with pytest.raises(OrderError):
            ff_filter_step(dbn, s, DynamicEvidence(2, {"Y": 0.0}))

    def test_before_evidence_is_time0_prior(self):
        dbn = binary_hmm()
        np.testing.assert_allclose(filtered_posterior(initial_belief(dbn), "H").probs, [0.5, 0.5])
        with pytest.raises(UnknownVariable):
            filtered_posterior(initial_belief(dbn), "Nope")

    def test_discrete_marginal_normalised(self):
        s = ff_filter_step(binary_hmm(), None, DynamicEvidence(0, {"O": 1}))
        assert s.marginals["H"].probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_hmm_close_to_enumeration(self):
        dbn = binary_hmm()
        obs = [1, 0, 1, 1]
        full = unroll(dbn, 4)
        s = None
        for t, o in enumerate(obs):
            s = ff_filter_step(dbn, s, DynamicEvidence(t, {"O": o}))
            exact = oracles.enumerate_marginals(full, {f"O[{k}]": obs[k] for k in range(t + 1)})[f"H[{t}]"]
            assert np.abs(s.marginals["H"].probs - exact).max() < 0.02

    def test_importance_sampling_filter(self):
        dbn = binary_hmm()
        cfg = InferenceConfig(sample_count=100_000, seed=1)
        s_is = s_vmp = None
        for t, o in enumerate([1, 1, 0]):
            s_is = ff_filter_step(dbn, s_is, DynamicEvidence(t, {"O": o}), "is", cfg)
            s_vmp = ff_filter_step(dbn, s_vmp, DynamicEvidence(t, {"O": o}))
        assert np.abs(s_is.marginals["H"].probs - s_vmp.marginals["H"].probs).max() < 0.01

    def test_chunked_stream_is_invisible(self):
        dbn = lds()
        attrs = Attributes.from_spaces([("Y", StateSpace.real())])
        rows = [DynamicDataInstance(attrs, [y], 0, t) for t, y in enumerate(np.linspace(-1, 2, 8))]
        whole = [s for _, s in filter_sequence(dbn, rows)][-1]
        state = None
        for chunk in (rows[:3], rows[3:5], rows[5:]):
            for inst in chunk:
                state = ff_filter_step(dbn, state, inst)
        assert state.marginals["X"].mean == whole.marginals["X"].mean
        assert state.marginals["X"].variance == whole.marginals["X"].variance


def _gauss(m, v):
    from streambayes.expfam import Gaussian

    return Gaussian.from_moments(m, v)


def dynamic_batch(attrs, arrays):
    """``arrays[s]`` is a ``(T, d)`` sequence; instances are interleaved by time."""
    inst = []
    T = max(len(a) for a in arrays)
    for t in range(T):
        for s, a in enumerate(arrays):
            if t < len(a):
                inst.append(DynamicDataInstance(attrs, list(a[t]), s, t))
    return Batch(tuple(inst), 0)


class TestLearning:
    def test_markov_chain_counts(self):
        rng = np.random.default_rng(0)
        A = Variable.finite("A", 2)
        sd = DAG([A])
        tdag = transition_dag(sd, {"A": ["A"]})
        seqs = [rng.integers(0, 2, (int(rng.integers(3, 9)), 1)).astype(float) for _ in range(6)]
        m = DynamicLearnableModel(sd, tdag)
        attrs = Attributes.from_spaces([("A", StateSpace.finite(2))])
        learn_dynamic(m, [dynamic_batch(attrs, seqs)])
        first = np.bincount([int(s[0, 0]) for s in seqs], minlength=2) + 1.0
        np.testing.assert_array_equal(m.params0.posterior["A"].concentration[0], first)
        trans = np.ones((2, 2))
        for s in seqs:
            for prev, cur in zip(s[:-1, 0], s[1:, 0]):
                trans[int(prev), int(cur)] += 1
        np.testing.assert_array_equal(m.params_tr.posterior["A"].concentration, trans)

    def test_sequences_split_across_batches(self):
        A = Variable.finite("A", 2)
        sd = DAG([A])
        tdag = transition_dag(sd, {"A": ["A"]})
        attrs = Attributes.from_spaces([("A", StateSpace.finite(2))])
        seq = np.array([[0.0], [1.0], [1.0], [0.0], [1.0]])
        one = DynamicLearnableModel(sd, tdag).update(dynamic_batch(attrs, [seq]))
        two = DynamicLearnableModel(sd, tdag)
        b = dynamic_batch(attrs, [seq])
        two.update(Batch(b.instances[:2], 0)).update(Batch(b.instances[2:], 1))
        np.testing.assert_array_equal(one.params_tr.posterior["A"].eta, two.params_tr.posterior["A"].eta)

    def test_empty_stream(self):
        m = DynamicLearnableModel(DAG([Variable.finite("A", 2)]), transition_dag(DAG([Variable.finite("A", 2)]), {"A": ["A"]}))
        before = m.posterior_dict()
        learn_dynamic(m, [])
        assert m.posterior_dict() == before

    def test_lds_transition_coefficient(self):
        rng = np.random.default_rng(0)
        S, T = 200, 50
        x = np.zeros((S, T))
        x[:, 0] = rng.normal(size=S)
        for t in range(1, T):
            x[:, t] = 0.9 * x[:, t - 1] + rng.normal(size=S)
        y = x + rng.normal(size=(S, T))
        X, Y = Variable.real("X", role=LATENT), Variable.real("Y")
        sd = DAG([X, Y], {"Y": ["X"]})
        tdag = transition_dag(sd, {"X": ["X"]})
        emit = CLGaussian([0.0], [1.0], [[1.0]])
        m = DynamicLearnableModel(
            sd, tdag, fixed={"time0": {"Y": emit}, "transition": {"Y": emit}}, config=LearningConfig(seed=1)
        )
        attrs = Attributes.from_spaces([("Y", StateSpace.real())])
        learn_dynamic(m, [dynamic_batch(attrs, [y[s][:, None] for s in range(S)])])
        bm, _ = m.params_tr.posterior["X"].coeff_moments()
        assert bm[0, 0] == pytest.approx(0.9, abs=0.1)

    def test_point_estimate_is_dbn(self):
        rng = np.random.default_rng(2)
        A = Variable.finite("A", 2)
        sd = DAG([A])
        m = DynamicLearnableModel(sd, transition_dag(sd, {"A": ["A"]}))
        attrs = Attributes.from_spaces([("A", StateSpace.finite(2))])
        m.update(dynamic_batch(attrs, [rng.integers(0, 2, (10, 1)).astype(float)]))
        dbn = m.point_estimate()
        assert dbn.interface == ["A"]
        assert dbn.transition.cpd("A").table.shape == (2, 2)
