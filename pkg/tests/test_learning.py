import itertools
import math

import numpy as np
import pytest
from scipy.special import gammaln

import oracles
from streambayes import (
    DAG,
    LATENT,
    InferenceConfig,
    LearningConfig,
    SVIConfig,
    Variable,
    bayesian_linear_regression,
    build_learner,
    evidence_lower_bound_trace,
    extract_point_estimate,
    gaussian_mixture,
    svi_update,
    update_model,
    update_model_parallel,
)
from streambayes.core import StateSpace
from streambayes.datastream import Attributes, Batch, DataInstance
from streambayes.errors import ConfigError, ConjugacyError, EmptyModel, SchemaError, UndefinedVarianceMean
from streambayes.expfam import Dirichlet, Gaussian

BIT = DAG([Variable.finite("A", 2)])


def bits(ones, zeros):
    return np.array([1.0] * ones + [0.0] * zeros)[:, None]


class TestStreamingUpdate:
    def test_count_chaining(self):
        m = build_learner(BIT)
        update_model(m, bits(7, 3))
        update_model(m, bits(0, 10))
        np.testing.assert_array_equal(m.posterior["A"].concentration[0], [14, 8])
        one = build_learner(BIT)
        update_model(one, np.vstack([bits(7, 3), bits(0, 10)]))
        np.testing.assert_array_equal(one.posterior["A"].eta, m.posterior["A"].eta)

    def test_no_batches_keeps_prior(self):
        m = build_learner(BIT)
        np.testing.assert_array_equal(m.posterior["A"].eta, m.prior["A"].eta)
        assert evidence_lower_bound_trace(m) == []

    def test_concentration_total(self):
        rng = np.random.default_rng(0)
        m = build_learner(DAG([Variable.finite("A", 3), Variable.finite("B", 2)], {"B": ["A"]}))
        X = np.column_stack([rng.integers(0, 3, 137), rng.integers(0, 2, 137)]).astype(float)
        update_model(m, X)
        assert m.posterior["A"].concentration.sum() == 3 + 137
        assert m.posterior["B"].concentration.sum() == 2 * 3 + 137

    def test_schema_mismatch(self):
        m = build_learner(BIT)
        attrs = Attributes.from_spaces([("B", StateSpace.finite(2))])
        with pytest.raises(SchemaError):
            update_model(m, Batch((DataInstance(attrs, [1.0]),), 0))
        attrs = Attributes.from_spaces([("A", StateSpace.real())])
        with pytest.raises(SchemaError):
            update_model(m, Batch((DataInstance(attrs, [1.0]),), 0))

    def test_batch_input(self):
        attrs = Attributes.from_spaces([("A", StateSpace.finite(2))])
        batch = Batch(tuple(DataInstance(attrs, [v]) for v in (1.0, 1.0, 0.0)), 0)
        m = build_learner(BIT)
        update_model(m, batch)
        np.testing.assert_array_equal(m.posterior["A"].concentration[0], [2, 3])

    def test_normal_gamma_matches_closed_form(self):
        xs = np.random.default_rng(1).normal(2.0, 0.5, 300)
        m = build_learner(DAG([Variable.real("X")]))
        for part in np.array_split(xs, 3):
            update_model(m, part[:, None])
        np.testing.assert_allclose(m.posterior["X"].moments(), np.array(oracles.normal_gamma_posterior(xs))[:, None], rtol=1e-10)


class TestBuild:
    def test_mixture_blocks(self):
        attrs = Attributes.from_spaces([(f"G{i}", StateSpace.real()) for i in range(3)])
        m = gaussian_mixture(attrs, 2)
        blocks = m.parameter_blocks()
        dirichlet = [b for b in blocks if isinstance(b[2][0], Dirichlet)]
        assert len(dirichlet) == 1 and dirichlet[0][2][0].concentration.tolist() == [1.0, 1.0]
        assert len(blocks) - 1 == 2 * 3

    def test_empty(self):
        with pytest.raises(EmptyModel):
            build_learner(DAG([Variable.finite("H", 2, role=LATENT)]))

    def test_prior_override_verbatim(self):
        m = build_learner(BIT, priors={"A": Dirichlet.from_concentration([10, 10])})
        np.testing.assert_array_equal(m.prior["A"].concentration[0], [10, 10])
        m = build_learner(BIT, priors={"A": 10.0})
        np.testing.assert_array_equal(m.prior["A"].concentration[0], [10, 10])

    def test_prior_family_mismatch(self):
        with pytest.raises(ConjugacyError):
            build_learner(BIT, priors={"A": Gaussian.from_moments(0, 1)})


class TestParallel:
    @pytest.mark.parametrize("workers", [2, 4, 8])
    def test_counts_exact(self, workers):
        rng = np.random.default_rng(workers)
        dag = DAG([Variable.finite("A", 3), Variable.finite("B", 2)], {"B": ["A"]})
        X = np.column_stack([rng.integers(0, 3, 999), rng.integers(0, 2, 999)]).astype(float)
        a, b = build_learner(dag), build_learner(dag)
        update_model(a, X)
        update_model_parallel(b, X, workers)
        for k in ("A", "B"):
            np.testing.assert_array_equal(a.posterior[k].eta, b.posterior[k].eta)

    def test_one_worker_bit_identical(self):
        rng = np.random.default_rng(3)
        X = np.column_stack([rng.normal(size=500), rng.normal(size=500)])
        attrs = Attributes.from_spaces([("A", StateSpace.real()), ("B", StateSpace.real())])
        a, b = gaussian_mixture(attrs, 2), gaussian_mixture(attrs, 2)
        update_model(a, X)
        update_model_parallel(b, X, 1)
        for k in a.posterior:
            assert a.posterior[k].to_dict() == b.posterior[k].to_dict()

    def test_gaussian_stats_reassociation(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(1000, 1)) * 3 + 1
        y = 2 * x + rng.normal(size=(1000, 1))
        attrs = Attributes.from_spaces([("x", StateSpace.real()), ("y", StateSpace.real())])
        a, b = bayesian_linear_regression(attrs), bayesian_linear_regression(attrs)
        update_model(a, np.hstack([x, y]))
        update_model_parallel(b, np.hstack([x, y]), 4)
        for k in ("x", "y"):
            pa, pb = a.posterior[k], b.posterior[k]
            np.testing.assert_allclose(pb.ng, pa.ng, rtol=1e-10)
            np.testing.assert_allclose(pb.beta, pa.beta, rtol=1e-10)


class TestSVI:
    def test_first_step_full_replacement(self):
        assert SVIConfig(0.75, 1.0).step_size(0) == 1.0
        m = build_learner(BIT, config=LearningConfig(svi=SVIConfig(0.75, 1.0)))
        svi_update(m, bits(3, 1), 0, total_n=8)
        np.testing.assert_allclose(m.posterior["A"].concentration[0], [1 + 2, 1 + 6])

    def test_robbins_monro(self):
        cfg = SVIConfig(1.0, 0.0)
        assert [cfg.step_size(t) for t in (1, 2, 4)] == [1.0, 0.5, 0.25]

    def test_missing_config(self):
        with pytest.raises(ConfigError):
            svi_update(build_learner(BIT), bits(1, 1), 0, 2)

    def test_bad_kappa(self):
        with pytest.raises(ConfigError):
            SVIConfig(kappa=0.4)


class TestPointEstimate:
    def test_dirichlet_mean(self):
        m = build_learner(BIT)
        update_model(m, bits(3, 7))
        np.testing.assert_allclose(extract_point_estimate(m).cpd("A").table[0], [2 / 3, 1 / 3])

    def test_untouched_discrete_model_gives_prior_means(self):
        np.testing.assert_allclose(extract_point_estimate(build_learner(BIT)).cpd("A").table[0], [0.5, 0.5])

    def test_untouched_gaussian_has_no_variance_mean(self):
        # shape 1 in the default NormalGamma: E[1/lambda] does not exist
        with pytest.raises(UndefinedVarianceMean):
            extract_point_estimate(build_learner(DAG([Variable.real("X")])))

    def test_gaussian_after_data(self):
        xs = np.random.default_rng(2).normal(1, 2, 400)
        m = build_learner(DAG([Variable.real("X")]))
        update_model(m, xs[:, None])
        mu, kappa, a, b = oracles.normal_gamma_posterior(xs)
        cpd = extract_point_estimate(m).cpd("X")
        assert cpd.intercepts[0] == pytest.approx(mu)
        assert cpd.variances[0] == pytest.approx(b / (a - 1))


class TestTemplatesLearn:
    def test_linear_regression(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=1000)
        y = 2 * x + rng.normal(0, 0.1, 1000)
        attrs = Attributes.from_spaces([("x", StateSpace.real()), ("y", StateSpace.real())])
        m = bayesian_linear_regression(attrs, "y")
        update_model(m, np.column_stack([x, y]))
        bm, _ = m.posterior["y"].coeff_moments()
        assert bm[0, 0] == pytest.approx(2.0, abs=0.1)

    def test_mixture_recovers_means(self):
        rng = np.random.default_rng(6)
        z = rng.integers(0, 2, 5000)
        x = np.where(z == 1, 5.0, -5.0) + rng.standard_normal(5000)
        m = gaussian_mixture(Attributes.from_spaces([("X", StateSpace.real())]), 2)
        update_model(m, x[:, None])
        mu = np.sort(m.posterior["X"].moments()[0])
        np.testing.assert_allclose(mu, [-5, 5], atol=0.3)

    def test_one_component_data_dominates_weights(self):
        x = np.random.default_rng(7).normal(3.0, 1.0, (500, 1))
        m = gaussian_mixture(Attributes.from_spaces([("X", StateSpace.real())]), 3)
        update_model(m, x)
        conc = m.posterior["HiddenVar"].concentration[0]
        top = int(np.argmax(conc))
        assert conc[top] > np.delete(conc, top).max()
        assert m.posterior["X"].moments()[0][top] == pytest.approx(3.0, abs=0.3)


class TestElbo:
    def test_stationary_stream_stabilises(self):
        rng = np.random.default_rng(8)
        m = build_learner(DAG([Variable.real("X")]))
        for _ in range(40):
            update_model(m, rng.normal(5, 0.5, (200, 1)))
        per = np.array([r.elbo / r.instance_count for r in m.records])
        assert np.var(per[-10:]) < np.var(per[:10])

    def test_shift_drops_elbo(self):
        rng = np.random.default_rng(9)
        m = build_learner(DAG([Variable.real("X")]))
        for t in range(20):
            update_model(m, rng.normal(0 if t < 10 else 6, 1, (100, 1)))
        trace = evidence_lower_bound_trace(m)
        assert trace[10] < trace[9]

    def _log_evidence(self, X, prior_alpha=1.0):
        """Exact log evidence of a 2-state latent class model with binary
        features under Dirichlet(1) priors, summing over all labellings."""
        n, d = X.shape
        total = []
        for z in itertools.product(range(2), repeat=n):
            z = np.array(z)
            lp = 0.0
            counts = np.bincount(z, minlength=2)
            lp += _dirmult(counts, prior_alpha)
            for j in range(d):
                for k in range(2):
                    c = np.bincount(X[z == k, j].astype(int), minlength=2)
                    lp += _dirmult(c, prior_alpha)
            total.append(lp)
        return float(np.logaddexp.reduce(total))

    @pytest.mark.parametrize("seed", range(4))
    def test_batch_elbo_lower_bounds_evidence(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 2, (6, 3)).astype(float)
        H = Variable.finite("H", 2, role=LATENT)
        feats = [Variable.finite(f"F{j}", 2) for j in range(3)]
        dag = DAG([H] + feats, {f.name: ["H"] for f in feats})
        cfg = LearningConfig(local_vmp=InferenceConfig(max_iterations=500, elbo_rel_tol=1e-10), seed=seed)
        m = build_learner(dag, config=cfg)
        update_model(m, X)
        assert m.records[-1].elbo <= self._log_evidence(X) + 1e-9


def _dirmult(counts, alpha):
    a = np.full(len(counts), alpha)
    return float(gammaln(a.sum()) - gammaln(a.sum() + counts.sum()) + (gammaln(a + counts) - gammaln(a)).sum())


def test_log_lines_format():
    m = build_learner(BIT)
    update_model(m, bits(2, 2))
    line = m.log_lines()[0]
    parts = line.split("\t")
    assert parts[0] == "0" and parts[1] == "4" and math.isfinite(float(parts[2]))
