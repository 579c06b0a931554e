"""Streaming Bayesian learning and inference for conditional linear Gaussian networks."""

from . import errors
from ._kernels import BACKEND
from .core import (
    DAG,
    LATENT,
    OBSERVABLE,
    BayesianNetwork,
    CLGaussian,
    Multinomial,
    StateSpace,
    Variable,
    ancestral_sample,
    log_probability,
    validate_network,
)
from .datastream import (
    Attributes,
    Batch,
    DataInstance,
    DynamicDataInstance,
    batches,
    open_arff,
    open_dynamic_arff,
    write_arff,
)
from .dynamic import (
    BeliefState,
    DynamicBayesianNetwork,
    DynamicEvidence,
    DynamicLearnableModel,
    define_dbn,
    ff_filter_step,
    filtered_posterior,
    learn_dynamic,
    predictive_posterior,
    transition_dag,
    unroll,
)
from .inference import (
    InferenceConfig,
    InferenceReport,
    compute_elbo,
    exact_enumeration_oracle,
    importance_sampling_infer,
    vmp_infer,
)
from .learning import (
    LearnableModel,
    LearningConfig,
    SVIConfig,
    build_learner,
    evidence_lower_bound_trace,
    extract_point_estimate,
    svi_update,
    update_model,
    update_model_parallel,
)
from .serialization import deserialize_model, serialize_model
from .zoo import (
    bayesian_linear_regression,
    factor_analysis,
    gaussian_mixture,
    hmm,
    kalman_filter,
    naive_bayes,
    new_builder,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "BACKEND",
    "DAG",
    "LATENT",
    "OBSERVABLE",
    "BayesianNetwork",
    "CLGaussian",
    "Multinomial",
    "StateSpace",
    "Variable",
    "ancestral_sample",
    "log_probability",
    "validate_network",
    "Attributes",
    "Batch",
    "DataInstance",
    "DynamicDataInstance",
    "batches",
    "open_arff",
    "open_dynamic_arff",
    "write_arff",
    "BeliefState",
    "DynamicBayesianNetwork",
    "DynamicEvidence",
    "DynamicLearnableModel",
    "define_dbn",
    "ff_filter_step",
    "filtered_posterior",
    "learn_dynamic",
    "predictive_posterior",
    "transition_dag",
    "unroll",
    "InferenceConfig",
    "InferenceReport",
    "compute_elbo",
    "exact_enumeration_oracle",
    "importance_sampling_infer",
    "vmp_infer",
    "LearnableModel",
    "LearningConfig",
    "SVIConfig",
    "build_learner",
    "evidence_lower_bound_trace",
    "extract_point_estimate",
    "svi_update",
    "update_model",
    "update_model_parallel",
    "bayesian_linear_regression",
    "factor_analysis",
    "gaussian_mixture",
    "hmm",
    "kalman_filter",
    "naive_bayes",
    "new_builder",
    "deserialize_model",
    "serialize_model",
]
