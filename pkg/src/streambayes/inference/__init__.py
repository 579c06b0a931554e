from .engine import DiscreteTerms, GaussianTerms, MeanField, terms_from_cpd, terms_from_network
from .exact import exact_enumeration_oracle, log_evidence
from .sampling import importance_sampling_infer
from .vmp import (
    InferenceConfig,
    InferenceReport,
    PointMass,
    compute_elbo,
    posterior_line,
    vmp_infer,
)

__all__ = [
    "DiscreteTerms",
    "GaussianTerms",
    "InferenceConfig",
    "InferenceReport",
    "MeanField",
    "PointMass",
    "compute_elbo",
    "exact_enumeration_oracle",
    "importance_sampling_infer",
    "log_evidence",
    "posterior_line",
    "terms_from_cpd",
    "terms_from_network",
    "vmp_infer",
]
