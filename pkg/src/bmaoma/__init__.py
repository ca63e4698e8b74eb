"""Ensembling frozen-feature classifiers by Bayesian model averaging (Laplace
evidence of linear heads) and by entropy-optimized model averaging."""

from .core import cross_entropy, entropy, log_sum_exp, metric, mix, softmax
from .ensemble import EnsembleSpec, ensemble_predict, evaluate
from .estimators import (BayesianModelAveraging, LaplaceLogisticRegression,
                         OptimizableModelAveraging)
from .exceptions import (BmaomaError, DataError, FormatError, InvalidInput,
                         NumericalFailure)
from .laplace import (EvidenceRecord, HessianBlocks, block_eigenvalues,
                      hessian_blocks, hessian_dump, log_evidence,
                      posterior_weights)
from .map_trainer import (LinearHead, TrainConfig, neg_log_posterior,
                          predict_probs, train_map)
from .oma import (OmaConfig, beta_from_tau, fit_oma, oma_gradient,
                  oma_objective, zeroshot_prior_weights)

__version__ = "0.1.0"

__all__ = [
    "BayesianModelAveraging", "BmaomaError", "DataError", "EnsembleSpec",
    "EvidenceRecord", "FormatError", "HessianBlocks", "InvalidInput",
    "LaplaceLogisticRegression", "LinearHead", "NumericalFailure",
    "OmaConfig", "OptimizableModelAveraging", "TrainConfig", "beta_from_tau",
    "block_eigenvalues", "cross_entropy", "ensemble_predict", "entropy",
    "evaluate", "fit_oma", "hessian_blocks", "hessian_dump", "log_evidence",
    "log_sum_exp", "metric", "mix", "neg_log_posterior", "oma_gradient",
    "oma_objective", "posterior_weights", "predict_probs", "softmax",
    "train_map", "zeroshot_prior_weights",
]
