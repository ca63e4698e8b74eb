"""scikit-learn compatible estimators.

``LaplaceLogisticRegression`` is a regular classifier and composes with
``GridSearchCV``/``Pipeline``. The two ensemble estimators take a *list* of
per-model inputs (one feature matrix, or one probability matrix, per
candidate model) in place of a single ``X``.
"""

from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from .core import mix
from .laplace import (block_eigenvalues, hessian_blocks, log_evidence,
                      posterior_weights)
from .map_trainer import TrainConfig, predict_probs, train_map
from .oma import OmaConfig, fit_oma
from .validation import check_features, check_labels, check_prob_list


class LaplaceLogisticRegression(ClassifierMixin, BaseEstimator):
    """Multi-class logistic regression head with a Laplace evidence.

    Parameters
    ----------
    alpha : float, default=1.0
        Prior variance of each weight.
    learning_rate, epochs, batch_size, grad_tol :
        See :class:`~bmaoma.map_trainer.TrainConfig`.
    subsample : int, optional
        Rows used for the Hessian blocks (default ``min(N, 50000)``).
    n_classes : int, optional
        Number of classes; inferred from ``y`` when omitted. Set it when a
        training split may miss some classes.
    random_state : int, default=0
        Seeds minibatch shuffling and Hessian subsampling.

    Attributes
    ----------
    coef_ : ndarray of shape (n_classes, n_features)
    head_ : LinearHead
    hessian_ : HessianBlocks
    evidence_ : EvidenceRecord
    log_evidence_ : float
    """

    def __init__(self, alpha=1.0, learning_rate=0.01, epochs=200,
                 batch_size=1000, grad_tol=1e-4, subsample=None,
                 n_classes=None, random_state=0):
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.grad_tol = grad_tol
        self.subsample = subsample
        self.n_classes = n_classes
        self.random_state = random_state

    def fit(self, X, y):
        X = check_features(X)
        y, n_classes = check_labels(y, n_classes=self.n_classes,
                                    n_samples=X.shape[0])
        cfg = TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                          batch_size=self.batch_size, seed=self.random_state,
                          grad_tol=self.grad_tol)
        self.head_ = train_map(X, y, self.alpha, cfg, n_classes=n_classes)
        self.hessian_ = hessian_blocks(X, self.head_, subsample=self.subsample,
                                       seed=self.random_state)
        self.evidence_ = log_evidence(X, y, self.head_,
                                      block_eigenvalues(self.hessian_))
        self.coef_ = self.head_.weights
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def log_evidence_(self):
        return self.evidence_.total

    def predict_proba(self, X):
        check_is_fitted(self, "head_")
        return predict_probs(self.head_, X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class BayesianModelAveraging(ClassifierMixin, BaseEstimator):
    """Posterior-weighted ensemble of heads on different frozen features.

    ``fit(Xs, y)`` trains one clone of ``estimator`` per feature matrix in
    ``Xs`` and sets ``weights_`` from their per-datapoint log evidences.
    """

    def __init__(self, estimator=None, n_jobs=None):
        self.estimator = estimator
        self.n_jobs = n_jobs

    def fit(self, Xs, y):
        base = self.estimator if self.estimator is not None \
            else LaplaceLogisticRegression()
        _, n_classes = check_labels(y)
        if getattr(base, "n_classes", None) is None:
            base = clone(base).set_params(n_classes=n_classes)
        self.estimators_ = Parallel(n_jobs=self.n_jobs)(
            delayed(clone(base).fit)(X, y) for X in Xs)
        self.evidences_ = [est.evidence_ for est in self.estimators_]
        self.weights_ = posterior_weights(self.evidences_)
        self.classes_ = self.estimators_[0].classes_
        return self

    def predict_proba(self, Xs):
        check_is_fitted(self, "weights_")
        return mix([est.predict_proba(X) for est, X in zip(self.estimators_, Xs)],
                   self.weights_)

    def predict(self, Xs):
        return np.argmax(self.predict_proba(Xs), axis=1)


class OptimizableModelAveraging(ClassifierMixin, BaseEstimator):
    """Entropy-minimizing ensemble weights fitted on unlabeled predictions.

    ``fit(probs)`` takes one ``M x C`` probability matrix per candidate
    model (typically on the unlabeled evaluation split); ``y`` is ignored.

    Parameters
    ----------
    lam : float, default=0.0
        Strength of the pull toward ``prior_weights``.
    learning_rate : float, default=0.001
    epochs : int, default=400
    prior_weights : array-like, optional
        Reference weights; uniform when omitted.
    random_state : int, default=0
    """

    def __init__(self, lam=0.0, learning_rate=0.001, epochs=400,
                 prior_weights=None, random_state=0):
        self.lam = lam
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.prior_weights = prior_weights
        self.random_state = random_state

    def fit(self, probs, y=None):
        probs = check_prob_list(probs)
        cfg = OmaConfig(lam=self.lam, learning_rate=self.learning_rate,
                        epochs=self.epochs, seed=self.random_state,
                        prior_weights=self.prior_weights)
        self.weights_, self.objective_trace_ = fit_oma(probs, cfg,
                                                       return_trace=True)
        self.classes_ = np.arange(probs[0].shape[1])
        return self

    def predict_proba(self, probs):
        check_is_fitted(self, "weights_")
        return mix(probs, self.weights_)

    def predict(self, probs):
        return np.argmax(self.predict_proba(probs), axis=1)
