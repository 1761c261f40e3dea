"""scikit-learn style wrappers.

Rows are posterior samples and columns are partition elements, the usual
``(n_samples, n_features)`` layout. ``OnlineWAIC`` folds rows into the
streaming engine (``partial_fit`` for batches that arrive over time);
``OfflineWAIC`` computes the same quantities from a stored matrix.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .engine import waic_finalize, waic_init, waic_update
from .exceptions import IntegrityError
from .oracle import offline_waic
from .partition import build_partition
from .predictive import CONDITIONAL, PredictiveConfig, PredictiveEvaluator


def check_h_matrix(X, n_fractions=1, n_elements=None):
    """Validate a batch of h-rows and return it as ``(n_samples, F, M)`` float64.

    ``-inf`` is allowed (a zero predictive density); NaN and ``+inf`` are not.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim == 2:
        if n_fractions != 1:
            raise IntegrityError(f"expected rows of shape ({n_fractions}, M), got 2-d input")
        X = X[:, None, :]
    if X.ndim != 3 or X.shape[1] != n_fractions:
        raise IntegrityError(f"h batch has shape {X.shape}; expected (n_samples, {n_fractions}, M)")
    if n_elements is not None and X.shape[2] != n_elements:
        raise IntegrityError(f"h batch has {X.shape[2]} elements, estimator was fitted with {n_elements}")
    if X.shape[2] < 1:
        raise IntegrityError("h batch has no elements")
    if np.isnan(X).any() or (X == np.inf).any():
        raise ValueError("h values must be finite or -inf")
    return X


def _publish(est, result):
    est.result_ = result
    final = result.final
    est.waic_ = final.waic
    est.lppd_ = final.lppd
    est.p_waic_ = final.p_waic
    est.lppd_elements_ = final.lppd_elements
    est.p_waic_elements_ = final.p_waic_elements
    return est


class OnlineWAIC(BaseEstimator):
    """Streaming WAIC over h-rows.

    Parameters
    ----------
    mode : {"conditional", "marginal"}
        Marginal rows carry one h-vector per checkpoint fraction, so input
        is ``(n_samples, 4, M)``.
    K : int
        Inner Monte Carlo size, recorded on the result (ignored for
        conditional mode).

    Attributes
    ----------
    state_ : WaicState
        Constant-size streaming state; it can be checkpointed.
    waic_, lppd_, p_waic_ : float
        Values at the last checkpoint fraction. Available once at least
        two samples have been seen.
    n_samples_seen_ : int
    """

    def __init__(self, mode=CONDITIONAL, K=1000):
        self.mode = mode
        self.K = K

    def _config(self):
        return PredictiveConfig(self.mode, self.K)

    def fit(self, X, y=None):
        for attr in ("state_", "result_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        config = self._config()
        fitted = hasattr(self, "state_")
        X = check_h_matrix(X, len(config.fractions), self.state_.M if fitted else None)
        state = self.state_ if fitted else waic_init(X.shape[2], config)
        for row in X:
            state = waic_update(state, row)
        self.state_ = state
        self.n_elements_ = state.M
        self.n_samples_seen_ = state.count
        if state.count >= 2:
            _publish(self, waic_finalize(state))
        return self

    def score(self, X=None, y=None):
        """Expected log pointwise predictive density estimate, ``lppd - p_waic`` (higher is better)."""
        check_is_fitted(self, "result_")
        return self.lppd_ - self.p_waic_


class OfflineWAIC(BaseEstimator):
    """WAIC from a stored ``(n_samples, M)`` or ``(n_samples, F, M)`` matrix.

    Uses a batch shifted log-mean-exp and a two-pass variance. This is the
    reference the streaming engine is checked against.
    """

    def __init__(self, mode=CONDITIONAL, K=1000):
        self.mode = mode
        self.K = K

    def fit(self, X, y=None):
        config = PredictiveConfig(self.mode, self.K)
        X = check_h_matrix(X, len(config.fractions))
        # the oracle wants (F, M, S)
        result = offline_waic(np.transpose(X, (1, 2, 0)), config.mode, config.K, config.fractions)
        self.n_elements_ = X.shape[2]
        self.n_samples_seen_ = X.shape[0]
        return _publish(self, result)

    def score(self, X=None, y=None):
        check_is_fitted(self, "result_")
        return self.lppd_ - self.p_waic_


class PredictiveDensityTransformer(TransformerMixin, BaseEstimator):
    """Map posterior samples (dicts of parameter values) to h-rows.

    ``transform`` returns ``(n_samples, M)`` in conditional mode and
    ``(n_samples, 4, M)`` in marginal mode, ready for :class:`OnlineWAIC`.
    """

    def __init__(self, model, partition=None, mode=CONDITIONAL, K=1000, random_state=None):
        self.model = model
        self.partition = partition
        self.mode = mode
        self.K = K
        self.random_state = random_state

    def fit(self, X=None, y=None):
        partition = self.partition if self.partition is not None else build_partition(self.model.data_labels)
        self.partition_ = partition
        self.config_ = PredictiveConfig(self.mode, self.K)
        self.evaluator_ = PredictiveEvaluator(self.model, [(partition, self.config_)])
        self.rng_ = np.random.default_rng(self.random_state)
        self.n_elements_ = partition.n_elements
        return self

    def transform(self, X):
        check_is_fitted(self, "evaluator_")
        if isinstance(X, dict):
            X = [X]
        rows = [self.evaluator_(sample, self.rng_)[0] for sample in X]
        out = np.array(rows, dtype=np.float64).reshape(len(rows), len(self.config_.fractions), -1)
        return out[:, 0, :] if self.config_.mode == CONDITIONAL else out
