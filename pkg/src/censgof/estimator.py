"""scikit-learn style wrappers.

:class:`CensoredNormalScores` is a stateless transformer mapping each row
(one censored sample) to its normal scores.  :class:`CensoredGofTest` runs
a single goodness-of-fit test when fitted.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_censored_sample, check_rows
from .critvals import simulate_critical_values
from .data import CensoredSample
from .stats import DEFAULT_CF_WEIGHT, DEFAULT_LEVELS, as_statistic, direct_statistics, run_test
from .transforms import as_transform_kind, transformation7


class CensoredNormalScores(TransformerMixin, BaseEstimator):
    """Normal scores of Type-II censored samples.

    Each row of ``X`` holds the ``r`` smallest values of a sample of size
    ``n``.

    Parameters
    ----------
    null : str
        Null family: ``"exponential"``, ``"gamma"`` or ``"normal"``.
    kind : str
        Transform to uniformity: MS, OS, LHB, FK1 or FK2.
    n : int
        Full sample size.
    """

    def __init__(self, null="exponential", kind="MS", n=None):
        self.null = null
        self.kind = kind
        self.n = n

    def fit(self, X, y=None):
        X = check_rows(X, self.n)
        as_transform_kind(self.kind)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_rows(X, self.n)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected r={self.n_features_in_} columns, got {X.shape[1]}")
        return np.stack([transformation7(CensoredSample(row, self.n), self.null, self.kind) for row in X])


class CensoredGofTest(BaseEstimator):
    """Goodness-of-fit test for one Type-II censored sample.

    Parameters
    ----------
    null : str
    transform : str
        Ignored for the direct statistics.
    statistic : str
        W2, A2, C2, DS_W2 or DS_A2.
    n : int
    alpha : float
        Level used for ``reject_``.
    levels : tuple of float
        Levels for which critical values are reported.
    critval_replications : int, optional
        Defaults to 10^5 (10^6 for the direct statistics).
    seed : int
    cf_weight : float

    Attributes
    ----------
    statistic_ : float
    critical_values_ : dict
    pvalue_ : float
    reject_ : bool
    result_ : GofResult
    """

    def __init__(
        self,
        null="exponential",
        transform="MS",
        statistic="A2",
        n=None,
        alpha=0.05,
        levels=DEFAULT_LEVELS,
        critval_replications=None,
        seed=0,
        cf_weight=DEFAULT_CF_WEIGHT,
    ):
        self.null = null
        self.transform = transform
        self.statistic = statistic
        self.n = n
        self.alpha = alpha
        self.levels = levels
        self.critval_replications = critval_replications
        self.seed = seed
        self.cf_weight = cf_weight

    def fit(self, X, y=None):
        if self.n is None:
            raise ValueError("n (full sample size) is required")
        s, notices = as_censored_sample(X, n=self.n)
        stat = as_statistic(self.statistic)
        levels = tuple(sorted({float(lv) for lv in self.levels} | {float(self.alpha)}, reverse=True))
        if stat.is_direct:
            table = simulate_critical_values(
                stat, s.r, levels, self.critval_replications, self.seed, n=s.n, null_family=self.null
            )
            a2, w2 = direct_statistics(s, self.null, table, levels)
            result = a2 if stat.value == "DS_A2" else w2
            result.warnings.extend(notices)
        else:
            z = transformation7(s, self.null, self.transform)
            table = simulate_critical_values(
                stat, s.r, levels, self.critval_replications, self.seed, a=self.cf_weight
            )
            result = run_test(z, stat, table, levels=levels, a=self.cf_weight, warnings=notices)
            self.scores_ = z
        self.result_ = result
        self.statistic_ = result.value
        self.critical_values_ = dict(result.critical_values)
        self.pvalue_ = result.p_value
        self.reject_ = bool(result.reject[float(self.alpha)])
        return self
