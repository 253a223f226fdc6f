"""Input validation shared by the estimator classes and the command line."""

from __future__ import annotations

import numpy as np

from .data import CensoredSample
from .exceptions import ShapeError


def as_censored_sample(values, n=None, r=None, min_r=3):
    """Build a CensoredSample from raw values.

    Exactly one of ``n`` (values are the ``r`` smallest of ``n``) and ``r``
    (values are a complete sample to be censored) must be given.

    Returns
    -------
    sample : CensoredSample
    notices : list of str
        Human-readable notes, e.g. that the input was sorted.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ShapeError("no observations")
    if not np.all(np.isfinite(x)):
        raise ShapeError("observations must be finite real numbers")
    if (n is None) == (r is None):
        raise ShapeError("give exactly one of n (censored input) or r (complete input)")
    notices = []
    if np.any(np.diff(x) < 0):
        notices.append("input was not sorted; sorted ascending")
    if r is not None:
        s = CensoredSample.from_full_sample(x, int(r))
        notices.append(f"complete sample of size {x.size} censored at r={int(r)}")
    else:
        if int(n) < x.size:
            raise ShapeError(f"n={n} is smaller than the number of observations ({x.size})")
        s = CensoredSample.from_unsorted(x, int(n))
    if s.r < min_r:
        raise ShapeError(f"need at least {min_r} observations, got r={s.r}")
    return s, notices


def check_rows(X, n):
    """Validate a ``(B, r)`` array of censored samples sharing the same ``n``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2:
        raise ShapeError("expected a 2-d array of censored samples")
    if not np.all(np.isfinite(X)):
        raise ShapeError("observations must be finite")
    if n is None or not 2 <= X.shape[1] <= int(n):
        raise ShapeError(f"need 2 <= r <= n, got r={X.shape[1]}, n={n}")
    return np.sort(X, axis=1)
