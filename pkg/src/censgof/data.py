"""The Type-II censored sample container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeError


@dataclass(frozen=True, eq=False)
class CensoredSample:
    """The ``r`` smallest order statistics of a sample of size ``n``.

    Parameters
    ----------
    values : array_like
        Observed values, sorted ascending.
    n : int
        Size of the full sample, of which only the ``r = len(values)``
        smallest were observed.
    """

    values: np.ndarray
    n: int

    def __post_init__(self):
        x = np.array(self.values, dtype=float).ravel()
        x.setflags(write=False)
        object.__setattr__(self, "values", x)
        object.__setattr__(self, "n", int(self.n))
        r = x.size
        if not 2 <= r <= self.n:
            raise ShapeError(f"need 2 <= r <= n, got r={r}, n={self.n}")
        if not np.all(np.isfinite(x)):
            raise ShapeError("observed values must be finite")
        if np.any(np.diff(x) < 0):
            raise ShapeError("observed values must be sorted ascending")

    @classmethod
    def from_unsorted(cls, values, n):
        return cls(np.sort(np.asarray(values, dtype=float).ravel()), n)

    @classmethod
    def from_full_sample(cls, values, r):
        """Censor a complete sample by keeping its ``r`` smallest values."""
        x = np.sort(np.asarray(values, dtype=float).ravel())
        if not 2 <= int(r) <= x.size:
            raise ShapeError(f"need 2 <= r <= {x.size}, got r={r}")
        return cls(x[: int(r)], x.size)

    @property
    def r(self) -> int:
        return self.values.size

    @property
    def censoring_fraction(self) -> float:
        return self.r / self.n

    def __len__(self):
        return self.r

    def __eq__(self, other):
        if not isinstance(other, CensoredSample):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"CensoredSample(r={self.r}, n={self.n})"
