"""Distributions, distortion measures and basic information measures.

All information quantities are in nats. Conversion to bits happens only when
results leave the library (CSV writers, CLI).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, rel_entr, xlogy

from .errors import (
    AlphabetMismatch,
    DomainError,
    NegativeEntry,
    SumOutOfTolerance,
)

LN2 = math.log(2.0)
DEFAULT_TOL = 1e-9
RENORM_FLOOR = 1e-14


class InfoValue(float):
    """A float measured in nats, with a ``bits`` view.

    Behaves like a plain float in arithmetic (the result is a plain float).
    """

    @property
    def nats(self) -> float:
        return float(self)

    @property
    def bits(self) -> float:
        return float(self) / LN2

    @classmethod
    def from_bits(cls, bits: float) -> "InfoValue":
        return cls(bits * LN2)

    def __repr__(self) -> str:
        return f"InfoValue({float(self)!r} nats)"


def to_bits(nats):
    return np.asarray(nats, dtype=float) / LN2


def to_nats(bits):
    return np.asarray(bits, dtype=float) * LN2


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Distribution:
    """A point on the probability simplex over ``len(probs)`` symbols.

    Use :func:`validate_distribution` to build one from raw numbers; the
    constructor itself insists on an exact-to-1e-12 sum.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = _readonly(self.probs)
        if p.ndim != 1 or p.size < 1:
            raise DomainError("a distribution needs a nonempty 1-d vector")
        if not np.all(np.isfinite(p)):
            raise DomainError("probabilities must be finite")
        if np.any(p < 0):
            raise NegativeEntry(f"negative probability in {p}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise SumOutOfTolerance(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def zero_mask(self) -> np.ndarray:
        """True for symbols carrying probability exactly 0."""
        return self.probs == 0.0

    @property
    def has_zeros(self) -> bool:
        return bool(self.zero_mask.any())

    def __len__(self) -> int:
        return self.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    def __hash__(self):
        return hash(self.probs.tobytes())

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))


def validate_distribution(probs: Sequence[float], tol: float = DEFAULT_TOL) -> Distribution:
    """Check ``probs`` and renormalize it onto the simplex.

    Raises:
        NegativeEntry: some entry is below zero.
        SumOutOfTolerance: ``|sum - 1| > tol``.
    """
    p = np.array(probs, dtype=float).ravel()
    if p.size == 0:
        raise DomainError("empty probability vector")
    if not np.all(np.isfinite(p)):
        raise DomainError("probabilities must be finite")
    if np.any(p < 0):
        raise NegativeEntry(f"negative probability at index {int(np.argmax(p < 0))}")
    s = p.sum()
    if abs(s - 1.0) > tol:
        raise SumOutOfTolerance(f"probabilities sum to {s!r} (tol {tol})")
    # Dividing by a sum that is 1 up to rounding only perturbs the entries.
    if abs(s - 1.0) <= RENORM_FLOOR:
        return Distribution(p)
    return Distribution(p / s)


def as_probs(p) -> np.ndarray:
    if isinstance(p, Distribution):
        return p.probs
    return np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# Distortion measures
# ---------------------------------------------------------------------------


class Distortion(ABC):
    """Anything the solvers can use as a distortion measure.

    The solvers never touch ``d(x, y)`` directly. They consume the kernel
    ``K_nu[x, y] = sum_t w[x, y, t] exp(-nu * v[x, y, t])`` and its
    distortion-weighted companion. A plain matrix has a single term with
    weight one; a lumped matrix (see :class:`LumpedDistortion`) aggregates
    whole symbol classes.
    """

    @property
    @abstractmethod
    def shape(self) -> tuple[int, int]: ...

    @property
    @abstractmethod
    def d_max(self) -> float: ...

    @abstractmethod
    def log_kernel(self, nu) -> np.ndarray:
        """``log K_nu``; an array ``nu`` of shape S gives shape ``S + self.shape``."""

    @abstractmethod
    def distortion_kernel(self, nu) -> np.ndarray:
        """``sum_t w v exp(-nu v)``, i.e. ``-d/dnu`` of the kernel."""

    @abstractmethod
    def initial_output(self) -> np.ndarray:
        """The uniform reproduction distribution in this representation."""

    def kernel(self, nu) -> np.ndarray:
        return np.exp(self.log_kernel(nu))

    def expected_distortion_columns(self, p_x) -> np.ndarray:
        """``sum_x P(x) d(x, y)`` for every reproduction column."""
        return as_probs(p_x) @ self.distortion_kernel(0.0)


@dataclass(frozen=True, eq=False)
class DistortionMatrix(Distortion):
    """Nonnegative ``|X| x |Y|`` distortion with a zero in every row."""

    values: np.ndarray

    def __post_init__(self):
        d = _readonly(self.values)
        if d.ndim != 2 or 0 in d.shape:
            raise DomainError("distortion must be a nonempty 2-d matrix")
        if not np.all(np.isfinite(d)):
            raise DomainError("distortion entries must be finite")
        if np.any(d < 0):
            raise NegativeEntry("distortion entries must be nonnegative")
        if np.any(d.min(axis=1) != 0.0):
            raise DomainError("every row of the distortion matrix needs a zero entry")
        object.__setattr__(self, "values", d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def d_max(self) -> float:
        return float(self.values.max())

    def log_kernel(self, nu) -> np.ndarray:
        return -np.multiply.outer(nu, self.values)

    def kernel(self, nu) -> np.ndarray:
        return np.exp(-np.multiply.outer(nu, self.values))

    def distortion_kernel(self, nu) -> np.ndarray:
        return self.values * np.exp(-np.multiply.outer(nu, self.values))

    def initial_output(self) -> np.ndarray:
        n = self.values.shape[1]
        return np.full(n, 1.0 / n)

    def __eq__(self, other):
        if not isinstance(other, DistortionMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.all(self.values == other.values))

    def __hash__(self):
        return hash(self.values.tobytes())

    @classmethod
    def hamming(cls, n: int, scale: float = 1.0) -> "DistortionMatrix":
        return cls(scale * (1.0 - np.eye(n)))


@dataclass(frozen=True, eq=False)
class LumpedDistortion(Distortion):
    """A distortion matrix collapsed onto an equitable partition.

    Rows are grouped into classes of sizes ``row_sizes`` and columns into
    classes of sizes ``col_sizes``. For row class ``c`` and column class
    ``k``, every row in ``c`` sees the same multiset of distortion values
    over the columns in ``k``; ``levels[c, k, t]`` lists those values and
    ``counts[c, k, t]`` their multiplicities (zero-padded along ``t``).

    When the source distribution and the reproduction distribution are
    uniform within classes, every quantity the solvers compute is exactly
    the class-level quantity computed with this kernel, so a class-uniform
    problem on hundreds of symbols reduces to a handful of classes. A
    distribution over this object's rows is a vector of class totals.
    """

    levels: np.ndarray
    counts: np.ndarray
    row_sizes: np.ndarray
    col_sizes: np.ndarray
    _weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        levels = _readonly(self.levels)
        counts = _readonly(self.counts)
        rows = np.array(self.row_sizes, dtype=int)
        cols = np.array(self.col_sizes, dtype=int)
        if levels.ndim != 3 or levels.shape != counts.shape:
            raise DomainError("levels and counts must share a (C, K, T) shape")
        if levels.shape[:2] != (rows.size, cols.size):
            raise DomainError("class sizes do not match the level table")
        if np.any(levels < 0) or np.any(counts < 0) or not np.all(np.isfinite(levels)):
            raise DomainError("levels and counts must be finite and nonnegative")
        if np.any(rows < 1) or np.any(cols < 1):
            raise DomainError("class sizes must be positive")
        if not np.allclose(counts.sum(axis=2), cols[None, :]):
            raise DomainError("counts in each cell must add up to the column class size")
        has_zero = ((levels == 0) & (counts > 0)).any(axis=(1, 2))
        if not has_zero.all():
            raise DomainError("every row class needs a zero-distortion column")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "row_sizes", rows)
        object.__setattr__(self, "col_sizes", cols)
        object.__setattr__(self, "_weights", counts / cols[None, :, None])

    @property
    def shape(self) -> tuple[int, int]:
        return self.levels.shape[:2]

    @property
    def full_shape(self) -> tuple[int, int]:
        return int(self.row_sizes.sum()), int(self.col_sizes.sum())

    @property
    def d_max(self) -> float:
        return float(self.levels[self.counts > 0].max())

    def log_kernel(self, nu) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logw = np.log(self._weights)
        return logsumexp(logw - np.multiply.outer(nu, self.levels), axis=-1)

    def distortion_kernel(self, nu) -> np.ndarray:
        e = np.exp(-np.multiply.outer(nu, self.levels))
        return np.sum(self._weights * self.levels * e, axis=-1)

    def initial_output(self) -> np.ndarray:
        return self.col_sizes / self.col_sizes.sum()

    def expand_rows(self, class_probs) -> np.ndarray:
        """Spread class totals uniformly over the member symbols."""
        q = as_probs(class_probs)
        return np.repeat(q / self.row_sizes, self.row_sizes)

    def expand_cols(self, class_probs) -> np.ndarray:
        q = as_probs(class_probs)
        return np.repeat(q / self.col_sizes, self.col_sizes)

    @classmethod
    def from_matrix(cls, d, row_labels, col_labels) -> "LumpedDistortion":
        """Lump ``d`` along the given class labels, checking equitability.

        Labels are integers ``0..C-1`` / ``0..K-1``; symbols of one class must
        be contiguous so that :meth:`expand_rows` lines up with ``d``.
        """
        values = d.values if isinstance(d, DistortionMatrix) else np.asarray(d, dtype=float)
        rl = np.asarray(row_labels)
        cl = np.asarray(col_labels)
        if rl.size != values.shape[0] or cl.size != values.shape[1]:
            raise AlphabetMismatch("labels do not match the matrix shape")
        for lab in (rl, cl):
            if np.any(np.diff(lab) < 0):
                raise DomainError("class labels must be contiguous and sorted")
        n_rc, n_cc = int(rl.max()) + 1, int(cl.max()) + 1
        cells: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        for c in range(n_rc):
            rows = values[rl == c]
            for k in range(n_cc):
                block = rows[:, cl == k]
                profiles = {tuple(np.unique(r, return_counts=True)[0]) for r in block}
                counts = {tuple(np.unique(r, return_counts=True)[1]) for r in block}
                if len(profiles) != 1 or len(counts) != 1:
                    raise DomainError(f"partition is not equitable in block ({c}, {k})")
                cols_t = {tuple(np.unique(col, return_counts=True)[0]) for col in block.T}
                if len(cols_t) != 1:
                    raise DomainError(f"partition is not equitable in block ({c}, {k})")
                cells[c, k] = (np.array(next(iter(profiles))), np.array(next(iter(counts)), float))
        width = max(v.size for v, _ in cells.values())
        levels = np.zeros((n_rc, n_cc, width))
        counts = np.zeros((n_rc, n_cc, width))
        for (c, k), (v, n) in cells.items():
            levels[c, k, : v.size] = v
            counts[c, k, : n.size] = n
        return cls(levels, counts, np.bincount(rl), np.bincount(cl))


# ---------------------------------------------------------------------------
# Information measures
# ---------------------------------------------------------------------------


def kl_divergence(q, p) -> InfoValue:
    """Relative entropy ``D(q || p)`` in nats; ``inf`` if q is not dominated by p."""
    qa, pa = as_probs(q), as_probs(p)
    if qa.shape != pa.shape:
        raise AlphabetMismatch(f"alphabet sizes differ: {qa.shape} vs {pa.shape}")
    return InfoValue(max(float(np.sum(rel_entr(qa, pa))), 0.0))


def binary_divergence(lam: float, xi: float) -> InfoValue:
    """``D_2(lam || xi)`` between Bernoulli parameters, in nats."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda={lam} outside [0, 1]")
    if not 0.0 < xi < 1.0:
        raise DomainError(f"xi={xi} outside (0, 1)")
    return kl_divergence(np.array([lam, 1.0 - lam]), np.array([xi, 1.0 - xi]))


def binary_entropy(t: float) -> InfoValue:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    return InfoValue(float(-xlogy(t, t) - xlogy(1.0 - t, 1.0 - t)))


def delta_max(p_x, d: Distortion) -> float:
    """Smallest distortion reachable with a constant reproduction symbol.

    Above this level the rate-distortion function is zero.
    """
    pa = as_probs(p_x)
    if pa.size != d.shape[0]:
        raise AlphabetMismatch(f"source has {pa.size} symbols, distortion has {d.shape[0]} rows")
    return max(float(np.min(d.expected_distortion_columns(pa))), 0.0)


def check_compatible(p_x, d: Distortion) -> np.ndarray:
    pa = as_probs(p_x)
    if pa.ndim != 1 or pa.size != d.shape[0]:
        raise AlphabetMismatch(f"source has {pa.size} symbols, distortion has {d.shape[0]} rows")
    return pa
