"""Finite-alphabet probability objects and information measures.

Every quantity is in bits. ``0 log 0`` is taken as 0, and probabilities
below :data:`ZERO` are treated as exact zeros so that logarithms never
underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

NORM_TOL = 1e-12
ZERO = 1e-300


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: entries must be finite")
    if np.any(arr < 0):
        raise ValidationError(f"{what}: entries must be nonnegative")


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over ``{0, ..., len(probs) - 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size < 1:
            raise ValidationError("pmf: need a nonempty vector")
        _check_finite(p, "pmf")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise ValidationError(f"pmf: entries sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def bernoulli(cls, q: float) -> "Pmf":
        _unit_interval(q, "q")
        return cls([1.0 - q, q])

    @classmethod
    def uniform(cls, k: int) -> "Pmf":
        return cls(np.full(k, 1.0 / k))

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix: ``rows[i, j] = P(output j | input i)``."""

    rows: np.ndarray

    def __post_init__(self):
        w = _frozen(self.rows)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValidationError("channel: need a matrix with at least one row and column")
        _check_finite(w, "channel")
        sums = w.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > NORM_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise ValidationError(f"channel: row {i} sums to {sums[i]!r}, not 1")
        object.__setattr__(self, "rows", w)

    @classmethod
    def bsc(cls, eps: float) -> "Channel":
        _unit_interval(eps, "eps")
        return cls([[1.0 - eps, eps], [eps, 1.0 - eps]])

    @classmethod
    def identity(cls, k: int) -> "Channel":
        return cls(np.eye(k))

    @property
    def n_in(self) -> int:
        return self.rows.shape[0]

    @property
    def n_out(self) -> int:
        return self.rows.shape[1]

    def then(self, other: "Channel") -> "Channel":
        """Cascade: feed this channel's output into ``other``."""
        if self.n_out != other.n_in:
            raise ValidationError(f"cascade: {self.n_out} outputs feed {other.n_in} inputs")
        return Channel(self.rows @ other.rows)


@dataclass(frozen=True, eq=False)
class Joint:
    """Joint distribution of two variables; ``labels`` names the axes."""

    table: np.ndarray
    labels: tuple = ("A", "B")

    def __post_init__(self):
        t = _frozen(self.table)
        if t.ndim != 2 or t.size < 1:
            raise ValidationError("joint: need a nonempty matrix")
        _check_finite(t, "joint")
        if abs(t.sum() - 1.0) > NORM_TOL:
            raise ValidationError(f"joint: entries sum to {t.sum()!r}, not 1")
        if len(self.labels) != 2:
            raise ValidationError("joint: need exactly two axis labels")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "labels", tuple(self.labels))

    def marginal(self, axis) -> np.ndarray:
        """Marginal pmf of ``axis`` (index or label)."""
        ax = self._axis(axis)
        return self.table.sum(axis=1 - ax)

    def _axis(self, axis) -> int:
        if axis in (0, 1):
            return int(axis)
        try:
            return self.labels.index(axis)
        except ValueError:
            raise ValidationError(f"joint: unknown axis {axis!r}") from None


def _unit_interval(x, name):
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name}={x!r} is outside [0, 1]")


def plogp(a) -> np.ndarray:
    """Elementwise ``-a log2 a`` with the 0 log 0 = 0 convention."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    m = a > ZERO
    out[m] = -a[m] * np.log2(a[m])
    return out


def _h(p) -> float:
    return float(plogp(p).sum())


def entropy(p: Pmf) -> float:
    if not isinstance(p, Pmf):
        p = Pmf(p)
    return _h(p.probs)


def _hb(q: float) -> float:
    # scalar fast path; the bisection below calls this 60 times
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def binary_entropy(q: float) -> float:
    _unit_interval(q, "q")
    return _hb(q)


def binary_entropy_inv(y: float) -> float:
    """Lower-branch inverse of the binary entropy, in ``[0, 1/2]``.

    Bisection rather than Newton: the derivative of h blows up at 0.
    """
    _unit_interval(y, "y")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _hb(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binary_convolve(a: float, b: float) -> float:
    _unit_interval(a, "a")
    _unit_interval(b, "b")
    return a * (1.0 - b) + (1.0 - a) * b


def joint_from(input: Pmf, ch: Channel, labels=("X", "Y")) -> Joint:
    if len(input) != ch.n_in:
        raise ValidationError(f"joint_from: pmf has {len(input)} entries, channel has {ch.n_in} rows")
    return Joint(input.probs[:, None] * ch.rows, labels)


def mutual_information(input: Pmf, ch: Channel) -> float:
    if len(input) != ch.n_in:
        raise ValidationError(f"mutual_information: pmf has {len(input)} entries, channel has {ch.n_in} rows")
    out = input.probs @ ch.rows
    cond = float(input.probs @ plogp(ch.rows).sum(axis=1))
    return max(_h(out) - cond, 0.0)


def joint_entropy(j: Joint) -> float:
    return _h(j.table)


def conditional_entropy(j: Joint, given=1) -> float:
    """``H(other | given)`` for a two-variable joint."""
    if not isinstance(j, Joint):
        raise ValidationError("conditional_entropy: expected a Joint")
    return max(_h(j.table) - _h(j.marginal(given)), 0.0)


def joint_mutual_information(j: Joint) -> float:
    return max(_h(j.marginal(0)) + _h(j.marginal(1)) - _h(j.table), 0.0)
