"""Exhaustive check of the converse inequality at tiny blocklengths.

For every deterministic relay map ``Y1^n -> X1^n`` the exact value of
``H(Z^n | S^n)`` is computed and compared with ``n * min H(Z|U)`` over test
channels with ``I(U;Y1) <= R0``. Stochastic relay maps are mixtures of
deterministic ones and cannot do better than the best of them, so the
deterministic minimum is the one that matters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .capacity import OptimizerOptions, capacity_grid_oracle, capacity_numeric
from .channel import Dmc, RelayChannelSpec, noise_observation_joint, relay_link_capacity
from .errors import GuardError, ValidationError
from .info import plogp

ENUM_GUARD = 2 ** 24
PASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RelayEncoderTable:
    """Deterministic block relay map: entry ``i`` is the X1^n index sent for Y1^n index ``i``."""

    n: int
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if self.n < 1:
            raise ValidationError(f"encoder: blocklength n={self.n} must be >= 1")


@dataclass(frozen=True)
class ConverseReport:
    n: int
    encoder_count: int
    min_conditional_entropy: float
    bound: float
    worst_encoder: RelayEncoderTable
    passed: bool
    conservative: bool = False
    values: np.ndarray | None = field(default=None, compare=False)

    @property
    def margin(self) -> float:
        return self.min_conditional_entropy - self.bound


def _link(spec: RelayChannelSpec) -> np.ndarray:
    if not isinstance(spec.relay_link, Dmc):
        raise ValidationError("converse check needs an explicit link channel p(s|x1), not only a rate")
    return spec.relay_link.link.rows


def _kron_power(a: np.ndarray, n: int) -> np.ndarray:
    return reduce(np.kron, [a] * n)


def encoder_count(n: int, spec: RelayChannelSpec) -> int:
    n_x1 = _link(spec).shape[0]
    return (n_x1 ** n) ** (spec.n_obs ** n)


def enumerate_encoders(n: int, spec: RelayChannelSpec):
    """Yield every deterministic relay map, in lexicographic order of its table."""
    count = encoder_count(n, spec)
    if count > ENUM_GUARD:
        raise GuardError(f"{count} relay encoders at n={n} exceed the enumeration guard of {ENUM_GUARD}")
    n_x1 = _link(spec).shape[0]
    for t in itertools.product(range(n_x1 ** n), repeat=spec.n_obs ** n):
        yield RelayEncoderTable(n, np.array(t))


def _block_laws(spec, n):
    return _kron_power(noise_observation_joint(spec).table, n), _kron_power(_link(spec), n)


def _cond_entropy_zs(joint_zs: np.ndarray) -> np.ndarray:
    """``H(Z^n|S^n)`` for a stack of joint tables with shape ``(..., Z^n, S^n)``."""
    h_joint = plogp(joint_zs).sum(axis=(-2, -1))
    h_s = plogp(joint_zs.sum(axis=-2)).sum(axis=-1)
    return np.maximum(h_joint - h_s, 0.0)


def conditional_entropy_stochastic(spec: RelayChannelSpec, n: int, relay: np.ndarray) -> float:
    """``H(Z^n|S^n)`` for a stochastic relay map given as a ``|Y1|^n x |X1|^n`` matrix."""
    pzy, link = _block_laws(spec, n)
    relay = np.asarray(relay, dtype=float)
    if relay.shape != (pzy.shape[1], link.shape[0]):
        raise ValidationError(f"relay map has shape {relay.shape}, expected {(pzy.shape[1], link.shape[0])}")
    return float(_cond_entropy_zs(pzy @ relay @ link))


def conditional_entropy_exact(spec: RelayChannelSpec, enc: RelayEncoderTable) -> float:
    pzy, link = _block_laws(spec, enc.n)
    if enc.table.shape != (pzy.shape[1],):
        raise ValidationError(f"encoder table has {enc.table.size} entries, expected {pzy.shape[1]} for n={enc.n}")
    if enc.table.min() < 0 or enc.table.max() >= link.shape[0]:
        raise ValidationError("encoder table entry is not a valid X1^n index")
    return float(_cond_entropy_zs(pzy @ link[enc.table]))


def _all_values(spec, n, chunk=1 << 14):
    """Exact ``H(Z^n|S^n)`` for every deterministic encoder, in enumeration order."""
    pzy, link = _block_laws(spec, n)
    n_y, n_x = pzy.shape[1], link.shape[0]
    count = encoder_count(n, spec)
    if count > ENUM_GUARD:
        raise GuardError(f"{count} relay encoders at n={n} exceed the enumeration guard of {ENUM_GUARD}")
    # encoder e has table digits of e in base n_x, most significant first
    weights = n_x ** np.arange(n_y - 1, -1, -1, dtype=np.int64)
    out = np.empty(count)
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count), dtype=np.int64)
        tables = (idx[:, None] // weights[None, :]) % n_x
        out[start:start + idx.size] = _cond_entropy_zs(np.einsum("zy,eys->ezs", pzy, link[tables]))
    return out, weights, n_x


def lemma_bound(spec: RelayChannelSpec, n: int, opts: OptimizerOptions | None = None,
                resolution: int = 128):
    """``n * min H(Z|U)`` at ``R0``; falls back to the grid oracle if the optimizer did not converge.

    Returns ``(bound, conservative)``.
    """
    r0 = relay_link_capacity(spec)
    rep = capacity_numeric(spec, opts, r0=r0)
    if rep.converged:
        return n * rep.quantizer.distortion, False
    grid = capacity_grid_oracle(spec, resolution, r0=r0)
    # the grid value over-estimates the minimum, which only makes the check stricter
    return n * grid.quantizer.distortion, True


def verify_lemma1(spec: RelayChannelSpec, n: int, opts: OptimizerOptions | None = None,
                  keep_values: bool = False, resolution: int = 128) -> ConverseReport:
    values, weights, n_x = _all_values(spec, n)
    bound, conservative = lemma_bound(spec, n, opts, resolution)
    worst = int(np.argmin(values))
    table = (worst // weights) % n_x
    lo = float(values[worst])
    return ConverseReport(
        n=n,
        encoder_count=values.size,
        min_conditional_entropy=lo,
        bound=bound,
        worst_encoder=RelayEncoderTable(n, table),
        passed=lo >= bound - PASS_TOL,
        conservative=conservative,
        values=values if keep_values else None,
    )


def block_entropy_of_noise(spec: RelayChannelSpec, n: int) -> float:
    """``H(Z^n) = n H(Z)``, the value every uninformative relay achieves."""
    return n * float(plogp(spec.noise.probs).sum())

