"""Monte Carlo simulation of single-block quantize-and-forward.

Per trial: draw a message and the noise, let the relay pick the first
U-codeword that is jointly typical with its observation, hand the index to
the destination over an error-free pipe, and decode the message from
``(Y, U)``.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``. The
X codebook, the U codebook and every trial use separate substreams keyed by
``(seed, 0)``, ``(seed, 1)`` and ``(seed, 2, trial)``, so a trial's outcome
does not depend on how many trials run or in what order, and two runs that
differ only in the quantizer see the same messages and noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import QuantizerDesign, constant_quantizer
from .channel import RelayChannelSpec, noise_observation_joint, relay_link_capacity
from .errors import DomainError, GuardError, InfeasibleQuantizerError, ValidationError

CODEBOOK_GUARD = 24
WILSON_Z = 1.959963984540054


def default_typ_tol(n: int) -> float:
    return 0.05 + 1.0 / math.sqrt(n)


def _ceil_bits(x: float) -> int:
    # guard against 16 * 0.25 landing a hair above 4
    return math.ceil(round(x, 9))


@dataclass(frozen=True)
class SimConfig:
    n: int
    rate: float
    quantizer: QuantizerDesign
    trials: int = 1000
    seed: int = 0
    decoder: str = "ml"
    u_rate_margin: float = 0.1
    typ_tol: float | None = None
    check_pipe: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n={self.n} must be >= 1")
        if not self.rate > 0:
            raise ValidationError(f"rate={self.rate} must be > 0")
        if self.trials < 1:
            raise ValidationError(f"trials={self.trials} must be >= 1")
        if self.decoder not in ("ml", "typ"):
            raise ValidationError(f"decoder={self.decoder!r} must be 'ml' or 'typ'")
        if self.u_rate_margin < 0:
            raise ValidationError(f"u_rate_margin={self.u_rate_margin} must be >= 0")
        if self.typ_tol is None:
            object.__setattr__(self, "typ_tol", default_typ_tol(self.n))
        if not self.typ_tol > 0:
            raise ValidationError(f"typ_tol={self.typ_tol} must be > 0")
        if self.x_bits > CODEBOOK_GUARD:
            raise GuardError(f"ceil(n*rate)={self.x_bits} exceeds the codebook guard of {CODEBOOK_GUARD} bits")

    @property
    def x_bits(self) -> int:
        return _ceil_bits(self.n * self.rate)

    @property
    def u_bits(self) -> int:
        return _ceil_bits(self.n * (self.quantizer.rate + self.u_rate_margin))


@dataclass(frozen=True, eq=False)
class UCodebook:
    """Relay codebook with the target joint law ``p(u, y1)`` used for typicality."""

    words: np.ndarray
    p_uy: np.ndarray


@dataclass(frozen=True, eq=False)
class Codebooks:
    x: np.ndarray
    u: UCodebook


@dataclass(frozen=True)
class SimReport:
    block_error_rate: float
    wilson_ci95: tuple
    event_counts: dict
    trials_run: int
    config: SimConfig = field(compare=False)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _sample(rng, probs, size):
    """Inverse-CDF draws from a pmf; one uniform per symbol."""
    cdf = np.cumsum(probs)
    return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(probs) - 1)


def build_codebooks(config: SimConfig, spec: RelayChannelSpec) -> Codebooks:
    if config.u_bits > CODEBOOK_GUARD:
        raise GuardError(f"U codebook needs {config.u_bits} bits, over the guard of {CODEBOOK_GUARD}")
    q = config.quantizer.q.rows
    if q.shape[0] != spec.n_obs:
        raise ValidationError(f"quantizer has {q.shape[0]} rows, relay observes {spec.n_obs} symbols")
    x = _stream(config.seed, 0).integers(0, spec.m, size=(2 ** config.x_bits, config.n))
    py = noise_observation_joint(spec).table.sum(axis=0)
    p_uy = (py[:, None] * q).T
    u = _sample(_stream(config.seed, 1), p_uy.sum(axis=1), (2 ** config.u_bits, config.n))
    return Codebooks(x, UCodebook(u, p_uy))


def _max_deviation(codes: np.ndarray, n_cells: int, target: np.ndarray) -> np.ndarray:
    """Largest per-cell gap between empirical and target frequencies, per row of ``codes``."""
    rows, n = codes.shape
    flat = codes + n_cells * np.arange(rows)[:, None]
    freq = np.bincount(flat.ravel(), minlength=rows * n_cells).reshape(rows, n_cells) / n
    return np.abs(freq - target.ravel()[None, :]).max(axis=1)


def relay_quantize(y1_block, u_codebook: UCodebook, typ_tol: float) -> int | None:
    """Lowest index of a U-codeword jointly typical with ``y1_block``, or ``None``."""
    y1 = np.asarray(y1_block)
    n_u, n_y = u_codebook.p_uy.shape
    dev = _max_deviation(u_codebook.words * n_y + y1[None, :], n_u * n_y, u_codebook.p_uy)
    hits = np.nonzero(dev <= typ_tol)[0]
    return int(hits[0]) if hits.size else None


def noise_given_description(spec: RelayChannelSpec, quantizer: QuantizerDesign) -> np.ndarray:
    """Joint law ``p(z, u)`` induced through ``Z - Y1 - U``."""
    return noise_observation_joint(spec).table @ quantizer.q.rows


def destination_decode(y_block, u_block, x_codebook, decoder: str, typ_tol: float,
                       p_zu: np.ndarray) -> int | None:
    """Recover the message index from ``(Y, U)``; ``None`` if typicality decoding fails."""
    y = np.asarray(y_block)
    u = np.asarray(u_block)
    x = np.asarray(x_codebook)
    m = p_zu.shape[0]
    z_hat = (y[None, :] - x) % m
    if decoder == "ml":
        p_u = p_zu.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_cond = np.where(p_zu > 0, np.log(p_zu) - np.log(np.where(p_u > 0, p_u, 1.0))[None, :], -np.inf)
        score = log_cond[z_hat, u[None, :]].sum(axis=1)
        return int(np.argmax(score))
    if decoder == "typ":
        n_u = p_zu.shape[1]
        # p(x, y, u) = p(z = y - x, u) / m, cells ordered (x, y, u)
        target = np.empty((m, m, n_u))
        for xs in range(m):
            for ys in range(m):
                target[xs, ys] = p_zu[(ys - xs) % m] / m
        codes = (x * m + y[None, :]) * n_u + u[None, :]
        hits = np.nonzero(_max_deviation(codes, m * m * n_u, target) <= typ_tol)[0]
        return int(hits[0]) if hits.size == 1 else None
    raise DomainError(f"unknown decoder {decoder!r}")


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple:
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so round-off never leaves the point estimate outside
    return max(min(centre - half, p), 0.0), min(max(centre + half, p), 1.0)


def simulate(spec: RelayChannelSpec, config: SimConfig) -> SimReport:
    if config.check_pipe:
        r0 = relay_link_capacity(spec)
        if config.quantizer.rate > r0 + 1e-9:
            raise InfeasibleQuantizerError(
                f"quantizer rate I(U;Y1)={config.quantizer.rate:.12g} exceeds the pipe rate R0={r0:.12g}")
    books = build_codebooks(config, spec)
    p_zu = noise_given_description(spec, config.quantizer)
    p_zy = noise_observation_joint(spec).table
    obs = spec.relay_obs.rows
    n, m, n_y = config.n, spec.m, spec.n_obs
    n_msg = books.x.shape[0]
    cdf_obs = np.cumsum(obs, axis=1)

    quant_fail = decode_err = atypical = 0
    for t in range(config.trials):
        rng = _stream(config.seed, 2, t)
        w = int(rng.integers(0, n_msg))
        z = _sample(rng, spec.noise.probs, n)
        y1 = np.minimum((rng.random(n)[:, None] >= cdf_obs[z]).sum(axis=1), n_y - 1)
        y = (books.x[w] + z) % m

        if _max_deviation((z * n_y + y1)[None, :], m * n_y, p_zy)[0] > config.typ_tol:
            atypical += 1
        idx = relay_quantize(y1, books.u, config.typ_tol)
        if idx is None:
            quant_fail += 1
            idx = 0
        w_hat = destination_decode(y, books.u.words[idx], books.x, config.decoder, config.typ_tol, p_zu)
        if w_hat != w:
            decode_err += 1

    return SimReport(
        block_error_rate=decode_err / config.trials,
        wilson_ci95=wilson_interval(decode_err, config.trials),
        event_counts={"quantize_failure": quant_fail, "decode_error": decode_err, "atypical_source": atypical},
        trials_run=config.trials,
        config=config,
    )


def constant_design(spec: RelayChannelSpec) -> QuantizerDesign:
    """Quantizer that tells the destination nothing."""
    return QuantizerDesign.build(spec, constant_quantizer(spec.n_obs))


def sample_output_and_description(spec: RelayChannelSpec, quantizer: QuantizerDesign, samples: int,
                                  seed: int = 0):
    """Single-letter draws of ``(Y, U)`` with uniform X."""
    rng = _stream(seed, 3)
    x = rng.integers(0, spec.m, size=samples)
    z = _sample(rng, spec.noise.probs, samples)
    cdf_obs = np.cumsum(spec.relay_obs.rows, axis=1)
    y1 = np.minimum((rng.random(samples)[:, None] >= cdf_obs[z]).sum(axis=1), spec.n_obs - 1)
    cdf_q = np.cumsum(quantizer.q.rows, axis=1)
    u = np.minimum((rng.random(samples)[:, None] >= cdf_q[y1]).sum(axis=1), quantizer.n_out - 1)
    return (x + z) % spec.m, u
