"""Capacity of the modulo-sum relay channel.

The capacity is ``log2(m) - min H(Z|U)`` over test channels ``p(u|y1)``
with ``I(U;Y1) <= R0``. The minimization is a bottleneck problem on the
Markov chain ``Z - Y1 - U``; it is solved by Lagrangian alternating
minimization of ``H(Z|U) + beta * I(U;Y1)`` with random restarts, a
logarithmic sweep over ``beta``, bisection on the rate constraint and
time-sharing between computed solutions that straddle the constraint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import RelayChannelSpec, noise_observation_joint, relay_link_capacity
from .errors import DomainError, GuardError, InfeasibleQuantizerError, ValidationError, VerificationError
from .info import (
    ZERO,
    Channel,
    binary_convolve,
    binary_entropy,
    binary_entropy_inv,
    entropy,
    plogp,
)

FEAS_TOL = 1e-9
# merging outputs whose posteriors differ by less than this moves rate and
# distortion only at second order; stats are always recomputed afterwards
MERGE_TOL = 1e-6
LN2 = math.log(2.0)


# --- quantizer bookkeeping ------------------------------------------------

def _stats(pzy: np.ndarray, q: np.ndarray):
    """Rate ``I(U;Y1)`` and distortion ``H(Z|U)`` in bits for one test channel."""
    py = pzy.sum(axis=0)
    qu = py @ q
    pzu = pzy @ q
    h_u = plogp(qu).sum()
    rate = h_u - py @ plogp(q).sum(axis=1)
    dist = plogp(pzu).sum() - h_u
    return max(float(rate), 0.0), max(float(dist), 0.0)


@dataclass(frozen=True, eq=False)
class QuantizerDesign:
    """Test channel ``p(u|y1)`` with its rate ``I(U;Y1)`` and distortion ``H(Z|U)``."""

    q: Channel
    rate: float
    distortion: float

    @classmethod
    def build(cls, spec: RelayChannelSpec, q) -> "QuantizerDesign":
        if not isinstance(q, Channel):
            q = Channel(q)
        if q.n_in != spec.n_obs:
            raise ValidationError(f"quantizer: {q.n_in} rows, relay observes {spec.n_obs} symbols")
        if q.n_out > spec.n_obs + 2:
            raise ValidationError(f"quantizer: {q.n_out} outputs exceed the |Y1|+2={spec.n_obs + 2} budget")
        rate, dist = _stats(noise_observation_joint(spec).table, q.rows)
        return cls(q, rate, dist)

    @property
    def n_out(self) -> int:
        return self.q.n_out


@dataclass(frozen=True)
class OptimizerOptions:
    seed: int = 0
    restarts: int = 32
    n_beta: int = 40
    beta_min: float = 1e-4
    tol: float = 1e-12
    max_iter: int = 10_000
    refine_steps: int = 60
    refine_restarts: int = 4
    gap_tol: float = 1e-11
    r0_tol: float = 1e-10


@dataclass(frozen=True)
class CapacityReport:
    capacity: float
    quantizer: QuantizerDesign
    r0_used: float
    constraint_slack: float
    method: str
    restarts_used: int
    converged: bool
    normalization: str = "bits"
    diagnostics: dict = field(default_factory=dict, compare=False)


def _report(spec, design, r0, method, restarts, converged, **diag):
    cap = math.log2(spec.m) - design.distortion
    return CapacityReport(cap, design, r0, r0 - design.rate, method, restarts, converged, diagnostics=diag)


def compact_quantizer(q: np.ndarray, py: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Drop unused outputs and merge outputs with the same posterior on Y1.

    Both operations leave ``I(U;Y1)`` and ``H(Z|U)`` unchanged because Z
    depends on U only through ``p(y1|u)``.
    """
    q = np.asarray(q, dtype=float)
    qu = py @ q
    keep = [j for j in range(q.shape[1]) if qu[j] > ZERO or np.any(q[py <= ZERO, j] > 0)]
    cols = []
    posts = []
    for j in keep:
        post = q[:, j] * py / qu[j] if qu[j] > ZERO else None
        for c, other in enumerate(posts):
            if post is not None and other is not None and np.abs(post - other).sum() < tol:
                cols[c] = cols[c] + q[:, j]
                break
        else:
            cols.append(q[:, j].copy())
            posts.append(post)
    out = np.stack(cols, axis=1)
    return out / out.sum(axis=1, keepdims=True)


def timeshare(q_a: np.ndarray, q_b: np.ndarray, lam: float) -> np.ndarray:
    """Quantizer ``U' = (Q, U)`` using ``q_a`` w.p. ``lam`` and ``q_b`` otherwise."""
    return np.hstack([lam * q_a, (1.0 - lam) * q_b])


def constant_quantizer(n_obs: int) -> np.ndarray:
    return np.ones((n_obs, 1))


# --- bottleneck iterations ------------------------------------------------

def _xlogx(a):
    out = np.zeros_like(a)
    m = a > ZERO
    out[m] = a[m] * np.log(a[m])
    return out


def _batch_stats(pzy, py, q):
    qu = np.einsum("y,kyu->ku", py, q)
    pzu = np.einsum("zy,kyu->kzu", pzy, q)
    h_u = -_xlogx(qu).sum(axis=1)
    dist = (-_xlogx(pzu).sum(axis=(1, 2)) - h_u) / LN2
    rate = (h_u + np.einsum("y,kyu->k", py, _xlogx(q))) / LN2
    return np.maximum(rate, 0.0), np.maximum(dist, 0.0)


def bottleneck_iterate(pzy, betas, q0, tol=1e-12, max_iter=10_000):
    """Alternating minimization of ``H(Z|U) + beta I(U;Y1)`` for a batch of problems.

    ``betas`` has shape ``(K,)`` and ``q0`` shape ``(K, |Y1|, |U|)``. Each
    problem stops on its own once the objective moves less than ``tol``.
    Returns ``(q, rate, distortion, iterations)``.
    """
    pzy = np.asarray(pzy, dtype=float)
    betas = np.asarray(betas, dtype=float)
    py = pzy.sum(axis=0)
    pz_y = np.where(py > ZERO, pzy / np.where(py > ZERO, py, 1.0), 1.0 / pzy.shape[0]).T
    support = pz_y > ZERO
    neg_h = _xlogx(pz_y).sum(axis=1)

    q = np.array(q0, dtype=float)
    k = len(betas)
    prev = np.full(k, np.inf)
    iters = np.zeros(k, dtype=int)
    active = np.arange(k)
    while active.size:
        qa = q[active]
        qu = np.einsum("y,kyu->ku", py, qa)
        pzu = np.einsum("zy,kyu->kzu", pzy, qa)
        alive = pzu > ZERO
        with np.errstate(divide="ignore", invalid="ignore"):
            log_post = np.where(alive, np.log(np.where(alive, pzu, 1.0) / np.where(qu > ZERO, qu, 1.0)[:, None, :]), 0.0)
            log_qu = np.where(qu > ZERO, np.log(np.where(qu > ZERO, qu, 1.0)), -np.inf)
        # D(p(z|y) || p(z|u)); infinite where p(z|u) misses support of p(z|y)
        div = neg_h[None, :, None] - np.einsum("yz,kzu->kyu", pz_y, log_post)
        blocked = np.einsum("yz,kzu->kyu", support.astype(float), (~alive).astype(float)) > 0
        logits = log_qu[:, None, :] - div / betas[active, None, None]
        logits = np.where(blocked, -np.inf, logits)
        logits -= logits.max(axis=2, keepdims=True)
        e = np.exp(logits)
        qa = e / e.sum(axis=2, keepdims=True)
        q[active] = qa

        rate, dist = _batch_stats(pzy, py, qa)
        obj = dist + betas[active] * rate
        iters[active] += 1
        done = (np.abs(prev[active] - obj) < tol) | (iters[active] >= max_iter)
        prev[active] = obj
        active = active[~done]
    rate, dist = _batch_stats(pzy, py, q)
    return q, rate, dist, iters


@dataclass
class _Point:
    beta: float
    q: np.ndarray
    rate: float
    dist: float
    converged: bool


def _solve_at(pzy, beta, n_u, rng, opts, warm=()):
    """Best of a few random starts plus warm starts at one beta."""
    n_obs = pzy.shape[1]
    starts = [rng.dirichlet(np.ones(n_u), size=n_obs) for _ in range(opts.refine_restarts)]
    starts.extend(_pad(w, n_u) for w in warm)
    q, rate, dist, iters = bottleneck_iterate(pzy, np.full(len(starts), beta), np.stack(starts),
                                              opts.tol, opts.max_iter)
    return _best(beta, q, rate, dist, iters, opts)


def _best(beta, q, rate, dist, iters, opts):
    obj = dist + beta * rate
    i = int(np.argmin(obj))
    # first index within 1e-12 of the best objective
    i = int(np.nonzero(obj <= obj[i] + 1e-12)[0][0])
    return _Point(beta, q[i], float(rate[i]), float(dist[i]), bool(iters[i] < opts.max_iter))


def _pad(q, n_u):
    q = np.asarray(q, dtype=float)
    if q.shape[1] >= n_u:
        return q[:, :n_u] / q[:, :n_u].sum(axis=1, keepdims=True) if q.shape[1] > n_u else q
    # tiny mass on padded columns so the iteration can still use them
    out = np.hstack([q, np.zeros((q.shape[0], n_u - q.shape[1]))]) + 1e-9
    return out / out.sum(axis=1, keepdims=True)


def _sweep(pzy, n_u, rng, opts):
    betas = np.geomspace(opts.beta_min, 1.0, opts.n_beta)
    n_obs = pzy.shape[1]
    q0 = rng.dirichlet(np.ones(n_u), size=(opts.n_beta * opts.restarts, n_obs))
    q, rate, dist, iters = bottleneck_iterate(pzy, np.repeat(betas, opts.restarts), q0, opts.tol, opts.max_iter)
    points = []
    for b in range(opts.n_beta):
        sl = slice(b * opts.restarts, (b + 1) * opts.restarts)
        points.append(_best(betas[b], q[sl], rate[sl], dist[sl], iters[sl], opts))
    return points


def _simplify(pzy, py, q, r0):
    """Merge near-duplicate outputs when that costs at most 1e-12 bits of distortion."""
    exact = compact_quantizer(q, py, tol=MERGE_TOL)
    _, d_exact = _stats(pzy, exact)
    for tol in (1e-3, 1e-4, 1e-5):
        loose = compact_quantizer(q, py, tol=tol)
        if loose.shape[1] < exact.shape[1]:
            r, d = _stats(pzy, loose)
            if r <= r0 + FEAS_TOL and d <= d_exact + 1e-12:
                return loose
    return exact


def _select(pzy, py, points, r0, n_u):
    """Best feasible point or time-shared pair of points that fits ``n_u`` outputs."""
    best = None
    for pt in points:
        if pt.rate <= r0 + FEAS_TOL and (best is None or pt.dist < best.dist - 1e-12):
            best = pt
    under = [pt for pt in points if pt.rate < r0]
    over = [pt for pt in points if pt.rate > r0]
    chords = []
    for a in under:
        for b in over:
            lam = (b.rate - r0) / (b.rate - a.rate)
            chords.append((lam * a.dist + (1.0 - lam) * b.dist, lam, a, b))
    chords.sort(key=lambda c: c[0])
    for value, lam, a, b in chords:
        if value >= best.dist - 1e-12:
            break
        ts = compact_quantizer(timeshare(a.q, b.q, lam), py, tol=MERGE_TOL)
        if ts.shape[1] > n_u:
            continue
        r, d = _stats(pzy, ts)
        if r <= r0 + FEAS_TOL and d < best.dist - 1e-12:
            best = _Point(b.beta, ts, r, d, a.converged and b.converged)
        break
    return best


def _duality_gap(lo, hi, r0):
    """Chord between the bracket ends minus the best Lagrangian lower bound on min H(Z|U).

    ``lo`` is the infeasible end, ``hi`` the feasible one. The bound
    ``dist + beta (rate - r0)`` holds when the point minimizes the Lagrangian at its beta.
    """
    if lo.rate <= hi.rate:
        return math.inf
    lam = (r0 - hi.rate) / (lo.rate - hi.rate)
    primal = lam * lo.dist + (1.0 - lam) * hi.dist
    duals = [pt.dist + pt.beta * (pt.rate - r0) for pt in (lo, hi) if 0.0 < pt.beta < math.inf]
    return primal - max(duals) if duals else math.inf


def capacity_numeric(spec: RelayChannelSpec, opts: OptimizerOptions | None = None,
                     r0: float | None = None) -> CapacityReport:
    """Numerical capacity with the optimizing quantizer.

    The returned quantizer is always feasible; its value is a lower bound on
    the true maximum.
    """
    opts = opts or OptimizerOptions()
    if r0 is None:
        r0 = relay_link_capacity(spec, opts.r0_tol)
    pzy = noise_observation_joint(spec).table
    py = pzy.sum(axis=0)
    n_obs = spec.n_obs
    n_u = n_obs + 2

    const = QuantizerDesign.build(spec, constant_quantizer(n_obs))
    rows = spec.relay_obs.rows[spec.noise.probs > ZERO]
    if r0 <= 0.0 or np.all(np.abs(rows - rows[0]) <= 1e-15):
        return _report(spec, const, r0, "closed_form", 0, True, shortcut="constant")

    ident = QuantizerDesign.build(spec, compact_quantizer(np.eye(n_obs), py))
    if r0 >= ident.rate:
        # data processing: H(Z|U) >= H(Z|Y1), attained by U = Y1
        return _report(spec, ident, r0, "closed_form", 0, True, shortcut="identity")

    rng = np.random.default_rng(opts.seed)
    sweep = _sweep(pzy, n_u, rng, opts)
    chain = ([_Point(0.0, np.eye(n_obs), ident.rate, ident.distortion, True)] + sweep
             + [_Point(math.inf, constant_quantizer(n_obs), const.rate, const.distortion, True)])
    j = next(i for i, pt in enumerate(chain) if pt.rate <= r0)
    lo, hi = chain[j - 1], chain[j]

    steps = 0
    refined = []
    gap = _duality_gap(lo, hi, r0)
    if 0.0 < lo.beta and math.isfinite(hi.beta):
        while steps < opts.refine_steps and gap > opts.gap_tol and hi.beta / lo.beta - 1.0 > 1e-13:
            mid = math.sqrt(lo.beta * hi.beta)
            pt = _solve_at(pzy, mid, n_u, rng, opts, warm=(lo.q, hi.q))
            refined.append(pt)
            if pt.rate <= r0:
                hi = pt
            else:
                lo = pt
            steps += 1
            gap = _duality_gap(lo, hi, r0)

    best = _select(pzy, py, chain[:-1] + refined + chain[-1:], r0, n_u)
    design = QuantizerDesign.build(spec, _simplify(pzy, py, best.q, r0))
    return _report(spec, design, r0, "alternating", opts.restarts, best.converged,
                   refine_steps=steps, beta=best.beta, bracket=(lo.beta, hi.beta), gap=gap)


# --- brute-force oracle ---------------------------------------------------

GRID_MAX_COMBOS = 50_000_000


def _simplex_grid(k, resolution):
    pts = [c for c in itertools.product(range(resolution + 1), repeat=k - 1) if sum(c) <= resolution]
    arr = np.array([list(c) + [resolution - sum(c)] for c in pts], dtype=float)
    return arr / resolution


def _pareto(rate, dist):
    order = np.lexsort((dist, rate))
    keep = []
    best = np.inf
    for i in order:
        if dist[i] < best - 1e-15:
            keep.append(i)
            best = dist[i]
    return np.array(keep, dtype=int)


def capacity_grid_oracle(spec: RelayChannelSpec, resolution: int, r0: float | None = None,
                         u_size: int | None = None) -> CapacityReport:
    """Exhaustive search over quantizers whose rows lie on a simplex grid.

    Pairs of grid points are also time-shared when the combined output
    alphabet fits the ``|Y1| + 2`` budget.
    """
    n_obs = spec.n_obs
    u_size = n_obs if u_size is None else u_size
    if n_obs > 3 or u_size > 5:
        raise GuardError(f"grid oracle requires |Y1| <= 3 and |U| <= 5 (got |Y1|={n_obs}, |U|={u_size})")
    if resolution < 1:
        raise DomainError(f"resolution={resolution!r} must be >= 1")
    grid = _simplex_grid(u_size, resolution)
    combos = len(grid) ** n_obs
    if combos > GRID_MAX_COMBOS:
        raise GuardError(f"grid oracle would evaluate {combos} quantizers (limit {GRID_MAX_COMBOS})")
    if r0 is None:
        r0 = relay_link_capacity(spec)
    pzy = noise_observation_joint(spec).table
    py = pzy.sum(axis=0)

    rates = np.empty(combos)
    dists = np.empty(combos)
    g = len(grid)
    chunk = g ** (n_obs - 1)
    tail = np.array(list(itertools.product(range(g), repeat=n_obs - 1)), dtype=int).reshape(chunk, n_obs - 1)
    for first in range(g):
        idx = np.hstack([np.full((chunk, 1), first), tail])
        q = grid[idx]
        rates[first * chunk:(first + 1) * chunk], dists[first * chunk:(first + 1) * chunk] = _batch_stats(pzy, py, q)

    def design(i):
        digits = np.unravel_index(i, (g,) * n_obs)
        return grid[list(digits)]

    feasible = np.nonzero(rates <= r0 + 1e-12)[0]
    i_best = feasible[np.argmin(dists[feasible])]
    best_q, best_d = design(i_best), dists[i_best]

    if 2 * u_size <= n_obs + 2:
        front = _pareto(rates, dists)
        left = front[rates[front] <= r0]
        right = front[rates[front] > r0]
        if left.size and right.size:
            rl, dl = rates[left][:, None], dists[left][:, None]
            rr, dr = rates[right][None, :], dists[right][None, :]
            lam = (rr - r0) / (rr - rl)
            val = lam * dl + (1.0 - lam) * dr
            a, b = np.unravel_index(np.argmin(val), val.shape)
            if val[a, b] < best_d - 1e-15:
                best_q = timeshare(design(left[a]), design(right[b]), float(lam[a, b]))
                best_d = float(val[a, b])

    q = compact_quantizer(best_q, py)
    d = QuantizerDesign.build(spec, q)
    if d.rate > r0 + FEAS_TOL:
        # time-sharing round-off pushed the rate over; fall back to the best grid point
        d = QuantizerDesign.build(spec, compact_quantizer(design(i_best), py))
    return _report(spec, d, r0, "grid", 0, True, resolution=resolution, evaluated=combos)


# --- closed forms and bounds ----------------------------------------------

def mgl_conditional_entropy_bound(alpha: float, delta: float) -> float:
    """Lower bound on ``H(Z|U)`` given ``H(Y1|U) >= alpha`` for ``Z = Y1 + Ber(delta)``."""
    return binary_entropy(binary_convolve(binary_entropy_inv(alpha), delta))


def capacity_closed_form_binary_uniform(r0: float, delta: float) -> float:
    """Capacity for ``Z ~ Ber(1/2)`` and ``Y1 = Z + Ber(delta)``."""
    if not (0.0 <= r0 <= 1.0):
        raise DomainError(f"r0={r0!r} is outside [0, 1]")
    return 1.0 - mgl_conditional_entropy_bound(1.0 - r0, delta)


def cutset_bound_binary_uniform(r0: float, delta: float) -> float:
    if r0 < 0:
        raise DomainError(f"r0={r0!r} must be >= 0")
    return min(r0, 1.0 - binary_entropy(delta))


def direct_link_capacity(spec: RelayChannelSpec) -> float:
    return math.log2(spec.m) - entropy(spec.noise)


def _injective_deterministic(w: np.ndarray) -> bool:
    if not np.all((w == 0.0) | (w == 1.0)):
        return False
    return len(set(np.argmax(w, axis=1).tolist())) == w.shape[0]


def no_corruption_capacity(spec: RelayChannelSpec, r0: float | None = None) -> float:
    """``min(I(X;Y) + R0, I(X;Y,Y1))`` under uniform X when Y1 reveals Z exactly."""
    if not _injective_deterministic(spec.relay_obs.rows):
        raise ValidationError("no_corruption_capacity: relay_obs must be a deterministic one-to-one map of Z")
    if r0 is None:
        r0 = relay_link_capacity(spec)
    logm = math.log2(spec.m)
    return min(logm - entropy(spec.noise) + r0, logm)


def ahlswede_han_rate(spec: RelayChannelSpec, q, r0: float | None = None) -> float:
    """``I(X;Y|U)`` under uniform X, treating Y1 as the state and U as its description.

    Also checks that ``I(U;Y1|Y) = I(U;Y1)`` and that the rate equals
    ``log2(m) - H(Z|U)``.
    """
    if not isinstance(q, QuantizerDesign):
        q = QuantizerDesign.build(spec, q)
    if r0 is None:
        r0 = relay_link_capacity(spec)
    if q.rate > r0 + FEAS_TOL:
        raise InfeasibleQuantizerError(f"I(U;Y1)={q.rate:.12g} exceeds R0={r0:.12g}")
    m = spec.m
    pzy = noise_observation_joint(spec).table
    # p(x, z, y1, u) with X uniform
    pz_y1_u = pzy[:, :, None] * q.q.rows[None, :, :]
    full = np.zeros((m, m) + pz_y1_u.shape[1:])  # (x, y, y1, u)
    for x in range(m):
        for z in range(m):
            full[x, (x + z) % m] += pz_y1_u[z] / m

    def h(*axes):
        drop = tuple(a for a in range(4) if a not in axes)
        return float(plogp(full.sum(axis=drop)).sum())

    X, Y, Y1, U = 0, 1, 2, 3
    rate = h(X, U) + h(Y, U) - h(X, Y, U) - h(U)
    i_uy1_given_y = h(U, Y) + h(Y1, Y) - h(U, Y1, Y) - h(Y)
    i_uy1 = h(U) + h(Y1) - h(U, Y1)
    if abs(i_uy1_given_y - i_uy1) > 1e-10:
        raise VerificationError(f"I(U;Y1|Y)={i_uy1_given_y!r} differs from I(U;Y1)={i_uy1!r}")
    expected = math.log2(m) - q.distortion
    if abs(rate - expected) > 1e-10:
        raise VerificationError(f"I(X;Y|U)={rate!r} differs from log2(m) - H(Z|U)={expected!r}")
    return rate
