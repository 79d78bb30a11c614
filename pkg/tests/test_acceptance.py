"""Acceptance criteria 1 to 10, one test each, with a PASS/FAIL line per criterion."""

import time

import numpy as np
import pytest

from modrelay import cli
from modrelay.capacity import (
    OptimizerOptions,
    ahlswede_han_rate,
    capacity_closed_form_binary_uniform,
    capacity_numeric,
    cutset_bound_binary_uniform,
)
from modrelay.channel import bsc_relay, noise_observation_joint, relay_link_capacity
from modrelay.converse import verify_lemma1
from modrelay.info import binary_convolve, binary_entropy, binary_entropy_inv
from modrelay.qfsim import SimConfig, constant_design, simulate

# frozen 40-digit mpmath reference: cutset - closed form at (R0=0.8, delta=0.1)
GAP_08_01 = 0.07428683548752317

SWEEP_R0 = "0.1:0.9:0.1"
SWEEP_DELTA = "0.05:0.45:0.05"
SIM_ARGS = dict(trials=10_000, seed=0, decoder="ml")


def grid(start, stop, step):
    return [round(start + k * step, 12) for k in range(int(round((stop - start) / step)) + 1)]


@pytest.fixture(scope="module")
def sweep():
    """Optimizer over the criterion-2 grid, computed exactly as the CLI sweep does."""
    t0 = time.perf_counter()
    points = list(cli.sweep_points(cli.parse_grid(SWEEP_R0), cli.parse_grid(SWEEP_DELTA), [0.5], [None],
                                   OptimizerOptions()))
    return points, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sims():
    spec = bsc_relay(0.5, 0.1, 0.0).with_rate(0.5)
    t0 = time.perf_counter()
    rep = capacity_numeric(spec)
    rate = 0.8 * rep.capacity
    runs = {("opt", n): simulate(spec, SimConfig(n, rate, rep.quantizer, **SIM_ARGS)) for n in (8, 12, 16)}
    runs["const", 16] = simulate(spec, SimConfig(16, rate, constant_design(spec), **SIM_ARGS))
    return rate, runs, time.perf_counter() - t0


def test_criterion_01_closed_form_corners(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for r0 in grid(0.0, 1.0, 0.05):
        worst = max(worst, abs(capacity_closed_form_binary_uniform(r0, 0.0) - r0),
                    abs(capacity_closed_form_binary_uniform(r0, 0.5)))
    for delta in grid(0.0, 0.5, 0.05):
        worst = max(worst, abs(capacity_closed_form_binary_uniform(0.0, delta)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    acceptance_log(1, ok, f"max corner error {worst:.2e}, {elapsed:.3f}s")
    assert ok


def test_criterion_02_optimizer_matches_closed_form(acceptance_log, sweep):
    points, elapsed = sweep
    errors = [abs(row[4] - capacity_closed_form_binary_uniform(row[0], row[1])) for _, row in points]
    worst = max(errors)
    ok = len(points) == 81 and worst <= 1e-3 and elapsed < 300
    acceptance_log(2, ok, f"{len(points)} points, max |numeric - closed form| {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_strict_gap_below_cutset(acceptance_log):
    t0 = time.perf_counter()
    delta = 0.1
    gaps = {r0: cutset_bound_binary_uniform(r0, delta) - capacity_closed_form_binary_uniform(r0, delta)
            for r0 in (0.54, 0.6, 0.7, 0.8, 0.9, 1.0)}
    short = {r0: g for r0, g in gaps.items() if not g > 1e-3}
    at_08 = gaps[0.8]
    elapsed = time.perf_counter() - t0
    ok = not short and abs(at_08 - GAP_08_01) <= 2e-3 and elapsed < 1.0
    detail = f"gap(0.8)={at_08:.6f}; "
    detail += "all gaps > 1e-3" if not short else "gap <= 1e-3 at R0=" + ", ".join(
        f"{r0} (gap {g:.3g})" for r0, g in short.items())
    acceptance_log(3, ok, detail)
    assert ok, detail


def test_criterion_04_blahut_arimoto(acceptance_log):
    t0 = time.perf_counter()
    worst = max(abs(relay_link_capacity(bsc_relay(0.5, 0.1, eps)) - (1 - binary_entropy(eps)))
                for eps in grid(0.0, 0.5, 0.05))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 1.0
    acceptance_log(4, ok, f"max error {worst:.2e}, {elapsed:.3f}s")
    assert ok


def test_criterion_05_exhaustive_converse(acceptance_log):
    t0 = time.perf_counter()
    reports = [verify_lemma1(bsc_relay(*args), 2) for args in [(0.5, 0.1, 0.11), (0.5, 0.25, 0.2), (0.3, 0.1, 0.11)]]
    elapsed = time.perf_counter() - t0
    ok = all(r.passed and r.encoder_count == 256 for r in reports) and elapsed < 60
    margins = ", ".join(f"{r.margin:+.2e}" for r in reports)
    acceptance_log(5, ok, f"256 encoders each, margins {margins}, {elapsed:.1f}s")
    assert ok


def test_criterion_06_exact_observation_formula(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for p in (0.11, 0.25):
        for r0 in (0.1, 0.3, 0.6, 1.0):
            c = capacity_numeric(bsc_relay(p, 0.0, 0.0).with_rate(r0)).capacity
            worst = max(worst, abs(c - min(1 - binary_entropy(p) + r0, 1.0)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 60
    acceptance_log(6, ok, f"max error {worst:.2e}, {elapsed:.1f}s")
    assert ok


def _h(arr, axes):
    """Entropy in bits over ``axes``, zero cells skipped."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(arr > 0, -arr * np.log2(np.where(arr > 0, arr, 1.0)), 0.0)
    return terms.sum(axis=axes)


def test_criterion_07_entropy_convolution_bound(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240607)
    violations = 0
    worst = np.inf
    for delta in (0.1, 0.3):
        pzy = noise_observation_joint(bsc_relay(0.5, delta, 0.0).with_rate(1.0)).table
        for n_u in (2, 3, 4):
            count = len(range(n_u - 2, 10_000, 3))
            q = rng.dirichlet(np.ones(n_u) * 0.5, size=(count, 2))
            pzu = np.einsum("zy,kyu->kzu", pzy, q)
            pu = pzu.sum(axis=1)
            h_z_given_u = _h(pzu, (1, 2)) - _h(pu, 1)
            h_y1_given_u = _h(pzy.sum(axis=0)[None, :, None] * q, (1, 2)) - _h(pu, 1)
            for hz, hy in zip(h_z_given_u, np.clip(h_y1_given_u, 0.0, 1.0)):
                slack = hz - binary_entropy(binary_convolve(binary_entropy_inv(hy), delta))
                worst = min(worst, slack)
                violations += slack < -1e-9
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30
    acceptance_log(7, ok, f"2 x 10^4 quantizers, {violations} violations, min slack {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_08_state_description_rate(acceptance_log, sweep):
    points, _ = sweep
    worst_rate = 0.0
    worst_indep = 0.0
    for rep, row in points:
        spec = bsc_relay(0.5, row[1], 0.0).with_rate(row[0])
        worst_rate = max(worst_rate, abs(ahlswede_han_rate(spec, rep.quantizer) - rep.capacity))
        worst_indep = max(worst_indep, _description_dependence(spec, rep.quantizer))
    ok = worst_rate <= 1e-9 and worst_indep <= 1e-10
    acceptance_log(8, ok, f"max rate diff {worst_rate:.2e}, max |I(U;Y1|Y) - I(U;Y1)| {worst_indep:.2e}")
    assert ok


def _description_dependence(spec, design):
    """|I(U;Y1|Y) - I(U;Y1)| under uniform X, from the joint of (Y, Y1, U)."""
    m = spec.m
    pzy = noise_observation_joint(spec).table
    full = np.zeros((m, spec.n_obs, design.n_out))
    for x in range(m):
        for z in range(m):
            full[(x + z) % m] += pzy[z][:, None] * design.q.rows / m

    def h(arr):
        a = arr[arr > 0]
        return float(-(a * np.log2(a)).sum())

    i_cond = h(full.sum(axis=1)) + h(full.sum(axis=2)) - h(full) - h(full.sum(axis=(1, 2)))
    pyu = full.sum(axis=0)
    i_plain = h(pyu.sum(axis=1)) + h(pyu.sum(axis=0)) - h(pyu)
    return abs(i_cond - i_plain)


def test_criterion_09_simulation_trend(acceptance_log, sims):
    rate, runs, elapsed = sims
    opt16, const16 = runs["opt", 16], runs["const", 16]
    helps = opt16.block_error_rate < const16.block_error_rate and opt16.wilson_ci95[1] < const16.wilson_ci95[0]
    trend = []
    for a, b in ((8, 12), (12, 16)):
        ra, rb = runs["opt", a], runs["opt", b]
        overlap = rb.wilson_ci95[0] <= ra.wilson_ci95[1]
        trend.append(rb.block_error_rate <= ra.block_error_rate or overlap)
    ok = helps and all(trend) and elapsed < 600
    errs = ", ".join(f"n={n}: {runs['opt', n].block_error_rate:.4f} "
                     f"[{runs['opt', n].wilson_ci95[0]:.4f}, {runs['opt', n].wilson_ci95[1]:.4f}]" for n in (8, 12, 16))
    detail = (f"rate {rate:.6f}; optimized vs constant U at n=16: {opt16.block_error_rate:.4f} vs "
              f"{const16.block_error_rate:.4f} ({'disjoint' if helps else 'NOT disjoint'}); "
              f"{errs} ({'non-increasing' if all(trend) else 'increasing beyond CI overlap'}); {elapsed:.1f}s")
    acceptance_log(9, ok, detail)
    assert ok, detail


def test_criterion_10_byte_identical_reruns(acceptance_log, sweep, sims, tmp_path):
    points, _ = sweep
    expected = ",".join(cli.SWEEP_COLUMNS) + "\n" + "".join(cli.csv_line(row) for _, row in points)
    path = tmp_path / "sweep.csv"
    code = cli.main(["sweep", "--r0", SWEEP_R0, "--delta", SWEEP_DELTA, "--p", "0.5", "--seed", "0",
                     "--out", str(path)])
    sweep_same = code == 0 and path.read_bytes() == expected.encode()

    rate, runs, _ = sims
    sim_same = True
    for (kind, n), rep in sorted(runs.items()):
        path = tmp_path / f"sim_{kind}_{n}.csv"
        argv = ["simulate", "--p", "0.5", "--delta", "0.1", "--r0", "0.5", "--n", str(n), "--rate", repr(rate),
                "--trials", str(SIM_ARGS["trials"]), "--seed", "0", "--decoder", "ml", "--out", str(path)]
        if kind == "const":
            argv.append("--constant-u")
        want = ",".join(cli.SIM_COLUMNS) + "\n" + cli.csv_line(cli.sim_row(rep))
        sim_same &= cli.main(argv) == 0 and path.read_bytes() == want.encode()
    ok = sweep_same and sim_same
    acceptance_log(10, ok, f"sweep CSV {'identical' if sweep_same else 'DIFFERS'}, "
                           f"simulation CSV {'identical' if sim_same else 'DIFFERS'}")
    assert ok
