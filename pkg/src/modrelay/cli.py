"""Command-line front end.

CSV goes to stdout (or ``--out``); the human-readable summary goes to
stderr. Exit codes: 0 success, 1 input error, 2 optimizer did not converge,
3 an invariant was violated.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from contextlib import contextmanager

from . import capacity as cap
from .channel import bsc_relay, load_spec, relay_link_capacity
from .converse import verify_lemma1
from .errors import ModRelayError, VerificationError
from .qfsim import SimConfig, constant_design, simulate

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_VIOLATION = 0, 1, 2, 3

SWEEP_COLUMNS = ["r0", "delta", "p", "epsilon", "capacity_numeric", "capacity_closed_form",
                 "cutset_bound", "direct_link", "gap"]
SIM_COLUMNS = ["n", "rate", "trials", "seed", "decoder", "block_error", "ci_low", "ci_high",
               "e_quant_fail", "e_decode"]


class InputError(Exception):
    pass


class InvariantViolation(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def parse_grid(text: str) -> list:
    """``"0.1:0.9:0.1"`` -> ``[0.1, 0.2, ..., 0.9]``; a bare number is a one-point grid."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise InputError(f"bad grid {text!r}: expected NUMBER or START:STOP:STEP") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise InputError(f"bad grid {text!r}: expected NUMBER or START:STOP:STEP")
    start, stop, step = nums
    if step <= 0 or start > stop:
        raise InputError(f"bad grid {text!r}: need step > 0 and start <= stop")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _say(msg):
    print(msg, file=sys.stderr)


def _spec_from_args(args, need_dmc=False):
    if args.spec is not None:
        if any(v is not None for v in (args.p, args.delta, args.epsilon, args.r0)):
            raise InputError("--spec cannot be combined with --p/--delta/--epsilon/--r0")
        spec = load_spec(args.spec)
        return spec, None
    if args.p is None or args.delta is None:
        raise InputError("give --spec, or --p and --delta with one of --epsilon/--r0")
    if (args.epsilon is None) == (args.r0 is None):
        raise InputError("give exactly one of --epsilon and --r0")
    if args.r0 is not None:
        if need_dmc:
            raise InputError("this command needs the link channel: use --epsilon or a dmc spec")
        return bsc_relay(args.p, args.delta, 0.0).with_rate(args.r0), args.epsilon
    return bsc_relay(args.p, args.delta, args.epsilon), args.epsilon


def _opts(args):
    return cap.OptimizerOptions(seed=args.seed, restarts=args.restarts, r0_tol=args.tol)


def cmd_capacity(args) -> int:
    spec, _ = _spec_from_args(args)
    if args.method == "grid":
        rep = cap.capacity_grid_oracle(spec, args.resolution, r0=relay_link_capacity(spec, args.tol))
    else:
        rep = cap.capacity_numeric(spec, _opts(args))
    q = rep.quantizer
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(["capacity", "r0", "rate", "distortion", "constraint_slack", "method",
                    "restarts_used", "converged"])
        w.writerow([fmt(rep.capacity), fmt(rep.r0_used), fmt(q.rate), fmt(q.distortion),
                    fmt(rep.constraint_slack), rep.method, rep.restarts_used, fmt(rep.converged)])
    _say(f"capacity {rep.capacity:.12g} bits/use at R0={rep.r0_used:.12g} "
         f"({rep.method}, |U|={q.n_out}, slack {rep.constraint_slack:.3g})")
    if not rep.converged:
        _say("warning: optimizer did not converge; value is a best-effort lower bound")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def sweep_points(r0_grid, delta_grid, p_grid, eps_grid, opts, tol=1e-10):
    """Yield ``(report, row)`` per grid point in lexicographic order of the columns.

    Exactly one of ``r0_grid`` and ``eps_grid`` carries values; the other is ``[None]``.
    Raises ``InvariantViolation`` if a point breaks the sandwich bound.
    """
    for r0 in r0_grid:
        for delta in delta_grid:
            for p in p_grid:
                for eps in eps_grid:
                    if r0 is not None:
                        spec = bsc_relay(p, delta, 0.0).with_rate(r0)
                    else:
                        spec = bsc_relay(p, delta, eps)
                    rate = relay_link_capacity(spec, tol)
                    numeric = cap.capacity_numeric(spec, opts, r0=rate)
                    direct = cap.direct_link_capacity(spec)
                    closed = cutset = gap = None
                    if p == 0.5:
                        # rates beyond H(Y1) = 1 buy nothing more
                        closed = cap.capacity_closed_form_binary_uniform(min(rate, 1.0), delta)
                        cutset = cap.cutset_bound_binary_uniform(rate, delta)
                        gap = cutset - numeric.capacity
                        upper = cutset
                    else:
                        upper = min(direct + rate, 1.0)
                    if not (direct - 1e-6 <= numeric.capacity <= upper + 1e-6):
                        raise InvariantViolation(
                            f"sandwich violated at r0={rate:.12g}, delta={delta}, p={p}: "
                            f"{direct:.12g} <= {numeric.capacity:.12g} <= {upper:.12g} fails")
                    yield numeric, [rate, delta, p, eps, numeric.capacity, closed, cutset, direct, gap]


def _sweep_rows(args):
    """Validate the grids eagerly, then return a lazy row generator."""
    if (args.r0 is None) == (args.epsilon is None):
        raise InputError("sweep needs exactly one of --r0 and --epsilon grids")
    r0_grid = parse_grid(args.r0) if args.r0 is not None else [None]
    eps_grid = parse_grid(args.epsilon) if args.epsilon is not None else [None]
    grids = (r0_grid, parse_grid(args.delta), parse_grid(args.p), eps_grid)
    for r0, delta, p, eps in itertools.product(*grids):
        # construct once so domain errors surface before any output
        if r0 is None:
            bsc_relay(p, delta, eps)
        else:
            bsc_relay(p, delta, 0.0).with_rate(r0)
    return ((rep.converged, row) for rep, row in sweep_points(*grids, _opts(args), args.tol))


def csv_line(row) -> str:
    return ",".join(fmt(v) for v in row) + "\n"


def sim_row(report) -> list:
    cfg = report.config
    lo, hi = report.wilson_ci95
    return [cfg.n, cfg.rate, report.trials_run, cfg.seed, cfg.decoder, report.block_error_rate, lo, hi,
            report.event_counts["quantize_failure"], report.event_counts["decode_error"]]


def cmd_sweep(args) -> int:
    rows = _sweep_rows(args)
    all_converged = True
    n = 0
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for converged, row in rows:
            all_converged &= converged
            w.writerow([fmt(v) for v in row])
            n += 1
    _say(f"sweep: {n} grid points")
    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


def cmd_verify_converse(args) -> int:
    spec, _ = _spec_from_args(args, need_dmc=True)
    rep = verify_lemma1(spec, args.n, _opts(args), resolution=args.resolution)
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(["n", "encoder_count", "min_conditional_entropy", "bound", "margin", "pass", "conservative"])
        w.writerow([rep.n, rep.encoder_count, fmt(rep.min_conditional_entropy), fmt(rep.bound),
                    fmt(rep.margin), fmt(rep.passed), fmt(rep.conservative)])
    _say(f"converse n={rep.n}: min H(Z^n|S^n)={rep.min_conditional_entropy:.12g} over "
         f"{rep.encoder_count} encoders, bound {rep.bound:.12g} -> {'pass' if rep.passed else 'VIOLATION'}")
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_simulate(args) -> int:
    spec, _ = _spec_from_args(args)
    if args.constant_u:
        design, converged = constant_design(spec), True
    else:
        rep = cap.capacity_numeric(spec, _opts(args))
        design, converged = rep.quantizer, rep.converged
    configs = [SimConfig(n=args.n, rate=rate, quantizer=design, trials=args.trials, seed=args.seed,
                         decoder=args.decoder, u_rate_margin=args.margin, typ_tol=args.typ_tol,
                         check_pipe=not args.no_pipe_check)
               for rate in parse_grid(args.rate)]
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(SIM_COLUMNS)
        for cfg in configs:
            r = simulate(spec, cfg)
            lo, hi = r.wilson_ci95
            w.writerow([fmt(v) for v in sim_row(r)])
            _say(f"n={cfg.n} rate={cfg.rate:.6g}: block error {r.block_error_rate:.4f} "
                 f"[{lo:.4f}, {hi:.4f}] over {r.trials_run} trials")
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_r0(args) -> int:
    spec, _ = _spec_from_args(args) if (args.spec or args.p is not None) else (None, None)
    if spec is None:
        if args.epsilon is None:
            raise InputError("r0 needs --epsilon or --spec")
        spec = bsc_relay(0.5, 0.0, args.epsilon)
    print(fmt(relay_link_capacity(spec, args.tol)))
    return EXIT_OK


def _common(p, binary=True):
    p.add_argument("--spec", help="JSON channel spec file")
    if binary:
        p.add_argument("--p", type=float, help="Z ~ Ber(p)")
        p.add_argument("--delta", type=float, help="Y1 = Z + Ber(delta)")
        p.add_argument("--epsilon", type=float, help="relay link BSC(epsilon)")
        p.add_argument("--r0", type=float, help="relay link given by its capacity in bits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10, help="Blahut-Arimoto gap tolerance")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--resolution", type=int, default=128, help="grid oracle resolution")
    p.add_argument("--out", help="write CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modrelay", description="Modulo-sum relay channel capacity tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="capacity and optimizing quantizer")
    _common(p)
    p.add_argument("--method", choices=["alternating", "grid"], default="alternating")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sweep", help="capacity vs. closed form and cut-set bound over a grid")
    p.add_argument("--r0", help="grid START:STOP:STEP or a value")
    p.add_argument("--epsilon", help="grid START:STOP:STEP or a value")
    p.add_argument("--delta", required=True, help="grid START:STOP:STEP or a value")
    p.add_argument("--p", default="0.5", help="grid START:STOP:STEP or a value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-converse", help="exhaustive check of the converse inequality")
    _common(p)
    p.add_argument("--n", type=int, default=2)
    p.set_defaults(func=cmd_verify_converse)

    p = sub.add_parser("simulate", help="Monte Carlo quantize-and-forward")
    _common(p)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--rate", required=True, help="rate in bits/use, or a grid START:STOP:STEP")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--decoder", choices=["ml", "typ"], default="ml")
    p.add_argument("--margin", type=float, default=0.1, help="U codebook rate margin in bits")
    p.add_argument("--typ-tol", type=float, default=None, help="typicality slack (default 0.05 + 1/sqrt(n))")
    p.add_argument("--constant-u", action="store_true", help="relay sends nothing useful")
    p.add_argument("--no-pipe-check", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("r0", help="relay link capacity")
    _common(p)
    p.set_defaults(func=cmd_r0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if getattr(args, "trials", 1) < 1 or getattr(args, "n", 1) < 1:
        _say("error: --n and --trials must be >= 1")
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InvariantViolation, VerificationError) as exc:
        _say(f"invariant violated: {exc}")
        return EXIT_VIOLATION
    except (InputError, ModRelayError, ValueError, OSError) as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
