"""qkdfk command line: bound, curve, simulate, audit.

Exit codes: 0 success, 2 invalid arguments or domain error, 3 unreadable
session log. Audit findings never change the exit code.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys

import numpy as np

from .audit import SessionLogError, audit, format_summary, load_session_log, write_report, write_session_log
from .keyrate import (
    ChannelParams,
    DomainError,
    SecurityEpsilons,
    asymptotic_key_bound,
    channel_single_photon_fraction,
    finite_key_bound,
)
from .optimizer import optimize_epsilons
from .simulator import AttackSchedule, ConfigError, Subtraction, SystemConfig, parse_taus, run_campaign

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_SCHEMA = 3
SEED_ENV = "QKDFK_SEED"


class UsageError(Exception):
    pass


def _count(text: str) -> int:
    """Bit counts may be written as 1e6."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(v) or not v.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer count, got {text!r}")
    return int(v)


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_channel_flags(p, loss_required=True):
    if loss_required:
        p.add_argument("--loss", type=float, required=True, help="line loss in dB")
    p.add_argument("--mu", type=float, default=0.2, help="mean photon number (default 0.2)")
    p.add_argument("--eta-det", type=float, default=0.08, help="detector efficiency")
    p.add_argument("--p-dark", type=float, default=2e-5, help="dark-count probability per gate")
    p.add_argument("--f-ec", type=float, default=1.2, help="error-correction efficiency")
    p.add_argument("--untrusted-detector", action="store_true",
                   help="count all multi-photon pulses against detections")


def _channel(args, loss=None) -> ChannelParams:
    return ChannelParams(
        loss_db=args.loss if loss is None else loss, mu=args.mu, eta_det=args.eta_det,
        p_dark=args.p_dark, f_ec=args.f_ec, trusted_detector=not args.untrusted_detector,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkdfk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate the finite and asymptotic bounds")
    p.add_argument("--n", type=_count, required=True, help="sifted-key length in bits")
    p.add_argument("--error", type=float, required=True, help="observed QBER")
    p.add_argument("--a", type=float, help="single-photon fraction A")
    p.add_argument("--mu", type=float, help="mean photon number (with --loss)")
    p.add_argument("--loss", type=float, help="line loss in dB (derive A from the channel)")
    p.add_argument("--eta-det", type=float, default=0.08)
    p.add_argument("--p-dark", type=float, default=2e-5)
    p.add_argument("--untrusted-detector", action="store_true")
    p.add_argument("--f-ec", type=float, default=1.2)
    p.add_argument("--epsilon", type=float, required=True, help="total security parameter")
    p.add_argument("--leak", type=float, help="measured disclosure per sifted bit")
    p.add_argument("--optimize", action="store_true", help="optimise the epsilon split")
    p.add_argument("--strict-eq4", action="store_true",
                   help="use the intermediate leakage-bound constants (A*leak, log2(8/eps_EC))")

    p = sub.add_parser("curve", help="write bound curves as long-format CSV")
    _add_channel_flags(p)
    p.add_argument("--error", type=float, required=True)
    p.add_argument("--eps-list", type=_float_list, required=True)
    p.add_argument("--n-min", type=_count, required=True)
    p.add_argument("--n-max", type=_count, required=True)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="run a seeded attack campaign")
    _add_channel_flags(p)
    p.add_argument("--error", type=float, required=True, help="true channel QBER")
    p.add_argument("--firmware", choices=("legacy", "patched"), default="legacy")
    p.add_argument("--taus", required=True,
                   help="interruption times: a:b:step and/or comma list, 'none' for no attack")
    p.add_argument("--attack-loss", type=float, default=40.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--drift-rate", type=float, default=0.0, help="natural drift events per second")
    p.add_argument("--subtraction", type=_float_list,
                   help="legacy subtraction as fraction,offset_bits")
    p.add_argument("--out", required=True)

    p = sub.add_parser("audit", help="classify a session log against the bounds")
    p.add_argument("--log", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    _add_channel_flags(p, loss_required=False)
    p.add_argument("--measured-leak", action="store_true",
                   help="use disclosed_bits/n instead of f_EC*h(E)")
    p.add_argument("--per-record-mu", action="store_true")
    p.add_argument("--out-dir", required=True)
    return parser


def cmd_bound(args, out) -> int:
    by_channel = args.loss is not None or args.mu is not None
    if (args.a is None) == (not by_channel):
        raise UsageError("give either --a or --loss with --mu")
    if args.a is None:
        if args.loss is None or args.mu is None:
            raise UsageError("--loss and --mu are both required to derive A")
        ch = ChannelParams(args.loss, args.mu, args.eta_det, args.p_dark, args.f_ec,
                           trusted_detector=not args.untrusted_detector)
        a = channel_single_photon_fraction(ch)
    else:
        a = args.a
    if not 0 < args.epsilon < 1:
        raise DomainError(f"epsilon must be in (0, 1), got {args.epsilon}")
    if args.optimize:
        res = optimize_epsilons(args.n, args.error, a, args.f_ec, args.epsilon,
                                leak=args.leak, strict=args.strict_eq4)
        b, eps = res.best_bound, res.best_eps
    else:
        eps = SecurityEpsilons.equal_split(args.epsilon)
        b = finite_key_bound(args.n, args.error, a, args.f_ec, eps,
                             leak=args.leak, strict=args.strict_eq4)
    fields = b.as_dict()
    fields.update(eps_pe=eps.eps_pe, eps_smooth=eps.eps_smooth, eps_pa=eps.eps_pa, eps_ec=eps.eps_ec)
    for k, v in fields.items():
        out.write(f"{k}: {v!r}\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields.keys())
    w.writerow([repr(v) if isinstance(v, float) else v for v in fields.values()])
    out.write(buf.getvalue())
    return EXIT_OK


def cmd_curve(args, out) -> int:
    if not 1 <= args.n_min <= args.n_max:
        raise UsageError("need 1 <= --n-min <= --n-max")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if not args.eps_list or any(not 0 < e < 1 for e in args.eps_list):
        raise UsageError("--eps-list entries must be in (0, 1)")
    if not 0 <= args.error < 0.5:
        raise DomainError(f"--error must satisfy 0 <= E < 0.5, got {args.error}")
    ch = _channel(args)
    a = channel_single_photon_fraction(ch)
    if args.points == 1:
        ns = [args.n_min]
    else:
        ns = sorted(set(int(round(x)) for x in np.geomspace(args.n_min, args.n_max, args.points)))
    rows = []
    for eps in args.eps_list:
        for n in ns:
            res = optimize_epsilons(n, args.error, a, ch.f_ec, eps)
            rows.append((repr(float(eps)), n, repr(float(res.best_bound.l_finite))))
    for n in ns:
        rows.append(("asymptotic", n, repr(float(asymptotic_key_bound(n, args.error, a, ch.f_ec)))))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("eps", "n", "l"))
        w.writerows(rows)
    out.write(f"wrote {len(rows)} rows to {args.out}\n")
    return EXIT_OK


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")
    return 0


def cmd_simulate(args, out) -> int:
    taus = parse_taus(args.taus)
    kwargs = {}
    if args.subtraction is not None:
        if len(args.subtraction) != 2:
            raise UsageError("--subtraction takes fraction,offset_bits")
        kwargs["legacy_subtraction"] = Subtraction(*args.subtraction)
    config = SystemConfig(channel=_channel(args), error_rate=args.error,
                          firmware=args.firmware, drift_rate_hz=args.drift_rate, **kwargs)
    attacks = [AttackSchedule(t, args.attack_loss) for t in taus]
    records = run_campaign(config, attacks, _seed(args))
    write_session_log(records, args.out)
    out.write(f"wrote {len(records)} records to {args.out}\n")
    return EXIT_OK


def cmd_audit(args, out) -> int:
    if not 0 < args.epsilon < 1:
        raise DomainError(f"epsilon must be in (0, 1), got {args.epsilon}")
    channel = _channel(args, loss=0.0)
    try:
        records = load_session_log(args.log)
    except OSError as exc:
        raise SessionLogError([(0, f"cannot read {args.log}: {exc}")])
    report = audit(records, args.epsilon, channel, use_measured_leak=args.measured_leak,
                   per_record_mu=args.per_record_mu)
    write_report(report, args.out_dir)
    out.write(format_summary(report))
    return EXIT_OK


COMMANDS = {"bound": cmd_bound, "curve": cmd_curve, "simulate": cmd_simulate, "audit": cmd_audit}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except SessionLogError as exc:
        print(f"qkdfk {args.command}: invalid session log: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DomainError, ConfigError, UsageError, ValueError) as exc:
        print(f"qkdfk {args.command}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
