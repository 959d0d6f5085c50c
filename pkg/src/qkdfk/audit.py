"""Classify distilled keys against the finite-key bound.

Session logs and reports are plain UTF-8 CSV. Floats are written with
``repr`` so files round-trip exactly and do not depend on the locale.
"""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .keyrate import (
    ChannelParams,
    DomainError,
    asymptotic_key_bound,
    channel_single_photon_fraction,
)
from .optimizer import optimize_epsilons
from .simulator import SessionRecord

SESSION_LOG_FIELDS = ("session_id", "sifted_bits", "qber", "disclosed_bits",
                      "secret_bits", "loss_db", "mu", "terminated_by")
VERDICT_FIELDS = ("session_id", "n", "secret_bits", "l_finite", "l_asymptotic", "status")
CURVE_FIELDS = ("n", "l_finite", "l_asymptotic")

STATUSES = ("covered", "not_covered", "asymptotic_violation", "aborted")
# statuses for which the finite-key analysis does not vouch for the key
UNCOVERED = ("not_covered", "asymptotic_violation", "aborted")
CURVE_POINTS = 64


class SessionLogError(ValueError):
    """A session log does not match the schema; ``problems`` lists (line, message)."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        msg = "; ".join(f"line {ln}: {m}" for ln, m in problems[:10])
        if len(problems) > 10:
            msg += f"; ... {len(problems) - 10} more"
        super().__init__(msg)


@dataclass(frozen=True)
class Verdict:
    session_id: int
    n: int
    secret_bits: int
    l_finite_bound: float
    l_asymptotic_bound: float
    status: str


@dataclass(frozen=True)
class AuditReport:
    eps_total: float
    verdicts: list[Verdict]
    summary: dict
    curve: list[tuple[int, float, float]]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _parse_int(text: str, name: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"{name} must be an integer, got {text!r}")
    return int(v)


def _parse_row(row: dict) -> SessionRecord:
    disclosed = row["disclosed_bits"].strip()
    return SessionRecord(
        session_id=_parse_int(row["session_id"], "session_id"),
        sifted_bits=_parse_int(row["sifted_bits"], "sifted_bits"),
        qber=float(row["qber"]),
        disclosed_bits=_parse_int(disclosed, "disclosed_bits") if disclosed else None,
        secret_bits=_parse_int(row["secret_bits"], "secret_bits"),
        loss_db=float(row["loss_db"]),
        mu=float(row["mu"]),
        terminated_by=row["terminated_by"].strip(),
    )


def read_session_log(stream: TextIO) -> list[SessionRecord]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames
    if header is None:
        raise SessionLogError([(1, "missing header row")])
    missing = [f for f in SESSION_LOG_FIELDS if f not in header]
    if missing:
        raise SessionLogError([(1, f"missing column(s): {', '.join(missing)}")])

    records, problems = [], []
    for row in reader:
        line = reader.line_num
        if None in row or any(row[f] is None for f in SESSION_LOG_FIELDS):
            problems.append((line, "wrong number of fields"))
            continue
        try:
            rec = _parse_row(row)
            if rec.loss_db < 0 or not rec.mu > 0:
                raise ValueError("loss_db must be >= 0 and mu > 0")
        except ValueError as exc:
            problems.append((line, str(exc)))
            continue
        records.append(rec)
    if problems:
        raise SessionLogError(problems)
    return records


def load_session_log(source) -> list[SessionRecord]:
    """Read a session-log CSV from a path or an open text stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_session_log(fh)
    return read_session_log(source)


def write_session_log(records: Iterable[SessionRecord], target) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SESSION_LOG_FIELDS)
        for r in records:
            w.writerow([_fmt(r.session_id), _fmt(r.sifted_bits), _fmt(r.qber),
                        "" if r.disclosed_bits is None else _fmt(r.disclosed_bits),
                        _fmt(r.secret_bits), _fmt(float(r.loss_db)), _fmt(float(r.mu)),
                        r.terminated_by])

    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(target)


def _record_channel(record: SessionRecord, channel: ChannelParams, per_record_mu: bool) -> ChannelParams:
    mu = record.mu if per_record_mu else channel.mu
    return replace(channel, loss_db=record.loss_db, mu=mu)


def _record_leak(record: SessionRecord, use_measured_leak: bool) -> float | None:
    if use_measured_leak and record.disclosed_bits is not None and record.sifted_bits > 0:
        return record.disclosed_bits / record.sifted_bits
    return None


def classify(secret_bits: int, l_finite: float, l_asymptotic: float, aborted: bool) -> str:
    if secret_bits <= 0:
        return "covered"
    if aborted:
        return "aborted"
    if secret_bits > l_asymptotic:
        return "asymptotic_violation"
    if secret_bits > l_finite:
        return "not_covered"
    return "covered"


def audit_record(record: SessionRecord, eps_total: float, channel: ChannelParams,
                 use_measured_leak: bool = False, per_record_mu: bool = False) -> Verdict:
    """Verdict for one record at the epsilon-optimised finite bound."""
    ch = _record_channel(record, channel, per_record_mu)
    a = channel_single_photon_fraction(ch)
    leak = _record_leak(record, use_measured_leak)
    n = record.sifted_bits
    if n < 1:
        # nothing was sifted, so nothing can be bounded
        return Verdict(record.session_id, n, record.secret_bits, 0.0, 0.0,
                       classify(record.secret_bits, 0.0, 0.0, True))
    res = optimize_epsilons(n, record.qber, a, ch.f_ec, eps_total, leak=leak)
    l_inf = asymptotic_key_bound(n, record.qber, a, ch.f_ec, leak=leak)
    b = res.best_bound
    return Verdict(record.session_id, n, record.secret_bits, b.l_finite, l_inf,
                   classify(record.secret_bits, b.l_finite, l_inf, b.aborted))


def audit_curve(records: Sequence[SessionRecord], eps_total: float, channel: ChannelParams,
                use_measured_leak: bool = False, points: int = CURVE_POINTS) -> list[tuple[int, float, float]]:
    """Bound curves over the records' n range at campaign-average conditions."""
    sized = [r for r in records if r.sifted_bits >= 1]
    if not sized:
        return []
    e_avg = float(np.mean([r.qber for r in sized]))
    loss_avg = float(np.mean([r.loss_db for r in sized]))
    ch = replace(channel, loss_db=loss_avg)
    a = channel_single_photon_fraction(ch)
    leak = None
    if use_measured_leak:
        fracs = [_record_leak(r, True) for r in sized]
        fracs = [f for f in fracs if f is not None]
        if fracs:
            leak = float(np.mean(fracs))
    lo = min(r.sifted_bits for r in sized)
    hi = max(r.sifted_bits for r in sized)
    if lo == hi:
        ns = [lo]
    else:
        ns = [int(round(x)) for x in np.geomspace(lo, hi, points)]
    curve = []
    for n in ns:
        res = optimize_epsilons(n, e_avg, a, ch.f_ec, eps_total, leak=leak)
        l_inf = asymptotic_key_bound(n, e_avg, a, ch.f_ec, leak=leak)
        curve.append((n, res.best_bound.l_finite, l_inf))
    return curve


def summarize(verdicts: Sequence[Verdict]) -> dict:
    counts = Counter(v.status for v in verdicts)
    total = len(verdicts)
    summary = {s: counts.get(s, 0) for s in STATUSES}
    summary["total"] = total
    summary["uncovered"] = sum(summary[s] for s in UNCOVERED)
    summary["fraction_not_covered"] = summary["uncovered"] / total if total else 0.0
    return summary


def audit(records: Sequence[SessionRecord], eps_total: float, channel: ChannelParams,
          use_measured_leak: bool = False, per_record_mu: bool = False,
          curve_points: int = CURVE_POINTS) -> AuditReport:
    """Audit every record and sample the bound curves for plotting.

    Each verdict uses its record's own QBER; the curve uses the campaign
    average, the way the published curves were drawn. ``channel.loss_db`` is
    ignored in favour of each record's loss.
    """
    if not 0 < eps_total < 1:
        raise DomainError(f"eps_total must be in (0, 1), got {eps_total}")
    ordered = sorted(records, key=lambda r: r.session_id)
    verdicts = [audit_record(r, eps_total, channel, use_measured_leak, per_record_mu)
                for r in ordered]
    curve = audit_curve(ordered, eps_total, channel, use_measured_leak, curve_points)
    return AuditReport(eps_total, verdicts, summarize(verdicts), curve)


def format_summary(report: AuditReport) -> str:
    s = report.summary
    lines = [
        f"eps_total: {_fmt(float(report.eps_total))}",
        f"records: {s['total']}",
    ]
    lines += [f"{k}: {s[k]}" for k in STATUSES]
    lines.append(f"uncovered: {s['uncovered']}")
    lines.append(f"fraction_not_covered: {s['fraction_not_covered']:.6f}")
    return "\n".join(lines) + "\n"


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def render_report(report: AuditReport) -> dict[str, str]:
    verdict_rows = [(v.session_id, v.n, v.secret_bits, float(v.l_finite_bound),
                     float(v.l_asymptotic_bound), v.status) for v in report.verdicts]
    curve_rows = [(n, float(lf), float(la)) for n, lf, la in report.curve]
    return {
        "verdicts.csv": _csv_text(VERDICT_FIELDS, verdict_rows),
        "curve.csv": _csv_text(CURVE_FIELDS, curve_rows),
        "summary.txt": format_summary(report),
    }


def write_report(report: AuditReport, out_dir) -> list[Path]:
    """Write verdicts.csv, curve.csv and summary.txt into ``out_dir``."""
    out = Path(out_dir)
    files = render_report(report)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in files.items():
            p = out / name
            with open(p, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
            paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return paths
