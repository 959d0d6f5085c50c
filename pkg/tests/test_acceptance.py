"""Exit criteria for the build, one test per criterion.

Each test appends a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import random
import time

import numpy as np

import oracle
from conftest import ACCEPTANCE_LINES
from qkdfk.audit import audit, load_session_log, write_session_log
from qkdfk.keyrate import (
    ChannelParams,
    SecurityEpsilons,
    binary_entropy,
    channel_single_photon_fraction,
    corrected_error_rate,
    finite_key_bound,
)
from qkdfk.optimizer import bound_curve, optimize_epsilons
from qkdfk.simulator import AttackSchedule, SystemConfig, parse_taus, run_campaign, run_session

FIG2B = ChannelParams(loss_db=3.0, mu=0.2, eta_det=0.08, p_dark=2e-5, f_ec=1.2)
E_FIG2B = 0.052
TAUS = parse_taus("10:280:10")
CAMPAIGN_SEED = 2014


def verdict(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_c1_formula_oracle_equivalence():
    t0 = time.perf_counter()
    eps = SecurityEpsilons.equal_split(1e-10)
    b = finite_key_bound(10**6, 0.025, 0.8, 1.2, eps)
    ref = oracle.finite_terms(10**6, 0.025, 0.8, 1.2, *eps.as_tuple())
    worst = max(abs(getattr(b, k) - float(ref[k])) / abs(float(ref[k]))
                for k in ("e_tilde", "term_entropy", "term_leak", "term_smoothing",
                          "term_pa", "term_ec", "l_finite"))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 1.0 and abs(b.l_finite - 3.737e5) < 100
    verdict("C1 formula oracle", ok,
            f"max rel err {worst:.2e} (<1e-9), l_finite={b.l_finite:.1f}, {elapsed:.3f}s")


def test_c2_convergence():
    t0 = time.perf_counter()
    a = channel_single_photon_fraction(FIG2B)
    big = optimize_epsilons(10**9, E_FIG2B, a, FIG2B.f_ec, 1e-10).best_bound
    ratio = big.l_finite / big.l_asymptotic
    small = optimize_epsilons(40_000, E_FIG2B, a, FIG2B.f_ec, 1e-10).best_bound
    gap = 1.0 - small.l_finite / small.l_asymptotic
    elapsed = time.perf_counter() - t0
    ok = ratio >= 0.99 and gap > 0.25
    verdict("C2 convergence", ok,
            f"A={a:.5f}, ratio at 1e9 = {ratio:.6f} (>=0.99), gap at 4e4 = {gap:.3f} (>0.25), {elapsed:.2f}s")


def test_c3_curve_ordering():
    a = channel_single_photon_fraction(FIG2B)
    ns = [int(round(x)) for x in np.geomspace(4e4, 4e6, 64)]
    loose = bound_curve(ns, E_FIG2B, a, FIG2B.f_ec, 1e-1)
    tight = bound_curve(ns, E_FIG2B, a, FIG2B.f_ec, 1e-10)
    bad = [n for n, lo, ti in zip(ns, loose, tight)
           if not (lo.l_asymptotic >= lo.l_finite >= ti.l_finite)]
    verdict("C3 curve ordering", not bad,
            f"64 points, asymptotic >= eps=1e-1 >= eps=1e-10 violated at {len(bad)} points")


def test_c4_attack_reproduction():
    t0 = time.perf_counter()
    cfg = SystemConfig(FIG2B, error_rate=E_FIG2B, firmware="legacy")
    records = run_campaign(cfg, TAUS, CAMPAIGN_SEED)
    tight = audit(records, 1e-10, FIG2B).summary
    loose = audit(records, 1e-1, FIG2B).summary
    again = run_campaign(cfg, TAUS, CAMPAIGN_SEED)
    elapsed = time.perf_counter() - t0
    ok = (tight["not_covered"] >= 1 and loose["not_covered"] >= 1
          and again == records and elapsed < 10)
    verdict("C4 attack reproduction", ok,
            f"{len(records)} records; not_covered at 1e-10: {tight['not_covered']}, "
            f"at 1e-1: {loose['not_covered']}; deterministic={again == records}; {elapsed:.2f}s")


def test_c5_patch_reproduction():
    t0 = time.perf_counter()
    fig3 = ChannelParams(loss_db=3.0)
    cfg = SystemConfig(fig3, error_rate=0.01, firmware="patched")
    records = run_campaign(cfg, TAUS, CAMPAIGN_SEED)
    s = audit(records, 1e-10, fig3).summary
    elapsed = time.perf_counter() - t0
    floor_ok = all(r.sifted_bits >= 2_000_000 for r in records)
    ok = bool(records) and floor_ok and s["uncovered"] == 0 and elapsed < 10
    verdict("C5 patch reproduction", ok,
            f"{len(records)} records, min sifted {min(r.sifted_bits for r in records)}, "
            f"not_covered {s['not_covered']}, uncovered {s['uncovered']}, {elapsed:.2f}s")


def test_c6a_optimizer_dominance():
    t0 = time.perf_counter()
    rng = random.Random(6)
    losses = 0
    for _ in range(200):
        n = int(10 ** rng.uniform(3, 11))
        e = rng.uniform(0.0, 0.12)
        a = rng.uniform(0.4, 1.0)
        f = rng.uniform(1.0, 1.4)
        total = 10 ** rng.uniform(-14, -0.7)
        opt = optimize_epsilons(n, e, a, f, total).best_bound.l_finite
        base = finite_key_bound(n, e, a, f, SecurityEpsilons.equal_split(total)).l_finite
        losses += opt < base
    elapsed = time.perf_counter() - t0
    verdict("C6a optimizer dominance", losses == 0 and elapsed < 30,
            f"200 random sets, {losses} below equal split, {elapsed:.2f}s")


def test_c6b_documented_margin():
    # n=1e5, E=0.05, A=0.7, eps=1e-10: the oracle finds no split with a positive bound
    res = optimize_epsilons(10**5, 0.05, 0.7, 1.2, 1e-10)
    base = finite_key_bound(10**5, 0.05, 0.7, 1.2, SecurityEpsilons.equal_split(1e-10)).l_finite
    margin = res.best_bound.l_finite - base
    verdict("C6b documented small-n margin", margin > 0,
            f"optimized {res.best_bound.l_finite:.1f} vs equal split {base:.1f}, margin {margin:.1f} (>0 required)")


def test_c7_invariant_suite(tmp_path):
    failures = []
    rng = random.Random(7)

    xs = [rng.random() for _ in range(1000)]
    if any(abs(binary_entropy(x) - binary_entropy(1 - x)) > 1e-12
           or abs(binary_entropy(x) - float(oracle.h(x))) >= 1e-12 for x in xs):
        failures.append("entropy symmetry/oracle")
    if binary_entropy(0.0) != 0.0 or binary_entropy(1.0) != 0.0:
        failures.append("entropy limits")

    if not all(corrected_error_rate(0.03, n, 1e-10) > 0.03 for n in (1, 10**3, 10**9)):
        failures.append("E~ > E")
    if corrected_error_rate(0.03, 10**15, 1e-10) - 0.03 > 1e-6:
        failures.append("E~ limit")

    eps = SecurityEpsilons.equal_split(1e-10)
    for _ in range(300):
        n = int(10 ** rng.uniform(0, 12))
        e, a, f = rng.uniform(0, 0.3), rng.uniform(0, 1), rng.uniform(1, 1.5)
        b = finite_key_bound(n, e, a, f, eps)
        if not 0 <= b.l_finite <= b.l_asymptotic:
            failures.append(f"clamp/order at {(n, e, a, f)}")
            break

    n, a, f = 10**6, 0.8, 1.2
    lf = [finite_key_bound(n, e, a, f, eps).l_finite for e in np.linspace(0, 0.06, 13)]
    if any(y > x for x, y in zip(lf, lf[1:])):
        failures.append("monotone in E")
    lf = [finite_key_bound(n, 0.03, a, f, eps).l_finite for a in np.linspace(0.5, 1, 11)]
    if any(y < x for x, y in zip(lf, lf[1:])):
        failures.append("monotone in A")
    lf = [finite_key_bound(int(n), 0.03, 0.8, f, eps).l_finite for n in np.geomspace(1e3, 1e10, 15)]
    if any(y < x for x, y in zip(lf, lf[1:])):
        failures.append("monotone in n")
    for k in range(4):
        small = list(eps.as_tuple())
        small[k] /= 100
        if finite_key_bound(n, 0.03, a, f, SecurityEpsilons(*small)).l_finite > finite_key_bound(n, 0.03, a, f, eps).l_finite:
            failures.append(f"epsilon monotone ({k})")

    legacy = SystemConfig(ChannelParams(3.0), error_rate=0.05)
    for seed in range(20):
        recs = run_campaign(legacy, TAUS, seed)
        if any(r.sifted_bits < 40_000 for r in recs):
            failures.append("legacy 80 kbit floor")
            break
    patched = SystemConfig(ChannelParams(4.0), error_rate=0.05, firmware="patched")
    for seed in range(5):
        if any(r.sifted_bits < 2_000_000 for r in run_campaign(patched, TAUS, seed)):
            failures.append("patched 2 Mbit floor")
            break

    if run_session(legacy, AttackSchedule(50), 3) != run_session(legacy, AttackSchedule(50), 3):
        failures.append("seed determinism")

    recs = run_campaign(legacy, TAUS, 1)
    path = tmp_path / "log.csv"
    write_session_log(recs, path)
    if load_session_log(path) != recs:
        failures.append("CSV round trip")

    verdict("C7 invariant suite", not failures,
            "all invariants hold" if not failures else "failed: " + ", ".join(failures))
