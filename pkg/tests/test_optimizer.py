import math

import pytest
from hypothesis import given, settings, strategies as st

import oracle
from qkdfk.keyrate import DomainError, SecurityEpsilons, asymptotic_key_bound, finite_key_bound
from qkdfk.optimizer import bound_curve, optimize_epsilons

EQUAL_1E6 = 373754.94426837393  # equal split, n=1e6, E=0.025, A=0.8 (oracle)


def equal_split_bound(n, e, a, f, total):
    return finite_key_bound(n, e, a, f, SecurityEpsilons.equal_split(total)).l_finite


def test_beats_equal_split_reference_case():
    res = optimize_epsilons(10**6, 0.025, 0.8, 1.2, 1e-10)
    assert res.best_bound.l_finite >= EQUAL_1E6
    assert res.best_bound.l_finite > EQUAL_1E6 + 100
    assert res.converged
    assert res.best_eps.total() == pytest.approx(1e-10, rel=1e-12)


def test_optimum_checked_by_oracle_evaluation():
    res = optimize_epsilons(10**6, 0.025, 0.8, 1.2, 1e-10)
    ref = oracle.finite_terms(10**6, 0.025, 0.8, 1.2, *res.best_eps.as_tuple())
    assert res.best_bound.l_finite == pytest.approx(float(ref["l_finite"]), rel=1e-9)


def test_large_n_flat_objective():
    res = optimize_epsilons(10**12, 0.025, 0.8, 1.2, 1e-10)
    base = equal_split_bound(10**12, 0.025, 0.8, 1.2, 1e-10)
    assert res.best_bound.l_finite >= base
    assert res.best_bound.l_finite == pytest.approx(base, rel=1e-3)


def test_plateau_returns_equal_split():
    res = optimize_epsilons(1000, 0.1, 0.8, 1.2, 1e-10)
    assert res.converged
    assert res.best_bound.l_finite == 0.0
    assert res.best_eps == SecurityEpsilons.equal_split(1e-10)


def test_deterministic():
    a = optimize_epsilons(3 * 10**5, 0.03, 0.75, 1.15, 1e-6)
    b = optimize_epsilons(3 * 10**5, 0.03, 0.75, 1.15, 1e-6)
    assert a == b


@pytest.mark.parametrize("kwargs", [dict(eps_total=0.0), dict(eps_total=1.0), dict(eps_total=0.1, tol=0)])
def test_domain(kwargs):
    with pytest.raises(DomainError):
        optimize_epsilons(10**6, 0.02, 0.8, 1.2, **kwargs)


@settings(max_examples=60)
@given(st.integers(10**3, 10**11), st.floats(0, 0.12), st.floats(0.4, 1.0),
       st.floats(1.0, 1.4), st.floats(-14, -0.7))
def test_dominance_and_budget(n, e, a, f, log_eps):
    total = 10.0 ** log_eps
    res = optimize_epsilons(n, e, a, f, total)
    assert res.best_bound.l_finite >= equal_split_bound(n, e, a, f, total)
    assert math.isclose(res.best_eps.total(), total, rel_tol=1e-12)
    assert res.iterations <= 10_000


def test_bound_curve_single_point_consistency():
    (pt,) = bound_curve([10**6], 0.025, 0.8, 1.2, 1e-10)
    res = optimize_epsilons(10**6, 0.025, 0.8, 1.2, 1e-10)
    assert pt.l_finite == res.best_bound.l_finite
    assert pt.l_asymptotic == asymptotic_key_bound(10**6, 0.025, 0.8, 1.2)


def test_bound_curve_marks_invalid_points():
    pts = bound_curve([0, 10**6], 0.025, 0.8, 1.2, 1e-10)
    assert not pts[0].valid and math.isnan(pts[0].l_finite)
    assert pts[1].valid


def test_bound_curve_nondecreasing_and_order():
    ns = [int(x) for x in (4e4, 8e4, 1.6e5, 3.2e5, 6.4e5, 1.28e6, 2.56e6, 4e6)]
    pts = bound_curve(ns, 0.052, 0.8253499554765757, 1.2, 1e-10)
    assert [p.n for p in pts] == ns
    lf = [p.l_finite for p in pts]
    assert all(x <= y for x, y in zip(lf, lf[1:]))
    assert all(p.l_finite <= p.l_asymptotic for p in pts)
