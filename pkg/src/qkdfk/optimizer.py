"""Split a total security parameter across the four failure modes.

The bound is smooth and close to separable in log(eps), so a derivative-free
coordinate search over log-weights is enough. Weights are normalised with a
softmax, which keeps every component positive and the budget exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .keyrate import (
    BoundBreakdown,
    DomainError,
    SecurityEpsilons,
    asymptotic_key_bound,
    finite_key_bound,
)

# fixed starting splits: equal, then each component at 97%
_DOMINANT = 0.97
_MINOR = (1.0 - _DOMINANT) / 3.0


def _starts() -> list[tuple[float, float, float, float]]:
    starts = [(0.0, 0.0, 0.0, 0.0)]
    for k in range(4):
        z = [math.log(_MINOR)] * 4
        z[k] = math.log(_DOMINANT)
        starts.append(tuple(zi - z[0] for zi in z))
    return starts


@dataclass(frozen=True)
class CurvePoint:
    n: int
    l_finite: float
    l_asymptotic: float
    valid: bool = True
    error: str = ""


@dataclass(frozen=True)
class OptimizationResult:
    best_eps: SecurityEpsilons
    best_bound: BoundBreakdown
    iterations: int
    converged: bool


def _split(eps_total: float, z) -> SecurityEpsilons:
    m = max(z)
    w = [math.exp(zi - m) for zi in z]
    s = math.fsum(w)
    return SecurityEpsilons(*(eps_total * wi / s for wi in w))


def optimize_epsilons(n: int, e_obs: float, a_fraction: float, f_ec: float,
                      eps_total: float, tol: float = 1e-9,
                      leak: float | None = None, strict: bool = False,
                      max_evals: int = 10_000, initial_step: float = 2.0,
                      min_step: float = 1e-4) -> OptimizationResult:
    """Maximise the finite-key bound over splits of ``eps_total``.

    Coordinate descent in log-weight space (first weight pinned to zero),
    multi-started from the equal split and four 97%-dominant splits. A
    coordinate that improves keeps moving in the same direction; the step is
    halved after any pass whose relative improvement is below ``tol``.
    """
    if not 0 < eps_total < 1:
        raise DomainError(f"eps_total must be in (0, 1), got {eps_total}")
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")

    baseline_eps = SecurityEpsilons.equal_split(eps_total)
    baseline = finite_key_bound(n, e_obs, a_fraction, f_ec, baseline_eps,
                                leak=leak, strict=strict)
    evals = 1

    def evaluate(z):
        nonlocal evals
        evals += 1
        try:
            eps = _split(eps_total, z)
        except DomainError:
            # a weight underflowed to zero
            return -math.inf, None, None
        b = finite_key_bound(n, e_obs, a_fraction, f_ec, eps, leak=leak, strict=strict)
        return b.rhs, b, eps

    budget = max(1, (max_evals - 1) // len(_starts()))
    best = (baseline.rhs, baseline, baseline_eps)
    all_converged = True

    for k, z0 in enumerate(_starts()):
        z = list(z0)
        val, b, eps = (baseline.rhs, baseline, baseline_eps) if k == 0 else evaluate(z)
        used, step, converged = 0, initial_step, False
        while used < budget:
            before = val
            for i in (1, 2, 3):
                for direction in (1.0, -1.0):
                    moved = False
                    while used < budget:
                        trial = list(z)
                        trial[i] += direction * step
                        used += 1
                        tval, tb, teps = evaluate(trial)
                        if tval > val:
                            z, val, b, eps, moved = trial, tval, tb, teps, True
                        else:
                            break
                    if moved:
                        break
            improved = val > before and (
                before == -math.inf or val - before > tol * max(abs(before), 1.0))
            if not improved:
                if step <= min_step:
                    converged = True
                    break
                step *= 0.5
        all_converged = all_converged and converged
        if b is not None and val > best[0]:
            best = (val, b, eps)

    _, best_b, best_eps = best
    if best_b.l_finite <= 0.0:
        # zero everywhere we looked: any split is equally unusable
        return OptimizationResult(baseline_eps, baseline, evals, True)
    return OptimizationResult(best_eps, best_b, evals, all_converged)


def bound_curve(n_values, e_obs: float, a_fraction: float, f_ec: float,
                eps_total: float, leak: float | None = None) -> list[CurvePoint]:
    """Optimised finite bound and asymptotic bound at each n, in input order.

    Points whose inputs are out of domain come back with ``valid=False``
    and NaN bounds instead of aborting the sweep.
    """
    if len(n_values) == 0:
        raise DomainError("n_values must be nonempty")
    out = []
    for n in n_values:
        try:
            res = optimize_epsilons(n, e_obs, a_fraction, f_ec, eps_total, leak=leak)
            l_inf = asymptotic_key_bound(n, e_obs, a_fraction, f_ec, leak=leak)
        except DomainError as exc:
            out.append(CurvePoint(n, math.nan, math.nan, valid=False, error=str(exc)))
            continue
        out.append(CurvePoint(n, res.best_bound.l_finite, l_inf))
    return out
