"""Finite-key and asymptotic secret-key bounds for a non-decoy BB84 system.

All lengths are in bits, probabilities in [0, 1], losses in dB. Every
function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

LN2 = math.log(2.0)


class DomainError(ValueError):
    """An input lies outside the domain of a formula."""


def _log2(x: float) -> float:
    return math.log(x) / LN2


@dataclass(frozen=True)
class ChannelParams:
    """Channel and detector constants for one loss setting.

    ``p_dark`` is a per-gate probability for each of Bob's two detectors.
    With ``trusted_detector`` the detector efficiency is treated as outside
    Eve's control, so multi-photon pulses reach the detector with the same
    efficiency as single photons.
    """

    loss_db: float
    mu: float = 0.2
    eta_det: float = 0.08
    p_dark: float = 2e-5
    f_ec: float = 1.2
    trusted_detector: bool = True

    def __post_init__(self):
        if not self.loss_db >= 0:
            raise DomainError(f"loss_db must be >= 0, got {self.loss_db}")
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        if not 0 < self.eta_det <= 1:
            raise DomainError(f"eta_det must be in (0, 1], got {self.eta_det}")
        if not 0 <= self.p_dark < 1:
            raise DomainError(f"p_dark must be in [0, 1), got {self.p_dark}")
        if not self.f_ec >= 1:
            raise DomainError(f"f_ec must be >= 1, got {self.f_ec}")

    @property
    def transmittance(self) -> float:
        """Channel transmittance times detector efficiency."""
        return 10.0 ** (-self.loss_db / 10.0) * self.eta_det


@dataclass(frozen=True)
class SecurityEpsilons:
    """Failure-probability budget: parameter estimation, smoothing, PA, EC."""

    eps_pe: float
    eps_smooth: float
    eps_pa: float
    eps_ec: float

    def __post_init__(self):
        for name in ("eps_pe", "eps_smooth", "eps_pa", "eps_ec"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise DomainError(f"{name} must be in (0, 1), got {v}")
        if not self.total() < 1:
            raise DomainError(f"total epsilon must be < 1, got {self.total()}")

    def total(self) -> float:
        return self.eps_pe + self.eps_smooth + self.eps_pa + self.eps_ec

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.eps_pe, self.eps_smooth, self.eps_pa, self.eps_ec)

    @classmethod
    def equal_split(cls, eps_total: float) -> "SecurityEpsilons":
        if not 0 < eps_total < 1:
            raise DomainError(f"eps_total must be in (0, 1), got {eps_total}")
        q = eps_total * 0.25
        return cls(q, q, q, q)


@dataclass(frozen=True)
class BoundBreakdown:
    n_sifted: int
    a_fraction: float
    e_observed: float
    e_tilde: float
    term_entropy: float
    term_leak: float
    term_smoothing: float
    term_pa: float
    term_ec: float
    l_finite: float
    l_asymptotic: float
    aborted: bool
    rhs: float = field(default=0.0, compare=False)  # unclamped right-hand side

    def as_dict(self) -> dict:
        return {
            "n_sifted": self.n_sifted,
            "a_fraction": self.a_fraction,
            "e_observed": self.e_observed,
            "e_tilde": self.e_tilde,
            "term_entropy": self.term_entropy,
            "term_leak": self.term_leak,
            "term_smoothing": self.term_smoothing,
            "term_pa": self.term_pa,
            "term_ec": self.term_ec,
            "l_finite": self.l_finite,
            "l_asymptotic": self.l_asymptotic,
            "aborted": self.aborted,
        }


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log(x) + (1.0 - x) * math.log1p(-x)) / LN2


def multi_photon_prob(mu: float) -> float:
    """Poisson probability that a pulse carries two or more photons."""
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    # -expm1(-mu) keeps precision for small mu
    return max(0.0, -math.expm1(-mu) - mu * math.exp(-mu))


def detection_prob(params: ChannelParams) -> float:
    """Probability that Bob registers at least one click in a gate."""
    no_signal = math.exp(-params.mu * params.transmittance)
    no_dark = (1.0 - params.p_dark) ** 2
    return min(1.0, max(0.0, 1.0 - no_signal * no_dark))


def single_photon_fraction(p_det: float, p_multi: float) -> float:
    """Worst-case fraction of detections that came from single-photon pulses."""
    if not 0 < p_det <= 1:
        raise DomainError(f"p_det must be in (0, 1], got {p_det}")
    if not 0 <= p_multi <= 1:
        raise DomainError(f"p_multi must be in [0, 1], got {p_multi}")
    return min(1.0, max(0.0, (p_det - p_multi) / p_det))


def channel_single_photon_fraction(params: ChannelParams) -> float:
    """Single-photon fraction A for a channel setting.

    With a trusted detector only the multi-photon pulses that the detector
    would have registered count against Bob's detections.
    """
    p_det = detection_prob(params)
    p_multi = multi_photon_prob(params.mu)
    if params.trusted_detector:
        p_multi *= params.eta_det
    return single_photon_fraction(p_det, p_multi)


def corrected_error_rate(e_obs: float, n: int, eps_pe: float) -> float:
    """Observed error rate widened by the parameter-estimation deviation."""
    if not 0 <= e_obs < 0.5:
        raise DomainError(f"qber must satisfy 0 <= E < 0.5, got {e_obs}")
    if not n >= 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0 < eps_pe < 1:
        raise DomainError(f"eps_pe must be in (0, 1), got {eps_pe}")
    dev = math.sqrt((2.0 * math.log(1.0 / eps_pe) + 2.0 * math.log1p(n)) / n)
    return e_obs + 0.5 * dev


def leak_ec_fraction(e_obs: float, f_ec: float) -> float:
    """Error-correction disclosure per sifted bit, f_EC * h(E)."""
    if not 0 <= e_obs <= 0.5:
        raise DomainError(f"qber must satisfy 0 <= E <= 0.5, got {e_obs}")
    if not f_ec >= 1:
        raise DomainError(f"f_ec must be >= 1, got {f_ec}")
    return f_ec * binary_entropy(e_obs)


def _check_bound_inputs(n, e_obs, a_fraction, f_ec, leak):
    if not n >= 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0 <= e_obs < 0.5:
        raise DomainError(f"qber must satisfy 0 <= E < 0.5, got {e_obs}")
    if not 0 <= a_fraction <= 1:
        raise DomainError(f"A must be in [0, 1], got {a_fraction}")
    if not f_ec >= 1:
        raise DomainError(f"f_ec must be >= 1, got {f_ec}")
    if leak is not None and not 0 <= leak:
        raise DomainError(f"measured leak fraction must be >= 0, got {leak}")


def _entropy_per_bit(e: float, a: float) -> float | None:
    """A(1 - h(e/A)), or None where the bound is vacuous."""
    if a <= 0 or e / a >= 0.5:
        return None
    return a * (1.0 - binary_entropy(e / a))


def asymptotic_key_bound(n: int, e_obs: float, a_fraction: float, f_ec: float,
                         leak: float | None = None) -> float:
    """Infinite-key bound n[A(1 - h(E/A)) - leak_EC], clamped at zero.

    ``leak`` overrides the modelled f_EC h(E) with a measured disclosure
    fraction.
    """
    _check_bound_inputs(n, e_obs, a_fraction, f_ec, leak)
    per_bit = _entropy_per_bit(e_obs, a_fraction)
    if per_bit is None:
        return 0.0
    if leak is None:
        leak = leak_ec_fraction(e_obs, f_ec)
    return max(0.0, n * (per_bit - leak))


def finite_key_bound(n: int, e_obs: float, a_fraction: float, f_ec: float,
                     eps: SecurityEpsilons, leak: float | None = None,
                     strict: bool = False) -> BoundBreakdown:
    """Evaluate the finite-key bound term by term.

    The default form subtracts n*leak_EC and log2(2/eps_EC). ``strict``
    substitutes the error-correction leakage constants of the intermediate
    leakage bound instead: n*A*leak_EC and log2(8/eps_EC).
    """
    _check_bound_inputs(n, e_obs, a_fraction, f_ec, leak)
    leak_frac = leak_ec_fraction(e_obs, f_ec) if leak is None else leak
    e_tilde = corrected_error_rate(e_obs, n, eps.eps_pe)
    l_asym = asymptotic_key_bound(n, e_obs, a_fraction, f_ec, leak=leak)

    term_leak = n * leak_frac * (a_fraction if strict else 1.0)
    term_smoothing = 7.0 * n * math.sqrt(_log2(2.0 / eps.eps_smooth) / n)
    term_pa = 2.0 * _log2(1.0 / eps.eps_pa)
    term_ec = _log2((8.0 if strict else 2.0) / eps.eps_ec)

    per_bit = _entropy_per_bit(e_tilde, a_fraction)
    if per_bit is None:
        return BoundBreakdown(
            n_sifted=n, a_fraction=a_fraction, e_observed=e_obs, e_tilde=e_tilde,
            term_entropy=0.0, term_leak=term_leak, term_smoothing=term_smoothing,
            term_pa=term_pa, term_ec=term_ec, l_finite=0.0, l_asymptotic=l_asym,
            aborted=True, rhs=-math.inf,
        )
    term_entropy = n * per_bit
    rhs = term_entropy - term_leak - term_smoothing - term_pa - term_ec
    return BoundBreakdown(
        n_sifted=n, a_fraction=a_fraction, e_observed=e_obs, e_tilde=e_tilde,
        term_entropy=term_entropy, term_leak=term_leak,
        term_smoothing=term_smoothing, term_pa=term_pa, term_ec=term_ec,
        l_finite=max(0.0, rhs), l_asymptotic=l_asym, aborted=False, rhs=rhs,
    )
