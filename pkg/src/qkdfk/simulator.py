"""Raw-key exchange and distillation lifecycle of the plug-and-play system.

The model is deliberately coarse: raw bits accrue in one-second ticks with
multiplicative jitter, an eavesdropper can collapse the detection rate at a
chosen time, and the firmware decides when the buffered key is distilled.
Nothing below the level of bit counts is simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .keyrate import (
    ChannelParams,
    asymptotic_key_bound,
    binary_entropy,
    channel_single_photon_fraction,
)

REFERENCE_LOSS_DB = 2.0
DEFAULT_PULSE_RATE = 4.0e6 / 280.0  # raw bits/s at the reference loss
DEFAULT_BUFFER_MAP = ((2.0, 4.0e6), (3.0, 2.6e6), (4.0, 1.6e6))

QBER_JITTER = 0.005
F_EC_RANGE = (1.1, 1.3)
RATE_JITTER = 0.10

TERMINATIONS = ("eve_attack", "natural_drift", "buffer_full")
FIRMWARES = ("legacy", "patched")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Subtraction:
    """Key removed after the asymptotic formula: a fraction, then a fixed offset."""

    fraction: float = 0.05
    offset_bits: float = 1000.0

    def __post_init__(self):
        if not 0 <= self.fraction < 1:
            raise ConfigError(f"subtraction fraction must be in [0, 1), got {self.fraction}")
        if not self.offset_bits >= 0:
            raise ConfigError(f"subtraction offset must be >= 0, got {self.offset_bits}")

    def apply(self, bits: float) -> int:
        return max(0, math.floor(bits * (1.0 - self.fraction) - self.offset_bits))


def interpolate_buffer_limit(loss_db: float, table=DEFAULT_BUFFER_MAP) -> float:
    """Piecewise-linear buffer cap for a loss setting, clamped outside the table."""
    xs = [x for x, _ in table]
    ys = [y for _, y in table]
    return float(np.interp(loss_db, xs, ys))


@dataclass(frozen=True)
class SystemConfig:
    """Everything that fixes the behaviour of the simulated system.

    ``error_rate`` is the true QBER of the channel; each distillation draws
    its reported QBER within +-0.5% of it. ``buffer_limit_bits`` of None
    means the default loss-dependent map. ``patched_subtraction`` is the
    post-patch key subtraction, which the vendor does not document either.
    """

    channel: ChannelParams
    error_rate: float = 0.025
    pulse_rate: float = DEFAULT_PULSE_RATE
    raw_min_bits: int = 80_000
    buffer_limit_bits: float | None = None
    detection_threshold: float = 0.5
    firmware: str = "legacy"
    patched_sifted_threshold_bits: int = 2_000_000
    legacy_subtraction: Subtraction = field(default_factory=Subtraction)
    patched_subtraction: Subtraction = field(default_factory=lambda: Subtraction(0.12, 1000.0))
    drift_rate_hz: float = 0.0

    def __post_init__(self):
        if not self.pulse_rate > 0:
            raise ConfigError(f"pulse_rate must be > 0, got {self.pulse_rate}")
        if not 0 < self.detection_threshold < 1:
            raise ConfigError("detection_threshold must be in (0, 1)")
        if self.firmware not in FIRMWARES:
            raise ConfigError(f"firmware must be one of {FIRMWARES}, got {self.firmware!r}")
        if not 0 <= self.error_rate < 0.5:
            raise ConfigError(f"error_rate must be in [0, 0.5), got {self.error_rate}")
        if not self.raw_min_bits < self.buffer_limit:
            raise ConfigError("raw_min_bits must be below the buffer limit")
        if not self.patched_sifted_threshold_bits > 0:
            raise ConfigError("patched_sifted_threshold_bits must be > 0")
        if not self.drift_rate_hz >= 0:
            raise ConfigError("drift_rate_hz must be >= 0")

    @property
    def buffer_limit(self) -> float:
        if self.buffer_limit_bits is not None:
            return float(self.buffer_limit_bits)
        return interpolate_buffer_limit(self.channel.loss_db)

    @property
    def raw_rate(self) -> float:
        """Expected raw bits per second at the configured loss."""
        return self.pulse_rate * 10.0 ** (-(self.channel.loss_db - REFERENCE_LOSS_DB) / 10.0)


@dataclass(frozen=True)
class AttackSchedule:
    tau_s: float | None = None
    attack_loss_db: float = 40.0

    def check(self, channel: ChannelParams):
        if self.tau_s is not None and not self.tau_s > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau_s}")
        if not self.attack_loss_db > channel.loss_db:
            raise ConfigError("attack loss must exceed the channel loss")


@dataclass(frozen=True)
class SessionRecord:
    session_id: int
    sifted_bits: int
    qber: float
    disclosed_bits: int | None
    secret_bits: int
    loss_db: float
    mu: float
    terminated_by: str

    def __post_init__(self):
        if self.sifted_bits < 0 or self.secret_bits < 0:
            raise ValueError("key lengths must be nonnegative")
        if self.disclosed_bits is not None and self.disclosed_bits < 0:
            raise ValueError("disclosed_bits must be nonnegative")
        if not 0 <= self.qber < 0.5:
            raise ValueError(f"qber must be in [0, 0.5), got {self.qber}")
        if self.terminated_by not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.terminated_by!r}")


@dataclass(frozen=True)
class NoDistillation:
    """A session that ended before the firmware agreed to distill."""

    raw_bits: int
    terminated_by: str
    elapsed_s: float


@dataclass(frozen=True)
class _Exchange:
    raw_bits: int
    terminated_by: str
    elapsed_s: float


def _exchange(config: SystemConfig, attack: AttackSchedule, rng: np.random.Generator) -> _Exchange:
    cap = config.buffer_limit
    rate = config.raw_rate
    drift_at = math.inf
    if config.drift_rate_hz > 0:
        drift_at = rng.exponential(1.0 / config.drift_rate_hz)
    tau = math.inf if attack.tau_s is None else attack.tau_s
    # relative detection rate once Eve raises the attenuation
    attacked = 10.0 ** (-(attack.attack_loss_db - config.channel.loss_db) / 10.0)

    raw, t = 0.0, 0.0
    while True:
        stop = min(drift_at, tau if attacked < config.detection_threshold else math.inf)
        dt = min(1.0, stop - t)
        if dt <= 0:
            reason = "natural_drift" if t >= drift_at else "eve_attack"
            return _Exchange(int(raw), reason, t)
        scale = attacked if t >= tau else 1.0
        gained = rate * scale * dt * rng.uniform(1.0 - RATE_JITTER, 1.0 + RATE_JITTER)
        if raw + gained >= cap:
            t += dt * (cap - raw) / gained
            return _Exchange(int(cap), "buffer_full", t)
        raw += gained
        t += dt


def _distill(config: SystemConfig, session_id: int, sifted: int, terminated_by: str,
             subtraction: Subtraction, a_fraction: float,
             rng: np.random.Generator) -> SessionRecord:
    lo = max(0.0, config.error_rate - QBER_JITTER)
    hi = min(0.5, config.error_rate + QBER_JITTER)
    qber = float(rng.uniform(lo, hi))
    qber = min(qber, math.nextafter(0.5, 0.0))
    f_ec = float(rng.uniform(*F_EC_RANGE))
    disclosed = min(sifted, round(f_ec * binary_entropy(qber) * sifted))
    secret = subtraction.apply(asymptotic_key_bound(sifted, qber, a_fraction, f_ec))
    return SessionRecord(
        session_id=session_id,
        sifted_bits=sifted,
        qber=qber,
        disclosed_bits=disclosed,
        secret_bits=min(secret, sifted),
        loss_db=config.channel.loss_db,
        mu=config.channel.mu,
        terminated_by=terminated_by,
    )


def _session_rngs(seed, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(c) for c in children]


def run_session(config: SystemConfig, attack: AttackSchedule, seed,
                session_id: int = 0) -> SessionRecord | NoDistillation:
    """Simulate one raw-key exchange and, if the firmware allows, its distillation.

    Under patched firmware a lone session distills only if it alone reaches
    the sifted threshold; use :func:`run_campaign` for accumulation.
    """
    attack.check(config.channel)
    rng = np.random.default_rng(seed)
    ex = _exchange(config, attack, rng)
    sifted = ex.raw_bits // 2
    if config.firmware == "legacy":
        if ex.raw_bits < config.raw_min_bits:
            return NoDistillation(ex.raw_bits, ex.terminated_by, ex.elapsed_s)
        subtraction = config.legacy_subtraction
    else:
        if sifted < config.patched_sifted_threshold_bits:
            return NoDistillation(ex.raw_bits, ex.terminated_by, ex.elapsed_s)
        subtraction = config.patched_subtraction
    a = channel_single_photon_fraction(config.channel)
    return _distill(config, session_id, sifted, ex.terminated_by, subtraction, a, rng)


def _as_attack(tau) -> AttackSchedule:
    if isinstance(tau, AttackSchedule):
        return tau
    return AttackSchedule(tau_s=None if tau is None else float(tau))


def run_campaign(config: SystemConfig, taus: Sequence, seed) -> list[SessionRecord]:
    """One session per entry of ``taus`` (None means no attack).

    Sessions get independent child seeds of ``seed``. Legacy firmware emits
    a record for every session that reaches the raw minimum. Patched firmware
    keeps the sifted key of every session and emits a record, tagged with the
    session that crossed the threshold, each time the pool reaches it.
    """
    if len(taus) == 0:
        raise ConfigError("taus must be nonempty")
    attacks = [_as_attack(t) for t in taus]
    for a in attacks:
        a.check(config.channel)
    rngs = _session_rngs(seed, len(attacks))

    if config.firmware == "legacy":
        records = []
        for i, (attack, rng) in enumerate(zip(attacks, rngs), start=1):
            out = run_session(config, attack, rng, session_id=i)
            if isinstance(out, SessionRecord):
                records.append(out)
        return records

    a_fraction = channel_single_photon_fraction(config.channel)
    records, pool = [], 0
    for i, (attack, rng) in enumerate(zip(attacks, rngs), start=1):
        ex = _exchange(config, attack, rng)
        pool += ex.raw_bits // 2
        if pool >= config.patched_sifted_threshold_bits:
            records.append(_distill(config, i, pool, ex.terminated_by,
                                    config.patched_subtraction, a_fraction, rng))
            pool = 0
    return records


def parse_taus(spec: str) -> list[float | None]:
    """Parse ``a:b:step`` (inclusive) or a comma list; ``none`` means no attack."""
    out: list[float | None] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if part.lower() in ("none", "-"):
            out.append(None)
        elif ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise ConfigError(f"range must be a:b:step, got {part!r}")
            a, b, step = (float(x) for x in bits)
            if step <= 0 or b < a:
                raise ConfigError(f"bad range {part!r}")
            k = int(math.floor((b - a) / step + 1e-9))
            out.extend(a + i * step for i in range(k + 1))
        else:
            out.append(float(part))
    if not out:
        raise ConfigError("no taus given")
    return out

