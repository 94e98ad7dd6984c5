"""Adversary advantage model for QKD-keyed symmetric modes.

A QKD link hands the encryptor keys that are only statistically close to
uniform: the distribution's min-entropy floor s_min says no single key value
has probability above 1/s_min.  Against a computationally unbounded guessing
adversary that term contributes q_blocks / s_min; the mode itself adds the
usual birthday terms over the cipher's block domain of size N = 2**lambda.

Per-mode advantage after Q files of l blocks each:

    CTR       Q*l/s_min  +  2*Q^2*l   / N
    CBC       Q*l/s_min  +  2*Q^2*l^2 / N
    ECBC-MAC  2*Q*l/s_min + (Q^2*l^2 + Q^2 + 2) / D

ECBC's denominator D is configurable: the collision analysis gives D = 2N,
while D = N reproduces a common more conservative printed form; both are kept
selectable so planned figures can be matched either way.

Everything is an exact Fraction.  Values are clamped into [0, 1] with a
``saturated`` flag rather than silently returned above 1, since an advantage
above 1 only means the bound became vacuous.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .exactmath import (
    DEFAULT_PRECISION,
    FixedDecimal,
    as_natural,
    log2_rational,
)

__all__ = [
    "Mode",
    "EcbcDenominator",
    "SecurityParams",
    "AdvantageValue",
    "UnboundedSecurityError",
    "guessing_from_distinguishing",
    "rho_approx",
    "bound_at",
    "advantage_bound",
    "security_level_bits",
]


class Mode(enum.Enum):
    CTR = "ctr"
    CBC = "cbc"
    ECBC_MAC = "ecbc-mac"


class EcbcDenominator(enum.Enum):
    """Block-domain denominator used by the ECBC-MAC collision terms."""

    TWO_N = "two-n"
    PAPER_COMPAT_N = "paper-compat-n"


class UnboundedSecurityError(ValueError):
    """A zero advantage has no finite bit level."""


@dataclass(frozen=True)
class SecurityParams:
    """Static parameters of one planning problem.

    lambda_bits     cipher block / security parameter; N = 2**lambda_bits
    s_min           min-entropy floor magnitude (typically a power of two)
    blocks_per_file l, cipher blocks in one fixed-size file
    eps_max         advantage ceiling the plan must respect
    ecbc_denominator  which D the ECBC-MAC terms divide by
    """

    lambda_bits: int
    s_min: int
    blocks_per_file: int
    eps_max: Fraction
    ecbc_denominator: EcbcDenominator = EcbcDenominator.TWO_N

    def __post_init__(self) -> None:
        if self.lambda_bits < 1:
            raise ValueError("lambda_bits must be >= 1")
        if as_natural(self.s_min) < 2:
            raise ValueError("s_min must be >= 2")
        if as_natural(self.blocks_per_file) < 1:
            raise ValueError("blocks_per_file must be >= 1")
        eps = Fraction(self.eps_max)
        if not 0 < eps < 1:
            raise ValueError("eps_max must lie in (0, 1)")
        object.__setattr__(self, "eps_max", eps)
        if not isinstance(self.ecbc_denominator, EcbcDenominator):
            raise TypeError("ecbc_denominator must be an EcbcDenominator")

    @classmethod
    def from_bits(
        cls,
        lambda_bits: int,
        s_min_bits: int,
        blocks_per_file: int,
        target_bits: int | None = None,
        eps_max: Fraction | None = None,
        ecbc_denominator: EcbcDenominator = EcbcDenominator.TWO_N,
    ) -> "SecurityParams":
        """Power-of-two convenience: s_min = 2**s_min_bits, eps = 2**-target_bits."""
        if (target_bits is None) == (eps_max is None):
            raise ValueError("give exactly one of target_bits / eps_max")
        if eps_max is None:
            if target_bits < 1:
                raise ValueError("target_bits must be >= 1")
            eps_max = Fraction(1, 1 << target_bits)
        return cls(lambda_bits, 1 << s_min_bits, blocks_per_file, eps_max, ecbc_denominator)

    @property
    def domain_size(self) -> int:
        return 1 << self.lambda_bits

    @property
    def s_min_bits(self) -> int | None:
        """Exact log2 of s_min, or None when s_min is not a power of two."""
        b = self.s_min.bit_length() - 1
        return b if self.s_min == 1 << b else None

    @property
    def ecbc_domain(self) -> int:
        if self.ecbc_denominator is EcbcDenominator.TWO_N:
            return 2 * self.domain_size
        return self.domain_size


@dataclass(frozen=True)
class AdvantageValue:
    """Advantage in [0, 1]; saturated means the raw bound exceeded 1."""

    value: Fraction
    saturated: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.value <= 1:
            raise ValueError("advantage must lie in [0, 1]")

    @classmethod
    def clamped(cls, raw: Fraction) -> "AdvantageValue":
        if raw > 1:
            return cls(Fraction(1), saturated=True)
        return cls(raw)


def guessing_from_distinguishing(adv: Fraction) -> AdvantageValue:
    """Key-guessing success from distinguishing advantage: half of it."""
    adv = Fraction(adv)
    if not 0 <= adv <= 1:
        raise ValueError("advantage must lie in [0, 1]")
    return AdvantageValue(adv / 2)


def rho_approx(params: SecurityParams, q_blocks: int) -> AdvantageValue:
    """Min-entropy leakage term after q_blocks cipher invocations."""
    return AdvantageValue.clamped(Fraction(as_natural(q_blocks), params.s_min))


def bound_at(mode: Mode, params: SecurityParams, q_files: Fraction) -> Fraction:
    """Raw (unclamped) advantage bound at a possibly fractional file count.

    The rational q_files form exists so callers can evaluate at Q/k exactly
    when comparing rotated against unrotated schedules.
    """
    q = Fraction(q_files)
    if q < 0:
        raise ValueError("q_files must be >= 0")
    n = params.domain_size
    s = params.s_min
    l = params.blocks_per_file
    if mode is Mode.CTR:
        return q * l / s + 2 * q * q * l / n
    if mode is Mode.CBC:
        return q * l / s + 2 * q * q * l * l / n
    if mode is Mode.ECBC_MAC:
        d = params.ecbc_domain
        return 2 * q * l / s + (q * q * (l * l + 1) + 2) / d
    raise TypeError(f"unknown mode: {mode!r}")


def advantage_bound(mode: Mode, params: SecurityParams, q_files: int) -> AdvantageValue:
    """Advantage bound after q_files whole files, clamped into [0, 1]."""
    return AdvantageValue.clamped(bound_at(mode, params, Fraction(as_natural(q_files))))


def security_level_bits(
    eps: AdvantageValue | Fraction,
    precision_digits: int = DEFAULT_PRECISION,
) -> FixedDecimal:
    """-log2 of an advantage, as a fixed-point decimal bit count."""
    value = eps.value if isinstance(eps, AdvantageValue) else Fraction(eps)
    if value == 0:
        raise UnboundedSecurityError("zero advantage has unbounded security level")
    return -log2_rational(value, precision_digits)
