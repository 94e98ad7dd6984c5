"""Rotation planning: how many files one key may encrypt, and what splitting
the schedule across k keys buys.

``compute_q_star`` reduces each mode's advantage bound to a quadratic
constraint a*Q^2 + b*Q <= eps and maximizes exactly.  ``improvement_bits``
quantifies the security gained by encrypting Q*/k files under each of k keys
instead of Q* under one, two independent ways:

  closed form   log2(k) + log2(1 + X), with X the mode-specific correction
  direct        level(Q*/k) - level(Q*), evaluated straight off the bounds

Both reduce to log2 of the same exact rational, so they agree to roundoff;
computing them separately keeps either formula honest about the other.  The
gain always lies strictly between log2(k) and 2*log2(k) for k >= 2: rotation
at least halves the effective exposure per key but cannot beat the square-law
limit of the birthday terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .advmodel import Mode, SecurityParams, bound_at
from .exactmath import (
    DEFAULT_PRECISION,
    FixedDecimal,
    as_natural,
    log2_rational,
    max_q_quadratic,
)

__all__ = [
    "InfeasibleTargetError",
    "RotationPlan",
    "ImprovementReport",
    "BenefitReport",
    "SweepRow",
    "blocks_per_file",
    "data_volume_bytes",
    "volume_kb",
    "volume_mb",
    "compute_q_star",
    "improvement_bits",
    "benefit",
    "sweep_k",
]

_IMPROVEMENT_PRECISION = 12  # internal; reports round no further than this


class InfeasibleTargetError(ValueError):
    """The advantage ceiling cannot be met by even a single file."""


@dataclass(frozen=True)
class RotationPlan:
    """Result of maximizing the per-key file budget for one mode."""

    mode: Mode
    params: SecurityParams
    q_star: int
    eps_at_q_star: Fraction
    worst_case_bits: FixedDecimal
    file_size_bytes: int
    max_data_volume_bytes: int


@dataclass(frozen=True)
class ImprovementReport:
    """Security gained by a k-way key rotation of a fixed Q* schedule."""

    k: int
    delta_bits: FixedDecimal
    lower_bound_bits: FixedDecimal  # log2(k)
    upper_bound_bits: FixedDecimal  # 2*log2(k)
    closed_form_bits: FixedDecimal
    direct_difference_bits: FixedDecimal


@dataclass(frozen=True)
class BenefitReport:
    k: int
    key_cost: Fraction
    benefit: FixedDecimal


@dataclass(frozen=True)
class SweepRow:
    k: int
    delta_bits: FixedDecimal
    lower_bound_bits: FixedDecimal
    upper_bound_bits: FixedDecimal
    benefit: FixedDecimal


def blocks_per_file(file_size_bytes: int, block_bits: int) -> int:
    """Cipher blocks needed for one file, final partial block counted whole."""
    if as_natural(file_size_bytes) == 0:
        raise ValueError("file_size_bytes must be >= 1")
    if block_bits < 8 or block_bits % 8:
        raise ValueError("block_bits must be a positive multiple of 8")
    return (file_size_bytes * 8 + block_bits - 1) // block_bits


def data_volume_bytes(q_star: int, file_size_bytes: int) -> int:
    return as_natural(q_star) * as_natural(file_size_bytes)


def volume_kb(size_bytes: int) -> Fraction:
    return Fraction(as_natural(size_bytes), 1024)


def volume_mb(size_bytes: int) -> Fraction:
    return Fraction(as_natural(size_bytes), 1024 * 1024)


def _quadratic_coefficients(
    mode: Mode, params: SecurityParams
) -> tuple[Fraction, Fraction, Fraction]:
    """Coefficients (a, b, c) of a*Q^2 + b*Q <= c equivalent to the mode bound."""
    n = params.domain_size
    s = params.s_min
    l = params.blocks_per_file
    eps = params.eps_max
    if mode is Mode.CTR:
        return Fraction(2 * l, n), Fraction(l, s), eps
    if mode is Mode.CBC:
        return Fraction(2 * l * l, n), Fraction(l, s), eps
    if mode is Mode.ECBC_MAC:
        d = params.ecbc_domain
        c = eps - Fraction(2, d)
        if c < 0:
            raise InfeasibleTargetError(
                "advantage ceiling is below the ECBC-MAC constant floor 2/D"
            )
        return Fraction(l * l + 1, d), Fraction(2 * l, s), c
    raise TypeError(f"unknown mode: {mode!r}")


def compute_q_star(
    mode: Mode,
    params: SecurityParams,
    file_size_bytes: int | None = None,
    block_bits: int | None = None,
) -> RotationPlan:
    """Maximize files per key subject to the mode's advantage ceiling.

    file_size_bytes, when given, must chunk (at block_bits, default the
    security parameter) into exactly params.blocks_per_file blocks; when
    omitted the per-file size is derived from the block count.  Raises
    InfeasibleTargetError when not even one file fits under the ceiling.
    """
    if block_bits is None:
        block_bits = params.lambda_bits
    if file_size_bytes is None:
        file_size_bytes = (params.blocks_per_file * block_bits + 7) // 8
    else:
        implied = -(-as_natural(file_size_bytes) * 8 // block_bits)
        if implied != params.blocks_per_file:
            raise ValueError(
                f"file of {file_size_bytes} bytes is {implied} blocks of "
                f"{block_bits} bits, but params.blocks_per_file is "
                f"{params.blocks_per_file}"
            )

    a, b, c = _quadratic_coefficients(mode, params)
    q_star = max_q_quadratic(a, b, c)
    if q_star == 0:
        raise InfeasibleTargetError(
            "advantage ceiling rules out encrypting even one file"
        )
    eps_at = bound_at(mode, params, Fraction(q_star))
    return RotationPlan(
        mode=mode,
        params=params,
        q_star=q_star,
        eps_at_q_star=eps_at,
        worst_case_bits=-log2_rational(eps_at, DEFAULT_PRECISION),
        file_size_bytes=file_size_bytes,
        max_data_volume_bytes=data_volume_bytes(q_star, file_size_bytes),
    )


def _closed_form_ratio(mode: Mode, params: SecurityParams, q_star: int, k: int) -> Fraction:
    """1 + X: the residual factor the closed-form gain multiplies onto k."""
    n = params.domain_size
    s = params.s_min
    l = params.blocks_per_file
    q = Fraction(q_star)
    if mode is Mode.CTR:
        x = Fraction(2 * (k - 1)) * q * s / (k * n + 2 * q * s)
    elif mode is Mode.CBC:
        x = Fraction(2 * (k - 1)) * q * l * s / (k * n + 2 * q * l * s)
    elif mode is Mode.ECBC_MAC:
        d = params.ecbc_domain
        num = q * q * (l * l + 1) * (1 - Fraction(1, k)) + 2 * (1 - k)
        den = 2 * d * q * l / s + q * q * (l * l + 1) / k + 2 * k
        x = num / den
    else:
        raise TypeError(f"unknown mode: {mode!r}")
    return 1 + x


def improvement_bits(
    mode: Mode,
    params: SecurityParams,
    q_star: int,
    k: int,
    precision_digits: int = _IMPROVEMENT_PRECISION,
) -> ImprovementReport:
    """Security-level gain of a k-way rotation, with its strict bracket.

    Requires 1 <= k <= q_star so each key still encrypts at least one file.
    k=1 is the degenerate no-rotation case and reports all zeros.
    """
    if as_natural(k) < 1:
        raise ValueError("k must be >= 1")
    if k > as_natural(q_star):
        raise ValueError(f"k={k} exceeds q_star={q_star}; keys would sit idle")

    zero = FixedDecimal(0, precision_digits)
    if k == 1:
        return ImprovementReport(1, zero, zero, zero, zero, zero)

    ratio = _closed_form_ratio(mode, params, q_star, k)
    # Strict bracket, checked exactly before any rounding: the full-schedule
    # to split-schedule bound ratio is k*(1+X), and log2 k < gain < 2 log2 k
    # iff k < k*(1+X) < k*k.
    assert 1 < ratio < k

    log2_k = log2_rational(Fraction(k), precision_digits)
    closed = log2_k + log2_rational(ratio, precision_digits)

    level_full = -log2_rational(bound_at(mode, params, Fraction(q_star)), precision_digits)
    level_split = -log2_rational(bound_at(mode, params, Fraction(q_star, k)), precision_digits)
    direct = level_split - level_full

    return ImprovementReport(
        k=k,
        delta_bits=closed.rescale(precision_digits),
        lower_bound_bits=log2_k,
        upper_bound_bits=2 * log2_k,
        closed_form_bits=closed.rescale(precision_digits),
        direct_difference_bits=direct.rescale(precision_digits),
    )


def benefit(
    mode: Mode,
    params: SecurityParams,
    q_star: int,
    k: int,
    key_cost: Fraction,
    precision_digits: int = DEFAULT_PRECISION,
) -> BenefitReport:
    """Security gained per unit of key material spent: Q* * delta / (k * cost)."""
    key_cost = Fraction(key_cost)
    if key_cost <= 0:
        raise ValueError("key_cost must be > 0")
    report = improvement_bits(mode, params, q_star, k)
    value = report.delta_bits.as_fraction() * q_star / (k * key_cost)
    return BenefitReport(k, key_cost, FixedDecimal.from_fraction(value, precision_digits))


def sweep_k(
    mode: Mode,
    params: SecurityParams,
    q_star: int,
    k_values: list[int],
    key_cost: Fraction = Fraction(1),
) -> list[SweepRow]:
    """Improvement and benefit for each k, in the given order."""
    rows = []
    for k in k_values:
        report = improvement_bits(mode, params, q_star, k)
        cost_row = benefit(mode, params, q_star, k, key_cost)
        rows.append(
            SweepRow(
                k=k,
                delta_bits=report.delta_bits,
                lower_bound_bits=report.lower_bound_bits,
                upper_bound_bits=report.upper_bound_bits,
                benefit=cost_row.benefit,
            )
        )
    return rows
