"""How many 1.5 KB files can one key encrypt before the advantage budget runs out?

Walks the three supported modes at the reference setting (128-bit blocks,
2^-121 key-guessing floor, 2^-80 ceiling) and prints the exact per-key file
limit next to the data volume it allows.  Ends with a target that is too
aggressive, to show what infeasibility looks like.
"""

from __future__ import annotations

from qkdplan import (
    EcbcDenominator,
    InfeasibleTargetError,
    Mode,
    SecurityParams,
    compute_q_star,
    volume_mb,
)

FILE_BYTES = 1536

params = SecurityParams.from_bits(128, 121, 96, target_bits=80)

print("per-key file limits, 1.5 KB files, ceiling 2^-80")
print(f"{'mode':10s} {'files':>9s} {'worst-case bits':>16s} {'volume':>11s}")
for mode in Mode:
    plan = compute_q_star(mode, params, file_size_bytes=FILE_BYTES)
    mb = float(volume_mb(plan.max_data_volume_bytes))
    print(f"{mode.value:10s} {plan.q_star:>9d} {str(plan.worst_case_bits):>16s} {mb:>9.1f}MB")

# The MAC bound is also published with the smaller denominator; both variants
# are available so numbers can be compared against either convention.
compat = SecurityParams.from_bits(
    128, 121, 96, target_bits=80, ecbc_denominator=EcbcDenominator.PAPER_COMPAT_N
)
plan = compute_q_star(Mode.ECBC_MAC, compat, file_size_bytes=FILE_BYTES)
mb = float(volume_mb(plan.max_data_volume_bytes))
print(f"{'  (compat)':10s} {plan.q_star:>9d} {str(plan.worst_case_bits):>16s} {mb:>9.1f}MB")

# Ask for more security than the key-guessing floor can deliver and the
# planner refuses up front instead of returning a meaningless zero.
print()
too_strict = SecurityParams.from_bits(128, 121, 96, target_bits=122)
try:
    compute_q_star(Mode.CTR, too_strict, file_size_bytes=FILE_BYTES)
except InfeasibleTargetError as exc:
    print(f"target 2^-122 rejected: {exc}")
