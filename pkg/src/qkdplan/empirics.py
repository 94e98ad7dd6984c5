"""Scaled-down empirical validation of the birthday terms.

The planning bounds charge 2*Q^2*l/N (CTR) and 2*Q^2*l^2/N (CBC) for
collision events.  At real parameters those are astronomically small, so this
module shrinks the block domain to 8..24 bits, runs Monte Carlo trials, and
checks the measured collision fraction sits below the same formula evaluated
at the small domain, without being so far below that the experiment proves
nothing.

Collision events mirror what the bounds actually charge for:

  CTR  some two of Q files, each consuming l counter values from a uniform
       starting IV, overlap somewhere in counter space (keystream reuse);
  CBC  some two of the Q*l ciphertext blocks produced under one key collide
       (equal blocks leak the XOR of the chained plaintexts).

The cipher is a small unbalanced Feistel network, a permutation on the block
domain for any width (verified exhaustively at construction up to 16 bits).
All randomness is counter-based: a draw depends only on (seed, purpose,
slot, trial), never on call order, so results are bit-identical regardless
of chunking, and the scalar and vectorized paths agree value for value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .advmodel import Mode
from .exactmath import as_natural

__all__ = [
    "ToyCipherParams",
    "TrialConfig",
    "EmpiricalResult",
    "Z_99",
    "mix64",
    "draw64",
    "toy_prp",
    "toy_prp_inverse",
    "toy_prp_batch",
    "ctr_encrypt",
    "ctr_decrypt",
    "cbc_encrypt",
    "cbc_decrypt",
    "ecbc_mac",
    "estimate_collision_probability",
]

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_LANE = 0xD6E8FEB86659FD93

# two-sided 99% normal quantile
Z_99 = 2.5758293035489004

_CHUNK = 1 << 14
_DEFAULT_ROUNDS = 6

# counter-based draw purposes; distinct purposes never share a stream
_P_IV = 1
_P_KEY = 2
_P_PLAINTEXT = 3


def mix64(x: int) -> int:
    """64-bit finalizer: bijective on [0, 2**64), strong diffusion."""
    x &= _M64
    x ^= x >> 30
    x = (x * _MIX1) & _M64
    x ^= x >> 27
    x = (x * _MIX2) & _M64
    x ^= x >> 31
    return x


def _mix64_np(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # wraparound mod 2**64 is the point
        x = x ^ x >> np.uint64(30)
        x = x * np.uint64(_MIX1)
        x ^= x >> np.uint64(27)
        x = x * np.uint64(_MIX2)
        x ^= x >> np.uint64(31)
    return x


def draw64(seed: int, purpose: int, slot: int, trial: int) -> int:
    """Counter-based 64-bit draw; pure function of its four coordinates."""
    stream = ((purpose << 32) | slot) & _M64
    base = mix64((seed & _M64) ^ ((stream * _GOLDEN) & _M64))
    return mix64(base ^ ((trial * _LANE) & _M64))


def _draw_grid(seed: int, purpose: int, slots: np.ndarray, trials: np.ndarray) -> np.ndarray:
    """Vectorized draw64: rows are trials, columns are slots."""
    with np.errstate(over="ignore"):
        streams = (np.uint64(purpose) << np.uint64(32)) | slots.astype(np.uint64)
        base = _mix64_np(np.uint64(seed & _M64) ^ streams * np.uint64(_GOLDEN))
        return _mix64_np(base[None, :] ^ trials[:, None] * np.uint64(_LANE))


# ------------------------------------------------------------------ toy cipher


@dataclass(frozen=True)
class ToyCipherParams:
    """Shape of the scaled-down cipher: block width, default key, rounds.

    Construction verifies bijectivity exhaustively for widths up to 16 bits;
    wider blocks rely on the Feistel structure alone.
    """

    block_bits: int
    key_seed: int
    rounds: int = 6

    def __post_init__(self) -> None:
        if not 8 <= self.block_bits <= 24:
            raise ValueError("block_bits must lie in [8, 24]")
        if self.rounds < 4:
            raise ValueError("rounds must be >= 4")
        if not 0 <= self.key_seed < 1 << 64:
            raise ValueError("key_seed must be a 64-bit integer")
        if self.block_bits <= 16:
            domain = np.arange(1 << self.block_bits, dtype=np.uint64)
            image = _permute_np(self.block_bits, self.rounds, np.uint64(self.key_seed), domain)
            counts = np.bincount(image.astype(np.int64), minlength=1 << self.block_bits)
            if not (counts == 1).all():
                raise AssertionError("round structure failed to permute the domain")


def _round_keys(rounds: int, key: int) -> list[int]:
    return [mix64(key + (i + 1) * _GOLDEN) for i in range(rounds)]


def _permute(block_bits: int, rounds: int, key: int, x: int) -> int:
    # unbalanced Feistel; half widths swap each round, fine for odd rounds
    w_left = block_bits // 2
    w_right = block_bits - w_left
    left, right = x >> w_right, x & ((1 << w_right) - 1)
    for rk in _round_keys(rounds, key):
        left, right, w_left, w_right = (
            right,
            left ^ (mix64(right ^ rk) & ((1 << w_left) - 1)),
            w_right,
            w_left,
        )
    return (left << w_right) | right


def _unpermute(block_bits: int, rounds: int, key: int, y: int) -> int:
    w_left = block_bits // 2
    w_right = block_bits - w_left
    widths = []
    for _ in range(rounds):
        widths.append((w_left, w_right))
        w_left, w_right = w_right, w_left
    x = y
    for rk, (wl, wr) in zip(reversed(_round_keys(rounds, key)), reversed(widths)):
        # a forward round at widths (wl, wr) maps (L, R) to (R, L ^ f(R))
        r = x >> wl
        masked = x & ((1 << wl) - 1)
        x = ((masked ^ (mix64(r ^ rk) & ((1 << wl) - 1))) << wr) | r
    return x


def _permute_np(block_bits: int, rounds: int, keys: np.ndarray, x: np.ndarray) -> np.ndarray:
    w_left = block_bits // 2
    w_right = block_bits - w_left
    left = x >> np.uint64(w_right)
    right = x & np.uint64((1 << w_right) - 1)
    for i in range(rounds):
        with np.errstate(over="ignore"):
            rk = _mix64_np(keys + np.uint64(((i + 1) * _GOLDEN) & _M64))
        f = _mix64_np(right ^ rk) & np.uint64((1 << w_left) - 1)
        left, right = right, left ^ f
        w_left, w_right = w_right, w_left
    return (left << np.uint64(w_right)) | right


def _check_block(block_bits: int, value: int, what: str = "block") -> int:
    if not 0 <= value < 1 << block_bits:
        raise ValueError(f"{what} {value} outside [0, 2**{block_bits})")
    return value


def toy_prp(params: ToyCipherParams, block: int) -> int:
    """Permutation the params induce (keyed by key_seed)."""
    return _permute(params.block_bits, params.rounds, params.key_seed, _check_block(params.block_bits, block))


def toy_prp_inverse(params: ToyCipherParams, block: int) -> int:
    return _unpermute(params.block_bits, params.rounds, params.key_seed, _check_block(params.block_bits, block))


def toy_prp_batch(params: ToyCipherParams, blocks: np.ndarray, key: int | None = None) -> np.ndarray:
    """Vectorized toy_prp, optionally under an explicit 64-bit key."""
    k = params.key_seed if key is None else key
    return _permute_np(params.block_bits, params.rounds, np.uint64(k), blocks.astype(np.uint64))


# ------------------------------------------------------------ mode operations


def _check_key(key: int) -> int:
    if not 0 <= key < 1 << 64:
        raise ValueError("key must be a 64-bit integer")
    return key


def ctr_encrypt(params: ToyCipherParams, key: int, iv: int, blocks: list[int]) -> list[int]:
    """Counter mode: block j is XOR-masked with E(iv + j mod N)."""
    n = 1 << params.block_bits
    _check_key(key)
    _check_block(params.block_bits, iv, "iv")
    out = []
    for j, block in enumerate(blocks):
        _check_block(params.block_bits, block)
        mask = _permute(params.block_bits, params.rounds, key, (iv + j) % n)
        out.append(block ^ mask)
    return out


def ctr_decrypt(params: ToyCipherParams, key: int, iv: int, blocks: list[int]) -> list[int]:
    return ctr_encrypt(params, key, iv, blocks)  # XOR masking is an involution


def cbc_encrypt(params: ToyCipherParams, key: int, iv: int, blocks: list[int]) -> list[int]:
    _check_key(key)
    _check_block(params.block_bits, iv, "iv")
    prev = iv
    out = []
    for block in blocks:
        _check_block(params.block_bits, block)
        prev = _permute(params.block_bits, params.rounds, key, block ^ prev)
        out.append(prev)
    return out


def cbc_decrypt(params: ToyCipherParams, key: int, iv: int, blocks: list[int]) -> list[int]:
    _check_key(key)
    _check_block(params.block_bits, iv, "iv")
    prev = iv
    out = []
    for block in blocks:
        _check_block(params.block_bits, block)
        out.append(_unpermute(params.block_bits, params.rounds, key, block) ^ prev)
        prev = block
    return out


def ecbc_mac(params: ToyCipherParams, key1: int, key2: int, blocks: list[int]) -> int:
    """Encrypted CBC-MAC: CBC chain under key1, final state re-encrypted under key2."""
    if not blocks:
        raise ValueError("ecbc_mac requires at least one block")
    _check_key(key1)
    _check_key(key2)
    state = 0
    for block in blocks:
        state = _permute(params.block_bits, params.rounds, key1, _check_block(params.block_bits, block) ^ state)
    return _permute(params.block_bits, params.rounds, key2, state)


# ------------------------------------------------------------------ trials


@dataclass(frozen=True)
class TrialConfig:
    """One Monte Carlo experiment: mode, domain, load, trial count, seed.

    Trials draw a fresh 64-bit cipher key per trial and run the default
    6-round toy cipher; IVs and plaintexts are uniform on the block domain.
    """

    mode: Mode
    block_bits: int
    q_files: int
    blocks_per_file: int
    trials: int
    rng_seed: int

    def __post_init__(self) -> None:
        if self.mode not in (Mode.CTR, Mode.CBC):
            raise ValueError("collision trials support CTR and CBC only")
        if not 8 <= self.block_bits <= 24:
            raise ValueError("block_bits must lie in [8, 24]")
        if as_natural(self.q_files) < 1 or as_natural(self.blocks_per_file) < 1:
            raise ValueError("q_files and blocks_per_file must be >= 1")
        if self.q_files * self.blocks_per_file > 1 << self.block_bits:
            raise ValueError("q_files * blocks_per_file exceeds the block domain")
        as_natural(self.trials)
        as_natural(self.rng_seed)


@dataclass(frozen=True)
class EmpiricalResult:
    """Measured collision fraction with its 99% half-width and the bound."""

    collision_fraction: float
    theoretical_bound: Fraction
    trials: int
    half_width_99: float
    collisions: int


def _ctr_collisions(config: TrialConfig, lo: int, hi: int) -> int:
    n = 1 << config.block_bits
    mask = np.uint64(n - 1)
    slots = np.arange(config.q_files, dtype=np.uint64)
    trials = np.arange(lo, hi, dtype=np.uint64)
    ivs = _draw_grid(config.rng_seed, _P_IV, slots, trials) & mask
    ivs.sort(axis=1)
    wrap = ivs[:, 0] + np.uint64(n) - ivs[:, -1]
    gaps = np.diff(ivs, axis=1)
    min_gap = np.minimum(gaps.min(axis=1, initial=n), wrap)
    return int((min_gap < config.blocks_per_file).sum())


def _cbc_collisions(config: TrialConfig, lo: int, hi: int) -> int:
    mask = np.uint64((1 << config.block_bits) - 1)
    q, l = config.q_files, config.blocks_per_file
    slots = np.arange(q, dtype=np.uint64)
    trials = np.arange(lo, hi, dtype=np.uint64)
    keys = _draw_grid(config.rng_seed, _P_KEY, np.zeros(1, dtype=np.uint64), trials)  # (T, 1)
    prev = _draw_grid(config.rng_seed, _P_IV, slots, trials) & mask  # (T, Q)
    blocks = np.empty((len(trials), q * l), dtype=np.uint32)
    for j in range(l):
        pt = _draw_grid(config.rng_seed, _P_PLAINTEXT, slots * np.uint64(256) + np.uint64(j), trials) & mask
        prev = _permute_np(config.block_bits, _DEFAULT_ROUNDS, keys, pt ^ prev)
        blocks[:, j::l] = prev.astype(np.uint32)
    blocks.sort(axis=1)
    dup = (np.diff(blocks, axis=1) == 0).any(axis=1)
    return int(dup.sum())


def estimate_collision_probability(config: TrialConfig) -> EmpiricalResult:
    """Measure the mode's collision event frequency at scaled-down parameters.

    Deterministic in config alone.  Needs >= 1000 trials; below that the
    normal-approximation interval reported alongside the point estimate is
    meaningless.
    """
    if config.trials < 1000:
        raise ValueError("trials must be >= 1000")

    count_chunk = _ctr_collisions if config.mode is Mode.CTR else _cbc_collisions
    collisions = 0
    for lo in range(0, config.trials, _CHUNK):
        collisions += count_chunk(config, lo, min(lo + _CHUNK, config.trials))

    n = 1 << config.block_bits
    q, l = config.q_files, config.blocks_per_file
    if config.mode is Mode.CTR:
        bound = Fraction(2 * q * q * l, n)
    else:
        bound = Fraction(2 * q * q * l * l, n)

    fraction = collisions / config.trials
    half_width = Z_99 * math.sqrt(fraction * (1.0 - fraction) / config.trials)
    return EmpiricalResult(
        collision_fraction=fraction,
        theoretical_bound=bound,
        trials=config.trials,
        half_width_99=half_width,
        collisions=collisions,
    )
