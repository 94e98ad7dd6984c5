"""Key lifecycle engine: pools of QKD-delivered keys, encryption sessions
that rotate lazily on a planned schedule, and auditable persistence.

A session wraps one RotationPlan.  Keys are drawn from a KeyPool only at the
moment the per-key file budget is exhausted (lazy rotation): opening a
session costs one key, and every per_key_cap files thereafter costs one
more.  With rotation_factor 1 the cap is the full planned Q*, so a run of
T files consumes exactly ceil(T / Q*) keys; larger factors rotate
proportionally earlier for defense in depth at the same planned level.

Sessions persist to a versioned JSON document with every count that matters
for audit: parameters, planned Q*, counters, and the full rotation event
log.  Loading re-derives Q* from the stored parameters and re-checks every
counter invariant, so a hand-edited state file that claims more files per
key than the plan allows is rejected rather than trusted.  Loaded sessions
are detached (key material is never persisted) and support accounting and
re-persistence but not further encryption.

Encryption itself uses the scaled-down block cipher so demo runs produce
real ciphertext; plaintexts are zero-padded into whole blocks and CTR/CBC
outputs carry their IV as a leading block.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .advmodel import EcbcDenominator, Mode, SecurityParams
from .empirics import ToyCipherParams, cbc_encrypt, ctr_encrypt, draw64, ecbc_mac
from .exactmath import as_natural, parse_rational, render_rational
from .planner import RotationPlan, compute_q_star

__all__ = [
    "PoolExhaustedError",
    "StateError",
    "OversizedFileError",
    "KeyRecord",
    "KeyPool",
    "RotationEvent",
    "SessionState",
    "ingest_keys",
    "simulate_pool",
    "open_session",
    "encrypt_file",
    "export_events",
    "persist_state",
    "load_state",
]

STATE_VERSION = 1

_DEFAULT_CIPHER = ToyCipherParams(block_bits=16, key_seed=0)


class PoolExhaustedError(RuntimeError):
    """A key was needed and the pool had none left."""


class StateError(ValueError):
    """A state document is malformed, inconsistent, or from another schema."""


class OversizedFileError(ValueError):
    """A file exceeds the per-file size the plan was computed for."""


@dataclass
class KeyRecord:
    """One key as delivered: identity, material, accounting cost.

    key_material is None only on records rebuilt from persisted state, which
    never contains material.
    """

    key_id: int
    key_material: bytes | None
    cost: Fraction
    consumed: bool = False


class KeyPool:
    """Ordered pool of keys; dispensing is thread-safe and at-most-once."""

    def __init__(self, records: list[KeyRecord], key_len_bits: int, source: str = ""):
        if key_len_bits < 8 or key_len_bits % 8:
            raise ValueError("key_len_bits must be a positive multiple of 8")
        for record in records:
            if record.key_material is None or len(record.key_material) * 8 != key_len_bits:
                raise ValueError(f"key {record.key_id} is not {key_len_bits} bits")
            if record.cost <= 0:
                raise ValueError(f"key {record.key_id} has nonpositive cost")
        self.key_len_bits = key_len_bits
        self.source = source
        self._records = list(records)
        self._cursor = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def remaining(self) -> int:
        with self._lock:
            return len(self._records) - self._cursor

    def dispense(self) -> KeyRecord:
        with self._lock:
            if self._cursor >= len(self._records):
                raise PoolExhaustedError(f"pool {self.source or '<anonymous>'} is empty")
            record = self._records[self._cursor]
            self._cursor += 1
            record.consumed = True
            return record


def ingest_keys(path: str, key_len_bits: int, cost: Fraction = Fraction(1)) -> KeyPool:
    """Load a pool from a text file of hex keys, one per line, no separators."""
    hex_len = key_len_bits // 4
    records = []
    with open(path, encoding="ascii") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            if len(line) != hex_len:
                raise ValueError(
                    f"{path}:{lineno}: expected {hex_len} hex digits, got {len(line)}"
                )
            try:
                material = bytes.fromhex(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not valid hex") from exc
            records.append(KeyRecord(len(records), material, Fraction(cost)))
    return KeyPool(records, key_len_bits, source=path)


def simulate_pool(
    count: int, key_len_bits: int, seed: int, cost: Fraction = Fraction(1)
) -> KeyPool:
    """Deterministic stand-in for a QKD delivery: count keys derived from seed."""
    key_bytes = key_len_bits // 8
    records = []
    for i in range(as_natural(count)):
        material = bytes(
            draw64(seed, 4, i, j) & 0xFF for j in range(key_bytes)
        )
        records.append(KeyRecord(i, material, Fraction(cost)))
    return KeyPool(records, key_len_bits, source=f"simulated(seed={seed})")


@dataclass(frozen=True)
class RotationEvent:
    event_index: int
    old_key_id: int
    new_key_id: int
    at_file_count: int  # files completed when the rotation fired


@dataclass
class SessionState:
    """Mutable state of one encryption session (single-writer)."""

    plan: RotationPlan
    cipher: ToyCipherParams
    rotation_factor: int
    per_key_cap: int
    key_cost: Fraction
    pool: KeyPool | None
    current_key: KeyRecord
    total_files: int = 0
    files_under_current_key: int = 0
    events: list[RotationEvent] = field(default_factory=list)

    @property
    def keys_consumed(self) -> int:
        return len(self.events) + 1

    @property
    def total_key_cost(self) -> Fraction:
        return self.keys_consumed * self.key_cost

    def _accounting_fields(self) -> tuple:
        return (
            self.plan.mode,
            self.plan.params,
            self.plan.q_star,
            self.plan.file_size_bytes,
            self.cipher,
            self.rotation_factor,
            self.per_key_cap,
            self.key_cost,
            self.current_key.key_id,
            self.total_files,
            self.files_under_current_key,
            tuple(self.events),
        )

    def __eq__(self, other: object) -> bool:
        # key material and pool identity are deliberately excluded: a session
        # equals its persisted-and-reloaded (detached) twin
        if not isinstance(other, SessionState):
            return NotImplemented
        return self._accounting_fields() == other._accounting_fields()


def open_session(
    pool: KeyPool,
    mode: Mode,
    params: SecurityParams,
    file_size_bytes: int | None = None,
    rotation_factor: int = 1,
    cipher: ToyCipherParams = _DEFAULT_CIPHER,
    block_bits: int | None = None,
) -> SessionState:
    """Plan, then dispense the first key; counters start at zero."""
    plan = compute_q_star(mode, params, file_size_bytes, block_bits=block_bits)
    if as_natural(rotation_factor) < 1:
        raise ValueError("rotation_factor must be >= 1")
    per_key_cap = plan.q_star // rotation_factor
    if per_key_cap < 1:
        raise ValueError(
            f"rotation_factor {rotation_factor} exceeds q_star {plan.q_star}; "
            "every key would rotate before its first file"
        )
    if cipher.block_bits % 8:
        raise ValueError("session cipher block_bits must be a whole number of bytes")
    first = pool.dispense()
    return SessionState(
        plan=plan,
        cipher=cipher,
        rotation_factor=rotation_factor,
        per_key_cap=per_key_cap,
        key_cost=first.cost,
        pool=pool,
        current_key=first,
    )


def _subkeys(material: bytes) -> tuple[int, int, int]:
    digest = hashlib.blake2b(material, digest_size=24, person=b"qkdplan-sess").digest()
    split = (
        int.from_bytes(digest[0:8], "big"),
        int.from_bytes(digest[8:16], "big"),
        int.from_bytes(digest[16:24], "big"),
    )
    return split


def _encrypt_blocks(session: SessionState, data: bytes) -> bytes:
    cipher = session.cipher
    if session.current_key.key_material is None:
        raise StateError("detached session has no key material; open a fresh session")
    block_bytes = cipher.block_bits // 8
    padded = data + bytes(-len(data) % block_bytes)
    blocks = [
        int.from_bytes(padded[i : i + block_bytes], "big")
        for i in range(0, len(padded), block_bytes)
    ] or [0]
    k1, k2, iv_seed = _subkeys(session.current_key.key_material)
    mode = session.plan.mode
    if mode is Mode.ECBC_MAC:
        tag = ecbc_mac(cipher, k1, k2, blocks)
        return tag.to_bytes(block_bytes, "big")
    iv = draw64(iv_seed, 5, 0, session.total_files) & ((1 << cipher.block_bits) - 1)
    encrypt = ctr_encrypt if mode is Mode.CTR else cbc_encrypt
    out = encrypt(cipher, k1, iv, blocks)
    return b"".join(b.to_bytes(block_bytes, "big") for b in [iv] + out)


def encrypt_file(session: SessionState, data: bytes) -> tuple[bytes, RotationEvent | None]:
    """Encrypt one file, rotating first if the current key's budget is spent.

    Returns the ciphertext and the rotation event, if one fired.  On pool
    exhaustion nothing is encrypted and counters are unchanged.
    """
    if len(data) > session.plan.file_size_bytes:
        raise OversizedFileError(
            f"file of {len(data)} bytes exceeds planned size "
            f"{session.plan.file_size_bytes}"
        )
    event = None
    if session.files_under_current_key >= session.per_key_cap:
        if session.pool is None:
            raise StateError("detached session cannot rotate; open a fresh session")
        fresh = session.pool.dispense()  # raises PoolExhaustedError when drained
        if fresh.cost != session.key_cost:
            raise ValueError("pool mixes key costs; sessions account a uniform cost")
        event = RotationEvent(
            event_index=len(session.events),
            old_key_id=session.current_key.key_id,
            new_key_id=fresh.key_id,
            at_file_count=session.total_files,
        )
        session.events.append(event)
        session.current_key = fresh
        session.files_under_current_key = 0

    ciphertext = _encrypt_blocks(session, data)
    session.files_under_current_key += 1
    session.total_files += 1
    return ciphertext, event


def export_events(session: SessionState, path: str) -> None:
    """Write the rotation event log as JSON lines, one event per line."""
    with open(path, "w", encoding="ascii") as handle:
        for event in session.events:
            handle.write(
                json.dumps(
                    {
                        "event_index": event.event_index,
                        "old_key_id": event.old_key_id,
                        "new_key_id": event.new_key_id,
                        "at_file_count": event.at_file_count,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def _eps_log2(eps: Fraction) -> int:
    if eps.numerator != 1:
        raise StateError("state files require a power-of-two advantage ceiling")
    den = eps.denominator
    bits = den.bit_length() - 1
    if den != 1 << bits:
        raise StateError("state files require a power-of-two advantage ceiling")
    return -bits


def persist_state(session: SessionState, path: str) -> None:
    """Serialize the session's auditable state (never key material)."""
    params = session.plan.params
    if params.s_min_bits is None:
        raise StateError("state files require a power-of-two s_min")
    document = {
        "version": STATE_VERSION,
        "mode": session.plan.mode.name,
        "params": {
            "lambda_bits": params.lambda_bits,
            "s_min_bits": params.s_min_bits,
            "blocks_per_file": params.blocks_per_file,
            "eps_max_log2": _eps_log2(params.eps_max),
            "ecbc_denominator": params.ecbc_denominator.name,
        },
        "plan": {
            "q_star": str(session.plan.q_star),
            "file_size_bytes": session.plan.file_size_bytes,
        },
        "cipher": {
            "block_bits": session.cipher.block_bits,
            "key_seed": session.cipher.key_seed,
            "rounds": session.cipher.rounds,
        },
        "rotation_factor": session.rotation_factor,
        "per_key_cap": str(session.per_key_cap),
        "key_cost": render_rational(session.key_cost),
        "current_key_id": session.current_key.key_id,
        "counters": {
            "total_files": str(session.total_files),
            "files_under_current_key": str(session.files_under_current_key),
        },
        "total_key_cost": render_rational(session.total_key_cost),
        "events": [
            {
                "event_index": e.event_index,
                "old_key_id": e.old_key_id,
                "new_key_id": e.new_key_id,
                "at_file_count": e.at_file_count,
            }
            for e in session.events
        ],
    }
    with open(path, "w", encoding="ascii") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_state(path: str) -> SessionState:
    """Rebuild a detached session from a state file, re-checking invariants.

    Raises FileNotFoundError for a missing path and StateError for anything
    malformed: wrong schema version, missing fields, counters that violate
    the plan the stored parameters imply.
    """
    with open(path, encoding="ascii") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise StateError(f"{path}: not a JSON document ({exc})") from exc

    try:
        if document["version"] != STATE_VERSION:
            raise StateError(
                f"{path}: schema version {document['version']!r}, expected {STATE_VERSION}"
            )
        mode = Mode[document["mode"]]
        raw_params = document["params"]
        params = SecurityParams.from_bits(
            raw_params["lambda_bits"],
            raw_params["s_min_bits"],
            raw_params["blocks_per_file"],
            target_bits=-raw_params["eps_max_log2"],
            ecbc_denominator=EcbcDenominator[raw_params["ecbc_denominator"]],
        )
        cipher = ToyCipherParams(
            block_bits=document["cipher"]["block_bits"],
            key_seed=document["cipher"]["key_seed"],
            rounds=document["cipher"]["rounds"],
        )
        stored_q_star = int(document["plan"]["q_star"])
        file_size_bytes = int(document["plan"]["file_size_bytes"])
        rotation_factor = int(document["rotation_factor"])
        per_key_cap = int(document["per_key_cap"])
        key_cost = parse_rational(document["key_cost"])
        current_key_id = int(document["current_key_id"])
        total_files = int(document["counters"]["total_files"])
        files_under = int(document["counters"]["files_under_current_key"])
        total_cost = parse_rational(document["total_key_cost"])
        events = [
            RotationEvent(
                event_index=e["event_index"],
                old_key_id=e["old_key_id"],
                new_key_id=e["new_key_id"],
                at_file_count=e["at_file_count"],
            )
            for e in document["events"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, StateError):
            raise
        raise StateError(f"{path}: malformed state document ({exc})") from exc

    # size-vs-blocks consistency was enforced when the session was opened;
    # recompute the plan from parameters alone and carry the stored size over
    plan = compute_q_star(mode, params)
    plan = replace(
        plan,
        file_size_bytes=file_size_bytes,
        max_data_volume_bytes=plan.q_star * file_size_bytes,
    )
    if plan.q_star != stored_q_star:
        raise StateError(
            f"{path}: stored q_star {stored_q_star} does not match {plan.q_star} "
            "recomputed from the stored parameters"
        )
    if rotation_factor < 1 or plan.q_star // rotation_factor != per_key_cap:
        raise StateError(f"{path}: per_key_cap inconsistent with rotation_factor")
    if not 0 <= files_under <= per_key_cap:
        raise StateError(
            f"{path}: files_under_current_key {files_under} violates the "
            f"per-key cap {per_key_cap}"
        )
    if files_under > total_files:
        raise StateError(f"{path}: files_under_current_key exceeds total_files")
    last = -1
    for i, event in enumerate(events):
        if event.event_index != i or event.old_key_id == event.new_key_id:
            raise StateError(f"{path}: event log entry {i} is inconsistent")
        if not last < event.at_file_count <= total_files:
            raise StateError(f"{path}: event log file counts are not increasing")
        last = event.at_file_count
    if events and events[-1].new_key_id != current_key_id:
        raise StateError(f"{path}: current key does not match the last rotation")
    if total_cost != (len(events) + 1) * key_cost:
        raise StateError(f"{path}: total_key_cost fails the per-key accounting identity")

    return SessionState(
        plan=plan,
        cipher=cipher,
        rotation_factor=rotation_factor,
        per_key_cap=per_key_cap,
        key_cost=key_cost,
        pool=None,
        current_key=KeyRecord(current_key_id, None, key_cost, consumed=True),
        total_files=total_files,
        files_under_current_key=files_under,
        events=events,
    )
