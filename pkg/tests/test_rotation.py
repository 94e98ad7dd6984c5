"""Key lifecycle tests: pools, lazy rotation, accounting, persistence."""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import pytest

from qkdplan.advmodel import Mode, SecurityParams
from qkdplan.empirics import ToyCipherParams
from qkdplan.rotation import (
    KeyPool,
    KeyRecord,
    OversizedFileError,
    PoolExhaustedError,
    StateError,
    encrypt_file,
    export_events,
    ingest_keys,
    load_state,
    open_session,
    persist_state,
    simulate_pool,
)

TOY_PARAMS = SecurityParams.from_bits(16, 14, 4, target_bits=9)  # q_star = 3
TOY_CIPHER = ToyCipherParams(16, key_seed=0)


def toy_session(pool_size=10, rotation_factor=1, mode=Mode.CTR, seed=1):
    pool = simulate_pool(pool_size, 128, seed)
    return open_session(pool, mode, TOY_PARAMS, 8, rotation_factor, TOY_CIPHER)


# ----------------------------------------------------------------- key pools


def test_simulate_pool_is_deterministic():
    a = simulate_pool(5, 128, 7)
    b = simulate_pool(5, 128, 7)
    assert [r.key_material for r in a._records] == [r.key_material for r in b._records]
    assert len({r.key_material for r in a._records}) == 5
    assert all(len(r.key_material) == 16 for r in a._records)


def test_ingest_keys_hex_lines(tmp_path):
    path = tmp_path / "keys.txt"
    keys = ["ab" * 16, "CD" * 16, "0123456789abcdef" * 2]
    path.write_text("\n".join(keys) + "\n\n")
    pool = ingest_keys(str(path), 128)
    assert len(pool) == 3
    assert pool.dispense().key_material == bytes.fromhex("ab" * 16)
    assert pool.dispense().key_material == bytes.fromhex("cd" * 16)


def test_ingest_keys_rejects_bad_lines(tmp_path):
    short = tmp_path / "short.txt"
    short.write_text("abcd\n")
    with pytest.raises(ValueError, match="short.txt:1"):
        ingest_keys(str(short), 128)
    nonhex = tmp_path / "nonhex.txt"
    nonhex.write_text("zz" * 16 + "\n")
    with pytest.raises(ValueError, match="not valid hex"):
        ingest_keys(str(nonhex), 128)


def test_pool_dispenses_each_key_once():
    pool = simulate_pool(4, 128, 1)
    ids = [pool.dispense().key_id for _ in range(4)]
    assert ids == [0, 1, 2, 3]
    assert pool.remaining() == 0
    with pytest.raises(PoolExhaustedError):
        pool.dispense()


def test_pool_dispense_is_thread_safe():
    pool = simulate_pool(100, 128, 3)

    def drain(_):
        out = []
        while True:
            try:
                out.append(pool.dispense().key_id)
            except PoolExhaustedError:
                return out

    with ThreadPoolExecutor(max_workers=2) as pool_exec:
        results = list(pool_exec.map(drain, range(2)))
    combined = sorted(results[0] + results[1])
    assert combined == list(range(100))


def test_pool_validation():
    with pytest.raises(ValueError, match="multiple of 8"):
        KeyPool([], 12)
    with pytest.raises(ValueError, match="128 bits"):
        KeyPool([KeyRecord(0, b"\x00" * 8, Fraction(1))], 128)
    with pytest.raises(ValueError, match="cost"):
        KeyPool([KeyRecord(0, b"\x00" * 16, Fraction(0))], 128)


# ------------------------------------------------------------------ sessions


def test_open_session_dispenses_first_key():
    pool = simulate_pool(2, 128, 1)
    session = open_session(pool, Mode.CTR, TOY_PARAMS, 8, cipher=TOY_CIPHER)
    assert session.plan.q_star == 3
    assert session.per_key_cap == 3
    assert session.current_key.key_id == 0
    assert session.current_key.consumed
    assert pool.remaining() == 1
    assert session.total_files == 0 and session.files_under_current_key == 0
    assert session.keys_consumed == 1


def test_open_session_validation():
    pool = simulate_pool(2, 128, 1)
    with pytest.raises(ValueError, match="rotation_factor"):
        open_session(pool, Mode.CTR, TOY_PARAMS, 8, rotation_factor=0, cipher=TOY_CIPHER)
    with pytest.raises(ValueError, match="rotate before its first file"):
        open_session(pool, Mode.CTR, TOY_PARAMS, 8, rotation_factor=5, cipher=TOY_CIPHER)
    with pytest.raises(ValueError, match="whole number of bytes"):
        open_session(
            pool, Mode.CTR, TOY_PARAMS, 8, cipher=ToyCipherParams(12, key_seed=0)
        )


def test_lazy_rotation_schedule():
    # cap 3: rotation fires on files 4 and 7, not at file 3
    session = toy_session()
    events = []
    for i in range(7):
        _, event = encrypt_file(session, b"x" * 8)
        events.append(event)
    fired = [e for e in events if e is not None]
    assert [events.index(e) for e in fired] == [3, 6]  # 0-based: 4th and 7th file
    assert [e.at_file_count for e in fired] == [3, 6]
    assert [e.old_key_id for e in fired] == [0, 1]
    assert [e.new_key_id for e in fired] == [1, 2]
    assert session.keys_consumed == 3 == math.ceil(7 / 3)
    assert session.total_files == 7
    assert session.files_under_current_key == 1


def test_three_files_cost_one_key():
    session = toy_session()
    for _ in range(3):
        _, event = encrypt_file(session, b"12345678")
        assert event is None
    assert session.keys_consumed == 1
    assert session.total_key_cost == 1


def test_rotation_factor_shrinks_cap():
    session = toy_session(rotation_factor=3)
    assert session.per_key_cap == 1
    for i in range(4):
        _, event = encrypt_file(session, b"x")
        assert (event is None) == (i == 0)
    assert session.keys_consumed == 4


def test_pool_exhaustion_is_clean():
    session = toy_session(pool_size=2)
    for _ in range(6):
        encrypt_file(session, b"x")
    before = (session.total_files, session.files_under_current_key, session.keys_consumed)
    with pytest.raises(PoolExhaustedError):
        encrypt_file(session, b"x")
    assert (session.total_files, session.files_under_current_key, session.keys_consumed) == before


def test_oversized_file_rejected_without_side_effects():
    session = toy_session()
    with pytest.raises(OversizedFileError, match="exceeds planned size"):
        encrypt_file(session, b"x" * 9)
    assert session.total_files == 0


def test_ciphertext_shape_and_determinism():
    session = toy_session()
    ct1, _ = encrypt_file(session, b"hello wo")
    assert len(ct1) == 2 * 5  # iv block + 4 data blocks, 2 bytes each
    session2 = toy_session()
    ct2, _ = encrypt_file(session2, b"hello wo")
    assert ct1 == ct2  # same pool seed, same key, same file index
    ct3, _ = encrypt_file(session2, b"hello wo")
    assert ct3 != ct2  # fresh IV per file


def test_ecbc_session_emits_tags():
    session = toy_session(mode=Mode.ECBC_MAC)
    tag, _ = encrypt_file(session, b"hello wo")
    assert len(tag) == 2
    again, _ = encrypt_file(session, b"hello wo")
    assert tag == again  # MAC has no IV; identical input, identical tag


def test_ciphertext_differs_across_keys():
    session = toy_session(rotation_factor=3)  # new key every file
    ct1, _ = encrypt_file(session, b"const")
    ct2, _ = encrypt_file(session, b"const")
    assert ct1 != ct2


# -------------------------------------------------------------- persistence


def test_export_events_json_lines(tmp_path):
    session = toy_session()
    for _ in range(7):
        encrypt_file(session, b"x")
    path = tmp_path / "events.jsonl"
    export_events(session, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first == {"event_index": 0, "old_key_id": 0, "new_key_id": 1, "at_file_count": 3}


def test_state_round_trip(tmp_path):
    session = toy_session()
    for _ in range(5):
        encrypt_file(session, b"abcdefgh")
    path = tmp_path / "state.json"
    persist_state(session, str(path))
    loaded = load_state(str(path))
    assert loaded == session
    assert loaded.pool is None
    assert loaded.current_key.key_material is None
    # accounting still works on the detached copy
    assert loaded.keys_consumed == 2
    assert loaded.total_key_cost == 2
    # and it re-persists identically
    path2 = tmp_path / "state2.json"
    persist_state(loaded, str(path2))
    assert path.read_text() == path2.read_text()


def test_detached_session_cannot_encrypt(tmp_path):
    session = toy_session()
    encrypt_file(session, b"x")
    path = tmp_path / "state.json"
    persist_state(session, str(path))
    loaded = load_state(str(path))
    with pytest.raises(StateError, match="detached"):
        encrypt_file(loaded, b"x")


def test_load_missing_file_is_distinct():
    with pytest.raises(FileNotFoundError):
        load_state("/nonexistent/state.json")


def test_load_rejects_garbage_and_wrong_version(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(StateError, match="not a JSON document"):
        load_state(str(bad))
    session = toy_session()
    path = tmp_path / "state.json"
    persist_state(session, str(path))
    document = json.loads(path.read_text())
    document["version"] = 2
    path.write_text(json.dumps(document))
    with pytest.raises(StateError, match="schema version"):
        load_state(str(path))
    del document["version"]
    path.write_text(json.dumps(document))
    with pytest.raises(StateError, match="malformed"):
        load_state(str(path))


def test_load_rejects_tampered_counters(tmp_path):
    session = toy_session()
    for _ in range(5):
        encrypt_file(session, b"x")
    path = tmp_path / "state.json"
    persist_state(session, str(path))
    document = json.loads(path.read_text())
    document["counters"]["files_under_current_key"] = "7"  # beyond cap 3
    path.write_text(json.dumps(document))
    with pytest.raises(StateError, match="per-key cap"):
        load_state(str(path))


def test_load_rejects_tampered_q_star(tmp_path):
    session = toy_session()
    path = tmp_path / "state.json"
    persist_state(session, str(path))
    document = json.loads(path.read_text())
    document["plan"]["q_star"] = "1000"
    document["per_key_cap"] = "1000"
    path.write_text(json.dumps(document))
    with pytest.raises(StateError, match="recomputed"):
        load_state(str(path))


def test_persist_requires_power_of_two_params(tmp_path):
    pool = simulate_pool(1, 128, 1)
    odd = SecurityParams(16, 10000, 4, Fraction(1, 512))  # s_min not 2**k
    session = open_session(pool, Mode.CTR, odd, cipher=TOY_CIPHER)
    with pytest.raises(StateError, match="power-of-two s_min"):
        persist_state(session, str(tmp_path / "x.json"))
    pool2 = simulate_pool(1, 128, 1)
    odd_eps = SecurityParams(16, 1 << 14, 4, Fraction(3, 1024))
    session2 = open_session(pool2, Mode.CTR, odd_eps, cipher=TOY_CIPHER)
    with pytest.raises(StateError, match="power-of-two advantage ceiling"):
        persist_state(session2, str(tmp_path / "y.json"))


def test_accounting_identity_random_runs():
    rng = random.Random(55)
    for _ in range(20):
        total = rng.randrange(1, 40)
        session = toy_session(pool_size=40)
        for _ in range(total):
            encrypt_file(session, b"x")
        assert session.keys_consumed == math.ceil(total / session.plan.q_star)
        # event log re-derives the same split
        counts = []
        prev = 0
        for event in session.events:
            counts.append(event.at_file_count - prev)
            prev = event.at_file_count
        counts.append(session.total_files - prev)
        assert sum(counts) == session.total_files
        assert all(c == session.per_key_cap for c in counts[:-1])
        assert 0 < counts[-1] <= session.per_key_cap
