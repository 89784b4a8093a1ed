import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmint import mint as mt
from qmint import qstate as qs
from qmint.errors import BadTag, DeadNote, DuplicateSerial, NonPositiveDuration, UnknownSerial
from qmint.qstate import PureState
from qmint.rng import SeededRng
from qmint.wallet import Feasibility, MemoryModel, Wallet, feasibility


@pytest.fixture
def authority(rng):
    return mt.MintAuthority.create(rng)


def make_wallet(authority, tau=10.0, residual=None):
    return Wallet("w", authority.key, MemoryModel(tau, residual_ratio=residual))


def test_deposit_increases_balance(authority, rng):
    w = make_wallet(authority)
    assert w.balance_tokens() == 0
    w.deposit(mt.mint(authority, 10, rng), 0.0)
    w.deposit(mt.mint(authority, 100, rng), 0.0)
    assert w.balance_tokens() == 110
    w.check_invariants()


def test_duplicate_serial(authority, rng):
    w = make_wallet(authority)
    note = mt.mint(authority, 10, rng)
    w.deposit(note, 0.0)
    with pytest.raises(DuplicateSerial):
        w.deposit(note, 0.0)


def test_altered_denomination_rejected(authority, rng):
    w = make_wallet(authority)
    note = mt.mint(authority, 10, rng)
    note.denomination = 1000
    with pytest.raises(BadTag):
        w.deposit(note)


def test_dead_note_rejected(authority, rng):
    w = make_wallet(authority)
    note = mt.mint(authority, 10, rng)
    note.retire(mt.NoteStatus.Spent)
    with pytest.raises(DeadNote):
        w.deposit(note)


def test_zero_dt_is_noop(authority, rng):
    w = make_wallet(authority, residual=10.0)
    note = mt.mint(authority, 10, rng)
    w.deposit(note)
    before = note.state.digest()
    w.advance_time(0.0, rng)
    assert note.state.digest() == before and w.clock == 0.0
    with pytest.raises(NonPositiveDuration):
        w.advance_time(-1.0)


@pytest.mark.parametrize("dt", [0.1, 1.0, 10.0, 1e4])
def test_dfs_note_survives_collective_noise(authority, rng, dt):
    w = make_wallet(authority)
    note = mt.mint(authority, 1000, rng)
    w.deposit(note)
    w.advance_time(dt)
    assert note.status is mt.NoteStatus.Live
    assert w.decoded_fidelity(note.serial) == pytest.approx(1.0, abs=1e-9)


def test_raw_note_collapses_at_coherence_time(authority, rng):
    w = make_wallet(authority, tau=2.0)
    note = mt.mint(authority, 10, rng)
    raw = dataclasses.replace(note, codeword=PureState.basis("00"), state=PureState.basis("00").to_density())
    w.deposit(raw)
    w.advance_time(2.0)
    assert raw.status is mt.NoteStatus.Collapsed
    ev = w.events[-1]
    assert ev.kind == "collapse"
    assert ev.detail["fidelity"] == pytest.approx(math.exp(-1))
    assert w.balance_tokens() == 0


def test_residual_dephasing_eventually_collapses_dfs_note(authority, rng):
    w = make_wallet(authority, tau=1.0, residual=10.0)
    note = mt.mint(authority, 10, rng)
    w.deposit(note)
    w.advance_time(0.01)
    assert note.status is mt.NoteStatus.Live
    f = w.decoded_fidelity(note.serial)
    assert 0.99 < f < 1.0
    w.advance_time(10.0)
    assert note.status is mt.NoteStatus.Collapsed


def test_balance_reads_no_state(authority, rng):
    w = make_wallet(authority)
    for d in (1, 10, 100):
        w.deposit(mt.mint(authority, d, rng))
    before = [n.state.digest() for n in w.notes.values()]
    assert w.balance_tokens() == 111
    assert [n.state.digest() for n in w.notes.values()] == before


def test_tamper_collapses(authority, rng):
    w = make_wallet(authority)
    note = mt.mint(authority, 100, rng)
    w.deposit(note)
    w.tamper(note.serial, rng)
    assert note.status is mt.NoteStatus.Collapsed
    assert w.balance_tokens() == 0
    with pytest.raises(DeadNote):
        w.withdraw(note.serial)
    with pytest.raises(UnknownSerial):
        w.tamper(12345, rng)


def test_tamper_fidelity_matches_projection_oracle(authority):
    theta = 3 * math.pi / 16  # denomination 100
    cw = np.array([math.cos(theta), math.sin(theta), math.sin(theta), math.cos(theta)]) / math.sqrt(2)
    seen = set()
    for seed in range(40):
        r = SeededRng(seed)
        w = make_wallet(authority)
        note = mt.mint(authority, 100, r)
        w.deposit(note)
        w.tamper(note.serial, r)
        ev = w.events[-1]
        idx = int("".join(map(str, ev.detail["bits"])), 2)
        assert ev.detail["fidelity"] == pytest.approx(abs(cw[idx]) ** 2, abs=1e-12)
        assert ev.detail["fidelity"] <= max(math.cos(theta) ** 2, math.sin(theta) ** 2) < 1
        seen.add(idx)
    assert len(seen) == 4


def test_feasibility():
    assert feasibility(10, 0.3) is Feasibility.Feasible
    assert feasibility(0.3, 0.3) is Feasibility.Marginal
    assert feasibility(1e-3, 0.3) is Feasibility.Infeasible
    with pytest.raises(NonPositiveDuration):
        feasibility(0, 1)


def test_snapshot_is_classical_only(authority, rng):
    w = make_wallet(authority)
    w.deposit(mt.mint(authority, 10, rng), 1.5)
    snap = json.loads(w.snapshot_json())
    assert snap["balance"] == 10
    assert snap["tokens"][0]["acquired_at"] == 1.5
    assert "amplitudes" not in w.snapshot_json() and "state" not in snap["notes"][0]


ops = st.lists(
    st.tuples(st.sampled_from(["deposit", "advance", "tamper", "withdraw"]), st.integers(0, 2**16)),
    max_size=25,
)


@settings(max_examples=60, deadline=None)
@given(ops, st.integers(0, 2**32))
def test_bijection_and_no_silent_loss(sequence, seed):
    r = SeededRng(seed)
    auth = mt.MintAuthority.create(r)
    w = Wallet("w", auth.key, MemoryModel(1.0, residual_ratio=10.0))
    for op, arg in sequence:
        before = w.balance_tokens()
        n_events = len(w.events)
        live = w.live_serials()
        if op == "deposit":
            w.deposit(mt.mint(auth, mt.DENOMINATIONS[arg % 7], r))
        elif op == "advance":
            w.advance_time((arg % 100) / 10)
        elif op == "tamper" and live:
            w.tamper(live[arg % len(live)], r)
        elif op == "withdraw" and live:
            w.withdraw(live[arg % len(live)])
        w.check_invariants()
        new_events = w.events[n_events:]
        gained = sum(e.denomination for e in new_events if e.kind == "deposit")
        lost = [e for e in new_events if e.kind in ("collapse", "tamper", "withdraw")]
        # Every unit that leaves the balance is explained by exactly one transition.
        assert before + gained - w.balance_tokens() == sum(e.denomination for e in lost)
        assert len({e.serial for e in lost}) == len(lost)
        assert all(w.notes[e.serial].status is not mt.NoteStatus.Live for e in lost)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 100), max_size=10), st.integers(0, 2**32))
def test_dfs_protection_under_collective_only(dts, seed):
    r = SeededRng(seed)
    auth = mt.MintAuthority.create(r)
    w = Wallet("w", auth.key, MemoryModel(0.5, residual_ratio=None))
    notes = [mt.mint(auth, d, r) for d in (1, 1000, 10**6)]
    for n in notes:
        w.deposit(n)
    for dt in dts:
        w.advance_time(dt)
    for n in notes:
        assert n.status is mt.NoteStatus.Live
        assert w.decoded_fidelity(n.serial) == pytest.approx(1.0, abs=1e-9)
