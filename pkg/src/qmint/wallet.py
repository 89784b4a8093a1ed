"""Quantum wallet: DFS-protected note storage with paired classical tokens."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .errors import BadTag, DeadNote, DuplicateSerial, InvariantViolation, NonPositiveDuration, UnknownSerial
from .mint import Banknote, NoteStatus, verify_tag
from .noise import apply_channel, collective_bit_flip, dephasing
from .qstate import fidelity, measure
from .rng import SeededRng


class Feasibility(str, enum.Enum):
    Feasible = "Feasible"
    Marginal = "Marginal"
    Infeasible = "Infeasible"


def feasibility(tau_c: float, tau_t: float, factor: float = 10.0) -> Feasibility:
    if tau_c <= 0 or tau_t <= 0:
        raise NonPositiveDuration(f"durations must be positive (tau_c={tau_c}, tau_t={tau_t})")
    if tau_c >= factor * tau_t:
        return Feasibility.Feasible
    if tau_c >= tau_t:
        return Feasibility.Marginal
    return Feasibility.Infeasible


@dataclass
class MemoryModel:
    coherence_time: float
    # Residual single-qubit dephasing lifetime, as a multiple of coherence_time.
    # None switches it off (collective noise only).
    residual_ratio: float | None = 10.0
    collapse_threshold: float = 0.9

    def __post_init__(self):
        if self.coherence_time <= 0:
            raise NonPositiveDuration("coherence_time must be positive")


@dataclass(frozen=True)
class ClassicalToken:
    serial: int
    denomination: int
    acquired_at: float


@dataclass(frozen=True)
class WalletEvent:
    at: float
    kind: str  # deposit | withdraw | collapse | tamper
    serial: int
    denomination: int
    detail: dict = field(default_factory=dict)


class Wallet:
    def __init__(self, wallet_id: str, verify_key: bytes, memory: MemoryModel):
        self.id = wallet_id
        self.verify_key = verify_key
        self.memory = memory
        self.notes: dict[int, Banknote] = {}
        self.tokens: dict[int, ClassicalToken] = {}
        self.events: list[WalletEvent] = []
        self.clock = 0.0

    def __repr__(self):
        return f"Wallet({self.id!r}, balance={self.balance_tokens()}, notes={len(self.live_serials())})"

    def live_serials(self) -> list[int]:
        return [s for s, n in self.notes.items() if n.status is NoteStatus.Live]

    def balance_tokens(self) -> int:
        return sum(t.denomination for t in self.tokens.values())

    def deposit(self, note: Banknote, now: float | None = None) -> Wallet:
        now = self.clock if now is None else now
        if note.serial in self.notes and self.notes[note.serial].status is NoteStatus.Live:
            raise DuplicateSerial(f"serial {note.serial:032x} already held by {self.id}")
        if not verify_tag(self.verify_key, note):
            raise BadTag(f"authentication tag mismatch on serial {note.serial:032x}")
        if note.status is not NoteStatus.Live or note.state is None:
            raise DeadNote(f"serial {note.serial:032x} is {note.status.value}")
        self.notes[note.serial] = note
        self.tokens[note.serial] = ClassicalToken(note.serial, note.denomination, now)
        self.events.append(WalletEvent(now, "deposit", note.serial, note.denomination))
        self._check_collapse(note, now)
        return self

    def withdraw(self, serial: int, now: float | None = None) -> Banknote:
        """Hand a Live note over for spending; the wallet keeps a Spent shell."""
        now = self.clock if now is None else now
        note = self._live(serial)
        out = Banknote(note.serial, note.denomination, note.auth_tag, note.codeword, note.state)
        note.retire(NoteStatus.Spent)
        del self.tokens[serial]
        self.events.append(WalletEvent(now, "withdraw", serial, note.denomination))
        return out

    def advance_time(self, dt: float, rng: SeededRng | None = None) -> Wallet:
        """Let stored states decohere for ``dt`` seconds. Deterministic; ``rng`` is unused."""
        if dt < 0:
            raise NonPositiveDuration(f"dt must be >= 0, got {dt}")
        if dt == 0:
            return self
        now = self.clock + dt
        tau = self.memory.coherence_time
        flip = collective_bit_flip(1.0 - math.exp(-dt / tau))
        residual = None
        if self.memory.residual_ratio is not None:
            residual = dephasing(1.0 - math.exp(-dt / (self.memory.residual_ratio * tau)))
        for serial in self.live_serials():
            note = self.notes[serial]
            rho = apply_channel(note.state, flip)
            if residual is not None:
                rho = apply_channel(apply_channel(rho, residual, [0]), residual, [1])
            note.state = rho
            self._check_collapse(note, now)
        self.clock = now
        return self

    def sync(self, now: float) -> Wallet:
        if now > self.clock:
            self.advance_time(now - self.clock)
        return self

    def decoded_fidelity(self, serial: int) -> float:
        note = self._live(serial)
        return fidelity(note.codeword, note.state)

    def tamper(self, serial: int, rng: SeededRng) -> Wallet:
        """Unauthorized computational-basis readout of a stored note."""
        note = self._live(serial)
        bits, post = measure(note.state, [0, 1], rng)
        f = fidelity(note.codeword, post)
        self._collapse(note, self.clock, "tamper", {"bits": bits, "fidelity": f})
        return self

    def _live(self, serial: int) -> Banknote:
        note = self.notes.get(serial)
        if note is None:
            raise UnknownSerial(f"serial {serial:032x} not in wallet {self.id}")
        if note.status is not NoteStatus.Live:
            raise DeadNote(f"serial {serial:032x} is {note.status.value}")
        return note

    def _check_collapse(self, note: Banknote, now: float) -> None:
        f = fidelity(note.codeword, note.state)
        if f < self.memory.collapse_threshold:
            self._collapse(note, now, "collapse", {"fidelity": f})

    def _collapse(self, note: Banknote, now: float, kind: str, detail: dict) -> None:
        note.retire(NoteStatus.Collapsed)
        self.tokens.pop(note.serial, None)
        self.events.append(WalletEvent(now, kind, note.serial, note.denomination, detail))

    def check_invariants(self) -> None:
        live = set(self.live_serials())
        if live != set(self.tokens):
            raise InvariantViolation(f"wallet {self.id}: token/note bijection broken")
        for s in live:
            note, token = self.notes[s], self.tokens[s]
            if note.state is None or (token.serial, token.denomination) != (note.serial, note.denomination):
                raise InvariantViolation(f"wallet {self.id}: token for {s:032x} out of sync")
        if self.balance_tokens() != sum(self.notes[s].denomination for s in live):
            raise InvariantViolation(f"wallet {self.id}: balance mismatch")

    def snapshot(self) -> dict:
        """Classical-only export; amplitudes are deliberately left out."""
        return {
            "id": self.id,
            "clock": self.clock,
            "balance": self.balance_tokens(),
            "notes": [
                {"serial": f"{s:032x}", "denomination": n.denomination, "status": n.status.value}
                for s, n in sorted(self.notes.items())
            ],
            "tokens": [
                {"serial": f"{s:032x}", "denomination": t.denomination, "acquired_at": t.acquired_at}
                for s, t in sorted(self.tokens.items())
            ],
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)
