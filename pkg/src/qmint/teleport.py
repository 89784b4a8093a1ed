"""Single-qubit teleportation as a two-party state machine.

Register order inside a session is (C, A, B): C is the money qubit, A the
sender's half of the shared pair and B the receiver's half.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import PairTooNoisy, SessionMismatch, WrongPhase
from .qstate import (
    PHI_PLUS,
    BellKind,
    State,
    X,
    Z,
    apply_gate,
    bell_measure,
    bell_project,
    fidelity,
    tensor,
)
from .rng import SeededRng

DEFAULT_INFIDELITY_BUDGET = 0.5

# Gates applied to the receiver qubit, in order (PsiMinus: X first, then Z).
CORRECTIONS = {
    BellKind.PhiPlus: (),
    BellKind.PhiMinus: (Z,),
    BellKind.PsiPlus: (X,),
    BellKind.PsiMinus: (X, Z),
}


class Phase(str, enum.Enum):
    Init = "Init"
    BellMeasured = "BellMeasured"
    ClassicalSent = "ClassicalSent"
    Corrected = "Corrected"
    Done = "Done"
    Aborted = "Aborted"


_WIRE = struct.Struct("<16sBd")


@dataclass(frozen=True)
class ClassicalMessage:
    session_id: bytes
    outcome: BellKind
    sent_at: float

    @property
    def bits(self) -> tuple[int, int]:
        return self.outcome.bits

    def to_bytes(self) -> bytes:
        """16-byte session id, one byte whose two low bits carry the outcome, float64 timestamp."""
        return _WIRE.pack(self.session_id, self.outcome.code, self.sent_at)

    @classmethod
    def from_bytes(cls, data: bytes) -> ClassicalMessage:
        sid, code, at = _WIRE.unpack(data)
        if code > 3:
            raise ValueError(f"payload byte {code:#x} carries more than two bits")
        return cls(sid, BellKind.from_code(code), at)


def compose(money: State, pair: State, infidelity_budget: float = DEFAULT_INFIDELITY_BUDGET) -> State:
    """``money_C (x) pair_AB``; refuses pairs too far from ``|Phi+>``."""
    if money.num_qubits != 1 or pair.num_qubits != 2:
        raise ValueError("teleportation needs a 1-qubit money state and a 2-qubit pair")
    f = fidelity(PHI_PLUS, pair)
    if f < 1.0 - infidelity_budget:
        raise PairTooNoisy(f"pair fidelity {f:.4f} below budget {1 - infidelity_budget:.4f}")
    return tensor(money, pair)


class TeleportSession:
    def __init__(
        self,
        money: State,
        pair: State,
        sender: str = "alice",
        receiver: str = "bob",
        session_id: bytes = bytes(16),
        started_at: float = 0.0,
        infidelity_budget: float = DEFAULT_INFIDELITY_BUDGET,
    ):
        self.joint = compose(money, pair, infidelity_budget)
        self.money = money
        self.sender = sender
        self.receiver = receiver
        self.session_id = session_id
        self.phase = Phase.Init
        self.outcome: BellKind | None = None
        self.received: State | None = None
        self.started_at = started_at
        self.finished_at: float | None = None

    def _require(self, phase: Phase) -> None:
        if self.phase is not phase:
            raise WrongPhase(f"session in {self.phase.value}, expected {phase.value}")

    def sender_step(self, rng: SeededRng, now: float = 0.0, forced: BellKind | None = None) -> ClassicalMessage:
        """Bell-measure (C, A). ``forced`` selects an outcome branch instead of sampling."""
        self._require(Phase.Init)
        if forced is None:
            kind, joint = bell_measure(self.joint, 0, 1, rng)
        else:
            _, joint = bell_project(self.joint, 0, 1, forced)
            kind = forced
        self.joint, self.outcome, self.phase = joint, kind, Phase.BellMeasured
        return ClassicalMessage(self.session_id, kind, now)

    def mark_sent(self) -> None:
        self._require(Phase.BellMeasured)
        self.phase = Phase.ClassicalSent

    def receiver_step(self, msg: ClassicalMessage, now: float = 0.0) -> State:
        self._require(Phase.ClassicalSent)
        if msg.session_id != self.session_id:
            raise SessionMismatch("classical message belongs to another session")
        joint = self.joint
        for gate in CORRECTIONS[msg.outcome]:
            joint = apply_gate(joint, gate, [2])
        self.joint, self.phase = joint, Phase.Corrected
        self.received = joint.discard([0, 1])
        self.phase = Phase.Done
        self.finished_at = now
        return self.received

    def abort(self, now: float = 0.0) -> None:
        """Drop the session; whatever the receiver held is discarded, never duplicated."""
        if self.phase in (Phase.Done, Phase.Aborted):
            raise WrongPhase(f"cannot abort a session in {self.phase.value}")
        self.phase = Phase.Aborted
        self.received = None
        self.finished_at = now

    def sender_residual(self) -> State:
        return self.joint.partial_trace([0, 1])

    def receiver_marginal(self) -> State:
        return self.joint.partial_trace([2])

    def fidelity(self) -> float:
        if self.received is None:
            raise WrongPhase("no received state yet")
        return fidelity(self.money, self.received)


def teleport(
    money: State,
    pair: State,
    rng: SeededRng,
    forced: BellKind | None = None,
    infidelity_budget: float = DEFAULT_INFIDELITY_BUDGET,
) -> TeleportSession:
    """Run a session to completion with no network in between."""
    s = TeleportSession(money, pair, infidelity_budget=infidelity_budget)
    msg = s.sender_step(rng, forced=forced)
    s.mark_sent()
    s.receiver_step(msg)
    return s
