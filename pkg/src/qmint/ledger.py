"""Append-only monetary ledger for the classical and quantum regimes.

Classical regime: every loan creates deposit money, so the running total is
``M_existing + sum(loans)``. Quantum regime: circulating money is the set of
Live notes, new lending must be backed by notes the lender already holds,
and the circulating total can never exceed what the mint issued.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

from .errors import InvariantViolation, UnknownSerial, UnorderedLog, WrongRegime


class Regime(str, enum.Enum):
    Classical = "Classical"
    Quantum = "Quantum"


class EntryKind(str, enum.Enum):
    Mint = "Mint"
    LoanIssued = "LoanIssued"
    LoanRejected = "LoanRejected"
    Transfer = "Transfer"
    DoubleSpendRejected = "DoubleSpendRejected"
    Collapse = "Collapse"


@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    at: float
    kind: EntryKind
    amount: int
    actor: str
    m_total_after: int
    detail: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "kind": self.kind.value,
            "amount": self.amount,
            "actor": self.actor,
            "m_total_after": self.m_total_after,
            **self.detail,
        }


@dataclass
class SerialRegistry:
    live: set = field(default_factory=set)
    spent: set = field(default_factory=set)

    def register(self, serial: int) -> None:
        self.spent.discard(serial)
        self.live.add(serial)

    def register_spend(self, serial: int) -> bool:
        """True for the first spend of a Live serial, False for a repeat."""
        if serial in self.spent:
            return False
        if serial not in self.live:
            raise UnknownSerial(f"serial {serial:032x} is not registered")
        self.live.remove(serial)
        self.spent.add(serial)
        return True

    def retire(self, serial: int) -> None:
        self.live.discard(serial)


@dataclass
class MonetaryState:
    regime: Regime
    m_existing: int = 0
    m_quantum: int = 0
    loans_total: int = 0
    holdings: dict = field(default_factory=dict)  # bank -> {serial: denomination}

    def holding(self, bank: str) -> int:
        return sum(self.holdings.get(bank, {}).values())

    @property
    def circulating(self) -> int:
        return sum(sum(h.values()) for h in self.holdings.values())

    @property
    def m_total(self) -> int:
        if self.regime is Regime.Classical:
            return self.m_existing + self.loans_total
        return self.circulating


class Ledger:
    def __init__(self, regime: Regime | str = Regime.Quantum, m_existing: int = 0, relend: bool = False):
        self.state = MonetaryState(Regime(regime), m_existing=int(m_existing))
        self.registry = SerialRegistry()
        self.entries: list[LedgerEntry] = []
        # When set, notes received through a transfer may be spent again by the new holder.
        self.relend = relend

    def _append(self, kind: EntryKind, at: float, amount: int, actor: str, **detail) -> LedgerEntry:
        if self.entries and at < self.entries[-1].at:
            raise UnorderedLog(f"entry at {at} precedes {self.entries[-1].at}")
        entry = LedgerEntry(len(self.entries), at, kind, int(amount), actor, self.state.m_total, detail)
        self.entries.append(entry)
        return entry

    def _require(self, regime: Regime) -> None:
        if self.state.regime is not regime:
            raise WrongRegime(f"operation needs the {regime.value} regime")

    def mint(self, bank: str, serial: int, denomination: int, at: float) -> LedgerEntry:
        self._require(Regime.Quantum)
        self.state.holdings.setdefault(bank, {})[serial] = denomination
        self.state.m_quantum += denomination
        self.registry.register(serial)
        return self._append(EntryKind.Mint, at, denomination, bank, serials=[f"{serial:032x}"])

    def classical_loan(self, bank: str, amount: int, at: float) -> LedgerEntry:
        self._require(Regime.Classical)
        if amount <= 0:
            raise ValueError("loan amount must be positive")
        self.state.loans_total += amount
        return self._append(EntryKind.LoanIssued, at, amount, bank)

    def spendable(self, bank: str, exclude=()) -> dict[int, int]:
        held = self.state.holdings.get(bank, {})
        return {s: d for s, d in held.items() if s in self.registry.live and s not in exclude}

    def select_notes(self, bank: str, amount: int, exclude=()) -> list[int] | None:
        """Spendable serials summing exactly to ``amount``, largest first; None if impossible."""
        held = sorted(self.spendable(bank, exclude).items(), key=lambda kv: (-kv[1], kv[0]))
        picked, remaining = [], amount
        for serial, denom in held:
            if denom <= remaining:
                picked.append(serial)
                remaining -= denom
        return picked if remaining == 0 else None

    def plan_loan(self, bank: str, amount: int, exclude=()) -> tuple[list[int] | None, str]:
        """Notes backing a quantum loan, or ``(None, reason)`` when it cannot be funded."""
        self._require(Regime.Quantum)
        if amount <= 0:
            raise ValueError("loan amount must be positive")
        if sum(self.spendable(bank, exclude).values()) < amount:
            return None, "insufficient holdings"
        serials = self.select_notes(bank, amount, exclude)
        if serials is None:
            return None, "no exact note combination"
        return serials, ""

    def reject_loan(self, bank: str, amount: int, at: float, reason: str) -> LedgerEntry:
        return self._append(EntryKind.LoanRejected, at, amount, bank, reason=reason)

    def quantum_loan(self, bank: str, amount: int, at: float, borrower: str) -> LedgerEntry:
        serials, reason = self.plan_loan(bank, amount)
        if serials is None:
            return self.reject_loan(bank, amount, at, reason)
        return self._move(serials, bank, borrower, at, loan=True)

    def transfer(self, serial: int, src: str, dst: str, at: float, loan: bool = False) -> LedgerEntry:
        if serial not in self.state.holdings.get(src, {}):
            known = serial in self.registry.spent or any(serial in h for h in self.state.holdings.values())
            if not known:
                raise UnknownSerial(f"serial {serial:032x} is not circulating")
            return self._append(EntryKind.DoubleSpendRejected, at, 0, src, serials=[f"{serial:032x}"])
        return self._move([serial], src, dst, at, loan=loan)

    def _move(self, serials: list[int], src: str, dst: str, at: float, loan: bool = False) -> LedgerEntry:
        repeated = [s for s in serials if s not in self.registry.live]
        if repeated:
            return self._append(
                EntryKind.DoubleSpendRejected, at, 0, src, serials=[f"{s:032x}" for s in repeated]
            )
        moved = 0
        for s in serials:
            self.registry.register_spend(s)
            denom = self.state.holdings[src].pop(s)
            self.state.holdings.setdefault(dst, {})[s] = denom
            moved += denom
            if self.relend:
                self.registry.register(s)
        return self._append(
            EntryKind.Transfer, at, moved, src, to=dst, loan=loan, serials=[f"{s:032x}" for s in serials]
        )

    def collapse(self, serial: int, at: float) -> LedgerEntry:
        for bank, held in self.state.holdings.items():
            if serial in held:
                denom = held.pop(serial)
                self.registry.retire(serial)
                return self._append(EntryKind.Collapse, at, denom, bank, serials=[f"{serial:032x}"])
        raise UnknownSerial(f"serial {serial:032x} is not circulating")

    def check_invariants(self) -> None:
        st = self.state
        if st.regime is Regime.Quantum and st.circulating > st.m_quantum:
            raise InvariantViolation(f"circulating {st.circulating} exceeds minted {st.m_quantum}")
        if self.registry.live & self.registry.spent:
            raise InvariantViolation("serial both live and spent")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seq", "at", "kind", "amount", "actor", "m_total_after"])
        for e in self.entries:
            w.writerow([e.seq, repr(float(e.at)), e.kind.value, e.amount, e.actor, e.m_total_after])
        return buf.getvalue()


def supply_series(log: list[LedgerEntry]) -> list[tuple[float, int]]:
    """``(at, M_total)`` after each entry."""
    out = []
    for prev, cur in zip([None, *log], log):
        if prev is not None and (cur.seq <= prev.seq or cur.at < prev.at):
            raise UnorderedLog(f"entry seq {cur.seq} out of order")
        out.append((cur.at, cur.m_total_after))
    return out


def replay_check(log: list[LedgerEntry], regime: Regime | str, m_existing: int = 0) -> None:
    """Recompute supply totals from entry amounts alone and compare with the recorded ones."""
    regime = Regime(regime)
    total = m_existing if regime is Regime.Classical else 0
    minted = 0
    for e in log:
        if e.kind is EntryKind.LoanIssued:
            total += e.amount
        elif e.kind is EntryKind.Mint:
            total += e.amount
            minted += e.amount
        elif e.kind is EntryKind.Collapse:
            total -= e.amount
        if e.m_total_after != total:
            raise InvariantViolation(f"seq {e.seq}: recorded {e.m_total_after}, replayed {total}")
        if regime is Regime.Quantum and total > minted:
            raise InvariantViolation(f"seq {e.seq}: circulating {total} exceeds minted {minted}")
