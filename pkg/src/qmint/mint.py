"""Issuance of serial-numbered quantum banknotes.

Denominations are encoded twice: classically in the authenticated metadata
and in the amplitudes of the stored codeword. The keyed-hash tag is
HMAC-SHA256 over the canonical JSON form of ``(serial, denomination)``.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import json
import math
from dataclasses import dataclass, field

from .errors import UnknownDenomination
from .noise import LogicalQubit, dfs_encode
from .qstate import DensityMatrix, PureState
from .rng import SeededRng

DENOMINATIONS = tuple(10**k for k in range(7))
CODEBOOK_STEP = math.pi / 16


class NoteStatus(str, enum.Enum):
    Live = "Live"
    Spent = "Spent"
    Collapsed = "Collapsed"


class Encoding(str, enum.Enum):
    DFS = "dfs"
    # alpha|00> + beta|11>, unprotected against collective flips
    RAW = "raw"


def denomination_state(denom: int) -> LogicalQubit:
    try:
        index = DENOMINATIONS.index(denom)
    except ValueError:
        raise UnknownDenomination(f"{denom} is not one of {DENOMINATIONS}") from None
    theta = (index + 1) * CODEBOOK_STEP
    return LogicalQubit(math.cos(theta), math.sin(theta))


def codeword(denom: int, encoding: Encoding = Encoding.DFS) -> PureState:
    q = denomination_state(denom)
    if Encoding(encoding) is Encoding.DFS:
        return dfs_encode(q)
    return PureState([q.alpha, 0, 0, q.beta])


def _tag_message(serial: int, denomination: int) -> bytes:
    body = {"denomination": int(denomination), "serial": f"{serial:032x}"}
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


def compute_tag(key: bytes, serial: int, denomination: int) -> bytes:
    return hmac.new(key, _tag_message(serial, denomination), hashlib.sha256).digest()


@dataclass(eq=False)
class Banknote:
    """Classical metadata plus a handle to the stored quantum state.

    ``codeword`` is the state the note must decode to; ``state`` is what the
    holder's memory currently contains (``None`` once Spent or Collapsed).
    """

    serial: int
    denomination: int
    auth_tag: bytes
    codeword: PureState
    state: DensityMatrix | None
    status: NoteStatus = NoteStatus.Live

    def metadata(self) -> dict:
        return {
            "auth_tag": self.auth_tag.hex(),
            "denomination": self.denomination,
            "serial": f"{self.serial:032x}",
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_metadata_json(cls, text: str, word: PureState | None = None) -> Banknote:
        """Rebuild a note shell from its wire form. The result carries no live state."""
        meta = json.loads(text)
        denom = int(meta["denomination"])
        return cls(
            serial=int(meta["serial"], 16),
            denomination=denom,
            auth_tag=bytes.fromhex(meta["auth_tag"]),
            codeword=word if word is not None else codeword(denom),
            state=None,
            status=NoteStatus.Spent,
        )

    def retire(self, status: NoteStatus) -> None:
        self.status = status
        self.state = None


@dataclass
class MintAuthority:
    key: bytes
    minted_total: int = 0
    issued: dict = field(default_factory=dict)
    _counter: int = 0

    @classmethod
    def create(cls, rng: SeededRng) -> MintAuthority:
        return cls(key=rng.token_bytes(32))

    def next_serial(self, rng: SeededRng) -> int:
        # High 64 bits: monotone counter (guarantees uniqueness); low 64 bits: random.
        self._counter += 1
        return (self._counter << 64) | int.from_bytes(rng.token_bytes(8), "big")


def mint(
    authority: MintAuthority,
    denom: int,
    rng: SeededRng,
    encoding: Encoding = Encoding.DFS,
) -> Banknote:
    word = codeword(denom, encoding)
    serial = authority.next_serial(rng)
    note = Banknote(
        serial=serial,
        denomination=denom,
        auth_tag=compute_tag(authority.key, serial, denom),
        codeword=word,
        state=word.to_density(),
    )
    authority.issued[serial] = denom
    authority.minted_total += denom
    return note


def verify_tag(key: bytes, note: Banknote) -> bool:
    return hmac.compare_digest(compute_tag(key, note.serial, note.denomination), note.auth_tag)
