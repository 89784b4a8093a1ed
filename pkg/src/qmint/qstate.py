"""Dense statevector / density-matrix engine for small registers.

Qubit 0 is the leftmost ket label (big-endian amplitude ordering), so the
amplitude of ``|q0 q1 ... q_{n-1}>`` sits at index ``sum(q_k << (n-1-k))``.
Every operation returns a new value; states are never mutated in place.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadTargets, CapacityExceeded, DimensionMismatch
from .rng import SeededRng

NORM_TOL = 1e-9
PHASE_TOL = 1e-12
MAX_QUBITS = 8
MAX_DENSITY_QUBITS = 5


def _num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two >= 2")
    return n


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise BadTargets(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise BadTargets(f"target {t} out of range for {n} qubits")
    return targets


def _apply_on_axes(tensor: np.ndarray, matrix: np.ndarray, axes: list[int]) -> np.ndarray:
    # Contract ``matrix`` into the listed tensor axes (each of size 2).
    k = len(axes)
    moved = np.moveaxis(tensor, axes, list(range(k)))
    shape = moved.shape
    out = (matrix @ moved.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(out, list(range(k)), axes)


def _marginal(diag_probs: np.ndarray, qubits: list[int], n: int) -> np.ndarray:
    p = diag_probs.reshape([2] * n)
    others = tuple(i for i in range(n) if i not in qubits)
    p = p.sum(axis=others) if others else p
    # Remaining axes are in ascending qubit order; reorder to the caller's order.
    order = sorted(qubits)
    p = np.transpose(p, [order.index(q) for q in qubits])
    return p.reshape(-1)


def _bits_of(index: int, k: int) -> tuple[int, ...]:
    return tuple((index >> (k - 1 - i)) & 1 for i in range(k))


def _projector_slice(qubits: list[int], bits: Sequence[int], n: int):
    idx: list = [slice(None)] * n
    for q, b in zip(qubits, bits):
        idx[q] = int(b)
    return tuple(idx)


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized statevector on 1..8 qubits with canonical global phase."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = _num_qubits(amps.size)
        if n > MAX_QUBITS:
            raise CapacityExceeded(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm^2 = {norm})")
        amps = _canonical_phase(amps)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, values) -> PureState:
        amps = np.asarray(values, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector cannot be normalized")
        return cls(amps / norm)

    @classmethod
    def basis(cls, bits: str) -> PureState:
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.amplitudes.size)

    def __eq__(self, other):
        if not isinstance(other, PureState):
            return NotImplemented
        return self.amplitudes.shape == other.amplitudes.shape and bool(
            np.allclose(self.amplitudes, other.amplitudes, atol=NORM_TOL)
        )

    __hash__ = None

    def __repr__(self):
        return f"PureState({np.round(self.amplitudes, 6).tolist()})"

    def digest(self) -> str:
        return hashlib.sha256(self.amplitudes.tobytes()).hexdigest()

    def inner(self, other: PureState) -> complex:
        """``<self|other>``."""
        if self.num_qubits != other.num_qubits:
            raise DimensionMismatch("inner product of registers of different size")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def evolve(self, matrix: np.ndarray, targets: Sequence[int]) -> PureState:
        n = self.num_qubits
        targets = _check_targets(targets, n)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2 ** len(targets),) * 2:
            raise DimensionMismatch(f"operator shape {matrix.shape} vs {len(targets)} targets")
        psi = _apply_on_axes(self.amplitudes.reshape([2] * n), matrix, targets)
        return PureState.normalized(psi.reshape(-1))

    def probabilities(self, qubits: Sequence[int]) -> np.ndarray:
        """Born probabilities of every computational outcome on ``qubits``."""
        n = self.num_qubits
        qubits = _check_targets(qubits, n)
        return _marginal(np.abs(self.amplitudes) ** 2, qubits, n)

    def project(self, qubits: Sequence[int], bits: Sequence[int]) -> tuple[float, PureState]:
        """Probability of ``bits`` on ``qubits`` and the renormalized post-state."""
        n = self.num_qubits
        qubits = _check_targets(qubits, n)
        psi = self.amplitudes.reshape([2] * n)
        mask = np.zeros_like(psi)
        sl = _projector_slice(qubits, bits, n)
        mask[sl] = psi[sl]
        prob = float(np.vdot(mask, mask).real)
        if prob <= 0.0:
            raise ValueError(f"outcome {tuple(bits)} has zero probability")
        return prob, PureState.normalized(mask.reshape(-1))

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def partial_trace(self, keep: Sequence[int]) -> DensityMatrix:
        n = self.num_qubits
        keep = _check_targets(keep, n)
        drop = [q for q in range(n) if q not in keep]
        psi = np.moveaxis(self.amplitudes.reshape([2] * n), keep + drop, list(range(n)))
        m = psi.reshape(2 ** len(keep), -1)
        return DensityMatrix(m @ m.conj().T)

    def discard(self, qubits: Sequence[int]) -> PureState:
        """Drop qubits that are unentangled with the rest (e.g. after measurement)."""
        keep = [q for q in range(self.num_qubits) if q not in set(qubits)]
        return self.partial_trace(keep).to_pure()


def _canonical_phase(amps: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(amps) > NORM_TOL)
    if nz.size == 0:
        return amps
    lead = amps[nz[0]]
    if lead.imag == 0.0 and lead.real > 0.0:
        return amps
    out = amps * (abs(lead) / lead)
    out[nz[0]] = abs(lead)
    return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on 1..5 qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {m.shape}")
        n = _num_qubits(m.shape[0])
        if n > MAX_DENSITY_QUBITS:
            raise CapacityExceeded(f"{n} qubits exceeds the {MAX_DENSITY_QUBITS}-qubit density cap")
        if not np.all(np.isfinite(m)):
            raise ValueError("entries must be finite")
        if not np.allclose(m, m.conj().T, atol=NORM_TOL):
            raise ValueError("density matrix not Hermitian")
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"trace {tr} != 1")
        if np.linalg.eigvalsh(m).min() < -NORM_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, n: int) -> DensityMatrix:
        return cls(np.eye(2**n) / 2**n)

    @classmethod
    def renormalized(cls, m) -> DensityMatrix:
        m = np.asarray(m, dtype=complex)
        return cls(m / np.trace(m).real)

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.matrix.shape[0])

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and bool(
            np.allclose(self.matrix, other.matrix, atol=NORM_TOL)
        )

    __hash__ = None

    def digest(self) -> str:
        return hashlib.sha256(self.matrix.tobytes()).hexdigest()

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def to_density(self) -> DensityMatrix:
        return self

    def to_pure(self, tol: float = 1e-7) -> PureState:
        """Dominant eigenvector; raises if the state is not pure within ``tol``."""
        vals, vecs = np.linalg.eigh(self.matrix)
        if vals[-1] < 1.0 - tol:
            raise ValueError(f"state is mixed (largest eigenvalue {vals[-1]:.3g})")
        return PureState.normalized(vecs[:, -1])

    def _tensor(self) -> np.ndarray:
        return self.matrix.reshape([2] * (2 * self.num_qubits))

    def evolve(self, matrix: np.ndarray, targets: Sequence[int]) -> DensityMatrix:
        n = self.num_qubits
        targets = _check_targets(targets, n)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2 ** len(targets),) * 2:
            raise DimensionMismatch(f"operator shape {matrix.shape} vs {len(targets)} targets")
        t = _apply_on_axes(self._tensor(), matrix, targets)
        t = _apply_on_axes(t, matrix.conj(), [n + q for q in targets])
        return DensityMatrix.renormalized(t.reshape(2**n, 2**n))

    def probabilities(self, qubits: Sequence[int]) -> np.ndarray:
        n = self.num_qubits
        qubits = _check_targets(qubits, n)
        diag = np.clip(np.diag(self.matrix).real, 0.0, None)
        return _marginal(diag, qubits, n)

    def project(self, qubits: Sequence[int], bits: Sequence[int]) -> tuple[float, DensityMatrix]:
        n = self.num_qubits
        qubits = _check_targets(qubits, n)
        t = self._tensor()
        out = np.zeros_like(t)
        side = _projector_slice(qubits, bits, n)
        full = side + side
        out[full] = t[full]
        m = out.reshape(2**n, 2**n)
        prob = float(np.trace(m).real)
        if prob <= 0.0:
            raise ValueError(f"outcome {tuple(bits)} has zero probability")
        return prob, DensityMatrix.renormalized(m)

    def partial_trace(self, keep: Sequence[int]) -> DensityMatrix:
        n = self.num_qubits
        keep = _check_targets(keep, n)
        drop = [q for q in range(n) if q not in keep]
        perm = keep + drop
        t = np.transpose(self._tensor(), perm + [n + q for q in perm])
        dk, dd = 2 ** len(keep), 2 ** len(drop)
        t = t.reshape(dk, dd, dk, dd)
        return DensityMatrix(np.einsum("ajbj->ab", t))

    def discard(self, qubits: Sequence[int]) -> DensityMatrix:
        keep = [q for q in range(self.num_qubits) if q not in set(qubits)]
        return self.partial_trace(keep)

    def expectation(self, operator: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ np.asarray(operator)))


State = PureState | DensityMatrix


def _is_unitary(m: np.ndarray) -> bool:
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=NORM_TOL))


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise DimensionMismatch(f"gate must be 2x2 or 4x4, got {m.shape}")
        if not _is_unitary(m):
            raise ValueError(f"gate {self.name or ''} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self) -> int:
        return 1 if self.matrix.shape[0] == 2 else 2


_S2 = 1 / np.sqrt(2)
I = Gate(np.eye(2), "I")
X = Gate([[0, 1], [1, 0]], "X")
Y = Gate([[0, -1j], [1j, 0]], "Y")
Z = Gate([[1, 0], [0, -1]], "Z")
H = Gate(np.array([[1, 1], [1, -1]]) * _S2, "H")
S = Gate([[1, 0], [0, 1j]], "S")
CNOT = Gate([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], "CNOT")
CZ = Gate(np.diag([1, 1, 1, -1]), "CZ")
SWAP = Gate([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], "SWAP")


def ry(theta: float) -> Gate:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return Gate([[c, -s], [s, c]], f"RY({theta:g})")


class BellKind(enum.Enum):
    """The four Bell states, keyed by the two bits read after CNOT then H."""

    PhiPlus = (0, 0)
    PhiMinus = (1, 0)
    PsiPlus = (0, 1)
    PsiMinus = (1, 1)

    @property
    def bits(self) -> tuple[int, int]:
        return self.value

    @property
    def code(self) -> int:
        b1, b2 = self.value
        return (b1 << 1) | b2

    @classmethod
    def from_bits(cls, b1: int, b2: int) -> BellKind:
        return cls((int(b1), int(b2)))

    @classmethod
    def from_code(cls, code: int) -> BellKind:
        return cls.from_bits((code >> 1) & 1, code & 1)

    def state(self) -> PureState:
        return BELL_STATES[self]


BELL_STATES = {
    BellKind.PhiPlus: PureState(np.array([1, 0, 0, 1]) * _S2),
    BellKind.PhiMinus: PureState(np.array([1, 0, 0, -1]) * _S2),
    BellKind.PsiPlus: PureState(np.array([0, 1, 1, 0]) * _S2),
    BellKind.PsiMinus: PureState(np.array([0, 1, -1, 0]) * _S2),
}
PHI_PLUS = BELL_STATES[BellKind.PhiPlus]
KET_0 = PureState.basis("0")
KET_1 = PureState.basis("1")
KET_PLUS = PureState(np.array([1, 1]) * _S2)
KET_MINUS = PureState(np.array([1, -1]) * _S2)


def tensor(a: State, b: State) -> State:
    """Kronecker product ``a (x) b``; mixed if either factor is mixed."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        if a.num_qubits + b.num_qubits > MAX_QUBITS:
            raise CapacityExceeded(
                f"{a.num_qubits}+{b.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit cap"
            )
        return PureState.normalized(np.kron(a.amplitudes, b.amplitudes))
    if a.num_qubits + b.num_qubits > MAX_DENSITY_QUBITS:
        raise CapacityExceeded(
            f"{a.num_qubits}+{b.num_qubits} qubits exceeds the {MAX_DENSITY_QUBITS}-qubit density cap"
        )
    return DensityMatrix.renormalized(np.kron(a.to_density().matrix, b.to_density().matrix))


def apply_gate(state: State, g: Gate, targets: Sequence[int]):
    if len(targets) != g.arity:
        raise BadTargets(f"gate {g.name} has arity {g.arity}, got {len(targets)} targets")
    return state.evolve(g.matrix, targets)


def outcome_probabilities(state: State, qubits: Sequence[int]) -> np.ndarray:
    return state.probabilities(qubits)


def measure(state: State, qubits: Sequence[int], rng: SeededRng):
    """Computational-basis measurement of ``qubits``.

    Returns ``(bits, post)`` where ``post`` is the renormalized projection.
    """
    probs = state.probabilities(qubits)
    k = len(qubits)
    idx = rng.choice_index(probs)
    bits = _bits_of(idx, k)
    _, post = state.project(qubits, bits)
    return list(bits), post


def _to_bell_frame(state: State, q1: int, q2: int):
    return apply_gate(apply_gate(state, CNOT, [q1, q2]), H, [q1])


def _from_bell_frame(state: State, q1: int, q2: int):
    return apply_gate(apply_gate(state, H, [q1]), CNOT, [q1, q2])


def bell_probabilities(state: State, q1: int, q2: int) -> dict[BellKind, float]:
    if q1 == q2:
        raise BadTargets("Bell measurement needs two distinct qubits")
    probs = _to_bell_frame(state, q1, q2).probabilities([q1, q2])
    return {BellKind.from_bits(*_bits_of(i, 2)): float(p) for i, p in enumerate(probs)}


def bell_project(state: State, q1: int, q2: int, kind: BellKind):
    """Force a Bell outcome. Returns ``(probability, post)``; post has (q1, q2) in ``kind``."""
    if q1 == q2:
        raise BadTargets("Bell measurement needs two distinct qubits")
    prob, post = _to_bell_frame(state, q1, q2).project([q1, q2], kind.bits)
    return prob, _from_bell_frame(post, q1, q2)


def bell_measure(state: State, q1: int, q2: int, rng: SeededRng):
    if q1 == q2:
        raise BadTargets("Bell measurement needs two distinct qubits")
    bits, post = measure(_to_bell_frame(state, q1, q2), [q1, q2], rng)
    return BellKind.from_bits(*bits), _from_bell_frame(post, q1, q2)


def fidelity(a: State, b: State) -> float:
    """``|<a|b>|^2`` for pure states; ``<psi|rho|psi>`` when one side is mixed."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatch(f"{a.num_qubits} vs {b.num_qubits} qubits")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
    if isinstance(a, DensityMatrix) and isinstance(b, PureState):
        a, b = b, a
    if isinstance(b, DensityMatrix) and isinstance(a, PureState):
        v = a.amplitudes
        return float(np.clip(np.vdot(v, b.matrix @ v).real, 0.0, 1.0))
    # Uhlmann fidelity for two mixed states.
    from scipy.linalg import sqrtm

    ra = sqrtm(a.matrix)
    val = np.trace(sqrtm(ra @ b.matrix @ ra)).real ** 2
    return float(np.clip(val, 0.0, 1.0))


def haar_state(num_qubits: int, rng: SeededRng) -> PureState:
    d = 2**num_qubits
    z = rng.normal(d) + 1j * rng.normal(d)
    return PureState.normalized(z)


def haar_unitary(dim: int, rng: SeededRng) -> np.ndarray:
    z = (rng.normal((dim, dim)) + 1j * rng.normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def werner_state(visibility: float) -> DensityMatrix:
    """``v |Phi+><Phi+| + (1 - v) I/4``."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility {visibility} outside [0, 1]")
    phi = PHI_PLUS.to_density().matrix
    return DensityMatrix(visibility * phi + (1 - visibility) * np.eye(4) / 4)
