"""Verification protocols: weak values, non-destructive Bell readout, CHSH."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, OrthogonalPostSelection, TooFewTrials
from .qstate import (
    CNOT,
    H,
    NORM_TOL,
    BellKind,
    DensityMatrix,
    PureState,
    State,
    apply_gate,
    fidelity,
    measure,
    ry,
    tensor,
    KET_0,
)
from .rng import SeededRng

CANONICAL_ANGLES = (0.0, math.pi / 4, math.pi / 8, -math.pi / 8)
_PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
}


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise DimensionMismatch(f"observable must be 2x2 or 4x4, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=NORM_TOL):
            raise ValueError("observable is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pauli(cls, label: str) -> Observable:
        m = np.array([[1.0]])
        for ch in label:
            m = np.kron(m, _PAULI[ch])
        return cls(m)

    @property
    def num_qubits(self) -> int:
        return 1 if self.matrix.shape[0] == 2 else 2


def _post_selection_overlap(psi_i: PureState, psi_f: PureState, obs: Observable) -> complex:
    if not (psi_i.num_qubits == psi_f.num_qubits == obs.num_qubits):
        raise DimensionMismatch("pre-, post-selected states and observable must share a register")
    overlap = psi_f.inner(psi_i)
    if abs(overlap) <= NORM_TOL:
        raise OrthogonalPostSelection(f"<psi_f|psi_i> = {overlap:.3g}")
    return overlap


def weak_value(psi_i: PureState, psi_f: PureState, obs: Observable) -> complex:
    overlap = _post_selection_overlap(psi_i, psi_f, obs)
    return complex(np.vdot(psi_f.amplitudes, obs.matrix @ psi_i.amplitudes) / overlap)


def _coupling(obs: Observable, epsilon: float) -> np.ndarray:
    # sum_k |v_k><v_k| (x) RY(2 eps lambda_k): pointer turns by eps*lambda_k per eigenspace.
    vals, vecs = np.linalg.eigh(obs.matrix)
    d = obs.matrix.shape[0]
    u = np.zeros((2 * d, 2 * d), dtype=complex)
    for lam, v in zip(vals, vecs.T):
        u += np.kron(np.outer(v, v.conj()), ry(2 * epsilon * lam).matrix)
    return u


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon <= 0.2:
        raise ValueError(f"coupling {epsilon} outside (0, 0.2]")


def weak_pointer_shift(psi_i: PureState, psi_f: PureState, obs: Observable, epsilon: float) -> float:
    """Mean pointer rotation after weak coupling and post-selection on ``psi_f``.

    The pointer is one ancilla qubit starting in ``|0>``; the deflection is
    read as half the Bloch angle in the X-Z plane, so an eigenstate with
    eigenvalue ``lam`` deflects by exactly ``epsilon * lam``.
    """
    _check_epsilon(epsilon)
    _post_selection_overlap(psi_i, psi_f, obs)
    n = psi_i.num_qubits
    joint = tensor(psi_i, KET_0).evolve(_coupling(obs, epsilon), range(n + 1))
    pointer = psi_f.amplitudes.conj() @ joint.amplitudes.reshape(2**n, 2)
    if np.vdot(pointer, pointer).real <= NORM_TOL**2:
        raise OrthogonalPostSelection("post-selection branch vanished after coupling")
    pointer = pointer / np.linalg.norm(pointer)
    x = 2 * (pointer[0].conj() * pointer[1]).real
    z = abs(pointer[0]) ** 2 - abs(pointer[1]) ** 2
    return 0.5 * math.atan2(x, z)


def weak_disturbance(psi_i: PureState, obs: Observable, epsilon: float) -> float:
    """Fidelity of the system with its input after the weak coupling (no post-selection)."""
    _check_epsilon(epsilon)
    n = psi_i.num_qubits
    joint = tensor(psi_i, KET_0).evolve(_coupling(obs, epsilon), range(n + 1))
    return fidelity(psi_i, joint.partial_trace(range(n)))


def nd_bell_discriminate(state: State, rng: SeededRng):
    """Identify a Bell state through two parity ancillas, leaving the pair intact.

    Ancilla 2 reads Z(x)Z parity through two CNOTs; ancilla 3 reads X(x)X
    parity by phase kickback between Hadamards. Only ancillas are measured.
    """
    if state.num_qubits != 2:
        raise DimensionMismatch("Bell discrimination needs a two-qubit state")
    anc = PureState.basis("00")
    if isinstance(state, DensityMatrix):
        anc = anc.to_density()
    s = tensor(state, anc)
    s = apply_gate(s, CNOT, [0, 2])
    s = apply_gate(s, CNOT, [1, 2])
    s = apply_gate(s, H, [3])
    s = apply_gate(s, CNOT, [3, 0])
    s = apply_gate(s, CNOT, [3, 1])
    s = apply_gate(s, H, [3])
    (zz, xx), post = measure(s, [2, 3], rng)
    return BellKind.from_bits(xx, zz), post.discard([2, 3])


def _spin_axis(theta: float) -> np.ndarray:
    return math.cos(2 * theta) * _PAULI["Z"] + math.sin(2 * theta) * _PAULI["X"]


def correlator(state: State, theta_a: float, theta_b: float) -> float:
    if state.num_qubits != 2:
        raise DimensionMismatch("CHSH needs a two-qubit state")
    op = np.kron(_spin_axis(theta_a), _spin_axis(theta_b))
    if isinstance(state, PureState):
        v = state.amplitudes
        return float(np.vdot(v, op @ v).real)
    return float(state.expectation(op).real)


def chsh_value(state: State, angles: Sequence[float] = CANONICAL_ANGLES) -> float:
    """``S = E(a,b) + E(a,b') + E(a',b) - E(a',b')`` with ``angles = (a, a', b, b')``."""
    a, a2, b, b2 = angles
    e = lambda x, y: correlator(state, x, y)  # noqa: E731
    return e(a, b) + e(a, b2) + e(a2, b) - e(a2, b2)


_CHSH_SIGNS = ((0, 2, 1), (0, 3, 1), (1, 2, 1), (1, 3, -1))


def setting_probabilities(state: State, theta_a: float, theta_b: float) -> np.ndarray:
    """Outcome distribution over (++, +-, -+, --) for spin measurements at the given angles."""
    s = state.evolve(ry(-2 * theta_a).matrix, [0]).evolve(ry(-2 * theta_b).matrix, [1])
    return s.probabilities([0, 1])


def sample_chsh(state: State, trials: int, rng: SeededRng, angles=CANONICAL_ANGLES):
    """Estimate S from ``trials`` shots split evenly across the four settings.

    Returns ``(S_hat, sigma)`` with sigma the binomial standard error.
    """
    per = trials // 4
    s_hat, var = 0.0, 0.0
    for ia, ib, sign in _CHSH_SIGNS:
        counts = rng.multinomial(per, setting_probabilities(state, angles[ia], angles[ib]))
        e_hat = (counts[0] - counts[1] - counts[2] + counts[3]) / per
        s_hat += sign * e_hat
        var += (1.0 - e_hat**2) / per
    return float(s_hat), math.sqrt(var)


class Verdict(str, enum.Enum):
    Authentic = "Authentic"
    TamperDetected = "TamperDetected"
    Inconclusive = "Inconclusive"


class VerifyMode(str, enum.Enum):
    Correlation = "Correlation"
    CHSH = "CHSH"


@dataclass(frozen=True, eq=False)
class EntangledVerificationPair:
    """Wallet half is qubit 0, bank half is qubit 1."""

    joint_state: State

    def __post_init__(self):
        if self.joint_state.num_qubits != 2:
            raise DimensionMismatch("verification pair must hold exactly two qubits")

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[complex]) -> EntangledVerificationPair:
        c0, c1 = coeffs
        return cls(PureState([c0, 0, 0, c1]))


@dataclass(frozen=True)
class VerifyResult:
    verdict: Verdict
    s_value: float | None
    trials: int
    seed: int
    sigma: float | None = None
    correlation: float | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "s_value": self.s_value,
            "trials": self.trials,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def bank_measure(pair: EntangledVerificationPair, rng: SeededRng):
    """Bank reads its half in the computational basis; returns ``(k, wallet state)``."""
    (k,), post = measure(pair.joint_state, [1], rng)
    return k, post.discard([1])


def entangled_verify(
    pair: EntangledVerificationPair,
    mode: VerifyMode,
    trials: int,
    rng: SeededRng,
    sigmas: float = 3.0,
    max_mismatch: float = 0.0,
) -> VerifyResult:
    """Statistical verification of a wallet/bank pair.

    CHSH mode is Authentic iff ``S_hat > 2 + sigmas * sigma`` and flags
    tampering when ``S_hat <= 2``; the gap between is Inconclusive.
    Correlation mode compares bank and wallet computational readouts and
    flags tampering when the mismatch rate exceeds ``max_mismatch``.
    """
    if trials < 100:
        raise TooFewTrials(f"statistical verification needs >= 100 trials, got {trials}")
    mode = VerifyMode(mode)
    state = pair.joint_state
    if mode is VerifyMode.CHSH:
        s_hat, sigma = sample_chsh(state, trials, rng)
        if s_hat > 2.0 + sigmas * sigma:
            verdict = Verdict.Authentic
        elif s_hat <= 2.0:
            verdict = Verdict.TamperDetected
        else:
            verdict = Verdict.Inconclusive
        return VerifyResult(verdict, s_hat, trials, rng.seed, sigma=sigma)
    counts = rng.multinomial(trials, state.probabilities([0, 1]))
    agreement = (counts[0] + counts[3]) / trials
    verdict = Verdict.Authentic if 1.0 - agreement <= max_mismatch else Verdict.TamperDetected
    return VerifyResult(verdict, None, trials, rng.seed, correlation=float(agreement))
