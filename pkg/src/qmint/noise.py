"""Kraus-form noise channels and the two-qubit decoherence-free code.

Codewords live in the +1 eigenspace of ``X (x) X``: logical ``|0>`` is
``|Phi+>`` and logical ``|1>`` is ``|Psi+>``. Any superposition is then
exactly invariant under collective bit flips, which is not true of a
``{Psi+, Psi-}`` code since those two states sit in opposite sectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadProbability, DimensionMismatch, OutsideCodeSpace
from .qstate import (
    BELL_STATES,
    NORM_TOL,
    BellKind,
    DensityMatrix,
    PureState,
    State,
    _apply_on_axes,
    _check_targets,
    _num_qubits,
    fidelity,
)

CODE_TOL = 1e-6

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class Channel:
    kraus_ops: tuple
    name: str = ""

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        _num_qubits(d)
        if any(k.shape != (d, d) for k in ops):
            raise DimensionMismatch("Kraus operators must share one square shape")
        total = sum(k.conj().T @ k for k in ops)
        if not np.allclose(total, np.eye(d), atol=NORM_TOL):
            raise ValueError(f"Kraus operators of {self.name or 'channel'} are not complete")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def num_qubits(self) -> int:
        return _num_qubits(self.kraus_ops[0].shape[0])

    def completeness_error(self) -> float:
        total = sum(k.conj().T @ k for k in self.kraus_ops)
        return float(np.abs(total - np.eye(total.shape[0])).max())


def _check_p(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise BadProbability(f"probability {p} outside [0, 1]")
    return float(p)


def identity_channel(num_qubits: int = 1) -> Channel:
    return Channel((np.eye(2**num_qubits),), "identity")


def collective_bit_flip(p: float) -> Channel:
    p = _check_p(p)
    return Channel(
        (np.sqrt(1 - p) * np.eye(4), np.sqrt(p) * np.kron(_X, _X)), f"collective_bit_flip({p:g})"
    )


def collective_dephasing(p: float) -> Channel:
    p = _check_p(p)
    return Channel(
        (np.sqrt(1 - p) * np.eye(4), np.sqrt(p) * np.kron(_Z, _Z)), f"collective_dephasing({p:g})"
    )


def dephasing(p: float) -> Channel:
    """Single-qubit phase flip with probability ``p``."""
    p = _check_p(p)
    return Channel((np.sqrt(1 - p) * _I2, np.sqrt(p) * _Z), f"dephasing({p:g})")


def amplitude_damping(gamma: float) -> Channel:
    gamma = _check_p(gamma)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return Channel((k0, k1), f"amplitude_damping({gamma:g})")


def apply_channel(rho: State, ch: Channel, targets: Sequence[int] | None = None) -> DensityMatrix:
    """``sum_i K_i rho K_i^dagger``, optionally on a subset of qubits."""
    rho = rho.to_density()
    n = rho.num_qubits
    if targets is None:
        if ch.num_qubits != n:
            raise DimensionMismatch(f"{ch.num_qubits}-qubit channel on {n}-qubit state")
        targets = list(range(n))
    targets = _check_targets(targets, n)
    if len(targets) != ch.num_qubits:
        raise DimensionMismatch(f"{ch.num_qubits}-qubit channel on {len(targets)} targets")
    t = rho.matrix.reshape([2] * (2 * n))
    out = np.zeros_like(t)
    cols = [n + q for q in targets]
    for k in ch.kraus_ops:
        out += _apply_on_axes(_apply_on_axes(t, k, targets), k.conj(), cols)
    return DensityMatrix(out.reshape(2**n, 2**n))


def is_dfs_invariant(ch: Channel, state: PureState, tol: float = 1e-9) -> bool:
    return fidelity(state, apply_channel(state, ch)) >= 1.0 - tol


@dataclass(frozen=True)
class LogicalQubit:
    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ValueError("amplitudes must be finite")
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > NORM_TOL:
            raise ValueError("logical qubit not normalized")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def state(self) -> PureState:
        return PureState([self.alpha, self.beta])

    @classmethod
    def from_state(cls, psi: PureState) -> LogicalQubit:
        a, b = psi.amplitudes
        return cls(a, b)


# Columns are the logical |0>, |1> codewords.
CODE_BASIS = np.column_stack(
    [BELL_STATES[BellKind.PhiPlus].amplitudes, BELL_STATES[BellKind.PsiPlus].amplitudes]
)


def dfs_encode(logical: LogicalQubit) -> PureState:
    return PureState.normalized(CODE_BASIS @ np.array([logical.alpha, logical.beta]))


def dfs_decode(physical: PureState) -> LogicalQubit:
    if physical.num_qubits != 2:
        raise DimensionMismatch("DFS codewords are two-qubit states")
    coeffs = CODE_BASIS.conj().T @ physical.amplitudes
    residual = np.linalg.norm(physical.amplitudes - CODE_BASIS @ coeffs)
    if residual > CODE_TOL:
        raise OutsideCodeSpace(f"state leaks {residual:.3g} outside the code space")
    return LogicalQubit.from_state(PureState.normalized(coeffs))


def dfs_encode_density(rho: State) -> DensityMatrix:
    """Encode a (possibly mixed) logical state into the code space."""
    m = rho.to_density().matrix
    if m.shape != (2, 2):
        raise DimensionMismatch("logical state must be a single qubit")
    return DensityMatrix(CODE_BASIS @ m @ CODE_BASIS.conj().T)


def dfs_decode_density(rho: State) -> tuple[DensityMatrix, float]:
    """Project onto the code space. Returns ``(logical state, leaked weight)``."""
    m = rho.to_density().matrix
    if m.shape != (4, 4):
        raise DimensionMismatch("DFS codewords are two-qubit states")
    inside = CODE_BASIS.conj().T @ m @ CODE_BASIS
    weight = float(np.trace(inside).real)
    if weight <= CODE_TOL:
        raise OutsideCodeSpace("state has no support on the code space")
    return DensityMatrix.renormalized(inside), 1.0 - weight
