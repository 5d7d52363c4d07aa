"""Dense density-matrix simulation of small qubit registers.

Basis ordering is big-endian: qubit 0 is the most significant bit of a
computational-basis index. Rotations follow ``R_A(t) = exp(-i t A / 2)``.

Two layers live here. The value-level API (:class:`DensityMatrix`,
:func:`apply_gate`, :func:`apply_dephasing`, :func:`expectation`) works on one
state at a time and validates its inputs. :func:`evolve` is the batched engine
the classifier uses; it pushes a whole stack of states through a circuit with
one composed unitary per segment.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

MAX_QUBITS = 8

ROTATIONS = ("RX", "RY", "RZ")
TWO_QUBIT = ("CZ", "CNOT")
GATE_KINDS = ROTATIONS + TWO_QUBIT


class SimulationError(ValueError):
    """Invalid input to the simulator."""


def _check_num_qubits(num_qubits: int) -> None:
    if not 1 <= int(num_qubits) <= MAX_QUBITS:
        raise SimulationError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state of an ``n``-qubit register, stored densely."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dim = data.shape[0]
        if data.ndim != 2 or data.shape[1] != dim or dim < 2 or dim & (dim - 1):
            raise SimulationError(f"density matrix must be 2^n x 2^n, got shape {data.shape}")
        _check_num_qubits(dim.bit_length() - 1)
        object.__setattr__(self, "data", data)

    @property
    def num_qubits(self) -> int:
        return self.data.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data.conj().T, self.data)))

    def is_valid(self, atol: float = 1e-12, psd_tol: float = 1e-10) -> bool:
        rho = self.data
        if abs(np.trace(rho) - 1.0) > atol:
            return False
        if np.max(np.abs(rho - rho.conj().T)) > atol:
            return False
        return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -psd_tol)

    @classmethod
    def from_statevector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))


@dataclass(frozen=True)
class Gate:
    """A gate on named qubits.

    Rotations carry either a fixed ``angle`` or a parameter slot ``param``
    that is resolved against a parameter vector at evaluation time. For
    CNOT the qubits are ``(control, target)``.
    """

    kind: str
    qubits: tuple
    angle: Optional[float] = None
    param: Optional[int] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        arity = 1 if self.kind in ROTATIONS else 2
        if len(qubits) != arity:
            raise SimulationError(f"{self.kind} acts on {arity} qubit(s), got {qubits}")
        if len(set(qubits)) != arity or min(qubits) < 0:
            raise SimulationError(f"invalid qubit indices {qubits} for {self.kind}")
        if self.kind in ROTATIONS:
            if self.angle is None and self.param is None:
                raise SimulationError(f"{self.kind} needs an angle or a parameter slot")
        elif self.angle is not None or self.param is not None:
            raise SimulationError(f"{self.kind} takes no angle")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    @property
    def is_parameterized(self) -> bool:
        return self.param is not None

    def bind(self, params) -> "Gate":
        if self.param is None:
            return self
        return Gate(self.kind, self.qubits, angle=float(params[self.param]))

    def matrix(self) -> np.ndarray:
        if self.is_rotation:
            if self.angle is None:
                raise SimulationError("unbound parameterized gate has no matrix")
            return rotation(self.kind, np.asarray([self.angle]))[0]
        if self.kind == "CZ":
            return np.diag([1, 1, 1, -1]).astype(complex)
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


class Placement(str, enum.Enum):
    AFTER_EACH_BLOCK = "block"
    AFTER_EACH_GATE = "gate"


@dataclass(frozen=True)
class DephasingChannel:
    """Pauli-Z dephasing ``rho -> (1-p) rho + p Z rho Z`` on every touched qubit.

    ``include_encoding`` decides whether the data-encoding layer is followed
    by the channel like any ansatz block. Off by default: the channel models
    noise induced by the searched ansatz, not by state preparation.
    """

    strength: float = 0.0
    placement: Placement = Placement.AFTER_EACH_BLOCK
    include_encoding: bool = False

    def __post_init__(self):
        _check_strength(self.strength)
        object.__setattr__(self, "strength", float(self.strength))
        object.__setattr__(self, "placement", Placement(self.placement))

    def kraus(self) -> list:
        p = self.strength
        return [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * np.diag([1.0, -1.0])]


@dataclass(frozen=True)
class Observable:
    """Projector onto ``|0>`` of one qubit, identity elsewhere."""

    qubit: int = 0

    def matrix(self, num_qubits: int) -> np.ndarray:
        return np.diag(_bit_is_zero(num_qubits, self.qubit).astype(complex))


def _check_strength(p: float) -> None:
    if not 0.0 <= p <= 0.5:
        raise SimulationError(f"dephasing strength must be in [0, 0.5], got {p}")


def _check_qubits(qubits: Sequence[int], num_qubits: int) -> None:
    for q in qubits:
        if not 0 <= q < num_qubits:
            raise SimulationError(f"qubit index {q} out of range for {num_qubits} qubits")


@lru_cache(maxsize=None)
def _bits(num_qubits: int) -> np.ndarray:
    idx = np.arange(2**num_qubits)
    shifts = num_qubits - 1 - np.arange(num_qubits)
    return (idx[:, None] >> shifts[None, :]) & 1


def _bit_is_zero(num_qubits: int, qubit: int) -> np.ndarray:
    return _bits(num_qubits)[:, qubit] == 0


@lru_cache(maxsize=None)
def _cz_signs(num_qubits: int, a: int, b: int) -> np.ndarray:
    bits = _bits(num_qubits)
    return np.where(bits[:, a] & bits[:, b], -1.0, 1.0)


@lru_cache(maxsize=None)
def _cnot_perm(num_qubits: int, control: int, target: int) -> np.ndarray:
    bits = _bits(num_qubits)
    flip = 1 << (num_qubits - 1 - target)
    idx = np.arange(2**num_qubits)
    return np.where(bits[:, control] == 1, idx ^ flip, idx)


@lru_cache(maxsize=None)
def _dephasing_mask(num_qubits: int, qubits: tuple, strength: float) -> np.ndarray:
    bits = _bits(num_qubits)[:, list(qubits)]
    differ = (bits[:, None, :] != bits[None, :, :]).sum(axis=-1)
    return (1.0 - 2.0 * strength) ** differ


def rotation(kind: str, angles) -> np.ndarray:
    """Stack of 2x2 rotation matrices, shape ``(len(angles), 2, 2)``."""
    t = np.asarray(angles, dtype=float) / 2
    c, s = np.cos(t), np.sin(t)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    if kind == "RY":
        out[..., 0, 0], out[..., 0, 1] = c, -s
        out[..., 1, 0], out[..., 1, 1] = s, c
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-1j * t)
        out[..., 1, 1] = np.exp(1j * t)
    elif kind == "RX":
        out[..., 0, 0], out[..., 0, 1] = c, -1j * s
        out[..., 1, 0], out[..., 1, 1] = -1j * s, c
    else:
        raise SimulationError(f"{kind!r} is not a rotation")
    return out


def _left_1q(mats: np.ndarray, u: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """Left-multiply each matrix in ``mats`` (B, D, D) by ``u`` on ``qubit``."""
    b, d, _ = mats.shape
    hi = 2**qubit
    view = mats.reshape(b, hi, 2, (d // hi // 2) * d)
    if u.ndim == 3:
        u = u[:, None]
    return np.matmul(u, view).reshape(b, d, d)


def _left_gate(mats: np.ndarray, gate: Gate, num_qubits: int, u=None) -> np.ndarray:
    if gate.kind == "CZ":
        return mats * _cz_signs(num_qubits, *gate.qubits)[None, :, None]
    if gate.kind == "CNOT":
        return mats[:, _cnot_perm(num_qubits, *gate.qubits), :]
    if u is None:
        u = gate.matrix()
    return _left_1q(mats, u, gate.qubits[0], num_qubits)


def ground_state(num_qubits: int) -> DensityMatrix:
    _check_num_qubits(num_qubits)
    rho = np.zeros((2**num_qubits, 2**num_qubits), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(rho)


def apply_gate(state: DensityMatrix, gate: Gate) -> DensityMatrix:
    """Return ``U rho U^dagger`` for a bound gate."""
    n = state.num_qubits
    _check_qubits(gate.qubits, n)
    u = _left_gate(np.eye(state.dim, dtype=complex)[None], gate, n)[0]
    return DensityMatrix(u @ state.data @ u.conj().T)


def apply_dephasing(state: DensityMatrix, qubit: int, strength: float) -> DensityMatrix:
    """Dephase one qubit: coherences across that qubit shrink by ``1 - 2p``."""
    _check_strength(strength)
    _check_qubits([qubit], state.num_qubits)
    mask = _dephasing_mask(state.num_qubits, (int(qubit),), float(strength))
    return DensityMatrix(state.data * mask)


def expectation(state: DensityMatrix, obs: Observable) -> float:
    """``Tr(Pi rho)`` for the ground-state projector of ``obs.qubit``."""
    _check_qubits([obs.qubit], state.num_qubits)
    diag = np.real(np.diagonal(state.data))
    return float(diag[_bit_is_zero(state.num_qubits, obs.qubit)].sum())


def populations(rho: np.ndarray) -> np.ndarray:
    """Computational-basis probabilities of a stack of density matrices."""
    return np.clip(np.real(np.diagonal(rho, axis1=-2, axis2=-1)), 0.0, None)


def marginal_zero(probs: np.ndarray, num_qubits: int, qubit: int = 0) -> np.ndarray:
    """Probability that ``qubit`` reads 0, from full outcome distributions."""
    return probs[..., _bit_is_zero(num_qubits, qubit)].sum(axis=-1)


@dataclass
class _Segment:
    gates: list
    noisy_qubits: tuple = field(default_factory=tuple)


def _segments(blocks, num_qubits: int, noise: DephasingChannel) -> list:
    if noise.placement is Placement.AFTER_EACH_GATE:
        return [_Segment([g], g.qubits) for block in blocks for g in block]
    everyone = tuple(range(num_qubits))
    return [_Segment(list(block), everyone) for block in blocks]


def evolve(
    rho: np.ndarray,
    blocks: Sequence[Sequence[Gate]],
    angles: np.ndarray,
    noise: DephasingChannel = DephasingChannel(),
) -> np.ndarray:
    """Push a stack of states through ``blocks`` with per-state angles.

    ``rho`` has shape ``(B, D, D)``; ``angles`` has shape ``(B, k)`` and is
    indexed by each parameterized gate's ``param`` slot. Dephasing follows
    ``noise.placement``: after every block on all qubits, or after every
    gate on the qubits that gate touched.
    """
    rho = np.asarray(rho, dtype=complex)
    batch, dim, _ = rho.shape
    n = dim.bit_length() - 1
    angles = np.asarray(angles, dtype=float).reshape(batch, -1)
    p = noise.strength
    eye = np.broadcast_to(np.eye(dim, dtype=complex), (batch, dim, dim))
    for seg in _segments(blocks, n, noise):
        for gate in seg.gates:
            _check_qubits(gate.qubits, n)
        mask = _dephasing_mask(n, seg.noisy_qubits, p) if p > 0 and seg.noisy_qubits else None
        if len(seg.gates) == 1:
            rho = _conjugate_single(rho, seg.gates[0], angles, n, mask)
            continue
        u = eye
        for gate in seg.gates:
            mat = rotation(gate.kind, angles[:, gate.param]) if gate.is_parameterized else None
            u = _left_gate(u, gate, n, mat)
        rho = u @ rho @ np.conj(np.swapaxes(u, -1, -2))
        if mask is not None:
            rho = rho * mask
    return rho


def _conjugate_single(rho, gate: Gate, angles, n: int, mask) -> np.ndarray:
    """``U rho U^dagger`` for one gate without forming the full unitary."""
    if gate.kind == "CZ":
        s = _cz_signs(n, *gate.qubits)
        factor = np.outer(s, s) if mask is None else np.outer(s, s) * mask
        return rho * factor
    if gate.kind == "CNOT":
        perm = _cnot_perm(n, *gate.qubits)
        rho = rho[:, perm][:, :, perm]
    else:
        mat = rotation(gate.kind, angles[:, gate.param]) if gate.is_parameterized else gate.matrix()
        # rho is Hermitian, so U rho U^dagger = U (U rho)^dagger
        half = _left_1q(rho, mat, gate.qubits[0], n)
        rho = _left_1q(np.conj(np.swapaxes(half, -1, -2)), mat, gate.qubits[0], n)
    return rho if mask is None else rho * mask


def ground_states(batch: int, num_qubits: int) -> np.ndarray:
    rho = np.zeros((batch, 2**num_qubits, 2**num_qubits), dtype=complex)
    rho[:, 0, 0] = 1.0
    return rho
