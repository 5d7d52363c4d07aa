"""Circuit templates, the baseline ansatz layouts and the QAS search space.

A template is a list of blocks; rotations inside it reference parameter
slots rather than angles. Slots are numbered block-major, qubit-minor, so
slot ``l * n + q`` is the rotation on qubit ``q`` in block ``l``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .sim import Gate

CHAIN_PAIRS = ((0, 1), (1, 2), (2, 3))
HAA_PAIRS = ((0, 2), (1, 3))

_LETTER = {"RX": "X", "RY": "Y", "RZ": "Z"}
_KIND = {v: k for k, v in _LETTER.items()}


class CircuitError(ValueError):
    """Malformed template, search space or genotype."""


@dataclass(frozen=True)
class CircuitTemplate:
    num_qubits: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(block) for block in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        slots = []
        for gate in self.gates:
            if any(q >= self.num_qubits for q in gate.qubits):
                raise CircuitError(f"gate {gate} exceeds {self.num_qubits} qubits")
            if gate.param is not None:
                slots.append(gate.param)
        if sorted(slots) != list(range(len(slots))):
            raise CircuitError("parameter slots must be exactly 0..num_params-1, each used once")

    @property
    def gates(self) -> Iterator[Gate]:
        return itertools.chain.from_iterable(self.blocks)

    @property
    def num_params(self) -> int:
        return sum(g.param is not None for g in self.gates)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def two_qubit_count(self) -> int:
        return sum(len(g.qubits) == 2 for g in self.gates)

    @property
    def cz_count(self) -> int:
        return sum(g.kind == "CZ" for g in self.gates)

    def parameterized_gates(self) -> list:
        return sorted((g for g in self.gates if g.param is not None), key=lambda g: g.param)


def _rotation_layer(kinds: Sequence[str], block: int, num_qubits: int) -> list:
    return [Gate(k, (q,), param=block * num_qubits + q) for q, k in enumerate(kinds)]


def _check_layers(num_blocks: int) -> None:
    if int(num_blocks) < 1:
        raise CircuitError(f"number of blocks must be >= 1, got {num_blocks}")


def build_hea(num_blocks: int, num_qubits: int = 4) -> CircuitTemplate:
    """Hardware-efficient ansatz: RY on every qubit, then CZ on each chain pair."""
    _check_layers(num_blocks)
    pairs = [(q, q + 1) for q in range(num_qubits - 1)]
    blocks = []
    for l in range(num_blocks):
        gates = _rotation_layer(["RY"] * num_qubits, l, num_qubits)
        gates += [Gate("CZ", p) for p in pairs]
        blocks.append(gates)
    return CircuitTemplate(num_qubits, blocks)


def hadamard(qubit: int) -> list:
    # RY(pi/2) . RZ(pi) is H up to a global phase
    return [Gate("RZ", (qubit,), angle=math.pi), Gate("RY", (qubit,), angle=math.pi / 2)]


def cnot_via_cz(control: int, target: int) -> list:
    return hadamard(target) + [Gate("CZ", (min(control, target), max(control, target)))] + hadamard(target)


def swap_via_cz(a: int, b: int) -> list:
    return cnot_via_cz(a, b) + cnot_via_cz(b, a) + cnot_via_cz(a, b)


def compile_to_chain(gate: Gate) -> list:
    """Rewrite a gate for a linear chain with CZ as the only two-qubit gate.

    A CNOT between distant qubits is routed by swapping the control next to
    the target, applying the CNOT and swapping back.
    """
    if gate.kind == "CZ" and abs(gate.qubits[0] - gate.qubits[1]) != 1:
        raise CircuitError(f"no routing for long-range CZ {gate.qubits}")
    if gate.kind != "CNOT":
        return [gate]
    control, target = gate.qubits
    step = 1 if target > control else -1
    path = list(range(control, target, step))
    there = [g for a in path[:-1] for g in swap_via_cz(a, a + step)]
    back = [g for a in reversed(path[:-1]) for g in swap_via_cz(a, a + step)]
    return there + cnot_via_cz(path[-1], target) + back


def build_haa(num_blocks: int, num_qubits: int = 4, pairs=HAA_PAIRS, compiled: bool = True) -> CircuitTemplate:
    """Hardware-agnostic ansatz: RY on every qubit, then CNOTs on distant pairs.

    With ``compiled=True`` every CNOT is lowered to the chain (SWAP routing,
    CZ plus single-qubit rotations); otherwise the raw all-to-all form is kept.
    """
    _check_layers(num_blocks)
    blocks = []
    for l in range(num_blocks):
        gates = _rotation_layer(["RY"] * num_qubits, l, num_qubits)
        for c, t in pairs:
            cnot = Gate("CNOT", (c, t))
            gates += compile_to_chain(cnot) if compiled else [cnot]
        blocks.append(gates)
    return CircuitTemplate(num_qubits, blocks)


@dataclass(frozen=True)
class SearchSpace:
    num_blocks: int
    num_qubits: int = 4
    single_gate_candidates: tuple = ("RY", "RZ")
    cz_pairs: tuple = CHAIN_PAIRS

    def __post_init__(self):
        _check_layers(self.num_blocks)
        object.__setattr__(self, "single_gate_candidates", tuple(self.single_gate_candidates))
        object.__setattr__(self, "cz_pairs", tuple(tuple(p) for p in self.cz_pairs))
        if not self.single_gate_candidates:
            raise CircuitError("search space needs at least one single-qubit candidate")
        for a, b in self.cz_pairs:
            if abs(a - b) != 1 or max(a, b) >= self.num_qubits:
                raise CircuitError(f"CZ pair {(a, b)} is not chain-adjacent")

    @property
    def block_size(self) -> int:
        return len(self.single_gate_candidates) ** self.num_qubits * 2 ** len(self.cz_pairs)


@dataclass(frozen=True)
class Genotype:
    """One architecture: a gate kind per (block, qubit) and a CZ mask per block."""

    choices: tuple
    masks: tuple

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(tuple(c) for c in self.choices))
        object.__setattr__(self, "masks", tuple(tuple(bool(b) for b in m) for m in self.masks))

    @property
    def cz_count(self) -> int:
        return sum(sum(m) for m in self.masks)

    def to_string(self) -> str:
        """Render as e.g. ``YZYY:101/ZZYY:001`` (blocks separated by ``/``)."""
        return "/".join(
            "".join(_LETTER[k] for k in kinds) + ":" + "".join("1" if b else "0" for b in mask)
            for kinds, mask in zip(self.choices, self.masks)
        )

    @classmethod
    def from_string(cls, text: str) -> "Genotype":
        choices, masks = [], []
        try:
            for block in text.strip().split("/"):
                letters, bits = block.split(":")
                choices.append(tuple(_KIND[c] for c in letters))
                if set(bits) - {"0", "1"}:
                    raise ValueError(bits)
                masks.append(tuple(b == "1" for b in bits))
        except (KeyError, ValueError) as exc:
            raise CircuitError(f"cannot parse genotype {text!r}") from exc
        return cls(tuple(choices), tuple(masks))

    def __str__(self) -> str:
        return self.to_string()


def check_genotype(space: SearchSpace, g: Genotype) -> None:
    if len(g.choices) != space.num_blocks or len(g.masks) != space.num_blocks:
        raise CircuitError(f"genotype has {len(g.choices)} blocks, space has {space.num_blocks}")
    for kinds, mask in zip(g.choices, g.masks):
        if len(kinds) != space.num_qubits or len(mask) != len(space.cz_pairs):
            raise CircuitError("genotype block shape does not match the search space")
        if set(kinds) - set(space.single_gate_candidates):
            raise CircuitError(f"gate kinds {set(kinds)} outside {space.single_gate_candidates}")


def realize(space: SearchSpace, g: Genotype) -> CircuitTemplate:
    check_genotype(space, g)
    blocks = []
    for l, (kinds, mask) in enumerate(zip(g.choices, g.masks)):
        gates = _rotation_layer(kinds, l, space.num_qubits)
        gates += [Gate("CZ", pair) for pair, on in zip(space.cz_pairs, mask) if on]
        blocks.append(gates)
    return CircuitTemplate(space.num_qubits, blocks)


def hea_genotype(space: SearchSpace) -> Genotype:
    if "RY" not in space.single_gate_candidates:
        raise CircuitError("HEA needs RY in the candidate set")
    return Genotype(
        (("RY",) * space.num_qubits,) * space.num_blocks,
        ((True,) * len(space.cz_pairs),) * space.num_blocks,
    )


def pool_size(space: SearchSpace) -> int:
    return space.block_size**space.num_blocks


def _block_options(space: SearchSpace) -> list:
    kinds = itertools.product(space.single_gate_candidates, repeat=space.num_qubits)
    return list(itertools.product(kinds, itertools.product((False, True), repeat=len(space.cz_pairs))))


def enumerate_genotypes(space: SearchSpace) -> Iterator[Genotype]:
    """Every genotype in the space, in a fixed order."""
    for combo in itertools.product(_block_options(space), repeat=space.num_blocks):
        yield Genotype(tuple(c for c, _ in combo), tuple(m for _, m in combo))


def random_genotype(space: SearchSpace, rng: Optional[np.random.Generator] = None) -> Genotype:
    """Draw a genotype uniformly from ``space``."""
    rng = np.random.default_rng(rng)
    cands = space.single_gate_candidates
    kinds = rng.integers(len(cands), size=(space.num_blocks, space.num_qubits))
    bits = rng.integers(2, size=(space.num_blocks, len(space.cz_pairs)))
    return Genotype(
        tuple(tuple(cands[i] for i in row) for row in kinds),
        tuple(tuple(bool(b) for b in row) for row in bits),
    )
