import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qasclf.circuits import (
    CHAIN_PAIRS,
    CircuitError,
    CircuitTemplate,
    Genotype,
    SearchSpace,
    build_haa,
    build_hea,
    compile_to_chain,
    enumerate_genotypes,
    hea_genotype,
    pool_size,
    random_genotype,
    realize,
)
from qasclf.sim import Gate

from oracles import full_unitary, prob_zero, run_statevector


def template_unitary(template, params, n=4):
    u = np.eye(2**n, dtype=complex)
    for g in template.gates:
        angle = params[g.param] if g.param is not None else g.angle
        u = full_unitary(g.kind, g.qubits, n, angle) @ u
    return u


def equal_up_to_phase(a, b, atol=1e-10):
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[k] / b[k]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)


class TestHEA:
    def test_two_blocks_have_eight_slots(self):
        assert build_hea(2).num_params == 8

    def test_one_block_counts(self):
        t = build_hea(1)
        kinds = [g.kind for g in t.gates]
        assert kinds.count("RY") == 4 and kinds.count("CZ") == 3

    def test_six_blocks(self):
        t = build_hea(6)
        assert t.num_params == 24 and t.cz_count == 18

    def test_cz_only_on_chain(self):
        for g in build_hea(3).gates:
            if g.kind == "CZ":
                assert g.qubits in CHAIN_PAIRS

    @pytest.mark.parametrize("L", [0, -2])
    def test_rejects_depth(self, L):
        with pytest.raises(CircuitError):
            build_hea(L)


class TestHAA:
    def test_two_blocks_have_eight_slots(self):
        assert build_haa(2).num_params == 8

    def test_compiled_uses_only_chain_gates(self):
        for g in build_haa(2).gates:
            assert g.kind in ("RY", "RZ", "CZ")
            if g.kind == "CZ":
                assert abs(g.qubits[0] - g.qubits[1]) == 1

    def test_compiled_two_qubit_count_exceeds_hea(self):
        per_block = build_haa(1).two_qubit_count
        assert per_block > build_hea(1).two_qubit_count
        # routing cost: swap there, CNOT, swap back for each distance-2 pair
        assert per_block == 14
        assert build_haa(3).cz_count == 3 * per_block

    def test_compiled_matches_all_to_all(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            params = rng.uniform(-math.pi, math.pi, 4)
            raw = template_unitary(build_haa(1, compiled=False), params)
            comp = template_unitary(build_haa(1), params)
            assert equal_up_to_phase(comp, raw)
            psi_raw, psi_comp = raw[:, 0], comp[:, 0]
            for q in range(4):
                assert prob_zero(psi_comp, q, 4) == pytest.approx(prob_zero(psi_raw, q, 4), abs=1e-10)

    @pytest.mark.parametrize("c,t", [(0, 2), (2, 0), (1, 3), (0, 3), (3, 1), (1, 2), (2, 1)])
    def test_compile_cnot_any_pair(self, c, t):
        gates = compile_to_chain(Gate("CNOT", (c, t)))
        u = np.eye(16, dtype=complex)
        for g in gates:
            u = full_unitary(g.kind, g.qubits, 4, g.angle) @ u
        assert equal_up_to_phase(u, full_unitary("CNOT", (c, t), 4))

    def test_long_cz_rejected(self):
        with pytest.raises(CircuitError):
            compile_to_chain(Gate("CZ", (0, 2)))


class TestTemplate:
    def test_rejects_slot_gaps(self):
        with pytest.raises(CircuitError):
            CircuitTemplate(2, [[Gate("RY", (0,), param=0), Gate("RY", (1,), param=2)]])

    def test_rejects_qubit_overflow(self):
        with pytest.raises(CircuitError):
            CircuitTemplate(2, [[Gate("CZ", (1, 2))]])


class TestGenotype:
    def test_hea_genotype_realizes_hea(self):
        space = SearchSpace(3)
        assert realize(space, hea_genotype(space)) == build_hea(3)

    def test_empty_mask_is_product_circuit(self):
        space = SearchSpace(2)
        g = Genotype((("RY", "RZ", "RY", "RZ"),) * 2, ((False,) * 3,) * 2)
        assert realize(space, g).two_qubit_count == 0

    def test_single_cz_ansatz(self):
        space = SearchSpace(2)
        g = Genotype.from_string("YZYY:000/ZYYZ:010")
        assert realize(space, g).cz_count == 1 == g.cz_count

    def test_string_round_trip(self):
        g = Genotype.from_string("YZYY:101/ZZYY:001")
        assert g.to_string() == "YZYY:101/ZZYY:001"
        assert g.choices[0] == ("RY", "RZ", "RY", "RY")
        assert g.masks[1] == (False, False, True)

    @pytest.mark.parametrize("bad", ["", "YZQY:101", "YZYY:121", "YZYY"])
    def test_bad_strings(self, bad):
        with pytest.raises(CircuitError):
            Genotype.from_string(bad)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(CircuitError):
            realize(SearchSpace(2), Genotype.from_string("YZYY:101"))

    def test_kind_outside_space_rejected(self):
        with pytest.raises(CircuitError):
            realize(SearchSpace(1), Genotype.from_string("XYYY:101"))


class TestPool:
    @pytest.mark.parametrize("L,size", [(1, 128), (2, 16384)])
    def test_matches_enumeration(self, L, size):
        space = SearchSpace(L)
        genos = list(enumerate_genotypes(space))
        assert pool_size(space) == size == len(genos) == len(set(genos))

    def test_degenerate_space(self):
        space = SearchSpace(1, single_gate_candidates=("RY",), cz_pairs=())
        assert pool_size(space) == 1 == len(list(enumerate_genotypes(space)))

    def test_random_deterministic(self):
        space = SearchSpace(3)
        a = [random_genotype(space, np.random.default_rng(5)) for _ in range(3)]
        assert a[0] == a[1] == a[2]

    def test_random_uniform_chi_square(self):
        space = SearchSpace(1)
        index = {g: i for i, g in enumerate(enumerate_genotypes(space))}
        rng = np.random.default_rng(2024)
        counts = np.zeros(128)
        for _ in range(10_000):
            counts[index[random_genotype(space, rng)]] += 1
        expected = 10_000 / 128
        sigma = math.sqrt(10_000 * (1 / 128) * (127 / 128))
        assert np.all(np.abs(counts - expected) <= 5 * sigma)
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        # 127 degrees of freedom, 0.999 quantile is about 181
        assert chi2 < 181

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_random_always_realizable(self, L, seed):
        space = SearchSpace(L)
        g = random_genotype(space, np.random.default_rng(seed))
        t = realize(space, g)
        assert t.num_params == 4 * L
        assert Genotype.from_string(g.to_string()) == g
