"""Statevector substrate: gate algebra, measurement, branch enumeration."""
import math

import numpy as np
import pytest

from qshield.qsim import (
    Gate,
    MeasurementRecord,
    Statevector,
    apply_gate,
    apply_u3,
    branch_outcomes,
    fidelity,
    measure,
    new_state,
    u3_matrix,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def bell_pair() -> Statevector:
    sv = new_state(2)
    sv = apply_gate(sv, Gate("H", target=0))
    return apply_gate(sv, Gate("CNOT", control=0, target=1))


class TestNewState:
    def test_single_qubit_ground(self):
        np.testing.assert_array_equal(new_state(1).amps, [1, 0])

    def test_two_qubits(self):
        np.testing.assert_array_equal(new_state(2).amps, [1, 0, 0, 0])

    def test_three_qubits_normalized(self):
        sv = new_state(3)
        assert sv.amps.size == 8
        assert sv.norm_sq() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("n", [0, 11, -1])
    def test_out_of_range(self, n):
        with pytest.raises(ValueError):
            new_state(n)


class TestGates:
    def test_hadamard_superposition(self):
        sv = apply_gate(new_state(1), Gate("H", target=0))
        np.testing.assert_allclose(sv.amps, [INV_SQRT2, INV_SQRT2], atol=1e-15)

    def test_x_flip(self):
        sv = apply_gate(new_state(1), Gate("X", target=0))
        np.testing.assert_allclose(sv.amps, [0, 1], atol=1e-15)

    def test_cnot_makes_bell_state(self):
        np.testing.assert_allclose(
            bell_pair().amps, [INV_SQRT2, 0, 0, INV_SQRT2], atol=1e-15
        )

    def test_u3_identity_case(self):
        sv = apply_u3(new_state(1), 0, 0.0, 0.0)
        np.testing.assert_allclose(sv.amps, [1, 0], atol=1e-12)

    def test_u3_pi_is_x_up_to_phase(self):
        sv = apply_u3(new_state(1), 0, math.pi, 0.0)
        target = Statevector(1, np.array([0, 1], dtype=complex))
        assert fidelity(sv, target) == pytest.approx(1.0, abs=1e-12)

    def test_u3_quarter_turn_closed_form(self):
        # oracle: cos(pi/4)|0> + e^{i pi/2} sin(pi/4)|1> evaluated directly
        expected = np.array([math.cos(math.pi / 4), np.exp(1j * math.pi / 2) * math.sin(math.pi / 4)])
        sv = apply_u3(new_state(1), 0, math.pi / 2, math.pi / 2)
        np.testing.assert_allclose(sv.amps, expected, atol=1e-12)

    def test_control_equals_target_rejected(self):
        with pytest.raises(ValueError):
            Gate("CNOT", target=1, control=1)

    def test_bad_index_rejected(self):
        with pytest.raises(ValueError):
            apply_gate(new_state(2), Gate("X", target=2))

    def test_nonfinite_angle_rejected(self):
        with pytest.raises(ValueError):
            Gate("U3", target=0, theta=float("nan"))

    def test_qubit_zero_is_least_significant(self):
        # X on qubit 0 of |00> lands on index 1, not index 2
        sv = apply_gate(new_state(2), Gate("X", target=0))
        assert sv.amps[1] == 1.0
        sv = apply_gate(new_state(2), Gate("X", target=1))
        assert sv.amps[2] == 1.0


class TestMeasure:
    def test_ground_state_deterministic(self):
        rec, post = measure(new_state(1), 0, np.random.default_rng(0))
        assert rec == MeasurementRecord(qubit=0, bit=0, pre_prob=1.0)
        np.testing.assert_array_equal(post.amps, [1, 0])

    def test_hadamard_half_half(self):
        rng = np.random.default_rng(7)
        sv = apply_gate(new_state(1), Gate("H", target=0))
        seen = set()
        for _ in range(64):
            rec, _ = measure(sv, 0, rng)
            assert rec.pre_prob == pytest.approx(0.5, abs=1e-12)
            seen.add(rec.bit)
        assert seen == {0, 1}

    def test_bell_correlation_both_orders(self):
        rng = np.random.default_rng(3)
        for first, second in [(0, 1), (1, 0)]:
            for _ in range(50):
                rec1, post = measure(bell_pair(), first, rng)
                rec2, _ = measure(post, second, rng)
                assert rec1.bit == rec2.bit
                assert rec2.pre_prob == pytest.approx(1.0, abs=1e-12)

    def test_collapsed_state_renormalized(self):
        rng = np.random.default_rng(5)
        sv = apply_u3(new_state(1), 0, 1.1, 0.4)
        _, post = measure(sv, 0, rng)
        assert post.norm_sq() == pytest.approx(1.0, abs=1e-12)


class TestBranchOutcomes:
    def test_bell_pair_half_half(self):
        got = {label: prob for label, prob, _ in branch_outcomes(bell_pair(), [0, 1])}
        assert got["00"] == pytest.approx(0.5, abs=1e-12)
        assert got["11"] == pytest.approx(0.5, abs=1e-12)
        assert got["01"] == 0.0 and got["10"] == 0.0

    def test_ground_state_single_qubit(self):
        got = branch_outcomes(new_state(1), [0])
        assert got[0][:2] == ("0", 1.0)
        assert got[1][1] == 0.0 and got[1][2] is None

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(11)
        sv = new_state(3)
        for q in range(3):
            sv = apply_u3(sv, q, rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        sv = apply_gate(sv, Gate("CNOT", control=0, target=2))
        total = sum(p for _, p, _ in branch_outcomes(sv, [0, 1, 2]))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_duplicate_qubits_rejected(self):
        with pytest.raises(ValueError):
            branch_outcomes(new_state(2), [0, 0])

    def test_matches_empirical_frequencies(self):
        # 4 sigma agreement between exact branch probabilities and sampling
        rng = np.random.default_rng(2024)
        sv = apply_u3(new_state(2), 0, 1.2, 0.3)
        sv = apply_gate(sv, Gate("H", target=1))
        sv = apply_gate(sv, Gate("CNOT", control=1, target=0))
        exact = {label: p for label, p, _ in branch_outcomes(sv, [0, 1])}
        n = 100_000
        counts = {label: 0 for label in exact}
        for _ in range(n):
            rec0, post = measure(sv, 0, rng)
            rec1, _ = measure(post, 1, rng)
            counts[f"{rec0.bit}{rec1.bit}"] += 1
        for label, p in exact.items():
            sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
            assert abs(counts[label] / n - p) < 4 * sigma + 1e-9


class TestUnitarity:
    def _random_gate(self, rng, n):
        kinds = ["H", "X", "Z", "U3"] + (["CNOT"] if n > 1 else [])
        kind = rng.choice(kinds)
        target = int(rng.integers(n))
        if kind == "CNOT":
            control = int((target + 1 + rng.integers(n - 1)) % n)
            return Gate("CNOT", target=target, control=control)
        if kind == "U3":
            return Gate(
                "U3",
                target=target,
                theta=rng.uniform(-math.pi, math.pi),
                phi=rng.uniform(0, 2 * math.pi),
                lam=rng.uniform(0, 2 * math.pi),
            )
        return Gate(kind, target=target)

    def test_norm_preserved_over_random_sequences(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            sv = new_state(n)
            for _ in range(20):
                sv = apply_gate(sv, self._random_gate(rng, n))
            assert abs(sv.norm_sq() - 1.0) < 1e-10

    def test_gate_then_inverse_restores_state(self):
        rng = np.random.default_rng(17)
        n = 3
        sv = new_state(n)
        for q in range(n):
            sv = apply_u3(sv, q, rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        for kind in ("H", "X", "Z"):
            g = Gate(kind, target=1)
            back = apply_gate(apply_gate(sv, g), g)  # involutions
            np.testing.assert_allclose(back.amps, sv.amps, atol=1e-12)
        g = Gate("CNOT", control=0, target=2)
        np.testing.assert_allclose(apply_gate(apply_gate(sv, g), g).amps, sv.amps, atol=1e-12)
        theta, phi, lam = 0.9, 0.4, 1.3
        fwd = Gate("U3", target=0, theta=theta, phi=phi, lam=lam)
        inv = Gate("U3", target=0, theta=-theta, phi=-lam, lam=-phi)
        np.testing.assert_allclose(apply_gate(apply_gate(sv, fwd), inv).amps, sv.amps, atol=1e-12)

    def test_u3_matrix_is_unitary(self):
        m = u3_matrix(1.3, 0.7, 2.1)
        np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-12)
