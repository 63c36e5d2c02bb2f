"""Teleportation transfer: exactness, branch statistics, recovery modes."""
import math

import numpy as np
import pytest

from qshield.qsim import Gate, Statevector, apply_gate, branch_outcomes, fidelity, u3_matrix
from qshield.tpchannel import (
    AngleEstimate,
    TeleportOutcome,
    TeleportVerificationError,
    apply_corrections,
    channel_transfer,
    decode_angles,
    encode_params_as_angles,
    estimate_angles,
    pre_measurement_state,
    target_state,
    teleport_once,
    verify_inverse,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _receiver_amps(post: Statevector, m1: int, m2: int) -> np.ndarray:
    base = m1 + 2 * m2
    return np.array([post.amps[base], post.amps[base + 4]])


def _random_angles(rng, count):
    return [(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)) for _ in range(count)]


class TestEncoding:
    def test_midpoint(self):
        theta, phi = encode_params_as_angles([0.0, 0.0], 0)
        assert theta == pytest.approx(math.pi / 2)
        assert phi == pytest.approx(math.pi)

    def test_saturation_limits(self):
        theta, phi = encode_params_as_angles([40.0, -40.0], 0)
        assert theta == pytest.approx(math.pi, abs=1e-9)
        assert phi == pytest.approx(0.0, abs=1e-9)

    def test_roundtrip_within_tolerance(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.uniform(-10, 10, size=2)
            theta, phi = encode_params_as_angles(x, 0)
            back = decode_angles(theta, phi)
            np.testing.assert_allclose(back, x, atol=1e-9)

    def test_index_bounds(self):
        with pytest.raises(IndexError):
            encode_params_as_angles([1.0, 2.0], 1)


class TestBranchTable:
    def test_all_branches_quarter_probability(self):
        rng = np.random.default_rng(1)
        for theta, phi in _random_angles(rng, 10):
            outcomes = branch_outcomes(pre_measurement_state(theta, phi), [0, 1])
            for _, prob, _ in outcomes:
                assert prob == pytest.approx(0.25, abs=1e-12)

    def test_branch_states_match_published_table(self):
        # uncorrected receiver states per (m1, m2):
        # (0,0) a|0>+b|1>, (0,1) a|1>+b|0>, (1,0) a|0>-b|1>, (1,1) a|1>-b|0>
        rng = np.random.default_rng(2)
        for theta, phi in _random_angles(rng, 20):
            a = math.cos(theta / 2)
            b = np.exp(1j * phi) * math.sin(theta / 2)
            expected = {
                (0, 0): np.array([a, b]),
                (0, 1): np.array([b, a]),
                (1, 0): np.array([a, -b]),
                (1, 1): np.array([-b, a]),
            }
            for label, prob, post in branch_outcomes(pre_measurement_state(theta, phi), [0, 1]):
                m1, m2 = int(label[0]), int(label[1])
                got = Statevector(1, _receiver_amps(post, m1, m2))
                want = Statevector(1, expected[(m1, m2)])
                assert fidelity(got, want) == pytest.approx(1.0, abs=1e-12)

    def test_equator_branch_11_correction(self):
        # theta=pi/2, phi=0: branch (1,1) holds (a|1>-b|0>)/norm, X then Z
        # restores (|0>+|1>)/sqrt(2)
        sv = pre_measurement_state(math.pi / 2, 0.0)
        branches = {label: post for label, _, post in branch_outcomes(sv, [0, 1])}
        raw = _receiver_amps(branches["11"], 1, 1)
        np.testing.assert_allclose(raw, [-INV_SQRT2, INV_SQRT2], atol=1e-12)
        bob = apply_corrections(Statevector(1, raw), 1, 1)
        np.testing.assert_allclose(bob.amps, [INV_SQRT2, INV_SQRT2], atol=1e-12)

    def test_sender_qubits_fully_collapse(self):
        sv = pre_measurement_state(1.0, 2.0)
        for label, _, post in branch_outcomes(sv, [0, 1]):
            m1, m2 = int(label[0]), int(label[1])
            idx = np.arange(8)
            off_branch = ((idx & 1) != m1) | (((idx >> 1) & 1) != m2)
            assert np.all(post.amps[off_branch] == 0)


class TestTeleportOnce:
    def test_pole_states_deterministic(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            out = teleport_once(0.0, 0.0, rng)
            assert fidelity(out.bob_state, target_state(0.0, 0.0)) == pytest.approx(1.0, abs=1e-12)
        for _ in range(20):
            out = teleport_once(math.pi, 0.0, rng)
            assert fidelity(out.bob_state, target_state(math.pi, 0.0)) == pytest.approx(1.0, abs=1e-12)

    def test_random_angles_exact_over_sampled_branches(self):
        rng = np.random.default_rng(4)
        seen = set()
        for theta, phi in _random_angles(rng, 50):
            out = teleport_once(theta, phi, rng)
            seen.add((out.m1, out.m2))
            assert fidelity(out.bob_state, target_state(theta, phi)) >= 1.0 - 1e-10
        assert seen == {(0, 0), (0, 1), (1, 0), (1, 1)}


class TestVerifyInverse:
    def test_all_branches_give_zero_with_certainty(self):
        rng = np.random.default_rng(5)
        for theta, phi in _random_angles(rng, 20):
            for label, _, post in branch_outcomes(pre_measurement_state(theta, phi), [0, 1]):
                m1, m2 = int(label[0]), int(label[1])
                bob = apply_corrections(Statevector(1, _receiver_amps(post, m1, m2)), m1, m2)
                outcome = TeleportOutcome(m1=m1, m2=m2, bob_state=bob)
                assert verify_inverse(outcome, theta, phi, rng) == 0
                assert outcome.verify_pre_prob == pytest.approx(1.0, abs=1e-12)

    def test_skipped_correction_is_detectable(self):
        # branch (0,1) without the X correction: P(check=0) computed
        # independently as |<0| U^dagger (b, a)^T|^2. A nonzero azimuth is
        # needed; at phi=0 the equator state is X-symmetric and the missing
        # correction would be invisible.
        theta, phi = math.pi / 2, 0.8
        sv = pre_measurement_state(theta, phi)
        post = dict((label, p_state) for label, _, p_state in branch_outcomes(sv, [0, 1]))["01"]
        uncorrected = Statevector(1, _receiver_amps(post, 0, 1))
        inverse = u3_matrix(theta, phi, 0.0).conj().T
        expected_p0 = abs((inverse @ uncorrected.amps)[0]) ** 2
        outcome = TeleportOutcome(m1=0, m2=1, bob_state=uncorrected)
        rng = np.random.default_rng(6)
        zeros = sum(verify_inverse(outcome, theta, phi, rng) == 0 for _ in range(400))
        assert expected_p0 < 1.0 - 1e-6
        assert abs(zeros / 400 - expected_p0) < 4 * math.sqrt(expected_p0 * (1 - expected_p0) / 400) + 1e-9


class TestEstimation:
    def test_pole_angle_recovered(self):
        est = estimate_angles(0.0, 0.0, 10_000, np.random.default_rng(7))
        assert est.theta_hat < 0.05

    def test_equator_angles_recovered(self):
        est = estimate_angles(math.pi / 2, math.pi / 2, 100_000, np.random.default_rng(8))
        assert abs(est.theta_hat - math.pi / 2) < 0.05
        assert abs(est.phi_hat - math.pi / 2) < 0.05

    def test_stderr_shot_scaling(self):
        coarse = estimate_angles(1.0, 1.0, 100, np.random.default_rng(9))
        fine = estimate_angles(1.0, 1.0, 10_000, np.random.default_rng(9))
        assert fine.stderr / coarse.stderr == pytest.approx(0.1, abs=0.02)

    def test_minimum_shots(self):
        with pytest.raises(ValueError):
            estimate_angles(1.0, 1.0, 50, np.random.default_rng(0))


class TestChannelTransfer:
    def test_verify_mode_roundtrip(self):
        rng = np.random.default_rng(10)
        sent = rng.normal(0, 1.5, size=16)
        received = channel_transfer(sent, 0, "verify", rng)
        np.testing.assert_allclose(received[:2], sent[:2], atol=1e-9)
        np.testing.assert_array_equal(received[2:], sent[2:])

    def test_two_parameter_vector_fully_quantum(self):
        rng = np.random.default_rng(11)
        sent = np.array([0.3, -0.7])
        received = channel_transfer(sent, 0, "verify", rng)
        np.testing.assert_allclose(received, sent, atol=1e-9)

    def test_tomography_mode_angle_error(self):
        rng = np.random.default_rng(12)
        sent = np.array([0.4, -0.2, 1.0])
        received = channel_transfer(sent, 0, "tomography", rng, shots=100_000)
        theta_sent, phi_sent = encode_params_as_angles(sent, 0)
        theta_got, phi_got = encode_params_as_angles(received, 0)
        assert abs(theta_got - theta_sent) < 0.05
        assert abs(phi_got - phi_sent) < 0.05
        assert received[2] == sent[2]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            channel_transfer([0.0, 0.0], 0, "guess", np.random.default_rng(0))
