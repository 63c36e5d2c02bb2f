"""BB84 sessions: sifting, error estimation, eavesdropper detection, key expansion."""
import math

import numpy as np
import pytest

from qshield import qsim
from qshield.qkd import (
    EVE_NONE,
    EveModel,
    QkdAbortError,
    abort_decision,
    estimate_qber,
    expand_key,
    generate_raw_bits,
    pack_bits,
    run_bb84,
)


def intercept_resend_error_probability() -> float:
    """Brute-force oracle: exact kept-bit error rate under a full
    intercept-resend attack, enumerating sender bit K, shared basis b,
    and Eve's basis e, with exact branch probabilities throughout."""
    total = 0.0
    cases = 0
    for k in (0, 1):
        for b in (0, 1):          # sifted positions have matching bases
            for e in (0, 1):
                sv = qsim.new_state(1)
                if k:
                    sv = qsim.apply_gate(sv, qsim.Gate("X", target=0))
                if b:
                    sv = qsim.apply_gate(sv, qsim.Gate("H", target=0))
                if e:
                    sv = qsim.apply_gate(sv, qsim.Gate("H", target=0))
                err = 0.0
                for label, p_eve, post in qsim.branch_outcomes(sv, [0]):
                    if post is None:
                        continue
                    resent = post
                    if e:
                        resent = qsim.apply_gate(resent, qsim.Gate("H", target=0))
                    if b:
                        resent = qsim.apply_gate(resent, qsim.Gate("H", target=0))
                    for out_label, p_bob, _ in qsim.branch_outcomes(resent, [0]):
                        if int(out_label) != k:
                            err += p_eve * p_bob
                total += err
                cases += 1
    return total / cases


def store_and_resend_error_probability() -> float:
    """Brute-force oracle: Eve forwards a fresh random basis state."""
    total = 0.0
    cases = 0
    for k in (0, 1):
        for b in (0, 1):
            for f in (0, 1):      # Eve's fresh bit
                for e in (0, 1):  # Eve's fresh basis
                    sv = qsim.new_state(1)
                    if f:
                        sv = qsim.apply_gate(sv, qsim.Gate("X", target=0))
                    if e:
                        sv = qsim.apply_gate(sv, qsim.Gate("H", target=0))
                    if b:
                        sv = qsim.apply_gate(sv, qsim.Gate("H", target=0))
                    err = sum(
                        p for label, p, _ in qsim.branch_outcomes(sv, [0]) if int(label) != k
                    )
                    total += err
                    cases += 1
    return total / cases


class TestOracles:
    def test_intercept_resend_is_quarter(self):
        assert intercept_resend_error_probability() == pytest.approx(0.25, abs=1e-12)

    def test_store_and_resend_is_half(self):
        assert store_and_resend_error_probability() == pytest.approx(0.5, abs=1e-12)


class TestRawBits:
    def test_deterministic_under_seed(self):
        a = generate_raw_bits(8, np.random.default_rng(42))
        b = generate_raw_bits(8, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_balanced_at_scale(self):
        bits = generate_raw_bits(4096, np.random.default_rng(1))
        ones = int(bits.sum())
        assert abs(ones - 2048) <= 4 * math.sqrt(4096 * 0.25)

    def test_unrotated_qubit_always_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(16):
            rec, _ = qsim.measure(qsim.new_state(1), 0, rng)
            assert rec.bit == 0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            generate_raw_bits(0, np.random.default_rng(0))


class TestSessions:
    def test_noiseless_agreement(self):
        for seed in range(10):
            s = run_bb84(128, EVE_NONE, np.random.default_rng(seed))
            np.testing.assert_array_equal(s.sifted_sender, s.sifted_receiver)

    def test_sifting_matches_recomputation(self):
        s = run_bb84(256, EveModel("intercept_resend", 0.7), np.random.default_rng(5))
        expected = np.nonzero(s.sender_bases == s.receiver_bases)[0]
        np.testing.assert_array_equal(s.kept, expected)
        assert s.sifted_sender.size == s.kept.size

    def test_kept_count_near_half(self):
        s = run_bb84(4096, EVE_NONE, np.random.default_rng(3))
        assert abs(s.kept.size - 2048) <= 4 * 32

    def test_minimum_size_enforced(self):
        with pytest.raises(ValueError):
            run_bb84(8, EVE_NONE, np.random.default_rng(0))

    def test_full_intercept_resend_qber(self):
        rng = np.random.default_rng(11)
        s = run_bb84(8192, EveModel("intercept_resend", 1.0), rng)
        estimate_qber(s, 0.25, rng)
        assert 0.20 <= s.qber <= 0.30


class TestQberEstimation:
    def test_no_eve_is_exactly_zero(self):
        rng = np.random.default_rng(8)
        s = estimate_qber(run_bb84(512, EVE_NONE, rng), 0.25, rng)
        assert s.qber == 0.0

    def test_store_and_resend_near_half(self):
        rng = np.random.default_rng(21)
        s = run_bb84(8192, EveModel("store_and_resend", 1.0), rng)
        estimate_qber(s, 0.25, rng)
        assert 0.45 <= s.qber <= 0.55

    def test_half_fraction_scales_linearly(self):
        rng = np.random.default_rng(13)
        s = run_bb84(8192, EveModel("intercept_resend", 0.5), rng)
        estimate_qber(s, 0.25, rng)
        assert 0.075 <= s.qber <= 0.175

    def test_test_bits_are_consumed(self):
        rng = np.random.default_rng(2)
        s = estimate_qber(run_bb84(512, EVE_NONE, rng), 0.25, rng)
        assert s.key_sender.size == s.sifted_sender.size - s.test_indices.size
        np.testing.assert_array_equal(s.key_sender, s.key_receiver)

    def test_too_few_test_bits_rejected(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ValueError):
            estimate_qber(run_bb84(64, EVE_NONE, rng), 0.05, rng)

    def test_qber_monotone_in_attack_fraction(self):
        means = []
        for fraction in (0.0, 0.5, 1.0):
            eve = EveModel("intercept_resend", fraction) if fraction else EVE_NONE
            vals = []
            for seed in range(50):
                rng = np.random.default_rng(1000 + seed)
                s = estimate_qber(run_bb84(384, eve, rng), 0.25, rng)
                vals.append(s.qber)
            means.append(np.mean(vals))
        assert means[0] < means[1] < means[2]


class TestAbortDecision:
    def test_clean_session_continues(self):
        rng = np.random.default_rng(4)
        s = estimate_qber(run_bb84(256, EVE_NONE, rng), 0.25, rng)
        assert abort_decision(s, 0.11) is False

    def test_intercepted_session_aborts(self):
        rng = np.random.default_rng(4)
        s = run_bb84(2048, EveModel("intercept_resend", 1.0), rng)
        estimate_qber(s, 0.25, rng)
        assert s.qber > 0.11
        assert abort_decision(s, 0.11) is True

    def test_boundary_is_strict(self):
        rng = np.random.default_rng(4)
        s = estimate_qber(run_bb84(256, EVE_NONE, rng), 0.25, rng)
        s.qber = 0.11
        assert abort_decision(s, 0.11) is False

    def test_detection_rate_with_full_intercept(self):
        aborts = 0
        for seed in range(10):
            rng = np.random.default_rng(3000 + seed)
            s = run_bb84(2048, EveModel("intercept_resend", 1.0), rng)
            estimate_qber(s, 0.25, rng)
            aborts += abort_decision(s, 0.11)
        assert aborts == 10


class TestKeyExpansion:
    def test_both_sides_identical(self):
        exp = expand_key(EVE_NONE, 32, np.random.default_rng(0), block_n=512)
        assert len(exp.sender.data) == 32
        assert exp.sender.data == exp.receiver.data
        np.testing.assert_array_equal(exp.sender.bits, exp.receiver.bits)

    def test_zero_bytes_rejected(self):
        with pytest.raises(ValueError):
            expand_key(EVE_NONE, 0, np.random.default_rng(0))

    def test_block_consumption_matches_expectation(self):
        # 300 bytes = 2400 bits; a 512-qubit block yields about
        # 0.5 * 512 * 0.75 = 192 key bits, so at least 13 blocks
        exp = expand_key(EVE_NONE, 300, np.random.default_rng(9), block_n=512, test_fraction=0.25)
        assert len(exp.sessions) >= 13
        assert len(exp.sender.data) == 300

    def test_abort_surfaces_to_caller(self):
        with pytest.raises(QkdAbortError):
            expand_key(EveModel("intercept_resend", 1.0), 8, np.random.default_rng(5), block_n=256)

    def test_successive_keys_differ(self):
        rng = np.random.default_rng(14)
        first = expand_key(EVE_NONE, 16, rng, block_n=256)
        second = expand_key(EVE_NONE, 16, rng, block_n=256)
        assert first.sender.data != second.sender.data


class TestPacking:
    def test_msb_first(self):
        assert pack_bits(np.array([1, 0, 0, 0, 0, 0, 0, 0], dtype=np.uint8)) == b"\x80"
        assert pack_bits(np.array([0, 0, 0, 0, 0, 0, 0, 1], dtype=np.uint8)) == b"\x01"

    def test_requires_whole_bytes(self):
        with pytest.raises(ValueError):
            pack_bits(np.ones(7, dtype=np.uint8))
