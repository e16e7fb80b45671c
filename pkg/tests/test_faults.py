import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aesdfa.aes import (
    AesOp,
    StepId,
    encrypt_block,
    encrypt_trace,
    expand_key,
    flat_index,
    xor_bytes,
)
from aesdfa.faults import (
    FaultRole,
    FaultSpec,
    decrypt_with_faults,
    encrypt_with_faults,
    push_mask_forward,
)

KS = expand_key(bytes(range(32)))
PT = bytes.fromhex("00112233445566778899aabbccddeeff")


def byte_mask(pos: int, value: int) -> bytes:
    mask = bytearray(16)
    mask[pos] = value
    return bytes(mask)


def test_empty_fault_list_is_plain_encrypt():
    assert encrypt_with_faults(PT, KS, []) == encrypt_block(PT, KS)


def test_fault_spec_rejects_bad_masks():
    step = StepId(12, AesOp.MIX_COLUMNS)
    with pytest.raises(ValueError, match="nonzero"):
        FaultSpec(step, bytes(16))
    with pytest.raises(ValueError, match="16 bytes"):
        FaultSpec(step, bytes(15))


def test_step_out_of_range_rejected():
    fault = FaultSpec(StepId(13, AesOp.MIX_COLUMNS), byte_mask(0, 1))
    ks128 = expand_key(bytes(16))
    with pytest.raises(ValueError, match="out of range"):
        encrypt_with_faults(PT, ks128, [fault])


def test_round_13_fault_hits_one_diagonal_group():
    # single-byte fault entering MixColumns of round N-1, row 0 / column 0:
    # exactly the output positions {0, 13, 10, 7} differ, and the state
    # entering the final SubBytes differs by (2e, e, e, 3e) in column 0
    eps = 0x2A
    fault = FaultSpec(StepId(13, AesOp.MIX_COLUMNS), byte_mask(0, eps))
    clean, clean_trace = encrypt_trace(PT, KS)
    faulty = encrypt_with_faults(PT, KS, [fault])
    diff = xor_bytes(clean, faulty)
    assert {i for i, b in enumerate(diff) if b} == {0, 13, 10, 7}

    # recompute the pre-SubBytes differential by replaying the faulted tail
    states = {e.step: e.state for e in clean_trace}
    from aesdfa.aes import gf_mul, mix_columns

    entering_mc = bytearray(states[StepId(13, AesOp.SHIFT_ROWS)])
    entering_mc[0] ^= eps
    after_ark = xor_bytes(mix_columns(bytes(entering_mc)), KS.round_keys[13])
    pre_sub_diff = xor_bytes(after_ark, states[StepId(13, AesOp.ADD_ROUND_KEY)])
    expected_col = (gf_mul(2, eps), eps, eps, gf_mul(3, eps))
    assert tuple(pre_sub_diff[:4]) == expected_col
    assert not any(pre_sub_diff[4:])


def test_round_12_fault_diffuses_everywhere():
    rng = random.Random(5)
    full_diffusion = 0
    for _ in range(1000):
        key = bytes(rng.randrange(256) for _ in range(32))
        ks = expand_key(key)
        pt = bytes(rng.randrange(256) for _ in range(16))
        fault = FaultSpec(
            StepId(12, AesOp.MIX_COLUMNS),
            byte_mask(rng.randrange(16), rng.randrange(1, 256)),
        )
        diff = xor_bytes(encrypt_block(pt, ks), encrypt_with_faults(pt, ks, [fault]))
        if all(diff):
            full_diffusion += 1
    assert full_diffusion >= 990


@given(
    st.integers(0, 15), st.integers(1, 255), st.integers(0, 15), st.integers(1, 255),
    st.integers(1, 14),
)
@settings(max_examples=60)
def test_same_step_masks_xor(p1, v1, p2, v2, rnd):
    step = StepId(rnd, AesOp.SUB_BYTES)
    m1, m2 = byte_mask(p1, v1), byte_mask(p2, v2)
    combined = xor_bytes(m1, m2)
    double = encrypt_with_faults(PT, KS, [FaultSpec(step, m1), FaultSpec(step, m2)])
    if any(combined):
        single = encrypt_with_faults(PT, KS, [FaultSpec(step, combined)])
        assert double == single
    else:
        assert double == encrypt_block(PT, KS)


def test_mask_pushes_through_linear_steps():
    rng = random.Random(9)
    linear_ops = (AesOp.SHIFT_ROWS, AesOp.MIX_COLUMNS, AesOp.ADD_ROUND_KEY)
    checked = 0
    while checked < 100:
        rnd = rng.randrange(1, 14)
        op = rng.choice(linear_ops)
        step = StepId(rnd, op)
        mask = byte_mask(rng.randrange(16), rng.randrange(1, 256))
        nxt, moved = push_mask_forward(step, mask, KS.n_rounds)
        at_step = encrypt_with_faults(PT, KS, [FaultSpec(step, mask)])
        at_next = encrypt_with_faults(PT, KS, [FaultSpec(nxt, moved)])
        assert at_step == at_next
        checked += 1


def test_push_through_sub_bytes_rejected():
    with pytest.raises(ValueError, match="SubBytes"):
        push_mask_forward(StepId(5, AesOp.SUB_BYTES), byte_mask(0, 1), 14)


def test_decrypt_direction_consistency():
    # re-encrypting a faulted decrypt output equals the faulted encrypt output
    rng = random.Random(13)
    for _ in range(25):
        pt = bytes(rng.randrange(256) for _ in range(16))
        sid = StepId(rng.randrange(1, 14), AesOp.MIX_COLUMNS)
        fault = FaultSpec(sid, byte_mask(rng.randrange(16), rng.randrange(1, 256)))
        ct_clean = encrypt_block(pt, KS)
        faulty_pt = decrypt_with_faults(ct_clean, KS, [fault])
        assert encrypt_block(faulty_pt, KS) == encrypt_with_faults(pt, KS, [fault])


def test_static_role_is_metadata_only():
    step = StepId(12, AesOp.MIX_COLUMNS)
    mask = byte_mask(3, 0x80)
    as_static = encrypt_with_faults(PT, KS, [FaultSpec(step, mask, FaultRole.STATIC)])
    as_dynamic = encrypt_with_faults(PT, KS, [FaultSpec(step, mask, FaultRole.DYNAMIC)])
    assert as_static == as_dynamic
