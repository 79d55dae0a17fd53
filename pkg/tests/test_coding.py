import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindem import CODE_57, CodeSpec, Interleaver, conv_encode, deinterleave, interleave
from blindem.coding import encoder_step
from blindem.messages import Message

from oracles import conv_encode_poly


def test_first_output_pair_for_single_one():
    out = conv_encode([1], CODE_57)
    assert out[0] == 1 and out[1] == 1


def test_zero_input_gives_zero_codeword():
    out = conv_encode(np.zeros(50, dtype=int), CODE_57)
    assert not out.any()


def test_codeword_length():
    rng = np.random.default_rng(0)
    out = conv_encode(rng.integers(0, 2, size=10000), CODE_57)
    assert out.size == 20004


def test_matches_polynomial_convolution_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = int(rng.integers(1, 64))
        info = rng.integers(0, 2, size=k)
        assert np.array_equal(conv_encode(info, CODE_57), conv_encode_poly(info, CODE_57))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=80))
def test_encoder_terminates_in_zero_state(info):
    state = 0
    padded = list(info) + [0] * CODE_57.termination_bits
    for b in padded:
        state, _ = encoder_step(state, b, CODE_57)
    assert state == 0


def test_codespec_validation():
    with pytest.raises(ValueError):
        CodeSpec(generators=(0o5, 0o7), constraint_length=4, termination_bits=3)
    with pytest.raises(ValueError):
        CodeSpec(generators=(0o5, 0o7), constraint_length=3, termination_bits=1)
    with pytest.raises(ValueError):
        CodeSpec(generators=(), constraint_length=1, termination_bits=0)


def test_conv_encode_requires_input():
    with pytest.raises(ValueError):
        conv_encode([], CODE_57)


def test_identity_interleaver_is_noop():
    il = Interleaver.identity(5)
    x = np.arange(5)
    assert np.array_equal(interleave(x, il), x)
    assert np.array_equal(deinterleave(x, il), x)


def test_small_permutation_convention():
    il = Interleaver(np.array([2, 0, 1]))
    out = interleave(np.array(["a", "b", "c"]), il)
    assert list(out) == ["c", "a", "b"]
    back = deinterleave(out, il)
    assert list(back) == ["a", "b", "c"]


def test_long_random_roundtrip():
    rng = np.random.default_rng(11)
    il = Interleaver.random(20004, rng)
    x = rng.normal(size=20004)
    assert np.array_equal(deinterleave(interleave(x, il), il), x)


def test_message_roundtrip():
    rng = np.random.default_rng(4)
    il = Interleaver.random(12, rng)
    msg = Message(rng.normal(size=(12, 2)), normalized=False)
    back = deinterleave(interleave(msg, il), il)
    assert np.array_equal(back.table, msg.table)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**32 - 1))
def test_roundtrip_property(length, seed):
    rng = np.random.default_rng(seed)
    il = Interleaver.random(length, rng)
    x = rng.normal(size=length)
    assert np.array_equal(deinterleave(interleave(x, il), il), x)


def test_length_mismatch_raises():
    il = Interleaver.identity(4)
    with pytest.raises(ValueError):
        interleave(np.arange(5), il)
    with pytest.raises(ValueError):
        deinterleave(np.arange(3), il)


def test_non_bijection_rejected():
    with pytest.raises(ValueError):
        Interleaver(np.array([0, 0, 1]))
