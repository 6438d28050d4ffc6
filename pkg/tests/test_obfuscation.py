import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csipriv.channel_sim import record_seed
from csipriv.features import to_time_domain
from csipriv.obfuscation import apply, draw_sequence, obfuscate_dataset, sequence_from_taps
from oracles import circular_convolution, direct_dft


def test_unit_norm_default_length():
    seq = draw_sequence(16, 64, seed=1)
    assert seq.length == 16
    assert abs(np.linalg.norm(seq.time_taps) - 1) < 1e-9


def test_single_tap_is_flat():
    seq = sequence_from_taps([1.0], 64)
    assert np.allclose(np.abs(seq.transfer), np.abs(seq.transfer[0]), rtol=0, atol=1e-12)
    assert np.allclose(seq.transfer, 1.0)


def test_parseval_against_direct_dft():
    seq = draw_sequence(16, 64, seed=5)
    padded = np.zeros(64, dtype=complex)
    padded[:16] = seq.time_taps
    assert np.allclose(seq.transfer, direct_dft(padded), atol=1e-12)
    assert abs(np.sum(np.abs(seq.transfer) ** 2) - 64) < 1e-9


@pytest.mark.parametrize("l_v", [0, 65])
def test_rejects_bad_length(l_v):
    with pytest.raises(ValueError):
        draw_sequence(l_v, 64, seed=0)


def test_rejects_zero_taps():
    with pytest.raises(ValueError):
        sequence_from_taps(np.zeros(4), 64)


def test_apply_identity_and_zero(rng):
    h = rng.standard_normal((4, 2, 4, 64)) + 1j * rng.standard_normal((4, 2, 4, 64))
    ident = sequence_from_taps([1.0], 64)
    assert np.allclose(apply(ident, h), h)
    seq = draw_sequence(16, 64, seed=2)
    assert np.array_equal(apply(seq, np.zeros_like(h)), np.zeros_like(h))
    out = apply(seq, h)
    assert out.shape == h.shape
    # the same multiplier at every antenna
    ratio = out / h
    assert np.allclose(ratio, ratio[0, 0, 0], atol=1e-12)


def test_apply_length_mismatch():
    with pytest.raises(ValueError):
        apply(draw_sequence(4, 32, 0), np.ones((1, 1, 1, 64)))


def test_time_domain_is_circular_convolution(rng):
    seq = draw_sequence(8, 32, seed=3)
    h = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    padded = np.zeros(32, dtype=complex)
    padded[:8] = seq.time_taps
    # a product across subcarriers is a circular convolution of delay profiles
    lhs = np.fft.ifft(apply(seq, h))
    rhs = circular_convolution(padded, np.fft.ifft(h))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_flat_channel_time_domain_is_the_sequence():
    seq = draw_sequence(16, 64, seed=9)
    td = to_time_domain(apply(seq, np.ones(64)))
    # forward-transform mirror: tap k of the sequence sits at index -k
    mirrored = np.roll(td[::-1], 1)
    assert np.allclose(mirrored[:16], seq.time_taps, atol=1e-12)
    assert np.allclose(mirrored[16:], 0, atol=1e-12)


def test_obfuscate_dataset_matches_primitives(small_dataset):
    out = obfuscate_dataset(small_dataset, 16, seed=11)
    assert out.dims == small_dataset.dims
    assert np.array_equal(out.positions, small_dataset.positions)
    assert np.array_equal(out.timestamps, small_dataset.timestamps)
    for i in (0, 1, 7):
        ref = apply(draw_sequence(16, 64, record_seed(11, i)), small_dataset.csi[i])
        assert np.array_equal(out.csi[i], ref)
    r0 = out.csi[0] / small_dataset.csi[0]
    r1 = out.csi[1] / small_dataset.csi[1]
    assert not np.allclose(r0[0, 0, 0], r1[0, 0, 0])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_property_unit_norm_and_parseval(l_v, seed):
    seq = draw_sequence(l_v, 64, seed)
    assert abs(np.linalg.norm(seq.time_taps) - 1) < 1e-9
    assert abs(np.sum(np.abs(seq.transfer) ** 2) - 64) < 1e-9
