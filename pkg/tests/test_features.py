import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csipriv.features import (TapWindow, antenna_autocorrelation, default_window, extract_taps,
                              feature_length, featurize, featurize_dataset, power_profile,
                              to_frequency_domain, to_time_domain)
from oracles import direct_dft


def _random_csi(rng, dims=(4, 2, 4, 64)):
    return rng.standard_normal(dims) + 1j * rng.standard_normal(dims)


def test_window_validation_and_parse():
    w = TapWindow.parse("27:40")
    assert (w.tau_min, w.tau_max, w.n_tap) == (27, 40, 13)
    assert str(w) == "27:40"
    for lo, hi in [(5, 5), (-1, 3), (10, 2)]:
        with pytest.raises(ValueError):
            TapWindow(lo, hi)
    assert default_window(64) == TapWindow(27, 40)
    w32 = default_window(32)
    assert 0 <= w32.tau_min < w32.tau_max <= 32


def test_flat_channel_single_tap():
    td = to_time_domain(np.ones(64))
    assert td[0] == pytest.approx(1.0)
    assert np.allclose(td[1:], 0)


def test_time_domain_matches_direct_dft_and_parseval(rng):
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    td = to_time_domain(x)
    assert np.allclose(td, direct_dft(x) / 64, atol=1e-12)
    assert abs(np.sum(np.abs(td) ** 2) - np.sum(np.abs(x) ** 2) / 64) < 1e-9 * np.sum(np.abs(x) ** 2)


def test_round_trip(rng):
    h = _random_csi(rng)
    assert np.abs(to_frequency_domain(to_time_domain(h)) - h).max() < 1e-9


def test_extract_taps(rng):
    td = to_time_domain(_random_csi(rng))
    taps = extract_taps(td, TapWindow(27, 40))
    assert taps.shape == (4, 2, 4, 13)
    assert np.array_equal(extract_taps(td, TapWindow(0, 64)), td)
    assert np.sum(np.abs(taps) ** 2) <= np.sum(np.abs(td) ** 2)
    with pytest.raises(ValueError):
        extract_taps(td, TapWindow(60, 70))


def test_autocorrelation_structure(rng):
    ones = np.ones((1, 2, 4, 3), dtype=complex)
    assert np.allclose(antenna_autocorrelation(ones), 1.0)
    taps = extract_taps(to_time_domain(_random_csi(rng)), TapWindow(27, 40))
    f = antenna_autocorrelation(taps)
    assert f.shape == (4, 13, 8, 8)
    snap = taps.reshape(4, 8, 13)
    for b in range(4):
        for t in (0, 6, 12):
            m = f[b, t]
            assert np.allclose(m, m.conj().T)
            vals = np.linalg.eigvalsh(m)
            assert vals.min() > -1e-12 * vals.max()
            assert np.linalg.matrix_rank(m, tol=1e-9 * np.abs(m).max()) <= 1
            assert np.allclose(np.diag(m).real, np.abs(snap[b, :, t]) ** 2)


def test_feature_length_and_layout(rng):
    h = _random_csi(rng)
    f = featurize(h, TapWindow(27, 40))
    assert f.shape == (6656,) == (feature_length((4, 2, 4, 64), TapWindow(27, 40)),)
    corr = antenna_autocorrelation(extract_taps(to_time_domain(h), TapWindow(27, 40)))
    # real block then imaginary block; b, t, row-major entries
    assert f[0] == corr[0, 0, 0, 0].real
    assert f[1] == corr[0, 0, 0, 1].real
    assert f[64] == corr[0, 1, 0, 0].real
    assert f[13 * 64] == corr[1, 0, 0, 0].real
    assert f[3328 + 1] == corr[0, 0, 0, 1].imag


def test_zero_csi_zero_features():
    assert np.array_equal(featurize(np.zeros((4, 2, 4, 64))), np.zeros(6656))


def test_antenna_permutation_permutes_matrices(rng):
    h = _random_csi(rng)
    perm = np.array([3, 1, 0, 2])
    hp = h[:, :, perm]
    w = TapWindow(27, 40)
    f = antenna_autocorrelation(extract_taps(to_time_domain(h), w))
    fp = antenna_autocorrelation(extract_taps(to_time_domain(hp), w))
    # vectorized index of (row, col) is row * 4 + col
    idx = np.array([r * 4 + c for r in range(2) for c in perm])
    assert np.allclose(fp, f[..., idx[:, None], idx[None, :]])


def test_batch_and_dataset_agree(small_dataset):
    w = TapWindow(27, 40)
    batch = featurize_dataset(small_dataset, w, chunk=7)
    assert batch.shape == (len(small_dataset), 6656)
    assert np.allclose(batch[3], featurize(small_dataset.csi[3], w))


def test_power_profile_is_diagonal(rng):
    h = _random_csi(rng)
    w = TapWindow(27, 40)
    taps = extract_taps(to_time_domain(h), w).reshape(4, 8, 13)
    p = power_profile(featurize(h, w), 8)
    assert np.allclose(p, (np.abs(np.moveaxis(taps, 1, 2)) ** 2).reshape(-1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(4, 32),
       st.floats(0, 2 * np.pi), st.integers(0, 1000))
def test_property_length_and_phase_invariance(b, r, c, n, theta, seed):
    rng = np.random.default_rng(seed)
    h = _random_csi(rng, (b, r, c, n))
    w = TapWindow(0, n // 2)
    f = featurize(h, w)
    assert len(f) == feature_length((b, r, c, n), w) == 2 * b * (r * c) ** 2 * (n // 2)
    assert np.abs(featurize(np.exp(1j * theta) * h, w) - f).max() < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 64), st.integers(0, 1000))
def test_property_parseval(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    e = np.sum(np.abs(x) ** 2)
    assert abs(n * np.sum(np.abs(to_time_domain(x)) ** 2) - e) < 1e-9 * e
